#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "kneadlab/construct.hpp"
#include "kneadlab/errors.hpp"
#include "kneadlab/orbits.hpp"
#include "kneadlab/paramsearch.hpp"
#include "kneadlab/state_io.hpp"
#include "kneadlab/verify.hpp"

namespace py = pybind11;
using namespace kneadlab;

namespace {

// Enclosures cross the boundary as (value, err) decimal strings.
py::tuple enclosure(const BigReal& x) { return py::make_tuple(x.decimal(), x.err_decimal()); }

class Map {
 public:
  Map(const std::string& family, const std::string& gamma, long precision)
      : m_(make_map(parse_family(family), BigReal::parse(gamma, precision), PrecisionContext(precision))) {}

  std::string family() const { return family_name(m_.family()); }
  long precision() const { return m_.prec(); }
  py::tuple c1() const { return enclosure(m_.c1()); }
  py::tuple c2() const { return enclosure(m_.c2()); }
  py::tuple eval(const std::string& x) const { return enclosure(m_.eval(point(x))); }
  py::tuple deriv(const std::string& x, int order) const { return enclosure(m_.deriv(point(x), order)); }
  std::string itinerary_of(const std::string& x, std::size_t depth) const {
    return to_text(itinerary(m_, point(x), depth));
  }
  std::string kneading(std::size_t depth) const { return to_text(kneading2(m_, depth)); }
  py::tuple realize(const std::string& target) const {
    return enclosure(realize_point(m_, ItinerarySeq::parse(target)));
  }
  py::dict pullback(const std::string& x, const std::string& delta, std::size_t depth, const std::string& policy,
                    std::uint64_t seed, const std::string& branches) const {
    PullbackOptions opt;
    opt.policy = parse_branch_policy(policy);
    opt.seed = seed;
    opt.itinerary = word_from_text(branches);
    const PullbackResult r = pullback_shrink(m_, point(x), BigReal::parse(delta, m_.prec()), depth, opt);
    std::vector<double> diam;
    for (const auto& d : r.diam) diam.push_back(d.to_double());
    py::dict out;
    out["diam"] = diam;
    out["branches"] = to_text(r.branches);
    out["rho"] = r.rho;
    out["rho_endpoint"] = r.rho_endpoint;
    return out;
  }

 private:
  BigReal point(const std::string& x) const { return BigReal::parse(x, m_.prec()); }
  BimodalMap m_;
};

FindOptions at_bits(mpfr_prec_t bits) {
  FindOptions o;
  o.bits = bits;
  return o;
}

py::dict find_parameter(const std::string& family, const std::string& target, long precision) {
  const Family f = parse_family(family);
  const FoundParam p = find_param_bracket(f, ItinerarySeq::parse(target), full_window(f, PrecisionContext(precision)),
                                          at_bits(precision));
  py::dict out;
  out["gamma"] = enclosure(p.gamma);
  out["lo"] = dyadic_decimal(p.lo.get());
  out["hi"] = dyadic_decimal(p.hi.get());
  out["bits"] = p.bits;
  return out;
}

std::string construct_state(const std::string& mode, const std::string& schedule, long precision, int samples) {
  ConstructConfig cfg;
  cfg.mode = parse_mode(mode);
  cfg.bits = precision;
  cfg.rates = default_rates(cfg.mode, precision);
  cfg.samples = samples;
  py::gil_scoped_release release;
  return dump_state(run(schedule, cfg));
}

std::string verify(const std::string& state_json, int samples) {
  const ConstructionState s = parse_state(state_json);
  py::gil_scoped_release release;
  return report_json(verify_state(s, samples));
}

}  // namespace

PYBIND11_MODULE(_kneadlab, m) {
  m.doc() = "Certified kneading computations for two bimodal families";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", base.ptr());
  py::register_exception<InvalidSequence>(m, "InvalidSequence", base.ptr());
  py::register_exception<ParamOutOfRange>(m, "ParamOutOfRange", base.ptr());
  py::register_exception<AmbiguousSymbol>(m, "AmbiguousSymbol", base.ptr());
  py::register_exception<NotAdmissible>(m, "NotAdmissible", base.ptr());
  py::register_exception<BranchDead>(m, "BranchDead", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());
  py::register_exception<SchemaVersionMismatch>(m, "SchemaVersionMismatch", base.ptr());

  py::class_<Map>(m, "Map")
      .def(py::init<const std::string&, const std::string&, long>(), py::arg("family"), py::arg("gamma") = "0",
           py::arg("precision") = 256)
      .def_property_readonly("family", &Map::family)
      .def_property_readonly("precision", &Map::precision)
      .def_property_readonly("c1", &Map::c1)
      .def_property_readonly("c2", &Map::c2)
      .def("eval", &Map::eval, py::arg("x"))
      .def("deriv", &Map::deriv, py::arg("x"), py::arg("order") = 1)
      .def("itinerary", &Map::itinerary_of, py::arg("x"), py::arg("depth"))
      .def("kneading", &Map::kneading, py::arg("depth"))
      .def("realize_point", &Map::realize, py::arg("target"))
      .def("pullback", &Map::pullback, py::arg("x"), py::arg("delta") = "0.001", py::arg("depth") = 50,
           py::arg("policy") = "itinerary", py::arg("seed") = 0, py::arg("branches") = "1");

  m.def("find_param", &find_parameter, py::arg("family"), py::arg("target"), py::arg("precision") = 256);
  m.def("construct", &construct_state, py::arg("mode") = "single", py::arg("schedule") = "AB",
        py::arg("precision") = 256, py::arg("samples") = 9);
  m.def("verify", &verify, py::arg("state_json"), py::arg("samples") = 11);
  m.attr("STATE_VERSION") = kStateVersion;
}
