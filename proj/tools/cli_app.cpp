#include "cli_app.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>

#include "kneadlab/construct.hpp"
#include "kneadlab/errors.hpp"
#include "kneadlab/families.hpp"
#include "kneadlab/orbits.hpp"
#include "kneadlab/parallel.hpp"
#include "kneadlab/paramsearch.hpp"
#include "kneadlab/state_io.hpp"
#include "kneadlab/verify.hpp"

namespace kneadlab::cli {

namespace {

struct Options {
  std::string family = "cubic";
  std::string gamma = "0";
  std::string x = "0.5";
  std::size_t depth = 20;
  std::optional<long> precision;
  std::string window;
  std::string target;
  std::string mode = "single";
  std::string schedule = "AB";
  std::string state;
  std::string out;
  int samples = -1;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  std::string delta = "0.001";
  std::string policy = "itinerary";
  std::string branches = "1";
  std::optional<double> lambda1, lambda2, eta;
};

mpfr_prec_t precision_of(const Options& o) {
  if (o.precision) {
    if (*o.precision < 64) throw InvalidArgument("--precision must be at least 64");
    return static_cast<mpfr_prec_t>(*o.precision);
  }
  return PrecisionContext::from_env(256).bits;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + path);
  f << text;
}

// Compact pattern of a finite prefix: head followed by a lap symbol repeated
// over at least the second half. Only a reading aid, never certified.
std::string pattern_of(const Word& w) {
  if (w.empty() || !is_lap(w.back())) return to_text(w);
  std::size_t h = w.size();
  while (h > 0 && w[h - 1] == w.back()) --h;
  if (w.size() - h < std::max<std::size_t>(2, (w.size() + 1) / 2)) return to_text(w) + "...";
  return to_text(Word(w.begin(), w.begin() + static_cast<long>(h))) + symbol_char(w.back()) + "^inf";
}

ParamInterval window_of(const Options& o, Family f, mpfr_prec_t bits) {
  if (o.window.empty()) return full_window(f, PrecisionContext(bits));
  const auto sep = o.window.find_first_of(",:");
  if (sep == std::string::npos) throw InvalidArgument("--window expects lo,hi");
  ParamInterval iv;
  iv.family = f;
  iv.bits = bits;
  iv.lo = BigReal::parse(o.window.substr(0, sep), bits);
  iv.hi = BigReal::parse(o.window.substr(sep + 1), bits);
  if (!iv.lo.is_exact() || !iv.hi.is_exact()) {
    // bracket ends are used as exact points
    iv.lo = BigReal::exact(iv.lo.value());
    iv.hi = BigReal::exact(iv.hi.value());
  }
  if (!certainly_less(iv.lo, iv.hi)) throw InvalidArgument("--window needs lo < hi");
  return iv;
}

int cmd_itinerary(const Options& o, std::ostream& out) {
  const mpfr_prec_t bits = precision_of(o);
  BimodalMap m = make_map(parse_family(o.family), BigReal::parse(o.gamma, bits), PrecisionContext(bits));
  out << to_text(itinerary(m, BigReal::parse(o.x, bits), o.depth)) << "\n";
  return kExitOk;
}

int cmd_kneading(const Options& o, std::ostream& out) {
  const mpfr_prec_t bits = precision_of(o);
  Word k = kneading_at(parse_family(o.family), BigReal::parse(o.gamma, bits), o.depth, PrecisionContext(bits));
  out << "prefix " << to_text(k) << "\n";
  out << "pattern " << pattern_of(k) << "\n";
  return kExitOk;
}

int cmd_realize_point(const Options& o, std::ostream& out) {
  if (o.target.empty()) throw InvalidArgument("--target is required");
  const mpfr_prec_t bits = precision_of(o);
  BimodalMap m = make_map(parse_family(o.family), BigReal::parse(o.gamma, bits), PrecisionContext(bits));
  const ItinerarySeq iota = ItinerarySeq::parse(o.target);
  BigReal x = realize_point(m, iota);
  out << "x " << x.decimal() << "\n";
  out << "err " << x.err_decimal() << "\n";
  const bool ok = realizes(m, x, iota);
  out << "forward check " << (ok ? "pass" : "fail") << "\n";
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_realize_param(const Options& o, std::ostream& out) {
  if (o.target.empty()) throw InvalidArgument("--target is required");
  const mpfr_prec_t bits = precision_of(o);
  const Family f = parse_family(o.family);
  const ItinerarySeq target = ItinerarySeq::parse(o.target);
  FindOptions fo;
  fo.bits = bits;
  FoundParam fp = find_param_bracket(f, target, window_of(o, f, bits), fo);
  out << "gamma " << fp.gamma.decimal() << "\n";
  out << "err " << fp.gamma.err_decimal() << "\n";
  out << "lo " << dyadic_decimal(fp.lo.get()) << "\n";
  out << "hi " << dyadic_decimal(fp.hi.get()) << "\n";
  out << "bits " << fp.bits << "\n";
  return kExitOk;
}

int cmd_construct(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.state.empty()) throw InvalidArgument("--state is required");
  ConstructConfig cfg;
  cfg.mode = parse_mode(o.mode);
  cfg.bits = precision_of(o);
  cfg.rates = default_rates(cfg.mode, cfg.bits);
  if (o.lambda1) cfg.rates.lambda1 = *o.lambda1;
  if (o.lambda2) cfg.rates.lambda2 = *o.lambda2;
  if (o.eta) cfg.rates.eta = *o.eta;
  validate_rates(cfg.mode, cfg.rates);
  if (o.samples >= 0) cfg.samples = o.samples;
  cfg.progress = [&err](const std::string& msg) { err << msg << "\n"; };
  for (char c : o.schedule)
    if (c != 'A' && c != 'B') throw InvalidArgument("--schedule may only contain A and B");

  std::optional<ConstructionState> last;
  auto persist = [&](const ConstructionState& s) {
    save_state(o.state, s);
    last = s;
  };
  try {
    ConstructionState s = run(o.schedule, cfg, persist);
    for (std::size_t n = 0; n < s.t.size(); ++n) out << "t_" << n + 1 << " = " << s.t[n] << "\n";
    for (const auto& m : s.p_marks) out << "p_" << m.n << " = " << m.p << " (" << m.type << ")\n";
    for (const auto& iv : s.intervals)
      out << family_name(iv.family) << " [" << iv.lo.decimal().substr(0, 40) << ", " << iv.hi.decimal().substr(0, 40)
          << "] log2 width " << log_abs(iv.width()) / std::log(2.0) << "\n";
    if (!o.out.empty()) write_file(o.out, intervals_csv(s));
    out << "state written to " << o.state << "\n";
    return kExitOk;
  } catch (const StepFailed& e) {
    err << "step failed (" << e.reason() << "): " << e.what() << "\n";
  } catch (const BootstrapFailed& e) {
    err << "bootstrap failed: " << e.what() << "\n";
  }
  if (last) err << "state after stage " << last->stage() << " kept in " << o.state << "\n";
  return kExitCheckFailed;
}

int cmd_verify(const Options& o, std::ostream& out) {
  if (o.state.empty()) throw InvalidArgument("--state is required");
  ConstructionState s = load_state(o.state);
  const auto reports = verify_state(s, o.samples >= 0 ? o.samples : 11);
  out << report_table(reports);
  if (!o.out.empty()) write_file(o.out, report_json(reports));
  bool ok = true;
  for (const auto& r : reports) ok = ok && r.passed();
  return ok ? kExitOk : kExitCheckFailed;
}

int cmd_pullback(const Options& o, std::ostream& out, std::ostream& err) {
  const mpfr_prec_t bits = precision_of(o);
  BimodalMap m = make_map(parse_family(o.family), BigReal::parse(o.gamma, bits), PrecisionContext(bits));
  PullbackOptions po;
  po.policy = parse_branch_policy(o.policy);
  po.seed = o.seed;
  po.itinerary = word_from_text(o.branches);
  PullbackResult r = pullback_shrink(m, BigReal::parse(o.x, bits), BigReal::parse(o.delta, bits), o.depth, po);
  const std::string csv = pullback_csv(r);
  if (o.out.empty()) {
    out << csv;
    err << "rho " << r.rho << " (endpoint " << r.rho_endpoint << ")\n";
  } else {
    write_file(o.out, csv);
    out << "rho " << r.rho << "\n";
    out << "rho_endpoint " << r.rho_endpoint << "\n";
  }
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"kneading sequences and constructions for bimodal interval maps", "kneadlab"};
  app.require_subcommand(1);
  Options o;

  auto map_flags = [&](CLI::App* c) {
    c->add_option("--family", o.family, "cubic or deg7")->capture_default_str();
    c->add_option("--gamma", o.gamma, "parameter (decimal or p/q)")->capture_default_str();
  };
  auto common = [&](CLI::App* c) {
    c->add_option("--precision", o.precision, "working bits (default 256 or KNEADLAB_PRECISION)");
    c->add_option("--jobs", o.jobs, "worker threads, 0 = all cores");
  };

  auto* itin = app.add_subcommand("itinerary", "itinerary of a point");
  map_flags(itin);
  itin->add_option("--x", o.x, "point")->capture_default_str();
  itin->add_option("--depth", o.depth, "number of symbols")->capture_default_str();
  common(itin);

  auto* kne = app.add_subcommand("kneading", "second kneading sequence");
  map_flags(kne);
  kne->add_option("--depth", o.depth, "number of symbols")->capture_default_str();
  common(kne);

  auto* rpt = app.add_subcommand("realize-point", "point with a prescribed finite itinerary");
  map_flags(rpt);
  rpt->add_option("--target", o.target, "sequence ending in A (c1) or B (c2)")->required();
  common(rpt);

  auto* rpa = app.add_subcommand("realize-param", "parameter with a prescribed finite kneading sequence");
  rpa->add_option("--family", o.family, "cubic or deg7")->capture_default_str();
  rpa->add_option("--target", o.target, "minimal sequence ending in A or B")->required();
  rpa->add_option("--window", o.window, "lo,hi (default: whole range)");
  common(rpa);

  auto* con = app.add_subcommand("construct", "bootstrap and the step schedule");
  con->add_option("--mode", o.mode, "single or dual")->capture_default_str();
  con->add_option("--schedule", o.schedule, "steps, e.g. ABAB")->capture_default_str();
  con->add_option("--state", o.state, "state file written after every step")->required();
  con->add_option("--out", o.out, "CSV of the interval history");
  con->add_option("--samples", o.samples, "interior sample parameters per check");
  con->add_option("--seed", o.seed, "accepted for uniformity; the construction draws no random numbers");
  con->add_option("--lambda1", o.lambda1, "A-step lower rate");
  con->add_option("--lambda2", o.lambda2, "A-step upper rate");
  con->add_option("--eta", o.eta, "dual exponent ratio");
  common(con);

  auto* ver = app.add_subcommand("verify", "check a saved construction");
  ver->add_option("--state", o.state, "state file")->required();
  ver->add_option("--out", o.out, "report JSON");
  ver->add_option("--samples", o.samples, "interior sample parameters (default 11)");
  common(ver);

  auto* pul = app.add_subcommand("pullback", "diameters of pulled back intervals, CSV n,diam_n");
  map_flags(pul);
  pul->add_option("--x", o.x, "centre point")->capture_default_str();
  pul->add_option("--delta", o.delta, "half width")->capture_default_str();
  pul->add_option("--depth", o.depth, "orbit length")->capture_default_str();
  pul->add_option("--policy", o.policy, "leftmost, random, itinerary or exhaustive")->capture_default_str();
  pul->add_option("--branches", o.branches, "lap word for the itinerary policy, cycled")->capture_default_str();
  pul->add_option("--seed", o.seed, "seed of the random policy")->capture_default_str();
  pul->add_option("--out", o.out, "CSV path (default stdout)");
  common(pul);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (o.jobs > 0) set_max_jobs(o.jobs);
    if (itin->parsed()) return cmd_itinerary(o, out);
    if (kne->parsed()) return cmd_kneading(o, out);
    if (rpt->parsed()) return cmd_realize_point(o, out);
    if (rpa->parsed()) return cmd_realize_param(o, out);
    if (con->parsed()) return cmd_construct(o, out, err);
    if (ver->parsed()) return cmd_verify(o, out);
    if (pul->parsed()) return cmd_pullback(o, out, err);
  } catch (const InvalidArgument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidSequence& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParamOutOfRange& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SchemaVersionMismatch& e) {
    err << "state error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "state error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace kneadlab::cli
