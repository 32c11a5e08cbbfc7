#include "kneadlab/state_io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "kneadlab/errors.hpp"

namespace kneadlab {

using nlohmann::json;

std::string double_text(double d) {
  if (std::isnan(d)) return "nan";
  if (std::isinf(d)) return d > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, d);
  return std::string(buf, r.ptr);
}

double double_from_text(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double d = 0;
  auto r = std::from_chars(s.data(), s.data() + s.size(), d);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw ParseError("bad number '" + std::string(s) + "'");
  return d;
}

namespace {

json big_json(const BigReal& x) { return json{{"v", x.decimal()}, {"e", x.err_decimal()}}; }

// Exact endpoints are written as bare decimals.
json endpoint_json(const BigReal& x) { return x.is_exact() ? json(x.decimal()) : big_json(x); }

BigReal parse_big(const json& j, mpfr_prec_t prec) {
  if (j.is_string()) return BigReal::parse(j.get<std::string>(), prec);
  BigReal v = BigReal::parse(j.at("v").get<std::string>(), prec);
  BigReal e = BigReal::parse(j.at("e").get<std::string>(), kErrPrec);
  return v.widened(e.value());
}

json rates_json(const Rates& r) {
  return json{{"lambda", double_text(r.lambda)},
              {"lambda_prime", double_text(r.lambda_prime)},
              {"lambda1", double_text(r.lambda1)},
              {"lambda2", double_text(r.lambda2)},
              {"lambda_tilde", double_text(r.lambda_tilde)},
              {"lambda_tilde_prime", double_text(r.lambda_tilde_prime)},
              {"theta1", double_text(r.theta1)},
              {"theta2", double_text(r.theta2)},
              {"eta", double_text(r.eta)}};
}

double num(const json& j, const char* key) { return double_from_text(j.at(key).get<std::string>()); }

Rates parse_rates(const json& j) {
  Rates r;
  r.lambda = num(j, "lambda");
  r.lambda_prime = num(j, "lambda_prime");
  r.lambda1 = num(j, "lambda1");
  r.lambda2 = num(j, "lambda2");
  r.lambda_tilde = num(j, "lambda_tilde");
  r.lambda_tilde_prime = num(j, "lambda_tilde_prime");
  r.theta1 = num(j, "theta1");
  r.theta2 = num(j, "theta2");
  r.eta = num(j, "eta");
  return r;
}

json interval_json(const ParamInterval& iv) {
  return json{{"family", family_name(iv.family)},
              {"lo", endpoint_json(iv.lo)},
              {"hi", endpoint_json(iv.hi)},
              {"bits", iv.bits},
              {"samples", iv.samples},
              {"prefix", to_text(iv.certified_prefix)}};
}

ParamInterval parse_interval(const json& j) {
  ParamInterval iv;
  iv.family = parse_family(j.at("family").get<std::string>());
  iv.bits = j.at("bits").get<mpfr_prec_t>();
  iv.samples = j.at("samples").get<int>();
  iv.lo = parse_big(j.at("lo"), iv.bits);
  iv.hi = parse_big(j.at("hi"), iv.bits);
  iv.certified_prefix = word_from_text(j.at("prefix").get<std::string>());
  return iv;
}

json intervals_json(const std::vector<ParamInterval>& v) {
  json a = json::array();
  for (const auto& iv : v) a.push_back(interval_json(iv));
  return a;
}

std::vector<ParamInterval> parse_intervals(const json& j) {
  std::vector<ParamInterval> out;
  for (const auto& e : j) out.push_back(parse_interval(e));
  return out;
}

json check_json(const CheckRecord& c) {
  return json{{"name", c.name},         {"pass", c.pass},
              {"family", c.family},     {"index", c.index},
              {"sample", c.sample},     {"lhs", double_text(c.lhs)},
              {"rhs", double_text(c.rhs)}, {"relation", c.relation}};
}

CheckRecord parse_check(const json& j) {
  CheckRecord c;
  c.name = j.at("name").get<std::string>();
  c.pass = j.at("pass").get<bool>();
  c.family = j.at("family").get<std::string>();
  c.index = j.at("index").get<std::size_t>();
  c.sample = j.at("sample").get<int>();
  c.lhs = num(j, "lhs");
  c.rhs = num(j, "rhs");
  c.relation = j.at("relation").get<std::string>();
  return c;
}

json step_json(const StepLog& s) {
  json checks = json::array(), brackets = json::array();
  for (const auto& c : s.checks) checks.push_back(check_json(c));
  for (const auto& b : s.brackets)
    brackets.push_back(json{{"family", b.family}, {"label", b.label}, {"gamma", big_json(b.gamma)}});
  return json{{"type", s.type}, {"n", s.n},   {"k0", s.k0},         {"k1", s.k1},
              {"k2", s.k2},     {"k3", s.k3}, {"p", s.p},           {"t", s.t},
              {"delta", s.delta}, {"attempts", s.attempts}, {"checks", checks},
              {"brackets", brackets}};
}

StepLog parse_step(const json& j, mpfr_prec_t bits) {
  StepLog s;
  s.type = j.at("type").get<std::string>();
  s.n = j.at("n").get<std::size_t>();
  s.k0 = j.at("k0").get<std::size_t>();
  s.k1 = j.at("k1").get<std::size_t>();
  s.k2 = j.at("k2").get<std::size_t>();
  s.k3 = j.at("k3").get<std::size_t>();
  s.p = j.at("p").get<std::size_t>();
  s.t = j.at("t").get<std::size_t>();
  s.delta = j.at("delta").get<std::string>();
  s.attempts = j.at("attempts").get<int>();
  for (const auto& c : j.at("checks")) s.checks.push_back(parse_check(c));
  for (const auto& b : j.at("brackets"))
    s.brackets.push_back({b.at("family").get<std::string>(), b.at("label").get<std::string>(),
                          parse_big(b.at("gamma"), bits)});
  return s;
}

}  // namespace

std::string dump_state(const ConstructionState& s) {
  json j;
  j["version"] = kStateVersion;
  j["mode"] = mode_name(s.mode);
  j["precision_bits"] = s.precision_bits;
  j["samples"] = s.samples;
  j["rates"] = rates_json(s.rates);
  j["prefix"] = to_text(s.prefix);
  j["t"] = s.t;
  json marks = json::array();
  for (const auto& m : s.p_marks) marks.push_back(json{{"n", m.n}, {"p", m.p}, {"type", std::string(1, m.type)}});
  j["p_marks"] = marks;
  j["intervals"] = intervals_json(s.intervals);
  json hist = json::array();
  for (const auto& h : s.history) hist.push_back(intervals_json(h));
  j["history"] = hist;
  json steps = json::array();
  for (const auto& st : s.step_log) steps.push_back(step_json(st));
  j["step_log"] = steps;
  return j.dump(1) + "\n";
}

ConstructionState parse_state(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("state is not valid JSON: ") + e.what());
  }
  try {
    const int version = j.at("version").get<int>();
    if (version != kStateVersion)
      throw SchemaVersionMismatch("state version " + std::to_string(version) + ", expected " +
                                  std::to_string(kStateVersion));
    ConstructionState s;
    s.mode = parse_mode(j.at("mode").get<std::string>());
    s.precision_bits = j.at("precision_bits").get<mpfr_prec_t>();
    s.samples = j.value("samples", 9);
    s.rates = parse_rates(j.at("rates"));
    s.prefix = word_from_text(j.at("prefix").get<std::string>());
    s.t = j.at("t").get<std::vector<std::size_t>>();
    for (const auto& m : j.at("p_marks")) {
      const auto type = m.at("type").get<std::string>();
      if (type != "A" && type != "B") throw ParseError("p mark type must be A or B");
      s.p_marks.push_back({m.at("n").get<std::size_t>(), m.at("p").get<std::size_t>(), type[0]});
    }
    s.intervals = parse_intervals(j.at("intervals"));
    if (j.contains("history"))
      for (const auto& h : j.at("history")) s.history.push_back(parse_intervals(h));
    if (j.contains("step_log"))
      for (const auto& st : j.at("step_log")) s.step_log.push_back(parse_step(st, s.precision_bits));
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed state: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ParseError(std::string("malformed state: ") + e.what());
  } catch (const InvalidSequence& e) {
    throw ParseError(std::string("malformed state: ") + e.what());
  }
}

void save_state(const std::string& path, const ConstructionState& s) {
  const std::string text = dump_state(s);
  // write then rename so an interrupted run never leaves a torn file
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << text;
    if (!out) throw Error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

ConstructionState load_state(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_state(ss.str());
}

std::string intervals_csv(const ConstructionState& s) {
  std::ostringstream out;
  out << "stage,family,lo,hi,log2_width\n";
  for (std::size_t k = 0; k < s.history.size(); ++k)
    for (const auto& iv : s.history[k])
      out << k + 1 << ',' << family_name(iv.family) << ',' << iv.lo.decimal() << ',' << iv.hi.decimal() << ','
          << double_text(log_abs(iv.width()) / std::log(2.0)) << '\n';
  return out.str();
}

}  // namespace kneadlab
