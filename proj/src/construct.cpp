#include "kneadlab/construct.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "kneadlab/errors.hpp"
#include "kneadlab/fastmap.hpp"
#include "kneadlab/orbits.hpp"
#include "kneadlab/parallel.hpp"

namespace kneadlab {

const char* mode_name(Mode m) { return m == Mode::SingleFamily ? "single" : "dual"; }

Mode parse_mode(const std::string& s) {
  if (s == "single") return Mode::SingleFamily;
  if (s == "dual") return Mode::DualFamily;
  throw InvalidArgument("unknown mode '" + s + "' (expected single or dual)");
}

std::vector<Family> mode_families(Mode m) {
  if (m == Mode::SingleFamily) return {Family::Cubic};
  return {Family::Cubic, Family::Degree7};
}

std::size_t ConstructionState::b_steps() const {
  return static_cast<std::size_t>(
      std::count_if(p_marks.begin(), p_marks.end(), [](const PMark& m) { return m.type == 'B'; }));
}

namespace {

constexpr double kLn2 = 0.69314718055994530942;

struct LapRates {
  double r, zero, one;  // |g'(r)|, |g'(0)|, |g'(1)|
};

LapRates lap_rates(Family f, const Real& gamma, mpfr_prec_t bits) {
  BigReal g = BigReal::exact(gamma).at_prec(bits);
  BimodalMap m = make_map(f, g, PrecisionContext(bits));
  return {lap_multiplier(m, 2).to_double(), lap_multiplier(m, 1).to_double(), lap_multiplier(m, 3).to_double()};
}

std::size_t odd_at_least(std::size_t k) { return k % 2 ? k : k + 1; }
std::size_t even_at_least(std::size_t k) { return k % 2 ? k + 1 : k; }

// Orbit data at the sample parameters of an interval.
struct Samples {
  std::vector<Real> gamma;
  std::vector<OrbitProfile> prof;
  std::size_t size() const { return prof.size(); }
};

Samples sample_profiles(const ParamInterval& iv, int samples, std::size_t depth,
                        const std::vector<std::size_t>& keep, mpfr_prec_t& bits) {
  const std::size_t n = static_cast<std::size_t>(std::max(samples, 0)) + 1;
  Samples s;
  s.gamma.resize(n + 1);
  s.prof.resize(n + 1);
  std::vector<mpfr_prec_t> used(n + 1, bits);
  const mpfr_prec_t start = std::max(bits, iv.bits);
  parallel_for(n + 1, [&](std::size_t i) {
    s.gamma[i] = iv.point(i, n);
    mpfr_prec_t b = start;
    s.prof[i] = profile_at(iv.family, s.gamma[i], depth + 1, depth, b, keep);
    used[i] = b;
  });
  bits = *std::max_element(used.begin(), used.end());
  return s;
}

// Worst instance of a family of inequalities lhs > rhs (or lhs < rhs).
class Worst {
 public:
  Worst(std::string name, std::string family, bool greater) : greater_(greater) {
    rec_.name = std::move(name);
    rec_.family = std::move(family);
    rec_.relation = greater ? ">" : "<";
  }
  void add(double lhs, double rhs, std::size_t index, int sample) {
    double m = greater_ ? lhs - rhs : rhs - lhs;
    if (std::isnan(m)) m = -std::numeric_limits<double>::infinity();
    if (m < margin_) {
      margin_ = m;
      rec_.lhs = lhs;
      rec_.rhs = rhs;
      rec_.index = index;
      rec_.sample = sample;
    }
  }
  CheckRecord done() {
    rec_.pass = margin_ > 0;
    return rec_;
  }

 private:
  bool greater_;
  double margin_ = std::numeric_limits<double>::infinity();
  CheckRecord rec_;
};

double dlo(const OrbitProfile& p, std::size_t n) { return p.log_d_lo[n]; }
double dhi(const OrbitProfile& p, std::size_t n) { return p.log_d_hi[n]; }

// d_{n0,l} > lambda^l for l = 1..lmax at every sample
CheckRecord growth_from(const Samples& s, const std::string& name, const std::string& fam, std::size_t n0,
                        std::size_t lmax, double lambda) {
  Worst w(name, fam, true);
  const double ll = std::log(lambda);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t l = 1; l <= lmax; ++l)
      w.add(dlo(s.prof[i], n0 + l) - dhi(s.prof[i], n0), static_cast<double>(l) * ll, l, static_cast<int>(i));
  return w.done();
}

// d_{n0,l} > lambda^l for the single length l
CheckRecord growth_once(const Samples& s, const std::string& name, const std::string& fam, std::size_t n0,
                        std::size_t l, double lambda) {
  Worst w(name, fam, true);
  for (std::size_t i = 0; i < s.size(); ++i)
    w.add(dlo(s.prof[i], n0 + l) - dhi(s.prof[i], n0), static_cast<double>(l) * std::log(lambda), l,
          static_cast<int>(i));
  return w.done();
}

CheckRecord d_upper(const Samples& s, const std::string& name, const std::string& fam, std::size_t p, double lambda) {
  Worst w(name, fam, false);
  for (std::size_t i = 0; i < s.size(); ++i)
    w.add(dhi(s.prof[i], p), static_cast<double>(p) * std::log(lambda), p, static_cast<int>(i));
  return w.done();
}

CheckRecord d_lower(const Samples& s, const std::string& name, const std::string& fam, std::size_t p, double lambda) {
  Worst w(name, fam, true);
  for (std::size_t i = 0; i < s.size(); ++i)
    w.add(dlo(s.prof[i], p), static_cast<double>(p) * std::log(lambda), p, static_cast<int>(i));
  return w.done();
}

// |g^p(c2) - c2| < delta, with v_{p-1} kept by the profile
CheckRecord recurrence_check(const Samples& s, Family f, const std::string& fam, std::size_t p, const BigReal& delta) {
  Worst w("recurrence", fam, false);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& kept = s.prof[i].kept;
    auto it = std::find_if(kept.begin(), kept.end(), [&](const auto& k) { return k.first == p - 1; });
    double lhs = std::numeric_limits<double>::infinity();
    if (it != kept.end()) {
      BimodalMap m = make_map(f, BigReal::exact(s.gamma[i]), PrecisionContext(it->second.prec()));
      lhs = log_abs_bounds(abs(it->second - m.c2())).second;
    }
    w.add(lhs, log_abs(delta), p, static_cast<int>(i));
  }
  return w.done();
}

CheckRecord width_check(const ParamInterval& iv, std::size_t n, const std::string& fam) {
  CheckRecord r;
  r.name = "width";
  r.family = fam;
  r.index = n;
  r.relation = "<";
  r.lhs = log_abs(iv.width());
  r.rhs = -static_cast<double>(n) * kLn2;
  r.pass = r.lhs < r.rhs;
  return r;
}

CheckRecord nested_check(const ParamInterval& inner, const ParamInterval& outer, const std::string& fam) {
  CheckRecord r;
  r.name = "nested";
  r.family = fam;
  r.relation = "<";
  r.pass = mpfr_cmp(outer.lo.value().get(), inner.lo.value().get()) < 0 &&
           mpfr_cmp(inner.hi.value().get(), outer.hi.value().get()) < 0;
  return r;
}

CheckRecord minimal_check(const Word& s) {
  CheckRecord r;
  r.name = "minimal";
  r.relation = "=";
  r.index = s.size();
  r.pass = is_minimal(ItinerarySeq::periodic(s, Symbol::I2));
  return r;
}

bool all_pass(const std::vector<CheckRecord>& c) {
  return std::all_of(c.begin(), c.end(), [](const CheckRecord& r) { return r.pass; });
}

std::string first_fail(const std::vector<CheckRecord>& c) {
  for (const auto& r : c)
    if (!r.pass) {
      std::ostringstream os;
      os << r.name << " (" << r.family << ", index " << r.index << ", sample " << r.sample << ": " << r.lhs << " "
         << r.relation << " " << r.rhs << " fails)";
      return os.str();
    }
  return "";
}

const char* short_name(Family f) { return family_name(f); }

// Pullback at the reference parameter, with precision raised until the
// point's distance from critical point `near` is resolved.
struct Probe {
  FastPullback pb;
  double log2_gap = 0;  // log2 |x0 - c_near|
};

Probe probe(Family f, const Real& gamma, const Word& w, int end, std::size_t at, mpfr_prec_t bits) {
  mpfr_prec_t P = std::max<mpfr_prec_t>(bits, 256);
  for (;;) {
    BimodalMap m = make_map(f, BigReal::exact(gamma), PrecisionContext(P));
    FastMap fm(m);
    Probe pr;
    pr.pb = fast_pullback(fm, w, end);
    pr.log2_gap = pr.pb.log2_gap[at];
    if (!pr.pb.clamped && pr.log2_gap > -static_cast<double>(P) / 2 + 48) return pr;
    if (P * 2 > kMaxSearchBits) throw StepFailed("prefix", "reference pullback does not resolve at maximal precision");
    P *= 2;
  }
}

// Predicted log d_p (natural log) at the reference parameter: log d_{t_n}
// plus the derivative gains along I2^(k1+1) (the first k1+1 pullback points).
double predict_log_dp(Family f, const Real& gref, double log_dtn, std::size_t k1, std::size_t k2, mpfr_prec_t bits,
                      double* log2_gap = nullptr) {
  Word w = repeat(Symbol::I2, k1 + 1) + repeat(Symbol::I3, k2) + repeat(Symbol::I2, 8);
  Probe pr = probe(f, gref, w, 1, k1, bits);
  double s = log_dtn;
  for (std::size_t i = 0; i <= k1; ++i) s += pr.pb.log_d[i];
  if (log2_gap) *log2_gap = pr.log2_gap;
  return s;
}

struct FamilyCtx {
  Family family;
  const ParamInterval* window;
  Real gref;
  double log_dtn = 0;
  mpfr_prec_t bits = 256;
  double lambda = 1.2;  // growth rate for this family
  double lambda_prime = 2.0;
  std::string name;
};

FamilyCtx family_ctx(const ConstructionState& s, std::size_t idx) {
  FamilyCtx c;
  c.window = &s.intervals[idx];
  c.family = c.window->family;
  c.gref = c.window->midpoint();
  c.bits = c.window->bits;
  c.name = short_name(c.family);
  c.lambda = idx == 0 ? s.rates.lambda : s.rates.lambda_tilde;
  c.lambda_prime = idx == 0 ? s.rates.lambda_prime : s.rates.lambda_tilde_prime;
  const std::size_t tn = s.t_last();
  mpfr_prec_t b = c.bits;
  OrbitProfile pr = profile_at(c.family, c.gref, tn + 1, tn, b);
  c.bits = std::max(c.bits, b);
  c.log_dtn = 0.5 * (pr.log_d_lo[tn] + pr.log_d_hi[tn]);
  return c;
}

void record(StepLog& log, const ConvPair& cp, Family f, const char* a, const char* b) {
  log.brackets.push_back({family_name(f), a, cp.gamma1()});
  log.brackets.push_back({family_name(f), b, cp.gamma2()});
}

void say(const ConstructConfig& cfg, const std::string& msg) {
  if (cfg.progress) cfg.progress(msg);
}

ConstructionState extend(const ConstructionState& s, const Word& next, std::vector<ParamInterval> ivs, StepLog log) {
  ConstructionState out = s;
  out.prefix = next;
  out.t.push_back(next.size());
  out.intervals = std::move(ivs);
  out.history.push_back(out.intervals);
  out.step_log.push_back(std::move(log));
  return out;
}

void require_stage(const ConstructionState& s, Mode m) {
  if (s.mode != m) throw InvalidArgument("construction step does not match the state's mode");
  if (s.t.empty() || s.intervals.size() != mode_families(m).size())
    throw InvalidArgument("construction step needs a bootstrapped state");
}

}  // namespace

Rates default_rates(Mode mode, mpfr_prec_t bits) {
  Rates r;
  if (mode == Mode::SingleFamily) return r;
  r.lambda1 = 0.95;
  r.lambda2 = 1.05;
  Real zero(0, bits);
  LapRates c = lap_rates(Family::Cubic, zero, bits);
  LapRates d = lap_rates(Family::Degree7, zero, bits);
  const double lo = 0.5 * std::log(c.one) / std::log(c.r);
  const double hi = 0.75 * std::log(d.one) / std::log(d.r);
  r.theta1 = lo + (hi - lo) / 4;
  r.theta2 = hi - (hi - lo) / 4;
  r.eta = 0.5 * (r.theta1 + r.theta2);
  return r;
}

void validate_rates(Mode mode, const Rates& r) {
  LapRates c = lap_rates(Family::Cubic, Real(0, 128), 128);
  if (!(1 < r.lambda && r.lambda < r.lambda_prime && r.lambda_prime < std::min({c.r, c.zero, c.one})))
    throw InvalidArgument("rates must satisfy 1 < lambda < lambda' < |g'(r)|");
  if (mode == Mode::SingleFamily) {
    if (!(0 < r.lambda1 && r.lambda1 < r.lambda2 && r.lambda2 < r.lambda))
      throw InvalidArgument("rates must satisfy 0 < lambda1 < lambda2 < lambda");
    return;
  }
  LapRates d = lap_rates(Family::Degree7, Real(0, 128), 128);
  if (!(1 < r.lambda_tilde && r.lambda_tilde < r.lambda_tilde_prime &&
        r.lambda_tilde_prime < std::min({d.r, d.zero, d.one})))
    throw InvalidArgument("rates must satisfy 1 < lambda~ < lambda~' < |h~'(r~)|");
  if (!(0 < r.lambda1 && r.lambda1 < 1 && 1 < r.lambda2 && r.lambda2 < std::min(r.lambda, r.lambda_tilde)))
    throw InvalidArgument("dual rates must satisfy lambda1 < 1 < lambda2 < min(lambda, lambda~)");
  if (!(r.theta1 < r.eta && r.eta < r.theta2)) throw InvalidArgument("dual rates must satisfy theta1 < eta < theta2");
}

// ---------------------------------------------------------------------------

ConstructionState bootstrap(const ConstructConfig& cfg) {
  validate_rates(cfg.mode, cfg.rates);
  const auto fams = mode_families(cfg.mode);
  const PrecisionContext ctx(cfg.bits);
  std::string last = "no attempt";
  for (int k0 = cfg.k0_start; k0 <= cfg.k0_max; ++k0) {
    const Word s0 = repeat(Symbol::I1, static_cast<std::size_t>(k0) + 1);
    const ItinerarySeq edge = ItinerarySeq::finite(repeat(Symbol::I1, static_cast<std::size_t>(k0)) + Word{Symbol::C1});
    std::vector<ParamInterval> win;
    try {
      for (Family f : fams) {
        ParamInterval full = full_window(f, ctx);
        full.samples = cfg.samples;
        FoundParam e = find_param_bracket(f, edge, full, FindOptions{cfg.bits, std::nullopt, 400});
        ParamInterval w = full;
        w.hi = BigReal::exact(e.lo);
        w.bits = std::max(full.bits, e.bits);
        w.certified_prefix = repeat(Symbol::I1, static_cast<std::size_t>(k0));
        win.push_back(w);
      }
    } catch (const Error& e) {
      last = e.what();
      continue;
    }
    say(cfg, "bootstrap: k0=" + std::to_string(k0));
    for (std::size_t k = odd_at_least(s0.size()); k <= 64; k += 2) {
      StepLog log;
      log.type = "bootstrap";
      log.n = 1;
      log.k0 = static_cast<std::size_t>(k0);
      log.k1 = k;
      log.attempts = 1;
      const Word s1 = s0 + repeat(Symbol::I2, k);
      const std::size_t t1 = s1.size();
      log.t = t1;
      std::vector<ParamInterval> ivs;
      std::vector<CheckRecord> checks;
      try {
        for (std::size_t i = 0; i < fams.size(); ++i) {
          ConvPair cp = conv_pair(fams[i], s0, k, win[i], FindOptions{cfg.bits, std::nullopt, 400});
          ivs.push_back(cp.interval);
          record(log, cp, fams[i], "gamma1", "gamma2");
        }
      } catch (const Error& e) {
        last = std::string("prefix: ") + e.what();
        say(cfg, last);
        continue;
      }
      for (std::size_t i = 0; i < fams.size(); ++i) {
        const std::string fn = short_name(fams[i]);
        const double lam = i == 0 ? cfg.rates.lambda : cfg.rates.lambda_tilde;
        const double lamp = i == 0 ? cfg.rates.lambda_prime : cfg.rates.lambda_tilde_prime;
        mpfr_prec_t b = ivs[i].bits;
        Samples sm = sample_profiles(ivs[i], cfg.samples, t1, {}, b);
        ivs[i].bits = std::max(ivs[i].bits, b);
        checks.push_back(growth_from(sm, "d_m > lambda^m", fn, 0, t1, lam));
        Worst rate("lap rates > lambda'", fn, true);
        for (std::size_t j = 0; j < sm.size(); ++j) {
          LapRates lr = lap_rates(fams[i], sm.gamma[j], cfg.bits);
          rate.add(std::log(std::min({lr.r, lr.zero, lr.one})), std::log(lamp), 0, static_cast<int>(j));
        }
        checks.push_back(rate.done());
        checks.push_back(width_check(ivs[i], 1, fn));
        CheckRecord in = nested_check(ivs[i], win[i], fn);
        in.name = "inside window";
        checks.push_back(in);
      }
      checks.push_back(minimal_check(s1));
      // the bookkeeping bound lambda^(t1-1) is logged, its left side is not modelled
      CheckRecord book;
      book.name = "log lambda^(t1-1)";
      book.relation = "=";
      book.index = t1 - 1;
      book.rhs = static_cast<double>(t1 - 1) * std::log(cfg.rates.lambda);
      book.lhs = book.rhs;
      checks.push_back(book);
      log.checks = checks;
      if (!all_pass(checks)) {
        last = first_fail(checks);
        continue;
      }
      ConstructionState st;
      st.mode = cfg.mode;
      st.precision_bits = cfg.bits;
      st.rates = cfg.rates;
      st.samples = cfg.samples;
      return extend(st, s1, ivs, log);
    }
  }
  throw BootstrapFailed("bootstrap exhausted k-limits: " + last);
}

// ---------------------------------------------------------------------------
// A-steps: S_{n+1} = S_n I2^(k1+1) I3^(k2) I2^(k3), p = t_n + k1 + 1

namespace {


// Linear model of predicted log d_p in k2 for each family
struct DpModel {
  double at = 0, slope = 0;
  std::size_t k2 = 0;
  double log2_gap = 0;
};

DpModel dp_model(const FamilyCtx& c, std::size_t k1, std::size_t k2) {
  DpModel m;
  m.k2 = k2;
  double g0 = 0;
  m.at = predict_log_dp(c.family, c.gref, c.log_dtn, k1, k2, c.bits, &g0);
  double a2 = predict_log_dp(c.family, c.gref, c.log_dtn, k1, k2 + 4, c.bits);
  m.slope = (a2 - m.at) / 4;
  m.log2_gap = g0;
  return m;
}

ConstructionState a_step(const ConstructionState& s, const ConstructConfig& cfg, bool dual) {
  require_stage(s, dual ? Mode::DualFamily : Mode::SingleFamily);
  const std::size_t tn = s.t_last();
  const std::size_t n1 = s.stage() + 1;
  const Rates& R = s.rates;
  std::vector<FamilyCtx> fc;
  for (std::size_t i = 0; i < s.intervals.size(); ++i) fc.push_back(family_ctx(s, i));
  const double llo = std::log(R.lambda1), lhi = std::log(R.lambda2);

  std::string last = "k-cap";
  int attempts = 0;
  const std::size_t floor = std::max(tn, cfg.k_floor);
  for (std::size_t k1 = odd_at_least(floor); k1 <= cfg.k_cap; k1 = odd_at_least(2 * k1)) {
    const std::size_t p = tn + k1 + 1;
    const double P = static_cast<double>(p);
    std::size_t k2 = 0;
    std::vector<double> tol1(fc.size());
    if (!dual) {
      const double l0 = std::log(lap_rates(fc[0].family, fc[0].gref, cfg.bits).r);
      const double l3 = std::log(lap_rates(fc[0].family, fc[0].gref, cfg.bits).one);
      const double eta = 0.5 * ((l0 - lhi) / l3 + (l0 - llo) / l3);
      const double target = 0.5 * (llo + lhi) * P;
      k2 = static_cast<std::size_t>(std::max(1.0, std::round(2 * eta * P)));
      for (int it = 0; it < 4; ++it) {
        DpModel m = dp_model(fc[0], k1, k2);
        if (m.slope >= 0) break;
        const double step = (target - m.at) / m.slope;
        std::size_t next = static_cast<std::size_t>(std::max(1.0, std::round(static_cast<double>(k2) + step)));
        if (next == k2) break;
        k2 = next;
      }
      DpModel m = dp_model(fc[0], k1, k2);
      if (std::abs(m.at - target) > 0.4 * (lhi - llo) * P) {
        last = "d-upper: predicted d_p outside the window at k1=" + std::to_string(k1);
        continue;
      }
      tol1[0] = m.log2_gap - 64;
    } else {
      // k1 / k2 = eta; cubic must keep d_p > lambda2^p, deg7 must reach
      // d~_p < lambda1^p, which holds once k1 dominates t_n
      k2 = static_cast<std::size_t>(std::max(1.0, std::round(static_cast<double>(k1) / R.eta)));
      DpModel mc = dp_model(fc[0], k1, k2);
      DpModel md = dp_model(fc[1], k1, k2);
      if (!(mc.at > lhi * P + 0.05 * P * (lhi - llo) && md.at < llo * P - 0.05 * P * (lhi - llo))) {
        last = "d-upper: predicted rates do not separate at k1=" + std::to_string(k1);
        say(cfg, "step A: k1=" + std::to_string(k1) + " predicted rates do not separate");
        continue;
      }
      tol1[0] = mc.log2_gap - 64;
      tol1[1] = md.log2_gap - 64;
    }
    say(cfg, "step A: k1=" + std::to_string(k1) + " k2=" + std::to_string(k2) + " tol " + std::to_string(tol1[0]));

    std::vector<ConvPair> first;
    try {
      for (std::size_t i = 0; i < fc.size(); ++i)
        first.push_back(conv_pair(fc[i].family, s.prefix, k1 - 1, *fc[i].window,
                                  FindOptions{cfg.bits, tol1[i], 2000}));
    } catch (const Error& e) {
      last = std::string("prefix: ") + e.what();
      say(cfg, last);
      continue;
    }
    const Word sa = s.prefix + repeat(Symbol::I2, k1 + 1) + repeat(Symbol::I3, k2);
    bool grow_k1 = false;
    for (std::size_t k3 = even_at_least(cfg.k_floor); k3 <= cfg.k_cap && !grow_k1; k3 = even_at_least(2 * k3)) {
      ++attempts;
      const Word next = sa + repeat(Symbol::I2, k3);
      const std::size_t t1 = next.size();
      std::vector<ParamInterval> ivs;
      std::vector<BracketRecord> brackets;
      try {
        for (std::size_t i = 0; i < fc.size(); ++i) {
          ConvPair cp = conv_pair(fc[i].family, sa, k3, first[i].interval, FindOptions{cfg.bits, std::nullopt, 2000});
          ivs.push_back(cp.interval);
          StepLog tmp;
          record(tmp, first[i], fc[i].family, "inner1", "inner2");
          record(tmp, cp, fc[i].family, "gamma1", "gamma2");
          brackets.insert(brackets.end(), tmp.brackets.begin(), tmp.brackets.end());
        }
      } catch (const Error& e) {
        last = std::string("prefix: ") + e.what();
        say(cfg, last);
        continue;
      }
      say(cfg, "k3=" + std::to_string(k3) + " intervals found, sampling t=" + std::to_string(t1));
      std::vector<CheckRecord> checks;
      bool early_fail = false;
      for (std::size_t i = 0; i < fc.size(); ++i) {
        const FamilyCtx& c = fc[i];
        mpfr_prec_t b = std::max(ivs[i].bits, c.bits);
        Samples sm = sample_profiles(ivs[i], cfg.samples, t1, {p - 1}, b);
        ivs[i].bits = std::max(ivs[i].bits, b);
        std::vector<CheckRecord> early;
        if (!dual) {
          Worst slope("|log lambda0 - log d_(p-1)/(p-1)|", c.name, false);
          for (std::size_t j = 0; j < sm.size(); ++j) {
            const double l0 = std::log(lap_rates(c.family, sm.gamma[j], cfg.bits).r);
            const double a = std::abs(l0 - sm.prof[j].log_d_lo[p - 1] / static_cast<double>(p - 1));
            const double bb = std::abs(l0 - sm.prof[j].log_d_hi[p - 1] / static_cast<double>(p - 1));
            slope.add(std::max(a, bb), lhi - llo, p - 1, static_cast<int>(j));
          }
          early.push_back(slope.done());
          early.push_back(d_lower(sm, "d_p > lambda1^p", c.name, p, R.lambda1));
          early.push_back(d_upper(sm, "d_p < lambda2^p", c.name, p, R.lambda2));
        } else if (i == 0) {
          early.push_back(d_lower(sm, "d_p > lambda2^p", c.name, p, R.lambda2));
        } else {
          early.push_back(d_upper(sm, "d_p < lambda1^p", c.name, p, R.lambda1));
        }
        early.push_back(growth_from(sm, "d_(tn,l) > lambda^l", c.name, tn, p - 1 - tn, c.lambda));
        if (!all_pass(early)) early_fail = true;
        checks.insert(checks.end(), early.begin(), early.end());
        checks.push_back(growth_from(sm, "d_(p,l) > lambda^l", c.name, p, t1 - p, c.lambda));
        checks.push_back(growth_once(sm, "d_(tn,t-tn) > lambda^(t-tn)", c.name, tn, t1 - tn, c.lambda));
        checks.push_back(d_lower(sm, "d_t > lambda^t", c.name, t1, c.lambda));
        checks.push_back(width_check(ivs[i], n1, c.name));
        checks.push_back(nested_check(ivs[i], *c.window, c.name));
      }
      checks.push_back(minimal_check(next));
      if (all_pass(checks)) {
        StepLog log;
        log.type = "A";
        log.n = n1;
        log.k1 = k1;
        log.k2 = k2;
        log.k3 = k3;
        log.p = p;
        log.t = t1;
        log.attempts = attempts;
        log.checks = checks;
        log.brackets = brackets;
        ConstructionState out = extend(s, next, ivs, log);
        out.p_marks.push_back({n1, p, 'A'});
        return out;
      }
      const std::string f = first_fail(checks);
      last = (early_fail ? "d-upper: " : "d-lower: ") + f;
      if (f.rfind("width", 0) == 0) last = "width: " + f;
      say(cfg, "step A: checks failed: " + f);
      if (early_fail) grow_k1 = true;
    }
  }
  const std::string reason = last.substr(0, last.find(':'));
  throw StepFailed(reason, "A-step failed: " + last);
}

// B-steps: S_{n+1} = S_n I2^(k1) S_n I2^(k2+1) I3 I2^(k3), p = t_n + k1
ConstructionState b_step(const ConstructionState& s, const BigReal& delta, const ConstructConfig& cfg, bool dual) {
  require_stage(s, dual ? Mode::DualFamily : Mode::SingleFamily);
  if (certified_sign(delta) != Sign::Positive) throw InvalidArgument("B-step needs delta > 0");
  const std::size_t tn = s.t_last();
  const std::size_t n1 = s.stage() + 1;
  std::vector<FamilyCtx> fc;
  for (std::size_t i = 0; i < s.intervals.size(); ++i) fc.push_back(family_ctx(s, i));
  const double log2_delta = log_abs(delta) / kLn2;

  std::string last = "k-cap";
  int attempts = 0;
  const std::size_t floor = std::max(tn, cfg.k_floor);
  std::size_t next_k1 = 0;
  for (std::size_t k1 = even_at_least(std::max(tn + 3, floor)); k1 <= cfg.k_cap; k1 = next_k1) {
    next_k1 = even_at_least(2 * k1);
    const std::size_t p = tn + k1;
    // provisional pair: its parameters put v_(t_n) next to r, where the
    // return target is probed
    std::vector<ConvPair> first;
    try {
      for (std::size_t i = 0; i < fc.size(); ++i)
        first.push_back(conv_pair(fc[i].family, s.prefix, k1 - 2, *fc[i].window, FindOptions{cfg.bits, std::nullopt, 2000}));
    } catch (const Error& e) {
      last = std::string("prefix: ") + e.what();
      say(cfg, last);
      continue;
    }
    // smallest even k2 > t_n (so S_n I2^(k2+1) I3 has sign +1) whose return
    // target lies within delta of c2
    std::size_t k2 = even_at_least(tn + 1);
    std::vector<double> gap(fc.size());
    std::vector<Probe> probes(fc.size());
    bool found = false;
    for (; k2 + 2 <= k1; k2 += 2) {
      const Word w = Word{Symbol::I2} + s.prefix + repeat(Symbol::I2, k2 + 1) + Word{Symbol::I3};
      bool ok = true;
      for (std::size_t i = 0; i < fc.size() && ok; ++i) {
        probes[i] = probe(fc[i].family, first[i].interval.midpoint(), w, 2, 0, first[i].interval.bits);
        gap[i] = probes[i].log2_gap;
        ok = gap[i] < log2_delta - 1;
      }
      if (ok) {
        found = true;
        break;
      }
    }
    if (!found) {
      last = "recurrence: no k2 < k1 - 1 brings the return within delta";
      continue;
    }
    // predicted log d_(t_n,l) - l log lambda: l log|g'(r)| up to the return,
    // then the probe's derivatives along I2 S_n I2^(k2+1) I3
    double need = 0;
    for (std::size_t i = 0; i < fc.size(); ++i) {
      const double l0 = std::log(lap_rates(fc[i].family, first[i].interval.midpoint(), cfg.bits).r);
      const double ll = std::log(fc[i].lambda);
      double acc = static_cast<double>(k1 - 1) * l0, worst = std::numeric_limits<double>::infinity();
      for (std::size_t m = 0; m < probes[i].pb.log_d.size(); ++m) {
        acc += probes[i].pb.log_d[m];
        worst = std::min(worst, acc - static_cast<double>(k1 + m) * ll);
      }
      // keep a margin of 8 bits
      if (worst < 8 * kLn2) need = std::max(need, (8 * kLn2 - worst) / (l0 - ll));
    }
    if (need > 0) {
      last = "d-lower: predicted d_(tn,l) falls below lambda^l at k1=" + std::to_string(k1);
      next_k1 = even_at_least(k1 + static_cast<std::size_t>(std::ceil(need * 1.05)) + 2);
      say(cfg, "step B: k1=" + std::to_string(k1) + " predicted short, next k1=" + std::to_string(next_k1));
      continue;
    }
    say(cfg, "step B: k1=" + std::to_string(k1) + " k2=" + std::to_string(k2) + " log2 gap " + std::to_string(gap[0]));
    try {
      for (std::size_t i = 0; i < fc.size(); ++i)
        first[i] = conv_pair(fc[i].family, s.prefix, k1 - 2, *fc[i].window, FindOptions{cfg.bits, gap[i] - 64, 2000});
    } catch (const Error& e) {
      last = std::string("prefix: ") + e.what();
      say(cfg, last);
      continue;
    }
    const Word s2 = s.prefix + repeat(Symbol::I2, k1) + s.prefix + repeat(Symbol::I2, k2 + 1) + Word{Symbol::I3};
    bool grow_k1 = false;
    for (std::size_t k3 = even_at_least(cfg.k_floor); k3 <= cfg.k_cap && !grow_k1; k3 = even_at_least(2 * k3)) {
      ++attempts;
      const Word next = s2 + repeat(Symbol::I2, k3);
      const std::size_t t1 = next.size();
      std::vector<ParamInterval> ivs;
      std::vector<BracketRecord> brackets;
      try {
        for (std::size_t i = 0; i < fc.size(); ++i) {
          ConvPair cp = conv_pair(fc[i].family, s2, k3, first[i].interval, FindOptions{cfg.bits, std::nullopt, 2000});
          ivs.push_back(cp.interval);
          StepLog tmp;
          record(tmp, first[i], fc[i].family, "inner1", "inner2");
          record(tmp, cp, fc[i].family, "gamma1", "gamma2");
          brackets.insert(brackets.end(), tmp.brackets.begin(), tmp.brackets.end());
        }
      } catch (const Error& e) {
        last = std::string("prefix: ") + e.what();
        say(cfg, last);
        continue;
      }
      say(cfg, "k3=" + std::to_string(k3) + " intervals found, sampling t=" + std::to_string(t1));
      std::vector<CheckRecord> checks;
      bool early_fail = false;
      for (std::size_t i = 0; i < fc.size(); ++i) {
        const FamilyCtx& c = fc[i];
        mpfr_prec_t b = std::max(ivs[i].bits, c.bits);
        Samples sm = sample_profiles(ivs[i], cfg.samples, t1, {p - 1}, b);
        ivs[i].bits = std::max(ivs[i].bits, b);
        CheckRecord rec = recurrence_check(sm, c.family, c.name, p, delta);
        CheckRecord pre = growth_from(sm, "d_(tn,l) > lambda^l", c.name, tn, s2.size() - tn, c.lambda);
        if (!rec.pass || !pre.pass) early_fail = true;
        checks.push_back(rec);
        checks.push_back(pre);
        checks.push_back(growth_from(sm, "d_(tn,l) > lambda^l (tail)", c.name, tn, t1 - tn, c.lambda));
        checks.push_back(growth_once(sm, "d_(p-1,t-p+1) > lambda^(t-p+1)", c.name, p - 1, t1 - p + 1, c.lambda));
        checks.push_back(d_lower(sm, "d_t > lambda^t", c.name, t1, c.lambda));
        checks.push_back(width_check(ivs[i], n1, c.name));
        checks.push_back(nested_check(ivs[i], *c.window, c.name));
      }
      checks.push_back(minimal_check(next));
      if (all_pass(checks)) {
        StepLog log;
        log.type = "B";
        log.n = n1;
        log.k1 = k1;
        log.k2 = k2;
        log.k3 = k3;
        log.p = p;
        log.t = t1;
        log.delta = delta.decimal();
        log.attempts = attempts;
        log.checks = checks;
        log.brackets = brackets;
        ConstructionState out = extend(s, next, ivs, log);
        out.p_marks.push_back({n1, p, 'B'});
        return out;
      }
      const std::string f = first_fail(checks);
      last = (early_fail ? "d-lower: " : "d-lower: ") + f;
      if (f.rfind("width", 0) == 0) last = "width: " + f;
      say(cfg, "step B: checks failed: " + f);
      if (early_fail) grow_k1 = true;
    }
  }
  const std::string reason = last.substr(0, last.find(':'));
  throw StepFailed(reason, "B-step failed: " + last);
}

}  // namespace

ConstructionState step_A(const ConstructionState& s, const ConstructConfig& cfg) { return a_step(s, cfg, false); }
ConstructionState dual_step_A(const ConstructionState& s, const ConstructConfig& cfg) { return a_step(s, cfg, true); }
ConstructionState step_B(const ConstructionState& s, const BigReal& delta, const ConstructConfig& cfg) {
  return b_step(s, delta, cfg, false);
}
ConstructionState dual_step_B(const ConstructionState& s, const BigReal& delta, const ConstructConfig& cfg) {
  return b_step(s, delta, cfg, true);
}

ConstructionState run(const std::string& schedule, const ConstructConfig& cfg, const PersistFn& persist) {
  for (char c : schedule)
    if (c != 'A' && c != 'B') throw InvalidArgument("schedule may contain only A and B");
  ConstructionState st = bootstrap(cfg);
  if (persist) persist(st);
  const bool dual = cfg.mode == Mode::DualFamily;
  for (char c : schedule) {
    if (c == 'A') {
      st = dual ? dual_step_A(st, cfg) : step_A(st, cfg);
    } else {
      const long k = static_cast<long>(st.b_steps()) + 1;
      const BigReal delta = BigReal(1, 64).mul_2si(-k);
      st = dual ? dual_step_B(st, delta, cfg) : step_B(st, delta, cfg);
    }
    if (persist) persist(st);
  }
  return st;
}

}  // namespace kneadlab
