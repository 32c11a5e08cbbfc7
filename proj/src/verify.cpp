#include "kneadlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <sstream>

#include <json.hpp>

#include "kneadlab/errors.hpp"
#include "kneadlab/fastmap.hpp"
#include "kneadlab/orbits.hpp"
#include "kneadlab/parallel.hpp"
#include "kneadlab/paramsearch.hpp"
#include "kneadlab/state_io.hpp"

namespace kneadlab {

const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::Unclassified: return "unclassified";
    case CheckStatus::Vacuous: return "vacuous";
  }
  return "?";
}

bool VerificationReport::passed() const { return failures() == 0; }

std::size_t VerificationReport::failures() const {
  return static_cast<std::size_t>(
      std::count_if(checks.begin(), checks.end(), [](const ReportCheck& c) { return c.status == CheckStatus::Fail; }));
}

void VerificationReport::append(const VerificationReport& o) {
  checks.insert(checks.end(), o.checks.begin(), o.checks.end());
  warnings.insert(warnings.end(), o.warnings.begin(), o.warnings.end());
}

std::string report_json(const std::vector<VerificationReport>& reports) {
  using nlohmann::json;
  json all = json::array();
  for (const auto& r : reports) {
    json checks = json::array();
    for (const auto& c : r.checks)
      checks.push_back(json{{"name", c.name},
                            {"status", to_string(c.status)},
                            {"family", c.family},
                            {"gamma", c.gamma},
                            {"index", c.index},
                            {"last", c.last},
                            {"instances", c.instances},
                            {"lhs", double_text(c.lhs)},
                            {"rhs", double_text(c.rhs)},
                            {"relation", c.relation},
                            {"note", c.note}});
    all.push_back(json{{"name", r.name},
                       {"pass", r.passed()},
                       {"parameters", r.parameters},
                       {"warnings", r.warnings},
                       {"checks", checks}});
  }
  return all.dump(1) + "\n";
}

std::string report_table(const std::vector<VerificationReport>& reports) {
  std::ostringstream out;
  char line[512];
  for (const auto& r : reports) {
    out << r.name << ": " << (r.passed() ? "PASS" : "FAIL") << " (" << r.checks.size() << " checks, "
        << r.failures() << " failed)\n";
    for (const auto& w : r.warnings) out << "  warning: " << w << "\n";
    for (const auto& c : r.checks) {
      std::string idx = std::to_string(c.index);
      if (c.last != c.index) idx += ".." + std::to_string(c.last);
      std::snprintf(line, sizeof line, "  %-13s %-30s %-6s %-12s %14.6g %-2s %14.6g  %s\n", to_string(c.status),
                    c.name.c_str(), c.family.c_str(), idx.c_str(), c.lhs, c.relation.c_str(), c.rhs, c.note.c_str());
      out << line;
    }
  }
  return out.str();
}

std::vector<Real> interior_samples(const ParamInterval& iv, int count) {
  std::vector<Real> out;
  const std::size_t n = static_cast<std::size_t>(std::max(count, 0)) + 1;
  for (std::size_t i = 1; i < n; ++i) out.push_back(iv.point(i, n));
  return out;
}

WindowPlan window_plan(const ConstructionState& s) {
  WindowPlan w;
  if (s.t.empty()) return w;
  // d_0 = 1 always, so windows start at 1
  std::size_t start = 1;
  for (const auto& m : s.p_marks) {
    if (m.type != 'A' || m.n == 0 || m.n > s.t.size()) continue;
    const std::size_t t = s.t[m.n - 1];
    if (m.p >= start) w.windows.emplace_back(start, m.p - 1);
    w.marks.push_back(m.p);
    if (t > m.p + 1) w.gaps.emplace_back(m.p, t);
    start = t;
  }
  if (start <= s.t.back()) w.windows.emplace_back(start, s.t.back());
  return w;
}

namespace {

double rate_for(const ConstructionState& s, Family f) {
  return f == Family::Cubic ? s.rates.lambda : s.rates.lambda_tilde;
}

std::string gamma_text(const Real& g) { return dyadic_decimal(g.get()); }

std::vector<std::size_t> b_keep(const ConstructionState& s) {
  std::vector<std::size_t> keep;
  for (const auto& m : s.p_marks)
    if (m.type == 'B' && m.p > 0) keep.push_back(m.p - 1);
  return keep;
}

OrbitProfile state_profile(const ConstructionState& s, Family f, const Real& gamma, std::size_t depth,
                           const std::vector<std::size_t>& keep) {
  mpfr_prec_t bits = s.precision_bits;
  return profile_at(f, gamma, depth + 1, depth, bits, keep);
}

VerificationReport ce_from_profile(const ConstructionState& s, const OrbitProfile& pr, Family f,
                                   const std::string& g) {
  VerificationReport rep;
  rep.name = "ce_windows";
  rep.parameters["family"] = family_name(f);
  rep.parameters["lambda"] = double_text(rate_for(s, f));
  rep.parameters["depth"] = std::to_string(s.t_last());
  const double ll = std::log(rate_for(s, f));
  const WindowPlan plan = window_plan(s);
  for (const auto& [a, b] : plan.windows) {
    ReportCheck c;
    c.name = "d_n > lambda^n";
    c.family = family_name(f);
    c.gamma = g;
    c.relation = ">";
    c.last = b;
    c.instances = b - a + 1;
    c.note = "window, worst margin";
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t n = a; n <= b; ++n) {
      const double lhs = n < pr.log_d_lo.size() ? pr.log_d_lo[n] : -std::numeric_limits<double>::infinity();
      const double rhs = static_cast<double>(n) * ll;
      double m = lhs - rhs;
      if (std::isnan(m)) m = -std::numeric_limits<double>::infinity();
      if (m < worst) {
        worst = m;
        c.index = n;
        c.lhs = lhs;
        c.rhs = rhs;
      }
    }
    c.last = b;
    c.status = worst > 0 ? CheckStatus::Pass : CheckStatus::Fail;
    if (c.index != a) c.note += " at " + std::to_string(c.index);
    c.index = a;
    rep.checks.push_back(c);
  }
  for (const auto& [p, t] : plan.gaps) {
    ReportCheck c;
    c.name = "gap (p, t)";
    c.status = CheckStatus::Unclassified;
    c.family = family_name(f);
    c.gamma = g;
    c.index = p + 1;
    c.last = t - 1;
    c.instances = t - p - 1;
    c.note = "no bound asserted";
    rep.checks.push_back(c);
  }
  // every index 1..t_final lies in exactly one window, gap or mark
  std::vector<int> cover(s.t_last() + 1, 0);
  for (const auto& [a, b] : plan.windows)
    for (std::size_t n = a; n <= b && n < cover.size(); ++n) ++cover[n];
  for (const auto& [p, t] : plan.gaps)
    for (std::size_t n = p + 1; n < t && n < cover.size(); ++n) ++cover[n];
  for (std::size_t p : plan.marks)
    if (p < cover.size()) ++cover[p];
  ReportCheck part;
  part.name = "index partition";
  part.family = family_name(f);
  part.gamma = g;
  part.index = 1;
  part.last = s.t_last();
  part.instances = s.t_last();
  part.relation = "=";
  std::size_t bad = 0;
  for (std::size_t n = 1; n < cover.size(); ++n)
    if (cover[n] != 1) {
      if (bad == 0) part.note = "first bad index " + std::to_string(n);
      ++bad;
    }
  part.lhs = static_cast<double>(bad);
  part.rhs = 0;
  part.status = bad == 0 ? CheckStatus::Pass : CheckStatus::Fail;
  if (bad == 0) part.note = "covered once each";
  rep.checks.push_back(part);
  return rep;
}

VerificationReport non_ce_from_profile(const ConstructionState& s, const OrbitProfile& pr, const std::string& g) {
  VerificationReport rep;
  rep.name = "non_ce_witness";
  rep.parameters["lambda2"] = double_text(s.rates.lambda2);
  const double l2 = std::log(s.rates.lambda2);
  const WindowPlan plan = window_plan(s);
  if (plan.marks.empty() || s.rates.lambda2 >= 1) {
    ReportCheck c;
    c.name = "d_p < lambda2^p";
    c.status = CheckStatus::Vacuous;
    c.family = "cubic";
    c.gamma = g;
    rep.checks.push_back(c);
    rep.warnings.push_back(plan.marks.empty() ? "no A-marks" : "lambda2 >= 1, marks are not non-CE witnesses");
    return rep;
  }
  for (std::size_t p : plan.marks) {
    ReportCheck c;
    c.name = "d_p < lambda2^p";
    c.family = "cubic";
    c.gamma = g;
    c.index = c.last = p;
    c.relation = "<";
    c.lhs = p < pr.log_d_hi.size() ? pr.log_d_hi[p] : std::numeric_limits<double>::infinity();
    c.rhs = static_cast<double>(p) * l2;
    c.status = c.lhs < c.rhs ? CheckStatus::Pass : CheckStatus::Fail;
    char buf[96];
    std::snprintf(buf, sizeof buf, "slope log d_p / p = %.6g", c.lhs / static_cast<double>(p));
    c.note = buf;
    rep.checks.push_back(c);
  }
  return rep;
}

VerificationReport recurrence_from_profile(const ConstructionState& s, const OrbitProfile& pr, Family f,
                                           const Real& gamma) {
  VerificationReport rep;
  rep.name = "recurrence";
  rep.parameters["family"] = family_name(f);
  long k = 0;
  for (const auto& m : s.p_marks) {
    if (m.type != 'B') continue;
    ++k;
    ReportCheck c;
    c.name = "|g^p(c2) - c2| < 2^-k";
    c.family = family_name(f);
    c.gamma = gamma_text(gamma);
    c.index = c.last = m.p;
    c.relation = "<";
    c.rhs = -static_cast<double>(k) * std::log(2.0);
    c.lhs = std::numeric_limits<double>::infinity();
    auto it = std::find_if(pr.kept.begin(), pr.kept.end(), [&](const auto& e) { return e.first + 1 == m.p; });
    if (it != pr.kept.end()) {
      BimodalMap map = make_map(f, BigReal::exact(gamma), PrecisionContext(it->second.prec()));
      const BigReal dist = it->second - map.c2();
      const auto [lo, hi] = log_abs_bounds(dist);
      c.lhs = hi;
      const Sign sg = certified_sign(dist);
      c.note = std::string("k = ") + std::to_string(k) + ", distance " +
               (sg == Sign::Undecidable || sg == Sign::Zero ? "not certified nonzero" : "certified nonzero");
      if (sg == Sign::Zero || sg == Sign::Undecidable) rep.warnings.push_back("c2 distance at p = " + std::to_string(m.p) + " not separated from 0");
      (void)lo;
    }
    c.status = c.lhs < c.rhs ? CheckStatus::Pass : CheckStatus::Fail;
    rep.checks.push_back(c);
  }
  if (k == 0) {
    ReportCheck c;
    c.name = "|g^p(c2) - c2| < 2^-k";
    c.status = CheckStatus::Vacuous;
    c.family = family_name(f);
    c.gamma = gamma_text(gamma);
    rep.checks.push_back(c);
    rep.warnings.push_back("no B-marks");
  }
  return rep;
}

}  // namespace

VerificationReport ce_windows(const ConstructionState& s, const Real& gamma, Family f) {
  OrbitProfile pr = state_profile(s, f, gamma, s.t_last(), {});
  return ce_from_profile(s, pr, f, gamma_text(gamma));
}

VerificationReport non_ce_witness(const ConstructionState& s, const Real& gamma) {
  std::size_t depth = 0;
  for (const auto& m : s.p_marks)
    if (m.type == 'A') depth = std::max(depth, m.p);
  OrbitProfile pr = state_profile(s, Family::Cubic, gamma, depth, {});
  return non_ce_from_profile(s, pr, gamma_text(gamma));
}

VerificationReport recurrence(const ConstructionState& s, const Real& gamma, Family f) {
  std::size_t depth = 0;
  for (const auto& m : s.p_marks)
    if (m.type == 'B') depth = std::max(depth, m.p);
  OrbitProfile pr = state_profile(s, f, gamma, depth, b_keep(s));
  return recurrence_from_profile(s, pr, f, gamma);
}

VerificationReport combinatorial_equiv(const ConstructionState& s, const Real& gamma, const Real& gamma_prime,
                                       std::size_t depth) {
  if (depth == SIZE_MAX) depth = s.t_last();
  VerificationReport rep;
  rep.name = "combinatorial_equiv";
  rep.parameters["depth"] = std::to_string(depth);
  rep.parameters["gamma"] = gamma_text(gamma);
  rep.parameters["gamma_prime"] = gamma_text(gamma_prime);

  // both maps increase on the outer laps and decrease on the middle one
  ReportCheck mono;
  mono.name = "monotonicity type";
  mono.relation = "=";
  bool same = true;
  for (Family f : {Family::Cubic, Family::Degree7}) {
    const Real& g = f == Family::Cubic ? gamma : gamma_prime;
    BimodalMap m = make_map(f, BigReal::exact(g), PrecisionContext(s.precision_bits));
    const BigReal half = BigReal::rational(1, 2, s.precision_bits);
    const BigReal pts[3] = {m.c1() * half, (m.c1() + m.c2()) * half, (m.c2() + BigReal(1, s.precision_bits)) * half};
    const Sign want[3] = {Sign::Positive, Sign::Negative, Sign::Positive};
    for (int j = 0; j < 3; ++j) same = same && certified_sign(m.deriv(pts[j])) == want[j];
  }
  mono.status = same ? CheckStatus::Pass : CheckStatus::Fail;
  mono.note = "+ - + on I1, I2, I3";
  rep.checks.push_back(mono);

  ReportCheck c;
  c.name = "kneading prefixes agree";
  c.family = "cubic/deg7";
  c.relation = "=";
  c.last = depth;
  c.instances = depth;
  if (depth == 0) {
    c.status = CheckStatus::Pass;
    c.note = "depth 0";
    rep.checks.push_back(c);
    return rep;
  }
  mpfr_prec_t b1 = s.precision_bits, b2 = s.precision_bits;
  Word k1, k2;
  parallel_for(2, [&](std::size_t i) {
    if (i == 0)
      k1 = certified_kneading(Family::Cubic, gamma, depth, b1);
    else
      k2 = certified_kneading(Family::Degree7, gamma_prime, depth, b2);
  });
  std::size_t i = 0;
  const std::size_t n = std::min({k1.size(), k2.size(), depth});
  while (i < n && k1[i] == k2[i]) ++i;
  const bool ok = i == depth || (i == k1.size() && i == k2.size());
  c.index = i;
  c.lhs = static_cast<double>(i);
  c.rhs = static_cast<double>(depth);
  c.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  c.note = ok ? "identical to depth" : "first difference at " + std::to_string(i);
  rep.checks.push_back(c);
  return rep;
}

VerificationReport dual_rate_contrast(const ConstructionState& s) {
  VerificationReport rep;
  rep.name = "dual_rate_contrast";
  rep.parameters["lambda1"] = double_text(s.rates.lambda1);
  rep.parameters["lambda2"] = double_text(s.rates.lambda2);

  ReportCheck gap;
  gap.name = "theta1 < eta < theta2";
  gap.relation = "<";
  gap.lhs = s.rates.eta - s.rates.theta1;
  gap.rhs = s.rates.theta2 - s.rates.eta;
  gap.status = s.rates.theta1 < s.rates.eta && s.rates.eta < s.rates.theta2 ? CheckStatus::Pass : CheckStatus::Fail;
  char buf[128];
  std::snprintf(buf, sizeof buf, "theta1 %.6g, eta %.6g, theta2 %.6g; lhs, rhs are the two gaps", s.rates.theta1,
                s.rates.eta, s.rates.theta2);
  gap.note = buf;

  std::vector<std::size_t> marks;
  if (s.mode == Mode::DualFamily)
    for (const auto& m : s.p_marks)
      if (m.type == 'A') marks.push_back(m.p);
  if (marks.empty() || s.intervals.size() < 2) {
    ReportCheck c;
    c.name = "dual rates at A-marks";
    c.status = CheckStatus::Vacuous;
    rep.checks.push_back(c);
    rep.warnings.push_back("no dual A-marks");
    return rep;
  }
  rep.checks.push_back(gap);
  const std::size_t depth = *std::max_element(marks.begin(), marks.end());
  OrbitProfile pr[2];
  Real mid[2] = {s.intervals[0].midpoint(), s.intervals[1].midpoint()};
  parallel_for(2, [&](std::size_t i) { pr[i] = state_profile(s, s.intervals[i].family, mid[i], depth, {}); });
  for (std::size_t p : marks) {
    for (int i = 0; i < 2; ++i) {
      ReportCheck c;
      const bool cubic = s.intervals[i].family == Family::Cubic;
      c.name = cubic ? "d_p > lambda2^p" : "d_p < lambda1^p";
      c.family = family_name(s.intervals[i].family);
      c.gamma = gamma_text(mid[i]);
      c.index = c.last = p;
      c.relation = cubic ? ">" : "<";
      c.lhs = cubic ? pr[i].log_d_lo[p] : pr[i].log_d_hi[p];
      c.rhs = static_cast<double>(p) * std::log(cubic ? s.rates.lambda2 : s.rates.lambda1);
      const bool ok = cubic ? c.lhs > c.rhs : c.lhs < c.rhs;
      c.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
      c.note = "interval midpoint";
      rep.checks.push_back(c);
    }
  }
  return rep;
}

std::vector<VerificationReport> verify_state(const ConstructionState& s, int samples) {
  std::vector<VerificationReport> out;
  if (s.intervals.empty()) return out;
  const auto keep = b_keep(s);
  for (const auto& iv : s.intervals) {
    const std::vector<Real> pts = interior_samples(iv, samples);
    std::vector<OrbitProfile> prof(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { prof[i] = state_profile(s, iv.family, pts[i], s.t_last(), keep); });
    VerificationReport ce, nce, rec;
    ce.name = "ce_windows";
    nce.name = "non_ce_witness";
    rec.name = "recurrence";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const std::string g = gamma_text(pts[i]);
      VerificationReport r = ce_from_profile(s, prof[i], iv.family, g);
      ce.parameters = r.parameters;
      ce.append(r);
      if (s.mode == Mode::SingleFamily) {
        VerificationReport w = non_ce_from_profile(s, prof[i], g);
        nce.parameters = w.parameters;
        nce.append(w);
      }
      VerificationReport q = recurrence_from_profile(s, prof[i], iv.family, pts[i]);
      rec.parameters = q.parameters;
      rec.append(q);
    }
    for (auto* r : {&ce, &nce, &rec}) {
      r->parameters["samples"] = std::to_string(pts.size());
      r->parameters["sampling"] = "interior equispaced parameters of the final interval";
      std::sort(r->warnings.begin(), r->warnings.end());
      r->warnings.erase(std::unique(r->warnings.begin(), r->warnings.end()), r->warnings.end());
    }
    out.push_back(ce);
    if (s.mode == Mode::SingleFamily) out.push_back(nce);
    out.push_back(rec);
  }
  if (s.mode == Mode::DualFamily && s.intervals.size() >= 2) {
    out.push_back(combinatorial_equiv(s, s.intervals[0].midpoint(), s.intervals[1].midpoint()));
    out.push_back(dual_rate_contrast(s));
  }
  return out;
}

BranchPolicy parse_branch_policy(const std::string& s) {
  if (s == "leftmost") return BranchPolicy::Leftmost;
  if (s == "random") return BranchPolicy::Random;
  if (s == "itinerary") return BranchPolicy::Itinerary;
  if (s == "exhaustive") return BranchPolicy::Exhaustive;
  throw InvalidArgument("unknown branch policy '" + s + "'");
}

double fit_rate(const std::vector<double>& y) {
  const std::size_t n = y.size();
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t first = n / 2 == n - 1 ? n - 2 : n / 2;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(n - first);
  for (std::size_t i = first; i < n; ++i) {
    const double x = static_cast<double>(i);
    sx += x;
    sy += y[i];
    sxx += x * x;
    sxy += x * y[i];
  }
  const double den = m * sxx - sx * sx;
  return (m * sxy - sx * sy) / den;
}

namespace {

struct Piece {
  Real a, b, x;
};

struct Images {
  Real lo[3], hi[3];  // image of each lap
};

Images lap_images(const FastMap& fm) {
  Images im;
  const mpfr_prec_t p = fm.prec();
  for (int j = 0; j < 3; ++j) im.lo[j] = im.hi[j] = Real(p);
  Real top(p), one(1, p), g1(p);
  fm.eval(fm.c1(), top);
  fm.eval(one, g1);
  mpfr_set_zero(im.lo[0].get(), 1);
  im.hi[0] = top;
  im.lo[1] = fm.v();
  im.hi[1] = top;
  im.lo[2] = fm.v();
  im.hi[2] = g1;
  return im;
}

// Preimage piece in lap j, or nullopt when x has no preimage there.
std::optional<Piece> pull(const FastMap& fm, const Images& im, int j, const Piece& w) {
  if (mpfr_cmp(w.x.get(), im.lo[j - 1].get()) < 0 || mpfr_cmp(w.x.get(), im.hi[j - 1].get()) > 0) return std::nullopt;
  Real x = fm.inverse(j, w.x);
  Real a = fm.inverse(j, w.a), b = fm.inverse(j, w.b);
  if (mpfr_cmp(a.get(), b.get()) > 0) std::swap(a, b);
  return Piece{std::move(a), std::move(b), std::move(x)};
}

Real width(const Piece& p, mpfr_prec_t prec) {
  Real d(prec);
  mpfr_sub(d.get(), p.b.get(), p.a.get(), MPFR_RNDN);
  return d;
}

}  // namespace

PullbackResult pullback_shrink(const BimodalMap& m0, const BigReal& x, const BigReal& delta, std::size_t depth,
                               const PullbackOptions& opt) {
  if (opt.policy == BranchPolicy::Exhaustive && depth > 12)
    throw InvalidArgument("exhaustive pullback is limited to depth 12");
  if (delta.value().sgn() < 0) throw InvalidArgument("delta must be >= 0");
  for (Symbol s : opt.itinerary)
    if (!is_lap(s)) throw InvalidArgument("branch itinerary must consist of lap symbols");

  // each step shrinks a piece by at most max|g'|, so this many bits keep the
  // final diameter resolved next to endpoints of size 1
  BimodalMap lowp = make_map(m0.family(), m0.gamma(), PrecisionContext(64));
  double lmax = 1;
  for (int i = 0; i <= 256; ++i) {
    const BigReal t = BigReal::rational(i, 256, 64);
    lmax = std::max(lmax, std::abs(lowp.deriv(t).to_double()));
  }
  const mpfr_prec_t prec = std::max<mpfr_prec_t>(
      m0.prec(), 96 + static_cast<mpfr_prec_t>(std::ceil(static_cast<double>(depth) * std::log2(lmax * 1.25))) +
                     static_cast<mpfr_prec_t>(delta.value().is_zero() ? 0.0 : std::max(0.0, -log_abs(delta) / std::log(2.0))));
  BimodalMap m = make_map(m0.family(), m0.gamma(), PrecisionContext(prec));
  FastMap fm(m);
  const Images im = lap_images(fm);

  Piece w0{Real(prec), Real(prec), Real(prec)};
  mpfr_set(w0.x.get(), x.value().get(), MPFR_RNDN);
  mpfr_sub(w0.a.get(), w0.x.get(), delta.value().get(), MPFR_RNDD);
  mpfr_add(w0.b.get(), w0.x.get(), delta.value().get(), MPFR_RNDU);
  if (mpfr_sgn(w0.a.get()) < 0) mpfr_set_zero(w0.a.get(), 1);
  if (mpfr_cmp_ui(w0.b.get(), 1) > 0) mpfr_set_ui(w0.b.get(), 1, MPFR_RNDN);

  PullbackResult res;
  res.diam.push_back(width(w0, prec));

  if (opt.policy == BranchPolicy::Exhaustive) {
    std::vector<Piece> level{w0};
    for (std::size_t n = 0; n < depth; ++n) {
      std::vector<Piece> next;
      for (const auto& w : level)
        for (int j = 1; j <= 3; ++j)
          if (auto p = pull(fm, im, j, w)) next.push_back(std::move(*p));
      if (next.empty()) throw BranchDead("no preimage at step " + std::to_string(n + 1));
      Real best(prec);
      mpfr_set_zero(best.get(), 1);
      for (const auto& p : next) {
        Real d = width(p, prec);
        if (mpfr_cmp(d.get(), best.get()) > 0) best = d;
      }
      res.diam.push_back(best);
      level = std::move(next);
    }
  } else {
    std::mt19937_64 rng(opt.seed);
    Piece w = w0;
    res.orbit.push_back(w.x);
    for (std::size_t n = 0; n < depth; ++n) {
      std::optional<Piece> p;
      int lap = 1;
      if (opt.policy == BranchPolicy::Leftmost) {
        for (lap = 1; lap <= 3 && !(p = pull(fm, im, lap, w)); ++lap) {
        }
      } else if (opt.policy == BranchPolicy::Random) {
        std::vector<std::pair<int, Piece>> alive;
        for (int j = 1; j <= 3; ++j)
          if (auto q = pull(fm, im, j, w)) alive.emplace_back(j, std::move(*q));
        if (!alive.empty()) {
          std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
          auto& chosen = alive[pick(rng)];
          lap = chosen.first;
          p = std::move(chosen.second);
        }
      } else {
        lap = opt.itinerary.empty() ? 1 : lap_index(opt.itinerary[n % opt.itinerary.size()]);
        p = pull(fm, im, lap, w);
      }
      if (!p) throw BranchDead("branch " + std::to_string(lap) + " has no preimage at step " + std::to_string(n + 1));
      w = std::move(*p);
      res.branches.push_back(lap_symbol(lap));
      res.orbit.push_back(w.x);
      res.diam.push_back(width(w, prec));
    }
  }

  std::vector<double> ly;
  for (const auto& d : res.diam) ly.push_back(log_abs(d));
  res.rho = -fit_rate(ly);
  if (depth > 0) res.rho_endpoint = -(ly.back() - ly.front()) / static_cast<double>(depth);
  if (!std::isfinite(res.rho)) res.rho = std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(res.rho_endpoint)) res.rho_endpoint = std::numeric_limits<double>::quiet_NaN();
  return res;
}

std::string pullback_csv(const PullbackResult& r) {
  std::ostringstream out;
  out << "n,diam_n\n";
  char buf[128];
  for (std::size_t n = 0; n < r.diam.size(); ++n) {
    mpfr_snprintf(buf, sizeof buf, "%.17Rg", r.diam[n].get());
    out << n << ',' << buf << '\n';
  }
  return out.str();
}

}  // namespace kneadlab
