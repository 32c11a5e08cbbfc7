#include "kneadlab/fastmap.hpp"

#include <algorithm>
#include <cmath>

#include "kneadlab/errors.hpp"

namespace kneadlab {

FastMap::FastMap(const BimodalMap& m) : map_(m), prec_(m.prec()), q_(m.critical_order()) {
  for (mpfr_prec_t p = 128; p < prec_; p *= 2) {
    Level lv{p, {}};
    for (const auto& c : m.coefficients()) {
      Real r(p);
      mpfr_set(r.get(), c.value().get(), MPFR_RNDN);
      lv.a.push_back(std::move(r));
    }
    levels_.push_back(std::move(lv));
  }
  Level top{prec_, {}};
  for (const auto& c : m.coefficients()) top.a.push_back(c.value());
  levels_.push_back(std::move(top));
  for (const auto& c : m.gamma_coefficients()) {
    da_.push_back(c.value());
    Real r(64);
    mpfr_set(r.get(), c.value().get(), MPFR_RNDN);
    da64_.push_back(std::move(r));
  }
  for (const auto& c : m.coefficients()) ad_.push_back(c.to_double());

  c1_ = m.c1().value();
  c2_ = m.c2().value();
  dc1_ = m.dc1_dgamma().value();
  dc2_ = m.dc2_dgamma().value();
  v_ = Real(prec_);
  gc1_ = Real(prec_);
  eval(c2_, v_);
  eval(c1_, gc1_);

  long qfact = 1;
  for (int i = 2; i <= q_; ++i) qfact *= i;
  BigReal k1 = poly_derivative(m.coefficients(), m.c1(), q_) / BigReal(qfact);
  BigReal k2 = poly_derivative(m.coefficients(), m.c2(), q_) / BigReal(qfact);
  kappa1_ = k1.value();
  kappa2_ = k2.value();
}

void FastMap::horner_d(const std::vector<Real>& a, const Real& x, Real& p, Real& dp) const {
  const int n = static_cast<int>(a.size()) - 1;
  mpfr_set(p.get(), a[n].get(), MPFR_RNDN);
  mpfr_set_zero(dp.get(), 1);
  for (int j = n - 1; j >= 0; --j) {
    mpfr_fma(dp.get(), dp.get(), x.get(), p.get(), MPFR_RNDN);
    mpfr_fma(p.get(), p.get(), x.get(), a[j].get(), MPFR_RNDN);
  }
}

void FastMap::eval(const Real& x, Real& gx) const {
  const auto& a = levels_.back().a;
  const int n = static_cast<int>(a.size()) - 1;
  if (gx.prec() != prec_) gx = Real(prec_);
  mpfr_set(gx.get(), a[n].get(), MPFR_RNDN);
  for (int j = n - 1; j >= 0; --j) mpfr_fma(gx.get(), gx.get(), x.get(), a[j].get(), MPFR_RNDN);
}

void FastMap::eval_d(const Real& x, Real& gx, Real& dgx) const {
  if (gx.prec() != prec_) gx = Real(prec_);
  if (dgx.prec() != prec_) dgx = Real(prec_);
  horner_d(levels_.back().a, x, gx, dgx);
}

void FastMap::eval_dg(const Real& x, Real& gx, Real& dgx, Real& dgam) const {
  eval_d(x, gx, dgx);
  if (dgam.prec() != prec_) dgam = Real(prec_);
  const int n = static_cast<int>(da_.size()) - 1;
  mpfr_set(dgam.get(), da_[n].get(), MPFR_RNDN);
  for (int j = n - 1; j >= 0; --j) mpfr_fma(dgam.get(), dgam.get(), x.get(), da_[j].get(), MPFR_RNDN);
}

void FastMap::dgamma_low(const Real& x, Real& out) const {
  Real xl(64);
  mpfr_set(xl.get(), x.get(), MPFR_RNDN);
  if (out.prec() != 64) out = Real(64);
  const int n = static_cast<int>(da64_.size()) - 1;
  mpfr_set(out.get(), da64_[n].get(), MPFR_RNDN);
  for (int j = n - 1; j >= 0; --j) mpfr_fma(out.get(), out.get(), xl.get(), da64_[j].get(), MPFR_RNDN);
}

void FastMap::dgamma_near(const Real& x, Real& out) const {
  Real e(prec_);
  long ex = 0;
  for (const Real* c : {&c1_, &c2_}) {
    mpfr_sub(e.get(), x.get(), c->get(), MPFR_RNDN);
    if (!e.is_zero()) ex = std::min(ex, static_cast<long>(mpfr_get_exp(e.get())));
  }
  // 1 is fixed for all parameters too
  mpfr_ui_sub(e.get(), 1, x.get(), MPFR_RNDN);
  if (!e.is_zero()) ex = std::min(ex, static_cast<long>(mpfr_get_exp(e.get())));
  if (ex > -24) {
    dgamma_low(x, out);
    return;
  }
  const mpfr_prec_t p = std::min<mpfr_prec_t>(prec_, 64 - ex + 64);
  Real acc(p);
  const int n = static_cast<int>(da_.size()) - 1;
  mpfr_set(acc.get(), da_[n].get(), MPFR_RNDN);
  for (int j = n - 1; j >= 0; --j) mpfr_fma(acc.get(), acc.get(), x.get(), da_[j].get(), MPFR_RNDN);
  if (out.prec() != 64) out = Real(64);
  mpfr_set(out.get(), acc.get(), MPFR_RNDN);
}

double FastMap::eval_double(double x, double* d) const {
  double p = ad_.back(), dp = 0.0;
  for (int j = static_cast<int>(ad_.size()) - 2; j >= 0; --j) {
    dp = dp * x + p;
    p = p * x + ad_[j];
  }
  if (d) *d = dp;
  return p;
}

// One Newton step at the level's precision; x is widened to that precision.
void FastMap::newton_level(const Level& lv, const Real& y, Real& x) const {
  if (x.prec() < lv.prec) x.set_prec(lv.prec);
  Real p(lv.prec), dp(lv.prec);
  horner_d(lv.a, x, p, dp);
  if (dp.is_zero()) return;
  mpfr_sub(p.get(), p.get(), y.get(), MPFR_RNDN);
  mpfr_div(p.get(), p.get(), dp.get(), MPFR_RNDN);
  mpfr_sub(x.get(), x.get(), p.get(), MPFR_RNDN);
}

Real FastMap::inverse(int lap, const Real& y, bool* clamped) const {
  if (clamped) *clamped = false;
  const bool increasing = lap != 2;
  Real lo(prec_), hi(prec_);
  switch (lap) {
    case 1: mpfr_set_zero(lo.get(), 1); mpfr_set(hi.get(), c1_.get(), MPFR_RNDN); break;
    case 2: mpfr_set(lo.get(), c1_.get(), MPFR_RNDN); mpfr_set(hi.get(), c2_.get(), MPFR_RNDN); break;
    case 3: mpfr_set(lo.get(), c2_.get(), MPFR_RNDN); mpfr_set_ui(hi.get(), 1, MPFR_RNDN); break;
    default: throw InvalidArgument("lap index must be 1, 2 or 3");
  }
  // branch image bounds
  Real bottom(prec_), top(prec_);
  if (lap == 1) {
    mpfr_set_zero(bottom.get(), 1);
    mpfr_set(top.get(), gc1_.get(), MPFR_RNDN);
  } else if (lap == 2) {
    mpfr_set(bottom.get(), v_.get(), MPFR_RNDN);
    mpfr_set(top.get(), gc1_.get(), MPFR_RNDN);
  } else {
    mpfr_set(bottom.get(), v_.get(), MPFR_RNDN);
    eval(hi, top);
  }
  auto clamp_to = [&](bool at_top) {
    if (clamped) *clamped = true;
    // increasing branch: top of the image comes from the right end
    bool right = increasing ? at_top : !at_top;
    return right ? hi : lo;
  };
  if (mpfr_cmp(y.get(), top.get()) >= 0) {
    if (mpfr_cmp(y.get(), top.get()) > 0 || lap != 3) return clamp_to(true);
  }
  if (mpfr_cmp(y.get(), bottom.get()) <= 0) {
    if (mpfr_cmp(y.get(), bottom.get()) < 0 || lap == 1) return clamp_to(false);
  }

  Real x(prec_);
  std::size_t start = 0;
  bool have_guess = false;
  // critical ends of this lap: c1 (value gc1, max) and/or c2 (value v, min)
  struct End {
    const Real* c;
    const Real* gc;
    const Real* kappa;
    int side;  // -1: lap lies left of c, +1: right
  };
  std::vector<End> ends;
  if (lap == 1) ends.push_back({&c1_, &gc1_, &kappa1_, -1});
  if (lap == 2) {
    ends.push_back({&c1_, &gc1_, &kappa1_, +1});
    ends.push_back({&c2_, &v_, &kappa2_, -1});
  }
  if (lap == 3) ends.push_back({&c2_, &v_, &kappa2_, +1});
  for (const End& e : ends) {
    Real dy(prec_);
    mpfr_sub(dy.get(), y.get(), e.gc->get(), MPFR_RNDN);
    if (dy.is_zero()) return *e.c;
    long ex = mpfr_get_exp(dy.get());
    if (ex >= -40) continue;
    Real t(prec_);
    mpfr_div(t.get(), dy.get(), e.kappa->get(), MPFR_RNDN);
    if (t.sgn() <= 0) {
      if (clamped) *clamped = true;
      return *e.c;
    }
    mpfr_rootn_ui(t.get(), t.get(), static_cast<unsigned long>(q_), MPFR_RNDN);
    if (e.side < 0) mpfr_neg(t.get(), t.get(), MPFR_RNDN);
    mpfr_add(x.get(), e.c->get(), t.get(), MPFR_RNDN);
    mpfr_prec_t need = static_cast<mpfr_prec_t>(q_) * static_cast<mpfr_prec_t>(-ex) + 128;
    while (start + 1 < levels_.size() && levels_[start].prec < need) ++start;
    have_guess = true;
    break;
  }
  if (!have_guess) {
    double a = lo.to_double(), b = hi.to_double(), yd = y.to_double();
    double xd = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
      double d = 0.0;
      double fx = eval_double(xd, &d) - yd;
      if (fx == 0.0) break;
      if ((fx > 0) == increasing) b = xd; else a = xd;
      double xn = (d != 0.0) ? xd - fx / d : 0.5 * (a + b);
      if (!(xn > a && xn < b)) xn = 0.5 * (a + b);
      if (std::fabs(xn - xd) <= 1e-17 * std::fmax(1.0, std::fabs(xd))) {
        xd = xn;
        break;
      }
      xd = xn;
      if (b - a <= 1e-16 * std::fmax(1.0, std::fabs(xd))) break;
    }
    mpfr_set_d(x.get(), xd, MPFR_RNDN);
    x.set_prec(levels_.front().prec);
    mpfr_set_d(x.get(), xd, MPFR_RNDN);
  }

  Real prev(prec_);
  for (std::size_t li = start; li < levels_.size(); ++li) {
    const Level& lv = levels_[li];
    const bool last = li + 1 == levels_.size();
    const int max_it = last ? 8 : 10;
    const long target = last ? -static_cast<long>(lv.prec) + 8 : -static_cast<long>(lv.prec) / 2;
    for (int it = 0; it < max_it; ++it) {
      if (x.prec() < lv.prec) x.set_prec(lv.prec);
      mpfr_set_prec(prev.get(), lv.prec);
      mpfr_set(prev.get(), x.get(), MPFR_RNDN);
      newton_level(lv, y, x);
      mpfr_sub(prev.get(), x.get(), prev.get(), MPFR_RNDN);
      if (prev.is_zero() || mpfr_get_exp(prev.get()) < target) break;
    }
  }
  if (x.prec() != prec_) x.set_prec(prec_);
  if (mpfr_cmp(x.get(), lo.get()) < 0) return lo;
  if (mpfr_cmp(x.get(), hi.get()) > 0) return hi;
  return x;
}

}  // namespace kneadlab
