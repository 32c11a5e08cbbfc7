#pragma once

#include <vector>

#include "kneadlab/families.hpp"
#include "kneadlab/numerics.hpp"

namespace kneadlab {

// Value-only evaluation of a map at its working precision. Nothing here is
// certified: results serve as proposals that the certified layer checks.
class FastMap {
 public:
  explicit FastMap(const BimodalMap& m);

  mpfr_prec_t prec() const { return prec_; }
  const BimodalMap& map() const { return map_; }

  void eval(const Real& x, Real& gx) const;
  void eval_d(const Real& x, Real& gx, Real& dgx) const;
  // g(x), g'(x) and the parameter derivative of g at fixed x.
  void eval_dg(const Real& x, Real& gx, Real& dgx, Real& dgam) const;
  // Parameter derivative at 64 bits (x is rounded first).
  void dgamma_low(const Real& x, Real& out) const;
  // Parameter derivative rounded to 64 bits, evaluated at enough precision to
  // resolve x near c1, c2 or 1 (it vanishes at c1 and at 1, whose images do
  // not move with the parameter).
  void dgamma_near(const Real& x, Real& out) const;

  const Real& c1() const { return c1_; }
  const Real& c2() const { return c2_; }
  const Real& v() const { return v_; }  // g(c2)
  const Real& dc1() const { return dc1_; }
  const Real& dc2() const { return dc2_; }
  const Real& critical(int j) const { return j == 1 ? c1_ : c2_; }

  // Point of lap `lap` (1..3) with g(x) = y. When y lies outside the branch
  // image the nearest lap end is returned and *clamped is set.
  Real inverse(int lap, const Real& y, bool* clamped = nullptr) const;

 private:
  struct Level {
    mpfr_prec_t prec;
    std::vector<Real> a;
  };
  void horner_d(const std::vector<Real>& a, const Real& x, Real& p, Real& dp) const;
  double eval_double(double x, double* d) const;
  void newton_level(const Level& lv, const Real& y, Real& x) const;

  BimodalMap map_;
  mpfr_prec_t prec_;
  std::vector<Level> levels_;
  std::vector<Real> da_, da64_;
  std::vector<double> ad_;
  Real c1_, c2_, v_, gc1_, dc1_, dc2_;
  Real kappa1_, kappa2_;  // leading Taylor coefficients at c1, c2
  int q_;
};

}  // namespace kneadlab
