#pragma once

#include <gmpxx.h>

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "kneadlab/numerics.hpp"

namespace kneadlab {

enum class Family { Cubic, Degree7 };

const char* family_name(Family f);  // "cubic" / "deg7"
Family parse_family(std::string_view s);

// Outer polynomial T of a family (T2 = x^3 - 3x, or the degree-7 odd T with
// T'(x) = (x^2-1)^3), exact rational coefficients, lowest degree first.
const std::vector<mpq_class>& outer_polynomial(Family f);
// y0 = T(-1) as an exact rational (2 for the cubic family, 16/35 for deg7).
mpq_class outer_top_value(Family f);
// Upper end of the parameter range (h or h').
BigReal parameter_bound(Family f);

struct FamilyModel;

// A member of one of the two families. Immutable after construction.
class BimodalMap {
 public:
  Family family() const { return family_; }
  const BigReal& gamma() const { return gamma_; }
  mpfr_prec_t prec() const { return prec_; }
  int degree() const { return static_cast<int>(coeffs_.size()) - 1; }
  // Local degree of both turning points (2 or 4).
  int critical_order() const { return family_ == Family::Cubic ? 2 : 4; }

  const BigReal& c1() const { return c1_; }
  const BigReal& c2() const { return c2_; }
  const BigReal& dc1_dgamma() const { return dc1_; }
  const BigReal& dc2_dgamma() const { return dc2_; }
  const BigReal& x0() const;
  const BigReal& y0() const;

  // g(x) = sum a_k x^k and d a_k / d gamma
  const std::vector<BigReal>& coefficients() const { return coeffs_; }
  const std::vector<BigReal>& gamma_coefficients() const { return dcoeffs_; }

  BigReal eval(const BigReal& x) const;
  BigReal deriv(const BigReal& x, int order = 1) const;
  // Value and first derivative in one pass, both enclosing the true values
  // over the whole enclosure of x.
  void eval_jet(const BigReal& x, BigReal& value, BigReal& derivative) const;
  // Partial derivative of g with respect to the parameter at fixed x.
  BigReal dgamma(const BigReal& x) const;
  // True when x lies outside [0,1] (evaluation still permitted).
  bool outside_domain(const BigReal& x) const;

 private:
  friend BimodalMap make_map(Family, const BigReal&, const PrecisionContext&);
  BimodalMap() = default;

  // Bound on sum_{k>=1} |g^(k+shift)(x)| (k+shift choose shift) e^k / ... used
  // for propagating the input error of x.
  Real propagation_bound(const BigReal& x, int shift) const;

  Family family_ = Family::Cubic;
  BigReal gamma_;
  mpfr_prec_t prec_ = 0;
  std::vector<BigReal> coeffs_;
  std::vector<BigReal> dcoeffs_;
  std::vector<Real> abs_coeff_up_;
  BigReal c1_, c2_, dc1_, dc2_;
  std::shared_ptr<const FamilyModel> model_;
};

BimodalMap make_map(Family family, const BigReal& gamma, const PrecisionContext& ctx);

// Sf = f'''/f' - (3/2)(f''/f')^2. Throws NearCritical when |f'(x)| is not
// certified above near_tol.
BigReal schwarzian(const BimodalMap& m, const BigReal& x, double near_tol = 1e-12);
// Same formula for an explicit polynomial (coefficients lowest degree first).
BigReal schwarzian_poly(const std::vector<BigReal>& coeffs, const BigReal& x, double near_tol = 1e-12);
// k-th derivative of an explicit polynomial at x (x treated as its value).
BigReal poly_derivative(const std::vector<BigReal>& coeffs, const BigReal& x, int order);

// x0: root of T(x) = 16/35 in (3/2, 2) at the requested precision (memoized).
BigReal degree7_x0(mpfr_prec_t prec);

}  // namespace kneadlab
