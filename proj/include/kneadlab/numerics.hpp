#pragma once

#include <mpfr.h>

#include <functional>
#include <string>
#include <string_view>
#include <utility>

namespace kneadlab {

// Owning handle for a single mpfr_t.
class Real {
 public:
  explicit Real(mpfr_prec_t prec = 64);
  Real(long v, mpfr_prec_t prec);
  Real(const Real& o);
  Real(Real&& o) noexcept;
  Real& operator=(const Real& o);
  Real& operator=(Real&& o) noexcept;
  ~Real();

  mpfr_ptr get() { return v_; }
  mpfr_srcptr get() const { return v_; }
  mpfr_prec_t prec() const { return mpfr_get_prec(v_); }
  void set_prec(mpfr_prec_t p);  // keeps the value, rounded to nearest
  double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
  bool is_zero() const { return mpfr_zero_p(v_) != 0; }
  int sgn() const { return mpfr_sgn(v_); }

 private:
  mpfr_t v_;
};

// Precision used for error bounds. Error terms are always rounded upward.
inline constexpr mpfr_prec_t kErrPrec = 64;

// A real number known to lie in [value - err, value + err].
class BigReal {
 public:
  BigReal();
  BigReal(long v, mpfr_prec_t prec = 64);  // NOLINT: exact integers convert freely
  BigReal(Real value, Real err);

  static BigReal exact(const Real& v);
  static BigReal exact(mpfr_srcptr v);
  static BigReal from_double(double d);
  // num/den rounded to prec; exact (err 0) when the quotient is dyadic.
  static BigReal rational(long num, long den, mpfr_prec_t prec);
  // Decimal ("0.015625", "-1.5e-3") or fraction ("3/1024"). Dyadic inputs
  // are stored exactly, widening the precision beyond prec if required.
  static BigReal parse(std::string_view text, mpfr_prec_t prec);

  const Real& value() const { return value_; }
  const Real& err() const { return err_; }
  mpfr_prec_t prec() const { return value_.prec(); }
  bool is_exact() const { return err_.is_zero(); }
  double to_double() const { return value_.to_double(); }
  double err_double() const { return err_.to_double(); }

  // Same number carried at another precision (rounding adds to err).
  BigReal at_prec(mpfr_prec_t p) const;
  // err enlarged by e (e >= 0).
  BigReal widened(const Real& e) const;
  BigReal widened(double e) const;

  // Exact decimal expansion of value (values are dyadic, so this terminates).
  std::string decimal() const;
  std::string err_decimal() const;

  BigReal operator-() const;
  friend BigReal operator+(const BigReal& a, const BigReal& b);
  friend BigReal operator-(const BigReal& a, const BigReal& b);
  friend BigReal operator*(const BigReal& a, const BigReal& b);
  friend BigReal operator/(const BigReal& a, const BigReal& b);
  BigReal& operator+=(const BigReal& b) { return *this = *this + b; }
  BigReal& operator-=(const BigReal& b) { return *this = *this - b; }
  BigReal& operator*=(const BigReal& b) { return *this = *this * b; }

  BigReal mul_2si(long k) const;  // exact scaling by 2^k

 private:
  Real value_;
  Real err_;
};

BigReal abs(const BigReal& x);
BigReal sqrt(const BigReal& x);
BigReal log(const BigReal& x);  // requires x certified positive
BigReal pow(const BigReal& x, unsigned long n);
BigReal min_abs_bound(const BigReal& x);  // lower bound of |x| (>= 0)

enum class Sign { Negative = -1, Zero = 0, Positive = 1, Undecidable = 2 };

Sign certified_sign(const BigReal& x);
const char* to_string(Sign s);
inline bool decided(Sign s) { return s != Sign::Undecidable; }

// Certified comparisons: true only when the relation holds for every pair of
// points in the two enclosures.
bool certainly_less(const BigReal& a, const BigReal& b);
bool certainly_greater(const BigReal& a, const BigReal& b);

// log|x| of the value as a double, valid far outside the double exponent
// range; -inf for zero.
double log_abs(const Real& x);
double log_abs(const BigReal& x);
// Rigorous-ish double bounds of log|x| over the enclosure (lower may be -inf).
std::pair<double, double> log_abs_bounds(const BigReal& x);

// Exact decimal of a dyadic mpfr value.
std::string dyadic_decimal(mpfr_srcptr v);
// Precision-escalation policy.
struct PrecisionContext {
  mpfr_prec_t initial_bits = 256;
  mpfr_prec_t bits = 256;
  int escalation_factor = 2;
  int max_escalations = 4;
  int escalations = 0;

  explicit PrecisionContext(mpfr_prec_t b = 256, int factor = 2, int max_esc = 4);
  bool can_escalate() const { return escalations < max_escalations; }
  PrecisionContext escalated() const;
  PrecisionContext with_floor(mpfr_prec_t min_bits) const;
  // Honors KNEADLAB_PRECISION when set.
  static PrecisionContext from_env(mpfr_prec_t fallback = 256);
};

// Function evaluated at x with at least `bits` of working precision.
using RealFunction = std::function<BigReal(const BigReal& x, mpfr_prec_t bits)>;
// Same, also returning the derivative (used only to propose points).
using SmoothFunction =
    std::function<std::pair<BigReal, BigReal>(const BigReal& x, mpfr_prec_t bits)>;

struct RootBracket {
  Real lo, hi;  // exact endpoints
  Sign sign_lo = Sign::Undecidable;
  Sign sign_hi = Sign::Undecidable;
  int iterations = 0;
  mpfr_prec_t bits_used = 0;

  // Midpoint with err = half width.
  BigReal enclosure() const;
  double width() const;
};

// Certified bisection. Endpoints are taken as exact points (their value).
RootBracket bisect_bracket(const RealFunction& f, const BigReal& a, const BigReal& b,
                           const BigReal& tol, const PrecisionContext& ctx);
BigReal bisect(const RealFunction& f, const BigReal& a, const BigReal& b, const BigReal& tol,
               const PrecisionContext& ctx);

// Bracketing root refinement: Newton proposals inside a certified sign bracket,
// bisection whenever a proposal is unusable. The first probe is the midpoint.
// When inexact inputs blur f by more than tol, the certified bracket reached
// so far is returned.
RootBracket refine_root(const SmoothFunction& f, const BigReal& a, const BigReal& b,
                        const BigReal& tol, const PrecisionContext& ctx);

// Exact midpoint of two dyadics.
Real exact_midpoint(const Real& a, const Real& b);

}  // namespace kneadlab
