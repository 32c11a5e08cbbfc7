#include "kneadlab/families.hpp"

#include <algorithm>
#include <map>
#include <mutex>

#include "kneadlab/errors.hpp"

namespace kneadlab {

using GammaPoly = std::vector<BigReal>;  // polynomial in the parameter

struct FamilyModel {
  Family family;
  mpfr_prec_t prec;
  std::vector<GammaPoly> numer;  // numer[k]: coefficient of x^k before dividing by denom
  GammaPoly denom;
  BigReal s0, b0;  // inner affine map x -> (s0 + g) x + (b0 - g)
  BigReal x0, y0;
};

namespace {

mpfr_prec_t round_prec(mpfr_prec_t p) { return ((p + 63) / 64) * 64; }

BigReal from_mpq(const mpq_class& q, mpfr_prec_t prec) {
  if (q.get_den() == 1) {
    Real v(std::max<mpfr_prec_t>(prec, static_cast<mpfr_prec_t>(mpz_sizeinbase(q.get_num_mpz_t(), 2))));
    mpfr_set_z(v.get(), q.get_num_mpz_t(), MPFR_RNDN);
    return BigReal::exact(v);
  }
  std::string s = q.get_str();
  return BigReal::parse(s, prec);
}

GammaPoly poly_add(const GammaPoly& a, const GammaPoly& b) {
  GammaPoly r(std::max(a.size(), b.size()), BigReal(0));
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = r[i] + a[i];
  for (std::size_t i = 0; i < b.size(); ++i) r[i] = r[i] + b[i];
  return r;
}

GammaPoly poly_mul(const GammaPoly& a, const GammaPoly& b) {
  GammaPoly r(a.size() + b.size() - 1, BigReal(0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] = r[i + j] + a[i] * b[j];
  return r;
}

GammaPoly poly_scale(const GammaPoly& a, const BigReal& c) {
  GammaPoly r;
  r.reserve(a.size());
  for (const auto& x : a) r.push_back(x * c);
  return r;
}

// Value and derivative of a polynomial in the parameter.
void poly_eval(const GammaPoly& p, const BigReal& g, BigReal& value, BigReal& deriv) {
  value = p.back();
  deriv = BigReal(0);
  for (std::size_t i = p.size() - 1; i-- > 0;) {
    deriv = deriv * g + value;
    value = value * g + p[i];
  }
}

long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

long falling(int n, int k) {  // n (n-1) ... (n-k+1)
  long r = 1;
  for (int i = 0; i < k; ++i) r *= (n - i);
  return r;
}

std::shared_ptr<const FamilyModel> build_model(Family family, mpfr_prec_t prec) {
  auto m = std::make_shared<FamilyModel>();
  m->family = family;
  m->prec = prec;
  const auto& tq = outer_polynomial(family);
  std::vector<BigReal> t;
  for (const auto& q : tq) t.push_back(from_mpq(q, prec));
  if (family == Family::Cubic) {
    m->x0 = BigReal(2, prec);
    m->y0 = BigReal(2, prec);
    m->s0 = BigReal(4, prec);
    m->b0 = BigReal(-2, prec);
  } else {
    m->x0 = degree7_x0(prec);
    m->y0 = from_mpq(outer_top_value(family), prec);
    m->s0 = m->x0.mul_2si(1);
    m->b0 = -m->x0;
  }
  const int deg = static_cast<int>(t.size()) - 1;
  GammaPoly s{m->s0, BigReal(1)};
  GammaPoly b{m->b0, BigReal(-1)};
  std::vector<GammaPoly> bpow{GammaPoly{BigReal(1)}};
  std::vector<GammaPoly> spow{GammaPoly{BigReal(1)}};
  for (int i = 1; i <= deg; ++i) {
    bpow.push_back(poly_mul(bpow.back(), b));
    spow.push_back(poly_mul(spow.back(), s));
  }
  m->numer.assign(deg + 1, GammaPoly{BigReal(0)});
  for (int k = 1; k <= deg; ++k) {
    GammaPoly inner{BigReal(0)};
    for (int j = k; j <= deg; ++j) {
      if (t[j].value().is_zero()) continue;
      BigReal c = t[j] * BigReal(binomial(j, k));
      inner = poly_add(inner, poly_scale(bpow[j - k], c));
    }
    m->numer[k] = poly_mul(spow[k], inner);
  }
  GammaPoly tb{BigReal(0)};
  for (int j = 0; j <= deg; ++j)
    if (!t[j].value().is_zero()) tb = poly_add(tb, poly_scale(bpow[j], t[j]));
  m->denom = poly_add(GammaPoly{from_mpq(outer_top_value(family), prec)}, poly_scale(tb, BigReal(-1)));
  return m;
}

std::shared_ptr<const FamilyModel> get_model(Family family, mpfr_prec_t prec) {
  static std::mutex mu;
  static std::map<std::pair<int, mpfr_prec_t>, std::shared_ptr<const FamilyModel>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(static_cast<int>(family), prec);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto m = build_model(family, prec);
  cache.emplace(key, m);
  return m;
}

// Horner evaluation of the order-th derivative at the exact point x.
BigReal horner_derivative(const std::vector<BigReal>& a, const BigReal& x, int order) {
  const int n = static_cast<int>(a.size()) - 1;
  if (order > n) return BigReal(0);
  BigReal r = a[n] * BigReal(falling(n, order));
  for (int j = n - 1; j >= order; --j) {
    BigReal c = order == 0 ? a[j] : a[j] * BigReal(falling(j, order));
    r = r * x + c;
  }
  return r;
}

// Upper bound of |p^(k)(x)| / k! from coefficient magnitudes, X >= |x|.
Real coefficient_bound(const std::vector<Real>& abs_up, const Real& X, int k) {
  const int n = static_cast<int>(abs_up.size()) - 1;
  Real r(kErrPrec);
  for (int j = n; j >= k; --j) {
    mpfr_mul(r.get(), r.get(), X.get(), MPFR_RNDU);
    Real term(kErrPrec);
    mpfr_mul_ui(term.get(), abs_up[j].get(), static_cast<unsigned long>(binomial(j, k)), MPFR_RNDU);
    mpfr_add(r.get(), r.get(), term.get(), MPFR_RNDU);
  }
  return r;
}

std::vector<Real> abs_upper(const std::vector<BigReal>& a) {
  std::vector<Real> out;
  for (const auto& c : a) {
    Real r(kErrPrec);
    mpfr_abs(r.get(), c.value().get(), MPFR_RNDU);
    mpfr_add(r.get(), r.get(), c.err().get(), MPFR_RNDU);
    out.push_back(std::move(r));
  }
  return out;
}

// sum_{k >= kmin} (shift+k)!/k! * B_{shift+k} * e^k, bounding the change of the
// shift-th derivative of the polynomial over [x-e, x+e].
Real taylor_tail(const std::vector<Real>& abs_up, const BigReal& x, int shift, int kmin) {
  Real total(kErrPrec);
  if (x.err().is_zero()) return total;
  const int n = static_cast<int>(abs_up.size()) - 1;
  Real X(kErrPrec);
  mpfr_abs(X.get(), x.value().get(), MPFR_RNDU);
  Real ek(kErrPrec);
  mpfr_set_ui(ek.get(), 1, MPFR_RNDU);
  for (int k = 1; shift + k <= n; ++k) {
    mpfr_mul(ek.get(), ek.get(), x.err().get(), MPFR_RNDU);
    if (k < kmin) continue;
    Real term = coefficient_bound(abs_up, X, shift + k);
    mpfr_mul_ui(term.get(), term.get(), static_cast<unsigned long>(falling(shift + k, shift)), MPFR_RNDU);
    mpfr_mul(term.get(), term.get(), ek.get(), MPFR_RNDU);
    mpfr_add(total.get(), total.get(), term.get(), MPFR_RNDU);
  }
  return total;
}

}  // namespace

const char* family_name(Family f) { return f == Family::Cubic ? "cubic" : "deg7"; }

Family parse_family(std::string_view s) {
  if (s == "cubic") return Family::Cubic;
  if (s == "deg7" || s == "degree7") return Family::Degree7;
  throw InvalidArgument("unknown family '" + std::string(s) + "' (expected cubic or deg7)");
}

const std::vector<mpq_class>& outer_polynomial(Family f) {
  static const std::vector<mpq_class> t2{0, -3, 0, 1};
  static const std::vector<mpq_class> t7{0, -1, 0, 1, 0, mpq_class(-3, 5), 0, mpq_class(1, 7)};
  return f == Family::Cubic ? t2 : t7;
}

mpq_class outer_top_value(Family f) {
  const auto& t = outer_polynomial(f);
  if (f == Family::Cubic) return mpq_class(2);
  // y0 = T(-1)
  mpq_class v = 0, p = 1;
  for (const auto& c : t) {
    v += c * p;
    p *= -1;
  }
  v.canonicalize();
  return v;
}

BigReal parameter_bound(Family) { return BigReal::rational(1, 64, 64); }

BigReal degree7_x0(mpfr_prec_t prec) {
  static std::mutex mu;
  static std::map<mpfr_prec_t, BigReal> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(prec);
    if (it != cache.end()) return it->second;
  }
  const mpfr_prec_t work = prec + 64;
  std::vector<BigReal> t;
  for (const auto& q : outer_polynomial(Family::Degree7)) t.push_back(from_mpq(q, work));
  const BigReal y0 = from_mpq(outer_top_value(Family::Degree7), work);
  SmoothFunction f = [&](const BigReal& x, mpfr_prec_t) {
    return std::make_pair(horner_derivative(t, x, 0) - y0, horner_derivative(t, x, 1));
  };
  Real tol(64);
  mpfr_set_ui_2exp(tol.get(), 1, -static_cast<long>(prec) - 16, MPFR_RNDN);
  RootBracket br = refine_root(f, BigReal::rational(3, 2, 64), BigReal(2), BigReal::exact(tol),
                               PrecisionContext(work, 2, 2));
  BigReal x0 = br.enclosure();
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(prec, x0);
  return x0;
}

BimodalMap make_map(Family family, const BigReal& gamma, const PrecisionContext& ctx) {
  BigReal h = parameter_bound(family);
  if (gamma.value().sgn() < 0 || mpfr_cmp(gamma.value().get(), h.value().get()) > 0)
    throw ParamOutOfRange(std::string("parameter ") + gamma.decimal() + " outside [0, " + h.decimal() +
                          "] for family " + family_name(family));
  BimodalMap m;
  m.family_ = family;
  m.prec_ = round_prec(std::max(ctx.bits, gamma.prec()));
  m.gamma_ = gamma;
  m.model_ = get_model(family, m.prec_);
  const FamilyModel& fm = *m.model_;
  BigReal g = gamma.prec() < m.prec_ ? gamma.at_prec(m.prec_) : gamma;

  BigReal D, dD;
  poly_eval(fm.denom, g, D, dD);
  const std::size_t n = fm.numer.size();
  m.coeffs_.resize(n);
  m.dcoeffs_.resize(n);
  BigReal D2 = D * D;
  for (std::size_t k = 0; k < n; ++k) {
    if (k == 0) {
      m.coeffs_[0] = BigReal(0, m.prec_);
      m.dcoeffs_[0] = BigReal(0, m.prec_);
      continue;
    }
    BigReal N, dN;
    poly_eval(fm.numer[k], g, N, dN);
    m.coeffs_[k] = N / D;
    m.dcoeffs_[k] = (dN * D - N * dD) / D2;
  }
  m.abs_coeff_up_ = abs_upper(m.coeffs_);

  BigReal s = fm.s0 + g;
  BigReal b = fm.b0 - g;
  m.c1_ = (BigReal(-1) - b) / s;
  m.c2_ = (BigReal(1) - b) / s;
  BigReal s2 = s * s;
  m.dc1_ = (fm.s0 + fm.b0 + BigReal(1)) / s2;
  m.dc2_ = (fm.s0 + fm.b0 - BigReal(1)) / s2;
  return m;
}

const BigReal& BimodalMap::x0() const { return model_->x0; }
const BigReal& BimodalMap::y0() const { return model_->y0; }

bool BimodalMap::outside_domain(const BigReal& x) const {
  return x.value().sgn() < 0 || mpfr_cmp_ui(x.value().get(), 1) > 0;
}

BigReal BimodalMap::eval(const BigReal& x) const {
  BigReal xe = BigReal::exact(x.value());
  BigReal v = horner_derivative(coeffs_, xe, 0);
  if (x.err().is_zero()) return v;
  BigReal d1 = horner_derivative(coeffs_, xe, 1);
  Real e(kErrPrec);
  mpfr_abs(e.get(), d1.value().get(), MPFR_RNDU);
  mpfr_add(e.get(), e.get(), d1.err().get(), MPFR_RNDU);
  mpfr_mul(e.get(), e.get(), x.err().get(), MPFR_RNDU);
  Real tail = taylor_tail(abs_coeff_up_, x, 0, 2);
  mpfr_add(e.get(), e.get(), tail.get(), MPFR_RNDU);
  return v.widened(e);
}

BigReal BimodalMap::deriv(const BigReal& x, int order) const {
  if (order < 1) throw InvalidArgument("derivative order must be >= 1");
  BigReal xe = BigReal::exact(x.value());
  BigReal v = horner_derivative(coeffs_, xe, order);
  if (x.err().is_zero()) return v;
  return v.widened(taylor_tail(abs_coeff_up_, x, order, 1));
}

void BimodalMap::eval_jet(const BigReal& x, BigReal& value, BigReal& derivative) const {
  BigReal xe = BigReal::exact(x.value());
  // joint Horner for p and p'
  const int n = degree();
  BigReal p = coeffs_[n];
  BigReal dp(0, prec_);
  for (int j = n - 1; j >= 0; --j) {
    dp = dp * xe + p;
    p = p * xe + coeffs_[j];
  }
  if (!x.err().is_zero()) {
    Real e(kErrPrec);
    mpfr_abs(e.get(), dp.value().get(), MPFR_RNDU);
    mpfr_add(e.get(), e.get(), dp.err().get(), MPFR_RNDU);
    mpfr_mul(e.get(), e.get(), x.err().get(), MPFR_RNDU);
    Real tail = taylor_tail(abs_coeff_up_, x, 0, 2);
    mpfr_add(e.get(), e.get(), tail.get(), MPFR_RNDU);
    value = p.widened(e);
    derivative = dp.widened(taylor_tail(abs_coeff_up_, x, 1, 1));
  } else {
    value = std::move(p);
    derivative = std::move(dp);
  }
}

BigReal BimodalMap::dgamma(const BigReal& x) const {
  BigReal xe = BigReal::exact(x.value());
  BigReal v = horner_derivative(dcoeffs_, xe, 0);
  if (x.err().is_zero()) return v;
  return v.widened(taylor_tail(abs_upper(dcoeffs_), x, 0, 1));
}

BigReal poly_derivative(const std::vector<BigReal>& coeffs, const BigReal& x, int order) {
  return horner_derivative(coeffs, BigReal::exact(x.value()), order);
}

namespace {

BigReal schwarzian_from(const BigReal& d1, const BigReal& d2, const BigReal& d3, double near_tol) {
  BigReal lo = min_abs_bound(d1);
  if (lo.to_double() <= near_tol) throw NearCritical("Schwarzian requested too close to a critical point");
  BigReal q = d2 / d1;
  return d3 / d1 - BigReal::rational(3, 2, 64) * q * q;
}

}  // namespace

BigReal schwarzian(const BimodalMap& m, const BigReal& x, double near_tol) {
  return schwarzian_from(m.deriv(x, 1), m.deriv(x, 2), m.deriv(x, 3), near_tol);
}

BigReal schwarzian_poly(const std::vector<BigReal>& coeffs, const BigReal& x, double near_tol) {
  return schwarzian_from(poly_derivative(coeffs, x, 1), poly_derivative(coeffs, x, 2),
                         poly_derivative(coeffs, x, 3), near_tol);
}

}  // namespace kneadlab
