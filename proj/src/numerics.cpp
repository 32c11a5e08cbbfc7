#include "kneadlab/numerics.hpp"

#include <gmp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

#include "kneadlab/errors.hpp"

namespace kneadlab {

// ---------------------------------------------------------------------------
// Real

Real::Real(mpfr_prec_t prec) {
  mpfr_init2(v_, prec);
  mpfr_set_zero(v_, 1);
}

Real::Real(long v, mpfr_prec_t prec) {
  mpfr_init2(v_, prec);
  mpfr_set_si(v_, v, MPFR_RNDN);
}

Real::Real(const Real& o) {
  mpfr_init2(v_, o.prec());
  mpfr_set(v_, o.v_, MPFR_RNDN);
}

Real::Real(Real&& o) noexcept {
  mpfr_init2(v_, MPFR_PREC_MIN);
  mpfr_swap(v_, o.v_);
}

Real& Real::operator=(const Real& o) {
  if (this != &o) {
    mpfr_set_prec(v_, o.prec());
    mpfr_set(v_, o.v_, MPFR_RNDN);
  }
  return *this;
}

Real& Real::operator=(Real&& o) noexcept {
  mpfr_swap(v_, o.v_);
  return *this;
}

Real::~Real() { mpfr_clear(v_); }

void Real::set_prec(mpfr_prec_t p) { mpfr_prec_round(v_, p, MPFR_RNDN); }

// ---------------------------------------------------------------------------
// error-term helpers

namespace {

Real abs_up(mpfr_srcptr x) {
  Real r(kErrPrec);
  mpfr_abs(r.get(), x, MPFR_RNDU);
  return r;
}

Real abs_down(mpfr_srcptr x) {
  Real r(kErrPrec);
  mpfr_abs(r.get(), x, MPFR_RNDD);
  return r;
}

// Upper bound for the rounding error of a result computed with ternary t.
void add_ulp(Real& e, mpfr_srcptr result, int ternary) {
  if (ternary == 0 || mpfr_zero_p(result)) return;
  Real u(kErrPrec);
  mpfr_set_ui_2exp(u.get(), 1, mpfr_get_exp(result) - mpfr_get_prec(result), MPFR_RNDU);
  mpfr_add(e.get(), e.get(), u.get(), MPFR_RNDU);
}

Real zero_err() { return Real(kErrPrec); }

bool is_power_of_two(const mpz_t z) { return mpz_sgn(z) > 0 && mpz_popcount(z) == 1; }

BigReal from_rational(mpq_t q, mpfr_prec_t prec) {
  mpq_canonicalize(q);
  if (is_power_of_two(mpq_denref(q))) {
    long k = static_cast<long>(mpz_sizeinbase(mpq_denref(q), 2)) - 1;
    mpfr_prec_t need = static_cast<mpfr_prec_t>(mpz_sizeinbase(mpq_numref(q), 2));
    Real v(std::max<mpfr_prec_t>(prec, std::max<mpfr_prec_t>(need, 2)));
    mpfr_set_z(v.get(), mpq_numref(q), MPFR_RNDN);
    mpfr_div_2si(v.get(), v.get(), k, MPFR_RNDN);
    return BigReal(std::move(v), zero_err());
  }
  Real v(prec);
  int t = mpfr_set_q(v.get(), q, MPFR_RNDN);
  Real e = zero_err();
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

bool all_digits(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(),
                                   [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

// ---------------------------------------------------------------------------
// BigReal

BigReal::BigReal() : value_(64), err_(kErrPrec) {}

BigReal::BigReal(long v, mpfr_prec_t prec) : value_(v, std::max<mpfr_prec_t>(prec, 64)), err_(kErrPrec) {}

BigReal::BigReal(Real value, Real err) : value_(std::move(value)), err_(std::move(err)) {}

BigReal BigReal::exact(const Real& v) { return BigReal(v, zero_err()); }

BigReal BigReal::exact(mpfr_srcptr v) {
  Real r(mpfr_get_prec(v));
  mpfr_set(r.get(), v, MPFR_RNDN);
  return BigReal(std::move(r), zero_err());
}

BigReal BigReal::from_double(double d) {
  Real r(53);
  mpfr_set_d(r.get(), d, MPFR_RNDN);
  return BigReal(std::move(r), zero_err());
}

BigReal BigReal::rational(long num, long den, mpfr_prec_t prec) {
  if (den == 0) throw InvalidArgument("rational with zero denominator");
  mpq_t q;
  mpq_init(q);
  mpq_set_si(q, num, 1);
  mpz_set_si(mpq_denref(q), den);
  if (den < 0) {
    mpz_neg(mpq_denref(q), mpq_denref(q));
    mpz_neg(mpq_numref(q), mpq_numref(q));
  }
  BigReal r = from_rational(q, prec);
  mpq_clear(q);
  return r;
}

BigReal BigReal::parse(std::string_view text, mpfr_prec_t prec) {
  std::string s = trim(text);
  if (s.empty()) throw InvalidArgument("empty number");
  mpq_t q;
  mpq_init(q);
  auto fail = [&]() {
    mpq_clear(q);
    throw InvalidArgument("malformed number: '" + s + "'");
  };
  auto slash = s.find('/');
  if (slash != std::string::npos) {
    std::string a = trim(s.substr(0, slash));
    std::string b = trim(s.substr(slash + 1));
    bool neg = !a.empty() && (a[0] == '-' || a[0] == '+');
    std::string ad = neg ? a.substr(1) : a;
    if (!all_digits(ad) || !all_digits(b)) fail();
    mpz_set_str(mpq_numref(q), ad.c_str(), 10);
    if (a[0] == '-') mpz_neg(mpq_numref(q), mpq_numref(q));
    mpz_set_str(mpq_denref(q), b.c_str(), 10);
    if (mpz_sgn(mpq_denref(q)) == 0) fail();
  } else {
    std::size_t i = 0;
    bool neg = false;
    if (s[i] == '+' || s[i] == '-') neg = (s[i++] == '-');
    std::string ip, fp;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ip += s[i++];
    if (i < s.size() && s[i] == '.') {
      ++i;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) fp += s[i++];
    }
    long ex = 0;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
      ++i;
      std::string es;
      if (i < s.size() && (s[i] == '+' || s[i] == '-')) es += s[i++];
      std::string digits;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) digits += s[i++];
      if (digits.empty()) fail();
      ex = std::stol(es + digits);
    }
    if (i != s.size() || (ip.empty() && fp.empty())) fail();
    std::string all = ip + fp;
    mpz_set_str(mpq_numref(q), all.c_str(), 10);
    if (neg) mpz_neg(mpq_numref(q), mpq_numref(q));
    long scale = static_cast<long>(fp.size()) - ex;
    if (scale >= 0) {
      mpz_ui_pow_ui(mpq_denref(q), 10, static_cast<unsigned long>(scale));
    } else {
      mpz_t f;
      mpz_init(f);
      mpz_ui_pow_ui(f, 10, static_cast<unsigned long>(-scale));
      mpz_mul(mpq_numref(q), mpq_numref(q), f);
      mpz_clear(f);
      mpz_set_ui(mpq_denref(q), 1);
    }
  }
  BigReal r = from_rational(q, prec);
  mpq_clear(q);
  return r;
}

BigReal BigReal::at_prec(mpfr_prec_t p) const {
  Real v(p);
  int t = mpfr_set(v.get(), value_.get(), MPFR_RNDN);
  Real e = err_;
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

BigReal BigReal::widened(const Real& e) const {
  Real ne = err_;
  Real a = abs_up(e.get());
  mpfr_add(ne.get(), ne.get(), a.get(), MPFR_RNDU);
  return BigReal(value_, std::move(ne));
}

BigReal BigReal::widened(double e) const {
  Real r(kErrPrec);
  mpfr_set_d(r.get(), std::fabs(e), MPFR_RNDU);
  return widened(r);
}

std::string BigReal::decimal() const { return dyadic_decimal(value_.get()); }
std::string BigReal::err_decimal() const { return dyadic_decimal(err_.get()); }

BigReal BigReal::operator-() const {
  Real v(prec());
  mpfr_neg(v.get(), value_.get(), MPFR_RNDN);
  return BigReal(std::move(v), err_);
}

BigReal operator+(const BigReal& a, const BigReal& b) {
  Real v(std::max(a.prec(), b.prec()));
  int t = mpfr_add(v.get(), a.value_.get(), b.value_.get(), MPFR_RNDN);
  Real e(kErrPrec);
  mpfr_add(e.get(), a.err_.get(), b.err_.get(), MPFR_RNDU);
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

BigReal operator-(const BigReal& a, const BigReal& b) {
  Real v(std::max(a.prec(), b.prec()));
  int t = mpfr_sub(v.get(), a.value_.get(), b.value_.get(), MPFR_RNDN);
  Real e(kErrPrec);
  mpfr_add(e.get(), a.err_.get(), b.err_.get(), MPFR_RNDU);
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

BigReal operator*(const BigReal& a, const BigReal& b) {
  Real v(std::max(a.prec(), b.prec()));
  int t = mpfr_mul(v.get(), a.value_.get(), b.value_.get(), MPFR_RNDN);
  Real e(kErrPrec);
  if (!a.err_.is_zero() || !b.err_.is_zero()) {
    Real aa = abs_up(a.value_.get());
    Real bb = abs_up(b.value_.get());
    Real tmp(kErrPrec);
    mpfr_mul(e.get(), aa.get(), b.err_.get(), MPFR_RNDU);
    mpfr_mul(tmp.get(), bb.get(), a.err_.get(), MPFR_RNDU);
    mpfr_add(e.get(), e.get(), tmp.get(), MPFR_RNDU);
    mpfr_mul(tmp.get(), a.err_.get(), b.err_.get(), MPFR_RNDU);
    mpfr_add(e.get(), e.get(), tmp.get(), MPFR_RNDU);
  }
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

BigReal operator/(const BigReal& a, const BigReal& b) {
  Real bl = abs_down(b.value_.get());
  mpfr_sub(bl.get(), bl.get(), b.err_.get(), MPFR_RNDD);
  if (mpfr_sgn(bl.get()) <= 0) throw Error("division by an enclosure that contains zero");
  Real v(std::max(a.prec(), b.prec()));
  int t = mpfr_div(v.get(), a.value_.get(), b.value_.get(), MPFR_RNDN);
  Real e(kErrPrec);
  if (!a.err_.is_zero() || !b.err_.is_zero()) {
    // |a/b - a'/b'| <= (ea|b| + |a|eb) / (|b| (|b| - eb))
    Real aa = abs_up(a.value_.get());
    Real bb = abs_up(b.value_.get());
    Real tmp(kErrPrec);
    mpfr_mul(e.get(), a.err_.get(), bb.get(), MPFR_RNDU);
    mpfr_mul(tmp.get(), aa.get(), b.err_.get(), MPFR_RNDU);
    mpfr_add(e.get(), e.get(), tmp.get(), MPFR_RNDU);
    Real den = abs_down(b.value_.get());
    mpfr_mul(den.get(), den.get(), bl.get(), MPFR_RNDD);
    mpfr_div(e.get(), e.get(), den.get(), MPFR_RNDU);
  }
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

BigReal BigReal::mul_2si(long k) const {
  Real v(prec());
  mpfr_mul_2si(v.get(), value_.get(), k, MPFR_RNDN);
  Real e(kErrPrec);
  mpfr_mul_2si(e.get(), err_.get(), k, MPFR_RNDU);
  return BigReal(std::move(v), std::move(e));
}

BigReal abs(const BigReal& x) {
  Real v(x.prec());
  mpfr_abs(v.get(), x.value().get(), MPFR_RNDN);
  return BigReal(std::move(v), x.err());
}

BigReal sqrt(const BigReal& x) {
  Real lo(kErrPrec);
  mpfr_sub(lo.get(), x.value().get(), x.err().get(), MPFR_RNDD);
  if (mpfr_sgn(x.value().get()) < 0 && mpfr_sgn(lo.get()) < 0) {
    Real hi(kErrPrec);
    mpfr_add(hi.get(), x.value().get(), x.err().get(), MPFR_RNDU);
    if (mpfr_sgn(hi.get()) < 0) throw Error("sqrt of a certified negative number");
  }
  Real v(x.prec());
  Real e(kErrPrec);
  if (mpfr_sgn(x.value().get()) <= 0) {
    // enclosure straddles zero: sqrt(value + err) bounds the spread
    Real hi(kErrPrec);
    mpfr_add(hi.get(), x.value().get(), x.err().get(), MPFR_RNDU);
    if (mpfr_sgn(hi.get()) > 0) mpfr_sqrt(e.get(), hi.get(), MPFR_RNDU);
    return BigReal(std::move(v), std::move(e));
  }
  int t = mpfr_sqrt(v.get(), x.value().get(), MPFR_RNDN);
  if (!x.err().is_zero()) {
    if (mpfr_sgn(lo.get()) > 0) {
      // |sqrt(y) - sqrt(v)| <= err / (sqrt(v - err) + sqrt(v))
      Real s1(kErrPrec), s2(kErrPrec);
      mpfr_sqrt(s1.get(), lo.get(), MPFR_RNDD);
      mpfr_sqrt(s2.get(), x.value().get(), MPFR_RNDD);
      mpfr_add(s1.get(), s1.get(), s2.get(), MPFR_RNDD);
      mpfr_div(e.get(), x.err().get(), s1.get(), MPFR_RNDU);
    } else {
      Real hi(kErrPrec);
      mpfr_add(hi.get(), x.value().get(), x.err().get(), MPFR_RNDU);
      mpfr_sqrt(e.get(), hi.get(), MPFR_RNDU);
    }
  }
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

BigReal log(const BigReal& x) {
  Real lo(kErrPrec);
  mpfr_sub(lo.get(), x.value().get(), x.err().get(), MPFR_RNDD);
  if (mpfr_sgn(lo.get()) <= 0) throw Error("log of an enclosure that is not certified positive");
  Real v(x.prec());
  int t = mpfr_log(v.get(), x.value().get(), MPFR_RNDN);
  Real e(kErrPrec);
  if (!x.err().is_zero()) mpfr_div(e.get(), x.err().get(), lo.get(), MPFR_RNDU);
  add_ulp(e, v.get(), t);
  return BigReal(std::move(v), std::move(e));
}

BigReal pow(const BigReal& x, unsigned long n) {
  BigReal result(1, x.prec());
  BigReal base = x;
  while (n > 0) {
    if (n & 1UL) result = result * base;
    n >>= 1;
    if (n > 0) base = base * base;
  }
  return result;
}

BigReal min_abs_bound(const BigReal& x) {
  Real lo = abs_down(x.value().get());
  mpfr_sub(lo.get(), lo.get(), x.err().get(), MPFR_RNDD);
  if (mpfr_sgn(lo.get()) < 0) mpfr_set_zero(lo.get(), 1);
  return BigReal::exact(lo);
}

Sign certified_sign(const BigReal& x) {
  int s = x.value().sgn();
  if (s == 0) return x.err().is_zero() ? Sign::Zero : Sign::Undecidable;
  if (mpfr_cmpabs(x.value().get(), x.err().get()) > 0) return s > 0 ? Sign::Positive : Sign::Negative;
  return Sign::Undecidable;
}

const char* to_string(Sign s) {
  switch (s) {
    case Sign::Negative: return "-1";
    case Sign::Zero: return "0";
    case Sign::Positive: return "+1";
    case Sign::Undecidable: return "undecidable";
  }
  return "?";
}

bool certainly_less(const BigReal& a, const BigReal& b) {
  return certified_sign(b - a) == Sign::Positive;
}

bool certainly_greater(const BigReal& a, const BigReal& b) {
  return certified_sign(a - b) == Sign::Positive;
}

double log_abs(const Real& x) {
  if (x.is_zero()) return -std::numeric_limits<double>::infinity();
  long e = 0;
  double m = mpfr_get_d_2exp(&e, x.get(), MPFR_RNDN);
  return std::log(std::fabs(m)) + static_cast<double>(e) * std::log(2.0);
}

double log_abs(const BigReal& x) { return log_abs(x.value()); }

std::pair<double, double> log_abs_bounds(const BigReal& x) {
  Real lo = abs_down(x.value().get());
  mpfr_sub(lo.get(), lo.get(), x.err().get(), MPFR_RNDD);
  Real hi = abs_up(x.value().get());
  mpfr_add(hi.get(), hi.get(), x.err().get(), MPFR_RNDU);
  double l = mpfr_sgn(lo.get()) > 0 ? log_abs(lo) : -std::numeric_limits<double>::infinity();
  double h = log_abs(hi);
  // cover the double rounding of the logarithm itself
  if (std::isfinite(l)) l -= 1e-12 * (1.0 + std::fabs(l));
  h += 1e-12 * (1.0 + std::fabs(h));
  return {l, h};
}

std::string dyadic_decimal(mpfr_srcptr v) {
  if (mpfr_nan_p(v)) return "nan";
  if (mpfr_inf_p(v)) return mpfr_sgn(v) > 0 ? "inf" : "-inf";
  if (mpfr_zero_p(v)) return "0";
  mpz_t m;
  mpz_init(m);
  long e = mpfr_get_z_2exp(m, v);
  bool neg = mpz_sgn(m) < 0;
  mpz_abs(m, m);
  // strip factors of two to keep the expansion short
  unsigned long tz = mpz_scan1(m, 0);
  if (tz > 0) {
    mpz_tdiv_q_2exp(m, m, tz);
    e += static_cast<long>(tz);
  }
  std::string out;
  if (e >= 0) {
    mpz_mul_2exp(m, m, static_cast<unsigned long>(e));
    char* s = mpz_get_str(nullptr, 10, m);
    out = s;
    void (*freefunc)(void*, size_t);
    mp_get_memory_functions(nullptr, nullptr, &freefunc);
    freefunc(s, std::char_traits<char>::length(s) + 1);
  } else {
    unsigned long k = static_cast<unsigned long>(-e);
    mpz_t f;
    mpz_init(f);
    mpz_ui_pow_ui(f, 5, k);
    mpz_mul(m, m, f);
    mpz_clear(f);
    char* s = mpz_get_str(nullptr, 10, m);
    std::string digits = s;
    void (*freefunc)(void*, size_t);
    mp_get_memory_functions(nullptr, nullptr, &freefunc);
    freefunc(s, digits.size() + 1);
    if (digits.size() <= k) digits.insert(0, k - digits.size() + 1, '0');
    out = digits.substr(0, digits.size() - k) + "." + digits.substr(digits.size() - k);
    while (!out.empty() && out.back() == '0') out.pop_back();
    if (!out.empty() && out.back() == '.') out.pop_back();
  }
  mpz_clear(m);
  return neg ? "-" + out : out;
}

// ---------------------------------------------------------------------------
// PrecisionContext

PrecisionContext::PrecisionContext(mpfr_prec_t b, int factor, int max_esc)
    : initial_bits(b), bits(b), escalation_factor(factor), max_escalations(max_esc) {
  if (b < 64) throw InvalidArgument("precision must be at least 64 bits");
  if (factor < 2) throw InvalidArgument("escalation factor must be at least 2");
  if (max_esc < 0) throw InvalidArgument("negative escalation limit");
}

PrecisionContext PrecisionContext::escalated() const {
  if (!can_escalate()) throw SignUndecidable("precision escalation limit reached");
  PrecisionContext c = *this;
  c.bits = bits * escalation_factor;
  ++c.escalations;
  return c;
}

PrecisionContext PrecisionContext::with_floor(mpfr_prec_t min_bits) const {
  PrecisionContext c = *this;
  if (c.bits < min_bits) {
    c.bits = min_bits;
    c.initial_bits = min_bits;
    c.escalations = 0;
  }
  return c;
}

PrecisionContext PrecisionContext::from_env(mpfr_prec_t fallback) {
  const char* env = std::getenv("KNEADLAB_PRECISION");
  if (env == nullptr || *env == '\0') return PrecisionContext(fallback);
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || v < 64)
    throw InvalidArgument(std::string("KNEADLAB_PRECISION must be an integer >= 64, got '") + env + "'");
  return PrecisionContext(static_cast<mpfr_prec_t>(v));
}

// ---------------------------------------------------------------------------
// bisection

Real exact_midpoint(const Real& a, const Real& b) {
  mpfr_prec_t p = std::max(a.prec(), b.prec()) + 2;
  for (;;) {
    Real m(p);
    if (mpfr_add(m.get(), a.get(), b.get(), MPFR_RNDN) == 0) {
      mpfr_div_2ui(m.get(), m.get(), 1, MPFR_RNDN);
      return m;
    }
    p *= 2;
  }
}

BigReal RootBracket::enclosure() const {
  Real mid = exact_midpoint(lo, hi);
  Real e(kErrPrec);
  mpfr_sub(e.get(), hi.get(), lo.get(), MPFR_RNDU);
  mpfr_div_2ui(e.get(), e.get(), 1, MPFR_RNDU);
  return BigReal(std::move(mid), std::move(e));
}

double RootBracket::width() const {
  Real w(kErrPrec);
  mpfr_sub(w.get(), hi.get(), lo.get(), MPFR_RNDU);
  return w.to_double();
}

namespace {

bool width_within(const Real& lo, const Real& hi, const BigReal& tol) {
  Real w(kErrPrec);
  mpfr_sub(w.get(), hi.get(), lo.get(), MPFR_RNDU);
  return mpfr_cmp(w.get(), tol.value().get()) <= 0;
}

// Certified sign of f at x, escalating the working precision; the escalated
// context is retained for later evaluations.
Sign sign_with_escalation(const RealFunction& f, const Real& x, PrecisionContext& ctx) {
  PrecisionContext local = ctx;
  for (;;) {
    BigReal fx = f(BigReal::exact(x), std::max(local.bits, x.prec()));
    Sign s = certified_sign(fx);
    if (decided(s)) {
      ctx = local;
      return s;
    }
    if (!local.can_escalate())
      throw SignUndecidable("sign undecidable at x = " + dyadic_decimal(x.get()) + " after " +
                            std::to_string(local.escalations) + " escalations (" +
                            std::to_string(local.bits) + " bits)");
    local = local.escalated();
  }
}

}  // namespace

RootBracket bisect_bracket(const RealFunction& f, const BigReal& a, const BigReal& b,
                           const BigReal& tol, const PrecisionContext& ctx) {
  if (tol.value().sgn() <= 0) throw InvalidArgument("bisect tolerance must be positive");
  RootBracket br;
  br.lo = a.value();
  br.hi = b.value();
  if (mpfr_cmp(br.lo.get(), br.hi.get()) > 0) std::swap(br.lo, br.hi);
  PrecisionContext c = ctx;
  br.sign_lo = sign_with_escalation(f, br.lo, c);
  br.sign_hi = sign_with_escalation(f, br.hi, c);
  if (br.sign_lo == Sign::Zero) {
    br.hi = br.lo;
    br.sign_hi = Sign::Zero;
  } else if (br.sign_hi == Sign::Zero) {
    br.lo = br.hi;
    br.sign_lo = Sign::Zero;
  } else if (br.sign_lo == br.sign_hi) {
    throw NoSignChange("bisect: f has the same certified sign at both endpoints");
  } else {
    while (!width_within(br.lo, br.hi, tol)) {
      Real mid = exact_midpoint(br.lo, br.hi);
      Sign s = sign_with_escalation(f, mid, c);
      ++br.iterations;
      if (s == Sign::Zero) {
        br.lo = mid;
        br.hi = mid;
        br.sign_lo = br.sign_hi = Sign::Zero;
        break;
      }
      if (s == br.sign_lo)
        br.lo = std::move(mid);
      else
        br.hi = std::move(mid);
    }
  }
  br.bits_used = c.bits;
  return br;
}

BigReal bisect(const RealFunction& f, const BigReal& a, const BigReal& b, const BigReal& tol,
               const PrecisionContext& ctx) {
  return bisect_bracket(f, a, b, tol, ctx).enclosure();
}

RootBracket refine_root(const SmoothFunction& f, const BigReal& a, const BigReal& b,
                        const BigReal& tol, const PrecisionContext& ctx) {
  if (tol.value().sgn() <= 0) throw InvalidArgument("refine_root tolerance must be positive");
  RootBracket br;
  br.lo = a.value();
  br.hi = b.value();
  if (mpfr_cmp(br.lo.get(), br.hi.get()) > 0) std::swap(br.lo, br.hi);
  PrecisionContext c = ctx;
  RealFunction value_only = [&f](const BigReal& x, mpfr_prec_t bits) { return f(x, bits).first; };
  br.sign_lo = sign_with_escalation(value_only, br.lo, c);
  br.sign_hi = sign_with_escalation(value_only, br.hi, c);
  if (br.sign_lo == Sign::Zero || br.sign_hi == Sign::Zero) {
    if (br.sign_lo == Sign::Zero) br.hi = br.lo; else br.lo = br.hi;
    br.sign_lo = br.sign_hi = Sign::Zero;
    br.bits_used = c.bits;
    return br;
  }
  if (br.sign_lo == br.sign_hi) throw NoSignChange("refine_root: no sign change on bracket");

  auto strictly_inside = [&](const Real& x) {
    return mpfr_cmp(x.get(), br.lo.get()) > 0 && mpfr_cmp(x.get(), br.hi.get()) < 0;
  };
  // returns true if the bracket collapsed onto an exact zero
  auto absorb = [&](Real x, Sign s) {
    if (s == Sign::Zero) {
      br.lo = x;
      br.hi = std::move(x);
      br.sign_lo = br.sign_hi = Sign::Zero;
      return true;
    }
    if (s == br.sign_lo)
      br.lo = std::move(x);
    else
      br.hi = std::move(x);
    return false;
  };

  Real x = exact_midpoint(br.lo, br.hi);
  bool x_is_midpoint = true;
  const long max_iter = 4L * (c.bits + 64) + 200;
  while (!width_within(br.lo, br.hi, tol)) {
    if (++br.iterations > max_iter) throw SignUndecidable("refine_root: iteration limit reached");
    mpfr_prec_t bits = std::max(c.bits, x.prec());
    std::pair<BigReal, BigReal> fx;
    Sign s;
    if (x_is_midpoint) {
      // inexact inputs can blur f near the root beyond any precision
      try {
        s = sign_with_escalation(value_only, x, c);
      } catch (const SignUndecidable&) {
        s = Sign::Undecidable;
      }
      bits = std::max(c.bits, x.prec());
      fx = f(BigReal::exact(x), bits);
    } else {
      fx = f(BigReal::exact(x), bits);
      s = certified_sign(fx.first);
    }
    {
      if (!decided(s)) {
        const Real before_lo = br.lo, before_hi = br.hi;
        // x is a root to within evaluation error; a midpoint would land on
        // it again after a symmetric straddle, so bracket it tightly instead
        if (!fx.second.value().is_zero()) {
          Real e(kErrPrec);
          mpfr_div(e.get(), fx.first.err().get(), fx.second.value().get(), MPFR_RNDU);
          mpfr_abs(e.get(), e.get(), MPFR_RNDU);
          mpfr_mul_2ui(e.get(), e.get(), 2, MPFR_RNDU);
          for (int side = -1; side <= 1; side += 2) {
            Real probe(bits + 2);
            if (side < 0)
              mpfr_sub(probe.get(), x.get(), e.get(), MPFR_RNDD);
            else
              mpfr_add(probe.get(), x.get(), e.get(), MPFR_RNDU);
            if (!strictly_inside(probe)) continue;
            Sign sp = certified_sign(f(BigReal::exact(probe), bits).first);
            if (decided(sp) && absorb(std::move(probe), sp)) break;
          }
          if (br.sign_lo == Sign::Zero || width_within(br.lo, br.hi, tol)) break;
        }
        // the bracket is already inside the blur: keep it, it is still certified
        if (mpfr_equal_p(before_lo.get(), br.lo.get()) && mpfr_equal_p(before_hi.get(), br.hi.get())) break;
        x = exact_midpoint(br.lo, br.hi);
        x_is_midpoint = true;
        continue;
      }
    }
    if (absorb(x, s)) break;
    if (width_within(br.lo, br.hi, tol)) break;

    // Newton proposal and an overshooting probe that usually straddles the root
    bool proposed = false;
    if (!fx.second.value().is_zero()) {
      Real step(bits);
      mpfr_div(step.get(), fx.first.value().get(), fx.second.value().get(), MPFR_RNDN);
      mpfr_neg(step.get(), step.get(), MPFR_RNDN);
      Real next(bits);
      mpfr_add(next.get(), x.get(), step.get(), MPFR_RNDN);
      Real w(kErrPrec);
      mpfr_sub(w.get(), br.hi.get(), br.lo.get(), MPFR_RNDU);
      mpfr_div_2ui(w.get(), w.get(), 1, MPFR_RNDU);
      if (strictly_inside(next) && mpfr_cmpabs(step.get(), w.get()) < 0) {
        Real probe(bits);
        mpfr_mul_2ui(step.get(), step.get(), 1, MPFR_RNDN);
        mpfr_add(probe.get(), x.get(), step.get(), MPFR_RNDN);
        if (strictly_inside(probe)) {
          BigReal fp = f(BigReal::exact(probe), bits).first;
          Sign sp = certified_sign(fp);
          if (decided(sp) && absorb(std::move(probe), sp)) break;
        }
        if (strictly_inside(next)) {
          x = std::move(next);
          x_is_midpoint = false;
          proposed = true;
        }
      }
    }
    if (!proposed) {
      x = exact_midpoint(br.lo, br.hi);
      x_is_midpoint = true;
    }
  }
  br.bits_used = c.bits;
  return br;
}

}  // namespace kneadlab
