#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "kneadlab/errors.hpp"
#include "kneadlab/families.hpp"
#include "kneadlab/numerics.hpp"

using namespace kneadlab;

namespace {

// [a - ea, a + ea] inside [b - eb, b + eb]
bool contained(const BigReal& inner, const BigReal& outer) {
  Real lo(4096), hi(4096), olo(4096), ohi(4096);
  mpfr_sub(lo.get(), inner.value().get(), inner.err().get(), MPFR_RNDD);
  mpfr_add(hi.get(), inner.value().get(), inner.err().get(), MPFR_RNDU);
  mpfr_sub(olo.get(), outer.value().get(), outer.err().get(), MPFR_RNDD);
  mpfr_add(ohi.get(), outer.value().get(), outer.err().get(), MPFR_RNDU);
  return mpfr_cmp(lo.get(), olo.get()) >= 0 && mpfr_cmp(hi.get(), ohi.get()) <= 0;
}

BigReal sqrt2_bracket(const PrecisionContext& ctx, const char* tol) {
  RealFunction f = [](const BigReal& x, mpfr_prec_t) { return x * x - BigReal(2); };
  return bisect(f, BigReal(1, ctx.bits), BigReal(2, ctx.bits), BigReal::parse(tol, ctx.bits), ctx);
}

}  // namespace

TEST_SUITE("numerics") {
  TEST_CASE("certified_sign cases") {
    CHECK(certified_sign(BigReal::parse("3", 64).widened(0.1)) == Sign::Positive);
    CHECK(certified_sign(BigReal(0)) == Sign::Zero);
    CHECK(certified_sign(BigReal::parse("1e-40", 256).widened(1e-39)) == Sign::Undecidable);
    CHECK(certified_sign(BigReal::parse("-2", 64).widened(1.0)) == Sign::Negative);
  }

  TEST_CASE("bisect sqrt 2") {
    PrecisionContext ctx(256);
    BigReal r = sqrt2_bracket(ctx, "1e-30");
    CHECK(r.err_double() <= 1e-30);
    CHECK(std::abs(r.to_double() - std::sqrt(2.0)) < 1e-15);
    // the enclosure contains sqrt 2 computed independently
    CHECK(contained(sqrt(BigReal(2, 512)).at_prec(512), r.widened(1e-60)));
  }

  TEST_CASE("bisect identity") {
    RealFunction f = [](const BigReal& x, mpfr_prec_t) { return x; };
    BigReal r = bisect(f, BigReal(-1), BigReal(1), BigReal::parse("1e-20", 128), PrecisionContext(128));
    CHECK(std::abs(r.to_double()) <= 1e-20);
  }

  TEST_CASE("bisect degree-7 outer polynomial root") {
    // T(x) = x^7/7 - 3x^5/5 + x^3 - x, root of T(x) = 16/35 in (3/2, 2)
    const mpfr_prec_t bits = 256;
    RealFunction f = [](const BigReal& x, mpfr_prec_t b) {
      const BigReal x2 = x * x;
      const BigReal t = x * (((x2 * BigReal::rational(1, 7, b) - BigReal::rational(3, 5, b)) * x2 + BigReal(1)) * x2 -
                             BigReal(1));
      return t - BigReal::rational(16, 35, b);
    };
    BigReal r = bisect(f, BigReal::rational(3, 2, bits), BigReal(2, bits), BigReal::parse("1e-40", bits),
                       PrecisionContext(bits));
    CHECK(r.to_double() > 1.5);
    CHECK(r.to_double() < 2.0);
    CHECK(std::abs(f(r.at_prec(bits), bits).to_double()) < 1e-35);
    CHECK(std::abs(r.to_double() - degree7_x0(bits).to_double()) < 1e-15);
  }

  TEST_CASE("bisect errors") {
    RealFunction f = [](const BigReal& x, mpfr_prec_t) { return x * x + BigReal(1); };
    CHECK_THROWS_AS(bisect(f, BigReal(-1), BigReal(1), BigReal::parse("1e-10", 64), PrecisionContext(64)),
                    NoSignChange);
    // a function whose sign at the endpoints is never decidable
    RealFunction g = [](const BigReal& x, mpfr_prec_t) { return x.widened(10.0); };
    CHECK_THROWS_AS(bisect(g, BigReal(-1), BigReal(1), BigReal::parse("1e-10", 64), PrecisionContext(64)),
                    SignUndecidable);
  }

  TEST_CASE("bisect halves the bracket per iteration") {
    RealFunction f = [](const BigReal& x, mpfr_prec_t) { return x * x - BigReal(2); };
    RootBracket br = bisect_bracket(f, BigReal(1, 128), BigReal(2, 128), BigReal::parse("1e-12", 128),
                                    PrecisionContext(128));
    // width 1 initially, at least halved per accepted iteration
    CHECK(br.width() <= std::ldexp(1.0, -br.iterations) * (1 + 1e-12));
  }

  TEST_CASE("precision context escalation") {
    PrecisionContext ctx(256, 2, 4);
    CHECK(ctx.bits == 256);
    PrecisionContext c = ctx;
    for (int i = 0; i < 4; ++i) c = c.escalated();
    CHECK(c.bits == 256 * 16);
    CHECK_FALSE(c.can_escalate());
    CHECK_THROWS_AS(c.escalated(), SignUndecidable);
    CHECK(PrecisionContext(64).bits >= 64);
  }

  TEST_CASE("decimal and parse round trip") {
    BigReal a = BigReal::parse("3/1024", 64);
    CHECK(a.is_exact());
    CHECK(a.decimal() == "0.0029296875");
    BigReal b = BigReal::parse(a.decimal(), 64);
    CHECK(b.decimal() == a.decimal());
    BigReal c = BigReal::parse("0.1", 128);
    CHECK_FALSE(c.is_exact());
    CHECK(c.err_double() < 1e-37);
    CHECK_THROWS_AS(BigReal::parse("1.2.3", 64), InvalidArgument);
  }

  TEST_CASE("monotone refinement on random expression trees") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> op(0, 4), num(1, 50), den(1, 17);
    int failures = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::uint64_t seed = rng();
      auto build = [&](mpfr_prec_t p) {
        std::mt19937_64 r(seed);
        std::function<BigReal(int)> gen = [&](int depth) -> BigReal {
          if (depth == 0) return BigReal::rational(num(r), den(r), p);
          const int o = op(r);
          BigReal a = gen(depth - 1), b = gen(depth - 1);
          switch (o) {
            case 0: return a + b;
            case 1: return a - b;
            case 2: return a * b;
            case 3: return a / (abs(b) + BigReal(1, p));
            default: return sqrt(abs(a) + BigReal(1, p));
          }
        };
        return gen(4);
      };
      BigReal lo = build(64), hi = build(160);
      if (!contained(hi, lo)) ++failures;
    }
    CHECK(failures == 0);
  }
}
