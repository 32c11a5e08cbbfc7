#include <doctest.h>

#include <cmath>
#include <random>

#include "kneadlab/errors.hpp"
#include "kneadlab/families.hpp"

using namespace kneadlab;

namespace {

constexpr mpfr_prec_t kBits = 256;

BimodalMap cubic(const char* g) { return make_map(Family::Cubic, BigReal::parse(g, kBits), PrecisionContext(kBits)); }
BimodalMap deg7(const char* g) { return make_map(Family::Degree7, BigReal::parse(g, kBits), PrecisionContext(kBits)); }

double dist(const BigReal& a, const BigReal& b) { return std::abs((a - b).to_double()) + (a - b).err_double(); }

}  // namespace

TEST_SUITE("families") {
  TEST_CASE("cubic at 0: critical points, fixed ends, critical values") {
    BimodalMap m = cubic("0");
    CHECK(dist(m.c1(), BigReal::rational(1, 4, kBits)) < 1e-60);
    CHECK(dist(m.c2(), BigReal::rational(3, 4, kBits)) < 1e-60);
    CHECK(dist(m.eval(BigReal(0, kBits)), BigReal(0)) < 1e-60);
    CHECK(dist(m.eval(BigReal(1, kBits)), BigReal(1)) < 1e-60);
    CHECK(dist(m.eval(m.c1()), BigReal(1)) < 1e-60);
    CHECK(dist(m.eval(m.c2()), BigReal(0)) < 1e-60);
  }

  TEST_CASE("cubic at 0: end multipliers are 9") {
    BimodalMap m = cubic("0");
    CHECK(dist(m.deriv(BigReal(0, kBits)), BigReal(9)) <= 1e-30);
    CHECK(dist(m.deriv(BigReal(1, kBits)), BigReal(9)) <= 1e-30);
  }

  TEST_CASE("derivative vanishes at the critical points") {
    for (const char* g : {"0", "0.005", "1/128"}) {
      for (Family f : {Family::Cubic, Family::Degree7}) {
        BimodalMap m = make_map(f, BigReal::parse(g, kBits), PrecisionContext(kBits));
        CHECK(std::abs(m.deriv(m.c1()).to_double()) < 1e-40);
        CHECK(std::abs(m.deriv(m.c2()).to_double()) < 1e-40);
        CHECK(dist(m.eval(m.c1()), BigReal(1)) < 1e-50);
      }
    }
  }

  TEST_CASE("cubic closed forms of the critical points") {
    for (const char* g : {"0", "0.01", "1/64"}) {
      BimodalMap m = cubic(g);
      const BigReal gam = BigReal::parse(g, kBits);
      const BigReal four = BigReal(4, kBits) + gam;
      CHECK(dist(m.c1(), (BigReal(1, kBits) + gam) / four) < 1e-60);
      CHECK(dist(m.c2(), (BigReal(3, kBits) + gam) / four) < 1e-60);
      CHECK(dist(m.c2() - m.c1(), BigReal(2, kBits) / four) < 1e-60);
    }
  }

  TEST_CASE("degree-7 constants") {
    CHECK(outer_top_value(Family::Degree7) == mpq_class(16, 35));
    const BigReal x0 = degree7_x0(kBits);
    CHECK(x0.to_double() > 1.5);
    CHECK(x0.to_double() < 2.0);
    // T(x0) = 16/35 through the exact coefficients
    const auto& T = outer_polynomial(Family::Degree7);
    BigReal acc(0, kBits);
    for (std::size_t k = T.size(); k-- > 0;) {
      mpfr_t q;
      mpfr_init2(q, kBits);
      mpfr_set_q(q, T[k].get_mpq_t(), MPFR_RNDN);
      acc = acc * x0 + BigReal::exact(q).widened(std::ldexp(1.0, -250));
      mpfr_clear(q);
    }
    CHECK(dist(acc, BigReal::rational(16, 35, kBits)) <= 1e-30);
    BimodalMap m = deg7("0");
    CHECK(dist(m.y0(), BigReal::rational(16, 35, kBits)) < 1e-60);
    // closed forms of the critical points
    const BigReal den = x0 * BigReal(2, kBits);
    CHECK(dist(m.c1(), (x0 - BigReal(1, kBits)) / den) < 1e-60);
    CHECK(dist(m.c2(), (x0 + BigReal(1, kBits)) / den) < 1e-60);
  }

  TEST_CASE("degree-7 outer polynomial is odd with T' = (x^2-1)^3") {
    const auto& T = outer_polynomial(Family::Degree7);
    for (std::size_t k = 0; k < T.size(); k += 2) CHECK(T[k] == 0);
    // coefficients of (x^2 - 1)^3 = x^6 - 3x^4 + 3x^2 - 1, integrated
    CHECK(T[1] == mpq_class(-1));
    CHECK(T[3] == mpq_class(1));
    CHECK(T[5] == mpq_class(-3, 5));
    CHECK(T[7] == mpq_class(1, 7));
  }

  TEST_CASE("parameter range") {
    CHECK(parameter_bound(Family::Cubic).decimal() == "0.015625");
    CHECK(parameter_bound(Family::Degree7).decimal() == "0.015625");
    CHECK_THROWS_AS(cubic("0.02"), ParamOutOfRange);
    CHECK_THROWS_AS(deg7("-0.001"), ParamOutOfRange);
  }

  TEST_CASE("schwarzian of the raw Chebyshev polynomial at 0 is -2") {
    std::vector<BigReal> t2{BigReal(0), BigReal(-3), BigReal(0), BigReal(1)};
    CHECK(dist(schwarzian_poly(t2, BigReal(0, kBits)), BigReal(-2)) < 1e-60);
    // -(4x^2+2)/(x^2-1)^2 at x = 1/2
    const BigReal x = BigReal::rational(1, 2, kBits);
    const double want = -(4 * 0.25 + 2) / ((0.25 - 1) * (0.25 - 1));
    CHECK(std::abs(schwarzian_poly(t2, x).to_double() - want) < 1e-12);
  }

  TEST_CASE("schwarzian composition with an affine map") {
    // S(g o A)(x) = Sg(A x) A'^2 for A(x) = 2x - 1/2 and g = T2
    std::vector<BigReal> t2{BigReal(0), BigReal(-3), BigReal(0), BigReal(1)};
    // T2(2x - 1/2) expanded
    const double a = 2, b = -0.5;
    std::vector<BigReal> c{BigReal::from_double(b * b * b - 3 * b), BigReal::from_double(3 * b * b * a - 3 * a),
                           BigReal::from_double(3 * b * a * a), BigReal::from_double(a * a * a)};
    for (const char* xs : {"0.1", "0.3", "0.9"}) {
      const BigReal x = BigReal::parse(xs, kBits);
      const BigReal lhs = schwarzian_poly(c, x);
      const BigReal rhs = schwarzian_poly(t2, x * BigReal(2, kBits) - BigReal::rational(1, 2, kBits)) * BigReal(4);
      CHECK(dist(lhs, rhs) < 1e-40);
    }
  }

  TEST_CASE("negative schwarzian at random points") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> gam(0, 1.0 / 64), xs(0, 1);
    int neg = 0, tested = 0;
    for (Family f : {Family::Cubic, Family::Degree7}) {
      for (int i = 0; i < 50; ++i) {
        BimodalMap m = make_map(f, BigReal::from_double(gam(rng)), PrecisionContext(kBits));
        const double x = xs(rng);
        if (std::abs(x - m.c1().to_double()) < 1e-3 || std::abs(x - m.c2().to_double()) < 1e-3) continue;
        ++tested;
        if (certified_sign(schwarzian(m, BigReal::from_double(x))) == Sign::Negative) ++neg;
      }
    }
    CHECK(tested > 90);
    CHECK(neg == tested);
  }

  TEST_CASE("schwarzian near a critical point throws") {
    BimodalMap m = cubic("0");
    CHECK_THROWS_AS(schwarzian(m, m.c1()), NearCritical);
  }

  TEST_CASE("exactly two critical points in (0,1)") {
    for (Family f : {Family::Cubic, Family::Degree7}) {
      BimodalMap m = make_map(f, BigReal::parse("0.01", kBits), PrecisionContext(kBits));
      int changes = 0;
      double prev = m.deriv(BigReal::rational(1, 4096, 128)).to_double();
      for (int i = 2; i < 4096; ++i) {
        const double d = m.deriv(BigReal::rational(i, 4096, 128)).to_double();
        if ((d > 0) != (prev > 0)) ++changes;
        prev = d;
      }
      CHECK(changes == 2);
    }
  }
}
