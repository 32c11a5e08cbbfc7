#include <doctest.h>

#include <cmath>
#include <random>

#include "kneadlab/errors.hpp"
#include "kneadlab/orbits.hpp"

using namespace kneadlab;

namespace {

constexpr mpfr_prec_t kBits = 256;

BimodalMap map_at(Family f, const char* g) {
  return make_map(f, BigReal::parse(g, kBits), PrecisionContext(kBits));
}

// g_0(x) = ((4x-2)^3 - 3(4x-2) + 2) / 4 written out directly
double g0(double x) {
  const double y = 4 * x - 2;
  return (y * y * y - 3 * y + 2) / 4;
}

double bisect_double(double a, double b, double target) {
  const bool up = g0(b) > g0(a);
  for (int i = 0; i < 200; ++i) {
    const double m = 0.5 * (a + b);
    if ((g0(m) < target) == up) a = m; else b = m;
  }
  return 0.5 * (a + b);
}

}  // namespace

TEST_SUITE("orbits") {
  TEST_CASE("itineraries at the cubic parameter 0") {
    BimodalMap m = map_at(Family::Cubic, "0");
    CHECK(to_text(kneading2(m, 12)) == "111111111111");
    CHECK(to_text(itinerary(m, m.c1(), 5)) == "A");
    CHECK(to_text(itinerary(m, BigReal::rational(1, 2, kBits), 6)) == "222222");
  }

  TEST_CASE("fixed point r and its multiplier") {
    BimodalMap m = map_at(Family::Cubic, "0");
    const BigReal r = fixed_point_r(m);
    CHECK(std::abs(r.to_double() - 0.5) < 1e-60);
    CHECK(std::abs(std::abs(m.deriv(r).to_double()) - 3) < 1e-30);
    CHECK(std::abs(lap_multiplier(m, 1).to_double() - 9) < 1e-30);
    CHECK(std::abs(lap_multiplier(m, 3).to_double() - 9) < 1e-30);
    CHECK(std::abs(lap_multiplier(m, 2).to_double() - 3) < 1e-30);

    BimodalMap h = map_at(Family::Degree7, "0");
    const BigReal want = h.x0() / h.y0();
    const BigReal got = lap_multiplier(h, 2);
    CHECK(std::abs((got - want).to_double()) < 1e-30);
  }

  TEST_CASE("three repelling period-two orbits") {
    for (Family f : {Family::Cubic, Family::Degree7}) {
      BimodalMap m = map_at(f, "0.002");
      auto orbits = period2_orbits(m);
      REQUIRE(orbits.size() == 3);
      for (const auto& o : orbits) {
        CHECK(o.multiplier.to_double() > 1);
        CHECK(std::abs((m.eval(o.p) - o.q).to_double()) < 1e-40);
        CHECK(std::abs((m.eval(o.q) - o.p).to_double()) < 1e-40);
        Word it = itinerary(m, o.p, 20);
        REQUIRE(it.size() == 20);
        for (std::size_t i = 0; i < 20; ++i) CHECK(it[i] == o.label[i % 2]);
      }
    }
    // at 0 the outer 2-cycle is the transported Chebyshev cycle of T2
    BimodalMap m = map_at(Family::Cubic, "0");
    for (const auto& o : period2_orbits(m)) {
      if (to_text(o.label) != "13") continue;
      const double p = o.p.to_double();
      CHECK(std::abs(g0(g0(p)) - p) < 1e-12);
    }
  }

  TEST_CASE("realize_point simple cases") {
    BimodalMap m = map_at(Family::Cubic, "0");
    BigReal x = realize_point(m, ItinerarySeq::parse("A"));
    CHECK(std::abs((x - m.c1()).to_double()) < 1e-60);
    BigReal y = realize_point(m, ItinerarySeq::parse("1A"));
    CHECK(std::abs(y.to_double() - bisect_double(0, 0.25, 0.25)) < 1e-14);
    CHECK(realizes(m, y, ItinerarySeq::parse("1A")));
    CHECK_THROWS_AS(realize_point(m, ItinerarySeq::parse("1^inf")), InvalidArgument);
  }

  TEST_CASE("realize_point rejects inadmissible sequences") {
    // in the stage-one window the kneading starts 1 1, so 2 1 1 1 A is not
    // admissible (its shift 1 1 1 A lies below)
    BimodalMap m = map_at(Family::Cubic, "0.001");
    Word k = kneading2(m, 8);
    REQUIRE(k.size() >= 3);
    CHECK(to_text(Word(k.begin(), k.begin() + 2)) == "11");
    CHECK_THROWS_AS(realize_point(m, ItinerarySeq::parse("2111111111A")), NotAdmissible);
  }

  TEST_CASE("p_k and q_k interleave and converge to r") {
    BimodalMap m = map_at(Family::Cubic, "0");
    const double r = fixed_point_r(m).to_double();
    std::vector<double> p, q;
    for (int k = 0; k <= 20; ++k) {
      p.push_back(realize_point(m, concat_power({Symbol::I2}, k, ItinerarySeq::parse("A"))).to_double());
      q.push_back(realize_point(m, concat_power({Symbol::I2}, k, ItinerarySeq::parse("B"))).to_double());
    }
    // c1 = p0 < q1 < p2 < q3 < ... < r < ... < p3 < q2 < p1 < q0 = c2
    for (int k = 0; k + 1 <= 12; ++k) {
      const double a = k % 2 == 0 ? p[k] : q[k];
      const double b = k % 2 == 0 ? q[k + 1] : p[k + 1];
      CHECK(a < b);
      const double c = k % 2 == 0 ? q[k] : p[k];
      const double d = k % 2 == 0 ? p[k + 1] : q[k + 1];
      CHECK(c > d);
    }
    for (int k = 1; k <= 20; ++k) CHECK(std::abs(p[k] - r) < std::abs(p[k - 1] - r));
    CHECK(std::abs(p[20] - r) < 1e-3);
    CHECK(std::abs(q[20] - r) < 1e-3);
  }

  TEST_CASE("diagnostics at the cubic parameter 0") {
    BimodalMap m = map_at(Family::Cubic, "0");
    OrbitDiagnostics d = diagnostics(m, 30);
    CHECK(d.d[0].to_double() == 1);
    for (std::size_t n = 0; n < 30; ++n) {
      CHECK(std::abs(d.v[n].to_double()) < 1e-60);
      CHECK(std::abs(d.d[n].to_double() / std::pow(9.0, static_cast<double>(n)) - 1) < 1e-12);
    }
    CHECK(std::abs(d.d_np(3, 5).to_double() / std::pow(9.0, 5) - 1) < 1e-12);
  }

  TEST_CASE("diagnostics obey the chain rule") {
    BimodalMap m = map_at(Family::Cubic, "0.004");
    OrbitDiagnostics d = diagnostics(m, 40);
    for (std::size_t n = 0; n + 1 < 40; ++n) {
      const double want = d.d[n].to_double() * std::abs(m.deriv(d.v[n]).to_double());
      CHECK(std::abs(d.d[n + 1].to_double() / want - 1) < 1e-9);
      CHECK(d.v[n].to_double() >= -1e-30);
      CHECK(d.v[n].to_double() <= 1 + 1e-30);
    }
  }

  TEST_CASE("itinerary order and conjugation properties") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1), gam(0, 1.0 / 64);
    int order_bad = 0, shift_bad = 0, tested = 0;
    for (Family f : {Family::Cubic, Family::Degree7}) {
      for (int j = 0; j < 5; ++j) {
        BimodalMap m = make_map(f, BigReal::from_double(gam(rng)), PrecisionContext(kBits));
        for (int i = 0; i < 20; ++i) {
          double a = u(rng), b = u(rng);
          if (a > b) std::swap(a, b);
          if (a == b) continue;
          try {
            const BigReal x = BigReal::from_double(a), y = BigReal::from_double(b);
            Word ix = itinerary(m, x, 40), iy = itinerary(m, y, 40);
            ++tested;
            auto o = cmp_words(ix, iy);
            if (ix != iy && (!o || *o != Ordering::Less)) ++order_bad;
            Word gx = itinerary(m, m.eval(x), 39);
            if (gx != Word(ix.begin() + 1, ix.end())) ++shift_bad;
          } catch (const AmbiguousSymbol&) {
          }
        }
      }
    }
    CHECK(tested > 150);
    CHECK(order_bad == 0);
    CHECK(shift_bad == 0);
  }

  TEST_CASE("realize_point is a left inverse of itinerary") {
    BimodalMap m = map_at(Family::Cubic, "0");
    int bad = 0, tested = 0;
    std::vector<Word> heads{{}};
    for (int len = 0; len <= 4; ++len) {
      std::vector<Word> next;
      for (const auto& h : heads) {
        for (Symbol c : {Symbol::C1, Symbol::C2}) {
          Word w = h;
          w.push_back(c);
          const ItinerarySeq iota = ItinerarySeq::finite(w);
          const BigReal x = realize_point(m, iota);
          ++tested;
          // lap symbols certified along the orbit, last iterate on the critical point
          const Word laps(w.begin(), w.end() - 1);
          if (!realizes(m, x, iota) || (!laps.empty() && itinerary(m, x, laps.size()) != laps)) ++bad;
        }
        for (int j = 1; j <= 3; ++j) {
          Word v = h;
          v.push_back(lap_symbol(j));
          next.push_back(v);
        }
      }
      heads = next;
    }
    CHECK(tested == 2 * (1 + 3 + 9 + 27 + 81));
    CHECK(bad == 0);
  }
}
