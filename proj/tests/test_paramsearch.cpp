#include <doctest.h>

#include <cmath>

#include "kneadlab/errors.hpp"
#include "kneadlab/orbits.hpp"
#include "kneadlab/paramsearch.hpp"

using namespace kneadlab;

namespace {

constexpr mpfr_prec_t kBits = 256;

FindOptions at_bits(mpfr_prec_t bits) {
  FindOptions o;
  o.bits = bits;
  return o;
}

ItinerarySeq ones_then(std::size_t k, Symbol c) {
  Word w = repeat(Symbol::I1, k);
  w.push_back(c);
  return ItinerarySeq::finite(w);
}

// |g^(k+1)(c2) - c_j| at the bracket midpoint
double forward_gap(Family f, const BigReal& gamma, std::size_t k, Symbol c, mpfr_prec_t bits) {
  BimodalMap m = make_map(f, BigReal::exact(gamma.value()), PrecisionContext(bits));
  BigReal x = m.c2();
  for (std::size_t i = 0; i <= k; ++i) x = m.eval(x);
  const BigReal& t = c == Symbol::C1 ? m.c1() : m.c2();
  return std::abs((x - t).to_double()) + (x - t).err_double();
}

ParamInterval bootstrap_window(Family f, std::size_t k0) {
  ParamInterval full = full_window(f, PrecisionContext(kBits));
  FoundParam e = find_param_bracket(f, ones_then(k0, Symbol::C1), full);
  ParamInterval w = full;
  w.hi = BigReal::exact(e.lo);
  w.certified_prefix = repeat(Symbol::I1, k0);
  return w;
}

}  // namespace

TEST_SUITE("paramsearch") {
  TEST_CASE("find_param for 1^k A, k = 1..4, decreasing towards 0") {
    ParamInterval full = full_window(Family::Cubic, PrecisionContext(kBits));
    double prev = 1;
    for (std::size_t k = 1; k <= 4; ++k) {
      FoundParam fp = find_param_bracket(Family::Cubic, ones_then(k, Symbol::C1), full);
      CHECK(forward_gap(Family::Cubic, fp.gamma, k, Symbol::C1, 512) <= 1e-20);
      CHECK(fp.gamma.to_double() < prev);
      CHECK(fp.gamma.to_double() > 0);
      prev = fp.gamma.to_double();
      // the brackets straddle the target
      mpfr_prec_t b = kBits;
      CHECK(compare_kneading(Family::Cubic, fp.lo, ones_then(k, Symbol::C1), b) == Ordering::Less);
      b = kBits;
      CHECK(compare_kneading(Family::Cubic, fp.hi, ones_then(k, Symbol::C1), b) == Ordering::Greater);
    }
  }

  TEST_CASE("find_param is reproducible at doubled precision") {
    ParamInterval full = full_window(Family::Degree7, PrecisionContext(kBits));
    FoundParam a = find_param_bracket(Family::Degree7, ones_then(3, Symbol::C1), full, at_bits(256));
    FoundParam b = find_param_bracket(Family::Degree7, ones_then(3, Symbol::C1), full, at_bits(512));
    CHECK(std::abs((a.gamma - b.gamma).to_double()) <= a.gamma.err_double());
    CHECK(b.gamma.err_double() <= a.gamma.err_double());
  }

  TEST_CASE("find_param rejects a target outside the window") {
    ParamInterval full = full_window(Family::Cubic, PrecisionContext(kBits));
    FoundParam g1 = find_param_bracket(Family::Cubic, ones_then(1, Symbol::C1), full);
    ParamInterval above = full;
    above.lo = BigReal::exact(g1.hi);
    CHECK_THROWS_AS(find_param_bracket(Family::Cubic, ones_then(1, Symbol::C1), above), OrderViolation);
    CHECK_THROWS_AS(find_param_bracket(Family::Cubic, ItinerarySeq::parse("21A"), full), Error);
  }

  TEST_CASE("conv_pair widths shrink and kneadings bracket the interval") {
    ParamInterval win = bootstrap_window(Family::Cubic, 2);
    const Word s = repeat(Symbol::I1, 3);
    double prev = 1;
    for (std::size_t k : {3u, 5u, 7u}) {
      ConvPair cp = conv_pair(Family::Cubic, s, k, win);
      const double w = cp.interval.width().to_double();
      CHECK(w < prev);
      CHECK(w > 0);
      prev = w;
      // nested strictly inside the window
      CHECK(certainly_less(win.lo, cp.interval.lo));
      CHECK(certainly_less(cp.interval.hi, win.hi));
      const Word sp = cp.s_prime;
      CHECK(sp == s + repeat(Symbol::I2, k + 1));
      CHECK(sign(sp) == 1);
      // endpoint parameters realise S'c1 and S'c2 by forward evaluation
      CHECK(forward_gap(Family::Cubic, cp.gamma1(), sp.size(), Symbol::C1, 1024) < 1e-20);
      CHECK(forward_gap(Family::Cubic, cp.gamma2(), sp.size(), Symbol::C2, 1024) < 1e-20);
      // kneading is monotone across lo, mid, hi and the midpoint carries S'I2
      mpfr_prec_t b = kBits;
      Word mid = certified_kneading(Family::Cubic, cp.interval.midpoint(), sp.size() + 1, b);
      CHECK(mid == sp + Word{Symbol::I2});
      CHECK(certify_prefix(cp.interval, sp + Word{Symbol::I2}, 9));
      CHECK(cmp(ItinerarySeq::finite(sp + Word{Symbol::C1}), ItinerarySeq::periodic(sp, Symbol::I2)) ==
            Ordering::Less);
    }
  }

  TEST_CASE("conv_pair parity") {
    ParamInterval win = bootstrap_window(Family::Cubic, 2);
    CHECK_THROWS_AS(conv_pair(Family::Cubic, repeat(Symbol::I1, 3), 4, win), ParityViolation);
  }

  TEST_CASE("certify_prefix") {
    ParamInterval win = bootstrap_window(Family::Cubic, 2);
    CHECK(certify_prefix(win, repeat(Symbol::I1, 2), 9));
    CHECK(certify_prefix(win, repeat(Symbol::I1, 2), 0));
    ConvPair cp = conv_pair(Family::Cubic, repeat(Symbol::I1, 3), 3, win);
    // widened past gamma2 the kneading changes inside the interval
    ParamInterval wide = cp.interval;
    wide.hi = win.hi;
    CHECK_FALSE(certify_prefix(wide, cp.s_prime + Word{Symbol::I2}, 9));
  }
}
