#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kneadlab/families.hpp"
#include "kneadlab/numerics.hpp"
#include "kneadlab/orbits.hpp"
#include "kneadlab/symbolic.hpp"

namespace kneadlab {

// Parameter interval with exact (dyadic) endpoints and the kneading prefix
// checked at its endpoints and `samples` interior points.
struct ParamInterval {
  Family family = Family::Cubic;
  BigReal lo, hi;
  Word certified_prefix;
  int samples = 9;
  // working precision at which the endpoints were certified
  mpfr_prec_t bits = 256;

  BigReal width() const { return hi - lo; }
  // Exact dyadic point lo + (hi - lo) * i / n, rounded to enough bits.
  Real point(std::size_t i, std::size_t n) const;
  Real midpoint() const { return exact_midpoint(lo.value(), hi.value()); }
};

// Whole parameter range of a family, with the prefix shared by its endpoint
// kneadings.
ParamInterval full_window(Family family, const PrecisionContext& ctx);

// Largest working precision any search escalates to.
inline constexpr mpfr_prec_t kMaxSearchBits = mpfr_prec_t(1) << 17;

// Certified comparison of the second kneading sequence at an exact parameter
// with a target sequence. bits is a starting precision and is raised when
// symbols are ambiguous. max_depth bounds the comparison of infinite targets.
Ordering compare_kneading(Family family, const Real& gamma, const ItinerarySeq& target,
                          mpfr_prec_t& bits, std::size_t max_depth = 1u << 20,
                          mpfr_prec_t max_bits = kMaxSearchBits);

// Certified kneading symbols at an exact parameter, escalating on ambiguity.
Word certified_kneading(Family family, const Real& gamma, std::size_t depth, mpfr_prec_t& bits);

// Orbit profile at an exact parameter with the first `symbols` symbols
// certified and log d_n bounds to `depth`.
OrbitProfile profile_at(Family family, const Real& gamma, std::size_t depth, std::size_t symbols,
                        mpfr_prec_t& bits, const std::vector<std::size_t>& keep = {});

struct FindOptions {
  mpfr_prec_t bits = 256;
  // log2 of the distance of the final iterate from its critical point at the
  // returned bracket ends; default -bits/2.
  std::optional<double> tol_log2;
  int max_iterations = 400;
};

struct FoundParam {
  BigReal gamma;      // midpoint of [lo, hi] with err = half width
  Real lo, hi;        // exact: kneading(lo) < target < kneading(hi)
  mpfr_prec_t bits = 0;
  int evaluations = 0;
  bool bisection_fallback = false;
};

// gamma in the window whose kneading sequence equals the finite minimal
// target m, bracketed by certified kneading comparisons.
FoundParam find_param_bracket(Family family, const ItinerarySeq& m, const ParamInterval& window,
                              const FindOptions& opts = {});
BigReal find_param(Family family, const ItinerarySeq& m, const ParamInterval& window,
                   const PrecisionContext& ctx);

struct ConvPair {
  Word s_prime;             // S I2^(k+1)
  FoundParam first, second;  // kneadings S'c1 and S'c2
  ParamInterval interval;   // inner bracket ends, prefix S'I2
  BigReal gamma1() const { return first.gamma; }
  BigReal gamma2() const { return second.gamma; }
};

ConvPair conv_pair(Family family, const Word& s, std::size_t k, const ParamInterval& window,
                   const FindOptions& opts = {});

// Point with itinerary w followed by c_j, pulled back at the map's
// precision (uncertified). log2_gain is log2 of prod |g'| along the orbit.
// Per point i of the orbit (i = 0 is x): log_d[i] = ln |g'(x_i)| and
// log2_gap[i] = log2 of the distance from x_i to the nearer critical point.
struct FastPullback {
  Real x;
  double log2_gain = 0;
  bool clamped = false;
  std::vector<double> log_d;
  std::vector<double> log2_gap;
};
FastPullback fast_pullback(const FastMap& fm, const Word& w, int j);

// Kneading prefix at both ends and `samples` equispaced interior points.
bool certify_prefix(const ParamInterval& interval, const Word& prefix, int samples, mpfr_prec_t bits = 256);

}  // namespace kneadlab
