#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "kneadlab/families.hpp"
#include "kneadlab/fastmap.hpp"
#include "kneadlab/numerics.hpp"
#include "kneadlab/symbolic.hpp"

namespace kneadlab {

// v_n = g^{n+1}(c2) and d_n = |(g^n)'(v)| for n < depth.
struct OrbitDiagnostics {
  std::vector<BigReal> v;
  std::vector<BigReal> d;
  std::size_t depth = 0;

  // d_{n,p} = d_{n+p} / d_n
  BigReal d_np(std::size_t n, std::size_t p) const;
};

// Symbol of the point x (index is reported in AmbiguousSymbol).
Symbol classify(const BimodalMap& m, const BigReal& x, std::size_t index = 0);

// Lap prefix of length depth, or a complete finite itinerary ending in a
// critical symbol when the orbit provably hits one.
Word itinerary(const BimodalMap& m, const BigReal& x, std::size_t depth);
Word kneading2(const BimodalMap& m, std::size_t depth);
// kneading2 with the map rebuilt at escalating precision on ambiguity.
Word kneading_at(Family family, const BigReal& gamma, std::size_t depth, const PrecisionContext& ctx);

BigReal fixed_point_r(const BimodalMap& m);

struct Period2Orbit {
  Word label;  // two lap symbols, repeated
  BigReal p, q;
  BigReal multiplier;  // |(g^2)'(p)|
};
std::vector<Period2Orbit> period2_orbits(const BimodalMap& m);

// Point of the given lap mapped onto y, with a certified enclosure.
BigReal branch_inverse(const BimodalMap& m, Symbol lap, const BigReal& y);
// Same, reusing a prepared evaluator for the initial guess.
BigReal branch_inverse(const FastMap& fm, Symbol lap, const BigReal& y);
BigReal realize_point(const BimodalMap& m, const ItinerarySeq& iota);
// Forward check of a realization: lap symbols certified, and the last iterate
// not separable from the target critical point.
bool realizes(const BimodalMap& m, const BigReal& x, const ItinerarySeq& iota);

OrbitDiagnostics diagnostics(const BimodalMap& m, std::size_t depth);
BigReal lap_multiplier(const BimodalMap& m, int j);

// Streaming summary of the second critical orbit for long depths.
struct OrbitProfile {
  Word symbols;                              // certified symbols of v_0, v_1, ...
  std::optional<std::size_t> ambiguous_at;   // first index whose symbol is uncertain
  std::vector<double> log_d_lo, log_d_hi;    // bounds of log d_n, n = 0..depth
  std::vector<double> v;                     // v_n as doubles, n < depth
  std::vector<std::pair<std::size_t, BigReal>> kept;  // requested v_n enclosures
};
OrbitProfile orbit_profile(const BimodalMap& m, std::size_t depth,
                           const std::vector<std::size_t>& keep = {});

}  // namespace kneadlab
