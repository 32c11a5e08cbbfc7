#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kneadlab/construct.hpp"

namespace kneadlab {

enum class CheckStatus { Pass, Fail, Unclassified, Vacuous };
const char* to_string(CheckStatus s);

// One tested inequality. For families of inequalities (a window of indices)
// the worst instance is recorded together with the number of instances.
struct ReportCheck {
  std::string name;
  CheckStatus status = CheckStatus::Pass;
  std::string family;
  std::string gamma;  // decimal, empty when not tied to a parameter
  std::size_t index = 0;
  std::size_t last = 0;       // last index of a window (== index for single instances)
  std::size_t instances = 1;
  double lhs = 0, rhs = 0;    // natural log scale unless the note says otherwise
  std::string relation;
  std::string note;
};

struct VerificationReport {
  std::string name;
  std::map<std::string, std::string> parameters;
  std::vector<ReportCheck> checks;
  std::vector<std::string> warnings;

  bool passed() const;
  std::size_t failures() const;
  void append(const VerificationReport& other);  // checks and warnings
};

std::string report_json(const std::vector<VerificationReport>& reports);
std::string report_table(const std::vector<VerificationReport>& reports);

// Interior sample parameters lo + (hi - lo) i / (count + 1), i = 1..count.
std::vector<Real> interior_samples(const ParamInterval& iv, int count);

// Index windows where growth is asserted: [0, p_1 - 1], [t_1, p_2 - 1], ...,
// [t_last, t_final], split at the A-marks (p, t).
struct WindowPlan {
  std::vector<std::pair<std::size_t, std::size_t>> windows;  // inclusive
  std::vector<std::pair<std::size_t, std::size_t>> gaps;     // open (p, t)
  std::vector<std::size_t> marks;                            // A-marked p
};
WindowPlan window_plan(const ConstructionState& s);

// d_n > lambda^n on every window index, at one parameter of the given family.
VerificationReport ce_windows(const ConstructionState& s, const Real& gamma, Family f = Family::Cubic);
// d_p < lambda2^p at every A-mark (single-family states).
VerificationReport non_ce_witness(const ConstructionState& s, const Real& gamma);
// |g^p(c2) - c2| < 2^-k at the k-th B-mark.
VerificationReport recurrence(const ConstructionState& s, const Real& gamma, Family f = Family::Cubic);
// Second kneading sequences of the two maps agree to depth (default t_final).
VerificationReport combinatorial_equiv(const ConstructionState& s, const Real& gamma, const Real& gamma_prime,
                                       std::size_t depth = SIZE_MAX);
// Cubic d_p > lambda2^p and deg7 d_p < lambda1^p at the dual A-marks, at the
// final interval midpoints.
VerificationReport dual_rate_contrast(const ConstructionState& s);

// All state checks: the windows, witnesses and recurrence at `samples`
// interior parameters of every final interval, plus the dual checks.
std::vector<VerificationReport> verify_state(const ConstructionState& s, int samples = 11);

enum class BranchPolicy { Leftmost, Random, Itinerary, Exhaustive };
BranchPolicy parse_branch_policy(const std::string& s);

struct PullbackOptions {
  BranchPolicy policy = BranchPolicy::Itinerary;
  std::uint64_t seed = 0;  // Random
  Word itinerary;          // lap symbols, Itinerary (cycled when shorter than depth)
};

struct PullbackResult {
  std::vector<Real> diam;      // diam_0 .. diam_depth
  std::vector<Real> orbit;     // x_0 .. x_depth (Exhaustive: empty)
  Word branches;               // lap of each chosen preimage
  double rho = 0;              // least squares slope over the last half, negated
  double rho_endpoint = 0;     // -(1/N) log(diam_N / diam_0)
};

// Pulls (x - delta, x + delta) ∩ [0,1] back along a backward orbit of x,
// keeping the monotone piece containing the chosen preimage. Exhaustive
// reports the largest piece over all branch choices (depth <= 12).
// Throws BranchDead when a prescribed branch does not contain a preimage.
PullbackResult pullback_shrink(const BimodalMap& m, const BigReal& x, const BigReal& delta, std::size_t depth,
                               const PullbackOptions& opt = {});

// n,diam_n
std::string pullback_csv(const PullbackResult& r);

// Least squares slope of log y against n over the last half of the samples.
double fit_rate(const std::vector<double>& log_y);

}  // namespace kneadlab
