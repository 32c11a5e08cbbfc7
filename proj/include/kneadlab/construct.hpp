#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "kneadlab/families.hpp"
#include "kneadlab/paramsearch.hpp"
#include "kneadlab/symbolic.hpp"

namespace kneadlab {

enum class Mode { SingleFamily, DualFamily };
const char* mode_name(Mode m);  // "single" / "dual"
Mode parse_mode(const std::string& s);

struct Rates {
  double lambda = 1.2;
  double lambda_prime = 2.0;
  double lambda1 = 0.5;  // A-step window for d_p
  double lambda2 = 0.9;
  // second family (dual mode)
  double lambda_tilde = 1.2;
  double lambda_tilde_prime = 2.0;
  // exponent straddle for dual A-steps, eta = k1 / k2
  double theta1 = 0;
  double theta2 = 0;
  double eta = 0;
};

// Default rates for a mode: single uses lambda1 = 0.5, lambda2 = 0.9; dual
// uses 0.95, 1.05 with theta1, theta2, eta from the lap multipliers at 0.
Rates default_rates(Mode mode, mpfr_prec_t bits = 256);
// Throws InvalidArgument when the orderings the construction relies on fail.
void validate_rates(Mode mode, const Rates& r);

struct ConstructConfig {
  Mode mode = Mode::SingleFamily;
  mpfr_prec_t bits = 256;
  Rates rates;
  int samples = 9;              // interior sample parameters
  std::size_t k_floor = 8;
  std::size_t k_cap = 1u << 14;
  int k0_start = 2;
  int k0_max = 8;
  // progress messages (attempted k values, failed checks)
  std::function<void(const std::string&)> progress;
};

// One sampled inequality: the worst instance over all samples and indices.
struct CheckRecord {
  std::string name;
  bool pass = true;
  std::string family;
  std::size_t index = 0;  // m, p or l of the worst instance
  int sample = -1;        // sample number, -1 for non-sampled checks
  double lhs = 0;         // both sides in log scale (natural log)
  double rhs = 0;
  std::string relation;   // ">" or "<"
};

// A parameter located by find_param during a step, with its bracket half width
// as err. label: gamma1 / gamma2 for the pair bounding the new interval,
// inner1 / inner2 for the pair bounding the intermediate one.
struct BracketRecord {
  std::string family;
  std::string label;
  BigReal gamma;
};

struct StepLog {
  std::string type;  // "bootstrap", "A", "B"
  std::size_t n = 0;  // stage produced by this step
  std::size_t k0 = 0, k1 = 0, k2 = 0, k3 = 0;
  std::size_t p = 0, t = 0;
  std::string delta;  // B-steps: scheduled bound
  int attempts = 0;
  std::vector<CheckRecord> checks;
  std::vector<BracketRecord> brackets;
};

struct PMark {
  std::size_t n = 0;
  std::size_t p = 0;
  char type = 'A';
};

struct ConstructionState {
  Mode mode = Mode::SingleFamily;
  mpfr_prec_t precision_bits = 256;
  Rates rates;
  Word prefix;                          // S_n
  std::vector<std::size_t> t;           // t_1, t_2, ...
  std::vector<PMark> p_marks;
  std::vector<ParamInterval> intervals;  // current intervals, one per family
  std::vector<std::vector<ParamInterval>> history;  // intervals at every stage
  std::vector<StepLog> step_log;
  int samples = 9;

  std::size_t stage() const { return t.size(); }
  std::size_t t_last() const { return t.empty() ? 0 : t.back(); }
  std::size_t b_steps() const;
};

ConstructionState bootstrap(const ConstructConfig& cfg);
ConstructionState step_A(const ConstructionState& s, const ConstructConfig& cfg);
ConstructionState step_B(const ConstructionState& s, const BigReal& delta, const ConstructConfig& cfg);
ConstructionState dual_step_A(const ConstructionState& s, const ConstructConfig& cfg);
ConstructionState dual_step_B(const ConstructionState& s, const BigReal& delta, const ConstructConfig& cfg);

// Bootstrap followed by the schedule ("ABAB"). persist is called with the
// state after every successful step; a failing step rethrows after the last
// good state was persisted.
using PersistFn = std::function<void(const ConstructionState&)>;
ConstructionState run(const std::string& schedule, const ConstructConfig& cfg, const PersistFn& persist = {});

// Families used by a mode, in interval order.
std::vector<Family> mode_families(Mode m);

}  // namespace kneadlab
