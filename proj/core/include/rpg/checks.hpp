#pragma once
// Self-test suites behind the `check` subcommand: finite-difference gradient
// agreement, rationality-oracle agreement, and the DiCE estimator checks.
// The dice suite takes an injectable magic-box so a mutated operator can be
// shown to fail it.

#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "rpg/shaping.hpp"

namespace rpg {

struct CheckResult {
  std::string name;
  bool pass = false;
  double metric = 0.0;  // suite-specific (rel. error, agreement count, ...)
  std::string detail;
};

// Central-difference agreement for every exact loss path. The tolerance
// scales with h^2 so a coarse h still yields an informative report.
std::vector<CheckResult> check_grad_suite(double h = 1e-5);

// Grid rationality oracle vs the independent support-enumeration oracle on
// all built-in games plus random strategies, and best-response dominance.
std::vector<CheckResult> check_oracle_suite(uint64_t seed = 0);

using MagicBoxFn = std::function<Value(Value)>;

// Magic-box identities and the sampled-vs-exact manipulator gradient
// consistency trials (positive inner product in >= 19/20 at batch 10^4).
std::vector<CheckResult> check_dice_suite(uint64_t seed = 0, const MagicBoxFn& box = {});

bool all_pass(const std::vector<CheckResult>& results);
void print_results(const std::vector<CheckResult>& results, std::ostream& out);

}  // namespace rpg
