#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ikit {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

/// The fast property suite: closed-form witnesses, theorem limits,
/// equivariance, primal/dual equality, solver oracles, gradient checks,
/// the untrained inductive bias, and the normalization variances.
/// Runs in seconds; every check is deterministic in the seed.
std::vector<CheckResult> selftest_fast(std::uint64_t seed = 0);

bool all_passed(const std::vector<CheckResult>& results);

}  // namespace ikit
