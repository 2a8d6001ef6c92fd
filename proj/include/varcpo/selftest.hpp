#ifndef VARCPO_SELFTEST_HPP_
#define VARCPO_SELFTEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace varcpo {

struct SelftestOptions {
  int sequences = 200;      ///< square-return decomposition cases
  int distributions = 100;  ///< augmented-cost identity cases
  int chebyshev = 300;      ///< Chebyshev validity cases
  double beta_perturbation = 0.0;  ///< negative control: offsets beta in the augmented cost
  std::uint64_t seed = 12345;
};

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;  ///< largest relative error, or largest P(C >= rho) - epsilon
  bool passed() const { return cases > 0 && failures == 0; }
};

/// Square-return decomposition, augmented-cost identity and Chebyshev
/// validity checks on randomly drawn cases.
std::vector<SuiteResult> run_selftest(const SelftestOptions& options = {});

}  // namespace varcpo

#endif  // VARCPO_SELFTEST_HPP_
