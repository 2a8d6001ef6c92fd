#ifndef VARCPO_CHECKPOINT_HPP_
#define VARCPO_CHECKPOINT_HPP_

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "varcpo/policy.hpp"

namespace varcpo {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Plain-text parameter file. Layout:
///
///   varcpo-checkpoint 1
///   heads <count>
///   head <HeadKind>
///   architecture <input> <hidden...> <output> tanh
///   [log_std_range <min> <max>]   (policies)
///   [output_scale <s>]            (value heads)
///   arrays <count>
///   <one array per line: weights and bias of each layer, then log-stddev>
///
/// Floats are printed with 17 significant digits, which round-trips doubles.
struct Checkpoint {
  std::vector<Policy> policies;
  std::vector<ValueHead> values;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace varcpo

#endif  // VARCPO_CHECKPOINT_HPP_
