#ifndef VARCPO_TOOLS_CLI_HPP_
#define VARCPO_TOOLS_CLI_HPP_

#include <iosfwd>

namespace varcpo {

/// Entry point of the `varcpo` command; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace varcpo

#endif  // VARCPO_TOOLS_CLI_HPP_
