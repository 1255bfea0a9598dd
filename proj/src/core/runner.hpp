#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "core/config.hpp"

namespace krr {

// Names accepted by run_subcommand, in help order.
const std::vector<std::string>& subcommand_names();
// One-line description for help and usage text; empty for unknown names.
std::string subcommand_summary(const std::string& name);

// Runs one subcommand: prints a one-screen summary to `out` and writes result
// files under config.output.dir. Returns 0 when every assertion in the result
// holds and 2 when one fails; hard errors (unknown name, invalid settings,
// I/O) throw Error.
int run_subcommand(const std::string& name, const Config& config, std::ostream& out);

}  // namespace krr
