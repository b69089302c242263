#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clapping/verify/checks.hpp"

namespace clapping::tools {

/// Named groups of verification checks runnable from the command line.
std::vector<std::string> suite_names();

/// Runs one suite ("all" runs every suite). Throws ConfigError on an
/// unknown name.
std::vector<verify::CheckReport> run_suite(const std::string& name, std::uint64_t seed);

}  // namespace clapping::tools
