#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "spatialgen/error.hpp"

namespace spatialgen {

inline constexpr std::string_view kVersion = "0.1.0";

/// 0 ok, 2 usage or configuration, 3 numeric failure, 4 I/O.
int exit_code_for(ErrorCode code) noexcept;

/// 64-bit FNV-1a of `bytes`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Runs one command line. `args[0]` is the program name. Errors are reported
/// on `err` as a single `error_code: message` line.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace spatialgen
