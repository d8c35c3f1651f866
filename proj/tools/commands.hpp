// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef SNP_TOOLS_COMMANDS_HPP
#define SNP_TOOLS_COMMANDS_HPP

#include <string>
#include <vector>

namespace snp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitFormat = 3;
inline constexpr int kExitArgument = 4;

// Parses and runs one command line (without the program name). Errors
// propagate as exceptions; main maps them to exit codes.
int run(const std::vector<std::string>& args);

}  // namespace snp::cli

#endif  // SNP_TOOLS_COMMANDS_HPP
