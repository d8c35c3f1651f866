// Copyright 2026 The snp-prune Authors
// SPDX-License-Identifier: Apache-2.0

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "snp/errors.hpp"

int main(int argc, char** argv) {
  using namespace snp::cli;
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    return run(args);
  } catch (const CLI::CallForHelp&) {
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const snp::InvalidPlanError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const snp::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFormat;
  } catch (const snp::ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitArgument;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}
