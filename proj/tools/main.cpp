// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return loadlm::cli::Run(args, std::cout, std::cerr);
}
