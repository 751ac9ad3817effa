// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace loadlm::cli {

// Runs the loadlm command line. Failures print {"error": ..., "message": ...}
// on `err` and return a nonzero exit code.
int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace loadlm::cli
