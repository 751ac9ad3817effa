// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loadlm/types.hpp"

namespace loadlm {

enum class VerdictKind { kClean, kMissing, kExtra, kMalformed };

struct Verdict {
  VerdictKind kind = VerdictKind::kMalformed;
  std::size_t count = 0;  // k for Missing(k) / Extra(k); 0 otherwise

  bool clean() const { return kind == VerdictKind::kClean; }
  std::string ToString() const;  // "Clean", "Missing(2)", ...
  static std::optional<Verdict> Parse(std::string_view s);
  bool operator==(const Verdict&) const = default;
};

struct ParseOutcome {
  std::vector<double> raw_values;
  Verdict verdict;
  std::vector<double> repaired;  // always expected_len long
  std::optional<std::vector<int>> positions_found;  // Ets only
};

enum class RepairPolicy {
  kAuto,     // positional for Ets, tail padding otherwise
  kTailPad,  // zero-pad / truncate the raw sequence regardless of format
};

struct ParseOptions {
  Format format = Format::kText;
  std::size_t expected_len = 1;
  int precision = 0;  // raw values with more decimals are re-rounded
  RepairPolicy repair = RepairPolicy::kAuto;
};

// Total: every input string, including arbitrary bytes, yields an outcome.
//
// Text/Ts: the first comma-separated run of fixed-point numbers after the
// "as follows" preamble (or anywhere, if the preamble is absent). Spaces
// after commas and a unit suffix on the last value are tolerated.
// Ets: every "consumption of <day|hour> <word> is <number>" clause.
//
// Missing values are zero-filled (Ets: at the absent positions; otherwise
// at the tail), extra values are dropped keeping the first expected_len, and
// an output with no parsable number repairs to all zeros.
ParseOutcome ParsePrediction(std::string_view text, const ParseOptions& opts);

struct Fault {
  enum class Kind { kDropValue, kAddValue, kGarble };
  Kind kind = Kind::kGarble;
  std::size_t position = 0;  // 1-based, DropValue only
  double value = 0.0;        // AddValue only

  static Fault Drop(std::size_t position) { return {Kind::kDropValue, position, 0.0}; }
  static Fault Add(double value) { return {Kind::kAddValue, 0, value}; }
  static Fault Garble() { return {Kind::kGarble, 0, 0.0}; }
};

// Damages a clean target so that it parses as Missing(1), Extra(1) or
// Malformed respectively. Throws kInvalidArgument if `target` is not clean
// text of `format`, kIndexOutOfRange for a drop position past the end.
std::string InjectFault(std::string_view target, const Fault& fault,
                        Format format);

}  // namespace loadlm
