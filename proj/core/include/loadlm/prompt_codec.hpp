// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

// Time-series to natural-language serialization.
//
// Three prompt formats are supported:
//   Text  "The electricity consumption of each day is as follows, 1,2,3kWh.
//          What is the daily consumption of next week?"
//   Ts    Text plus a statistics sentence (max/min over the observation
//         window, mean over the input window) before the question.
//   Ets   one positional clause per value ("... of day one is 1, ...")
//         followed by the statistics sentence and the question.
//
// Targets use the same body as the input without statistics or question.
// Hourly data mirrors the daily wording with day->hour and week->day.

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "loadlm/types.hpp"

namespace loadlm {

struct PromptRecord {
  Format format = Format::kText;
  std::string input_text;
  std::string target_text;
  std::string instance_ref;
  std::size_t expected_len = 0;
  std::string unit_label = "kWh";
  Resolution step = Resolution::kDaily;
  int precision = 0;
  // Carried for reporting; not part of the serialized prompt. target_values
  // hold y as rendered, i.e. rounded to `precision`.
  std::string t0;
  std::vector<double> target_values;

  bool operator==(const PromptRecord&) const = default;
};

struct CodecOptions {
  Resolution step = Resolution::kDaily;
  int precision = 0;
  std::string unit = "kWh";
};

// Fixed-point rendering with round-half-away-from-zero applied to the
// shortest round-trip decimal form of `v`, so 1184.825 renders "1184.83" at
// two places. Throws kNonFinite for NaN/Inf.
std::string FormatNumber(double v, int precision);

StatSummary ComputeStats(const ForecastInstance& inst);

// "one" .. "one hundred". Throws kOutOfRange outside [1, 100].
std::string PositionWord(int i);
// Inverse of PositionWord; returns 0 when `word` is not a position word.
int PositionFromWord(std::string_view word);

PromptRecord EncodeText(const ForecastInstance& inst, const CodecOptions& opts);
PromptRecord EncodeTs(const ForecastInstance& inst, const CodecOptions& opts);
PromptRecord EncodeEts(const ForecastInstance& inst, const CodecOptions& opts);
PromptRecord Encode(const ForecastInstance& inst, Format format,
                    const CodecOptions& opts);

// A target text is a fixed sequence of literal segments and numeric slots.
// Encoding fills the slots; constrained decoding walks the same sequence.
struct NumberSlot {
  int position = 0;  // 1-based horizon step
};
using TemplateSegment = std::variant<std::string, NumberSlot>;

struct TargetTemplate {
  Format format = Format::kText;
  std::vector<TemplateSegment> segments;
};

TargetTemplate MakeTargetTemplate(Format format, Resolution step,
                                  std::size_t expected_len,
                                  std::string_view unit = "kWh");

// Fills the template's slots in order. Throws kLengthMismatch when the number
// of rendered values differs from the slot count.
std::string RenderTarget(const TargetTemplate& tmpl,
                         const std::vector<std::string>& values);

// Ets body from explicit (position, rendered value) clauses. Clauses need not
// be contiguous; used to build damaged outputs in tests and fault injection.
std::string RenderEtsClauses(
    Resolution step, const std::vector<std::pair<int, std::string>>& clauses);

// Text/Ts body: "The electricity consumption of each day is as follows, " +
// comma-joined values + unit + ".".
std::string RenderValueListBody(Resolution step,
                                const std::vector<std::string>& values,
                                std::string_view unit);

}  // namespace loadlm
