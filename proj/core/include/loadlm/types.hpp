// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "loadlm/error.hpp"

namespace loadlm {

using Timestamp = std::chrono::sys_seconds;

enum class Resolution { kDaily, kHourly };

// Prompt serialization format: plain value list, list plus statistics,
// or per-position clauses plus statistics.
enum class Format { kText, kTs, kEts };

std::string_view ToString(Resolution r);
std::string_view ToString(Format f);
std::optional<Resolution> ParseResolution(std::string_view s);
std::optional<Format> ParseFormat(std::string_view s);

std::chrono::seconds StepDuration(Resolution r);

// Timestamped univariate load sequence without gaps. Values are finite and
// non-negative; timestamps are implied by start + i * step.
class LoadSeries {
 public:
  LoadSeries(std::string name, Resolution resolution, Timestamp start,
             std::vector<double> values);

  const std::string& name() const { return name_; }
  Resolution resolution() const { return resolution_; }
  Timestamp start() const { return start_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }

  Timestamp TimeAt(std::size_t i) const;
  // Exclusive end: the timestamp one step past the last value.
  Timestamp End() const { return TimeAt(values_.size()); }

  // Contiguous sub-range [first, first + count) as a new series.
  LoadSeries Slice(std::size_t first, std::size_t count,
                   std::string name) const;

 private:
  std::string name_;
  Resolution resolution_;
  Timestamp start_;
  std::vector<double> values_;
};

struct WindowSpec {
  std::size_t input_len = 7;
  std::size_t output_len = 7;
  std::size_t obs_len = 28;
  std::size_t stride = 1;

  // 7/7 for daily data, 24/24 for hourly; observation window is 4x input.
  static WindowSpec Defaults(Resolution r);

  // Throws kInvalidArgument on zero lengths or obs_len < input_len.
  void Validate() const;
};

struct ForecastInstance {
  std::string series_id;
  std::size_t index = 0;  // ordinal within the series' instance list
  Timestamp t0{};         // first target step
  std::vector<double> x;
  std::vector<double> x_obs;
  std::vector<double> y;

  std::string Ref() const;
};

struct StatSummary {
  double max_obs = 0.0;
  double min_obs = 0.0;
  double avg_in = 0.0;
};

struct RunConfig {
  WindowSpec window;
  Format format = Format::kText;
  int precision = 0;
  std::uint64_t seed = 0;
  std::string backend = "echo";
  std::size_t batch_size = 32;
};

// Slides a window of obs_len + output_len steps over the series.
// Throws kSeriesTooShort when fewer than obs_len + output_len values exist.
std::vector<ForecastInstance> MakeInstances(const LoadSeries& series,
                                            const WindowSpec& spec);

// Number of instances MakeInstances yields for a series of `length` values.
std::size_t InstanceCount(std::size_t length, const WindowSpec& spec);

// Formats a UTC timestamp as "YYYY-MM-DD HH:MM:SS".
std::string FormatTimestamp(Timestamp t);
// Accepts "YYYY-MM-DD", "YYYY-MM-DD HH:MM[:SS]" and the ISO 'T' separator.
std::optional<Timestamp> ParseTimestamp(std::string_view s);

}  // namespace loadlm
