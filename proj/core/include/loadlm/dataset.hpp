// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "loadlm/prompt_codec.hpp"
#include "loadlm/types.hpp"

namespace loadlm {

enum class GapPolicy { kReject, kForwardFill };

struct CsvOptions {
  std::string timestamp_col = "datetime";
  std::string value_col = "nat_demand";
  Resolution resolution = Resolution::kHourly;
  GapPolicy gaps = GapPolicy::kReject;
  std::string name = "series";
};

// Reads a UTF-8 CSV with a header row. Rows are sorted by timestamp.
// Errors: kIoError, kSchemaError (missing column), kParseError (bad row,
// message names the 1-based data row), kDuplicateTimestamp, kGapError
// (message names the first missing timestamp).
LoadSeries IngestCsv(const std::filesystem::path& path, const CsvOptions& opts);

// Writes "timestamp,load" rows; IngestCsv with those column names reads it back.
void WriteSeriesCsv(const LoadSeries& series, const std::filesystem::path& path);

struct MonthSplit {
  LoadSeries train;
  LoadSeries val;
  LoadSeries test;
};

// Contiguous calendar-month splits. Month 1 is the month holding the first
// sample; the test split ends at the end of its last month or the end of the
// series. Throws kSpanTooShort when the series does not reach the last month.
MonthSplit SplitByMonths(const LoadSeries& series, int train_months,
                         int val_months, int test_months);

struct SyntheticSpec {
  std::string name = "synthetic";
  Resolution resolution = Resolution::kDaily;
  std::size_t length = 1100;
  double mean = 3695.10;
  double std = 2334.11;
  Timestamp start = std::chrono::sys_days{std::chrono::year{2018} /
                                          std::chrono::June / 1};
};

// Positive seasonal series: log-domain weekly (and, for hourly data, daily)
// profile + annual cycle + trend + AR(1) noise, exponentiated with a spread
// chosen so the coefficient of variation matches std/mean, then scaled so the
// sample mean is exact. Deterministic in `seed`.
LoadSeries SynthesizeSeries(std::uint64_t seed, const SyntheticSpec& spec);

// Daily industrial-client-like series starting 2018-06-01. n_days >= 60.
LoadSeries SynthesizeIcldLike(std::uint64_t seed, std::size_t n_days,
                              double mean = 3695.10, double std = 2334.11);

void ExportJsonl(std::span<const PromptRecord> records,
                 const std::filesystem::path& path);
// Throws kIoError, or kSchemaError naming the 1-based offending line.
std::vector<PromptRecord> ImportJsonl(const std::filesystem::path& path);

std::string RecordToJson(const PromptRecord& r);
PromptRecord RecordFromJson(std::string_view line);  // throws kSchemaError

// FNV-1a over the file contents, hex encoded.
std::string HashFile(const std::filesystem::path& path);

}  // namespace loadlm
