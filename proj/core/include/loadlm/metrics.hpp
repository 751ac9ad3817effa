// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loadlm/extractor.hpp"

namespace loadlm {

struct FormatMetrics {
  std::size_t n_samples = 0;
  std::size_t n_hallucinated = 0;
  double hallucination_rate = 0.0;
  double mae = 0.0;
  double rmse = 0.0;

  bool operator==(const FormatMetrics&) const = default;
};

struct MetricsReport {
  std::string method;
  std::size_t n_samples = 0;
  std::size_t n_hallucinated = 0;
  double hallucination_rate = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  std::map<std::string, FormatMetrics> per_format_breakdown;

  FormatMetrics Totals() const {
    return {n_samples, n_hallucinated, hallucination_rate, mae, rmse};
  }
  bool operator==(const MetricsReport&) const = default;
};

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void Add(double v);
  double value() const { return sum_ + carry_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

// H = hallucinated / samples; MAE and RMSE over every scalar point of the
// flattened horizon. Repaired values always enter the error metrics.
// Throws kLengthMismatch on mismatched list or sequence lengths.
MetricsReport Evaluate(std::span<const ParseOutcome> outcomes,
                       std::span<const std::vector<double>> targets);

// Same reduction for plain numeric forecasts (baselines never hallucinate).
MetricsReport EvaluateForecasts(std::span<const std::vector<double>> forecasts,
                                std::span<const std::vector<double>> targets);

enum class ReportStyle { kJson, kMarkdownTable, kCsv };

std::string RenderReport(const MetricsReport& r, ReportStyle style);
// One Markdown table with a row per breakdown entry across all reports
// (or the totals row for reports without a breakdown).
std::string RenderComparison(std::span<const MetricsReport> reports);

// Inverse of RenderReport(kJson). Throws kSchemaError.
MetricsReport ReportFromJson(std::string_view json);

}  // namespace loadlm
