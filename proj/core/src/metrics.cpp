// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/metrics.hpp"

#include <cmath>

#include <fmt/format.h>
#include <json.hpp>

namespace loadlm {
namespace {

using nlohmann::json;

struct Accumulator {
  CompensatedSum abs_err;
  CompensatedSum sq_err;
  std::size_t points = 0;

  void Add(std::span<const double> pred, std::span<const double> truth) {
    for (std::size_t j = 0; j < pred.size(); ++j) {
      const double e = pred[j] - truth[j];
      abs_err.Add(std::abs(e));
      sq_err.Add(e * e);
    }
    points += pred.size();
  }
  double mae() const {
    return points == 0 ? 0.0 : abs_err.value() / static_cast<double>(points);
  }
  double rmse() const {
    return points == 0 ? 0.0 : std::sqrt(sq_err.value() / static_cast<double>(points));
  }
};

// Three decimals with trailing zeros stripped: 0.085, 0.5, 0.
std::string CompactRate(double h) {
  std::string s = fmt::format("{:.3f}", h);
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string MarkdownRow(const std::string& method, const FormatMetrics& m) {
  return fmt::format("| {} | {} | {:.2f} | {:.2f} |\n", method,
                     CompactRate(m.hallucination_rate), m.mae, m.rmse);
}

constexpr std::string_view kMarkdownHeader =
    "| Method | Hallucination Rate | MAE | RMSE |\n"
    "|---|---|---|---|\n";

json ToJson(const FormatMetrics& m) {
  return json{{"n_samples", m.n_samples},
              {"n_hallucinated", m.n_hallucinated},
              {"hallucination_rate", m.hallucination_rate},
              {"mae", m.mae},
              {"rmse", m.rmse}};
}

FormatMetrics MetricsFromJson(const json& j) {
  FormatMetrics m;
  m.n_samples = j.at("n_samples").get<std::size_t>();
  m.n_hallucinated = j.at("n_hallucinated").get<std::size_t>();
  m.hallucination_rate = j.at("hallucination_rate").get<double>();
  m.mae = j.at("mae").get<double>();
  m.rmse = j.at("rmse").get<double>();
  return m;
}

}  // namespace

void CompensatedSum::Add(double v) {
  const double t = sum_ + v;
  if (std::abs(sum_) >= std::abs(v)) {
    carry_ += (sum_ - t) + v;
  } else {
    carry_ += (v - t) + sum_;
  }
  sum_ = t;
}

MetricsReport Evaluate(std::span<const ParseOutcome> outcomes,
                       std::span<const std::vector<double>> targets) {
  if (outcomes.size() != targets.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("{} outcomes vs {} targets", outcomes.size(),
                            targets.size()));
  }
  MetricsReport r;
  Accumulator acc;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].repaired.size() != targets[i].size()) {
      throw Error(ErrorCode::kLengthMismatch,
                  fmt::format("sample {}: {} repaired values vs {} targets", i,
                              outcomes[i].repaired.size(), targets[i].size()));
    }
    if (!outcomes[i].verdict.clean()) ++r.n_hallucinated;
    acc.Add(outcomes[i].repaired, targets[i]);
  }
  r.n_samples = outcomes.size();
  r.hallucination_rate =
      r.n_samples == 0 ? 0.0
                       : static_cast<double>(r.n_hallucinated) /
                             static_cast<double>(r.n_samples);
  r.mae = acc.mae();
  r.rmse = acc.rmse();
  return r;
}

MetricsReport EvaluateForecasts(std::span<const std::vector<double>> forecasts,
                                std::span<const std::vector<double>> targets) {
  if (forecasts.size() != targets.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                fmt::format("{} forecasts vs {} targets", forecasts.size(),
                            targets.size()));
  }
  MetricsReport r;
  Accumulator acc;
  for (std::size_t i = 0; i < forecasts.size(); ++i) {
    if (forecasts[i].size() != targets[i].size()) {
      throw Error(ErrorCode::kLengthMismatch,
                  fmt::format("sample {}: length {} vs {}", i,
                              forecasts[i].size(), targets[i].size()));
    }
    acc.Add(forecasts[i], targets[i]);
  }
  r.n_samples = forecasts.size();
  r.mae = acc.mae();
  r.rmse = acc.rmse();
  return r;
}

std::string RenderReport(const MetricsReport& r, ReportStyle style) {
  switch (style) {
    case ReportStyle::kJson: {
      json j = ToJson(r.Totals());
      j["method"] = r.method;
      json breakdown = json::object();
      for (const auto& [fmt_name, m] : r.per_format_breakdown) {
        breakdown[fmt_name] = ToJson(m);
      }
      j["per_format_breakdown"] = breakdown;
      return j.dump(2) + "\n";
    }
    case ReportStyle::kMarkdownTable: {
      std::string out(kMarkdownHeader);
      for (const auto& [fmt_name, m] : r.per_format_breakdown) {
        out += MarkdownRow(fmt::format("{} ({})", r.method, fmt_name), m);
      }
      return out;
    }
    case ReportStyle::kCsv: {
      std::string out =
          "method,format,n_samples,n_hallucinated,hallucination_rate,mae,rmse\n";
      auto row = [&](std::string_view f, const FormatMetrics& m) {
        out += fmt::format("{},{},{},{},{},{},{}\n", r.method, f, m.n_samples,
                           m.n_hallucinated, m.hallucination_rate, m.mae, m.rmse);
      };
      row("all", r.Totals());
      for (const auto& [fmt_name, m] : r.per_format_breakdown) row(fmt_name, m);
      return out;
    }
  }
  return {};
}

std::string RenderComparison(std::span<const MetricsReport> reports) {
  std::string out(kMarkdownHeader);
  for (const auto& r : reports) {
    if (r.per_format_breakdown.empty()) {
      out += MarkdownRow(r.method, r.Totals());
      continue;
    }
    for (const auto& [fmt_name, m] : r.per_format_breakdown) {
      out += MarkdownRow(fmt::format("{} ({})", r.method, fmt_name), m);
    }
  }
  return out;
}

MetricsReport ReportFromJson(std::string_view text) {
  try {
    const json j = json::parse(text);
    MetricsReport r;
    const FormatMetrics totals = MetricsFromJson(j);
    r.method = j.at("method").get<std::string>();
    r.n_samples = totals.n_samples;
    r.n_hallucinated = totals.n_hallucinated;
    r.hallucination_rate = totals.hallucination_rate;
    r.mae = totals.mae;
    r.rmse = totals.rmse;
    for (const auto& [k, v] : j.at("per_format_breakdown").items()) {
      r.per_format_breakdown[k] = MetricsFromJson(v);
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaError,
                fmt::format("invalid metrics report: {}", e.what()));
  }
}

}  // namespace loadlm
