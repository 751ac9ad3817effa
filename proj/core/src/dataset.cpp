// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "loadlm/rng.hpp"

namespace loadlm {
namespace {

using nlohmann::json;

std::vector<std::string> SplitCsvLine(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(std::move(cur));
  return cells;
}

std::string Trim(std::string s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

int MonthIndex(Timestamp t) {
  using namespace std::chrono;
  const year_month_day ymd{floor<days>(t)};
  return static_cast<int>(ymd.year()) * 12 +
         static_cast<int>(static_cast<unsigned>(ymd.month())) - 1;
}

Timestamp MonthStart(int month_index) {
  using namespace std::chrono;
  const year_month_day ymd{year{month_index / 12},
                           month{static_cast<unsigned>(month_index % 12 + 1)},
                           day{1}};
  return sys_days{ymd};
}

std::size_t FirstIndexAtOrAfter(const LoadSeries& s, Timestamp t) {
  if (t <= s.start()) return 0;
  const auto step = StepDuration(s.resolution()).count();
  const auto delta = (t - s.start()).count();
  return static_cast<std::size_t>((delta + step - 1) / step);
}

double Mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double StdDev(std::span<const double> v) {
  const double m = Mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double CoefficientOfVariation(std::span<const double> z, double spread) {
  std::vector<double> e(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) e[i] = std::exp(spread * z[i]);
  return StdDev(e) / Mean(e);
}

}  // namespace

LoadSeries IngestCsv(const std::filesystem::path& path, const CsvOptions& opts) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot open '{}'", path.string()));
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw Error(ErrorCode::kSchemaError, "CSV has no header row");
  }
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = SplitCsvLine(line);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (Trim(header[i]) == name) return i;
    }
    throw Error(ErrorCode::kSchemaError,
                fmt::format("column '{}' not found in header", name));
  };
  const std::size_t ts_col = column(opts.timestamp_col);
  const std::size_t val_col = column(opts.value_col);

  std::vector<std::pair<Timestamp, double>> rows;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (Trim(line).empty()) continue;
    const auto cells = SplitCsvLine(line);
    if (cells.size() <= std::max(ts_col, val_col)) {
      throw Error(ErrorCode::kParseError,
                  fmt::format("row {}: expected at least {} cells", row,
                              std::max(ts_col, val_col) + 1));
    }
    const auto ts = ParseTimestamp(cells[ts_col]);
    const std::string val_text = Trim(cells[val_col]);
    double v = 0.0;
    const auto res = std::from_chars(val_text.data(),
                                     val_text.data() + val_text.size(), v);
    if (!ts || val_text.empty() || res.ec != std::errc() ||
        res.ptr != val_text.data() + val_text.size() || !std::isfinite(v)) {
      throw Error(ErrorCode::kParseError,
                  fmt::format("row {}: cannot parse ('{}', '{}')", row,
                              cells[ts_col], cells[val_col]));
    }
    rows.emplace_back(*ts, v);
  }
  if (rows.empty()) {
    throw Error(ErrorCode::kParseError, "CSV has no data rows");
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  const auto step = StepDuration(opts.resolution);
  std::vector<double> values{rows.front().second};
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto prev = rows[i - 1].first;
    const auto cur = rows[i].first;
    if (cur == prev) {
      throw Error(ErrorCode::kDuplicateTimestamp,
                  fmt::format("duplicate timestamp {}", FormatTimestamp(cur)));
    }
    const auto delta = cur - prev;
    if (delta != step) {
      if (opts.gaps == GapPolicy::kReject || delta % step != std::chrono::seconds(0)) {
        throw Error(ErrorCode::kGapError,
                    fmt::format("gap at {}", FormatTimestamp(prev + step)));
      }
      for (auto t = prev + step; t < cur; t += step) values.push_back(values.back());
    }
    values.push_back(rows[i].second);
  }
  return LoadSeries(opts.name, opts.resolution, rows.front().first,
                    std::move(values));
}

void WriteSeriesCsv(const LoadSeries& series, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot write '{}'", path.string()));
  }
  out << "timestamp,load\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << fmt::format("{},{}\n", FormatTimestamp(series.TimeAt(i)),
                       series.values()[i]);
  }
}

MonthSplit SplitByMonths(const LoadSeries& series, int train_months,
                         int val_months, int test_months) {
  if (train_months <= 0 || val_months <= 0 || test_months <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "split lengths must be positive");
  }
  const int first = MonthIndex(series.start());
  const int last = MonthIndex(series.TimeAt(series.size() - 1));
  const int total = train_months + val_months + test_months;
  if (last - first + 1 < total) {
    throw Error(ErrorCode::kSpanTooShort,
                fmt::format("series '{}' spans {} months, split needs {}",
                            series.name(), last - first + 1, total));
  }
  const std::size_t b1 = FirstIndexAtOrAfter(series, MonthStart(first + train_months));
  const std::size_t b2 =
      FirstIndexAtOrAfter(series, MonthStart(first + train_months + val_months));
  const std::size_t b3 = std::min(
      series.size(), FirstIndexAtOrAfter(series, MonthStart(first + total)));
  return MonthSplit{series.Slice(0, b1, series.name() + "-train"),
                    series.Slice(b1, b2 - b1, series.name() + "-val"),
                    series.Slice(b2, b3 - b2, series.name() + "-test")};
}

LoadSeries SynthesizeSeries(std::uint64_t seed, const SyntheticSpec& spec) {
  if (spec.length < 2 || !(spec.mean > 0.0) || !(spec.std > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "synthetic series needs length >= 2 and positive mean/std");
  }
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const bool hourly = spec.resolution == Resolution::kHourly;
  const double steps_per_day = hourly ? 24.0 : 1.0;
  const double year_steps = 365.25 * steps_per_day;
  const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);

  // Working days high, weekends low; intraday morning and evening peaks.
  constexpr double kWeek[7] = {0.55, 0.6, 0.6, 0.55, 0.5, -0.9, -1.35};
  const auto start_day = std::chrono::floor<std::chrono::days>(spec.start);
  const std::chrono::weekday first_wd{start_day};
  const unsigned wd0 = first_wd.iso_encoding() - 1;  // Monday = 0

  std::vector<double> z(spec.length);
  double ar = 0.0;
  const double rho = hourly ? 0.95 : 0.6;
  for (std::size_t t = 0; t < spec.length; ++t) {
    const auto day_n = static_cast<std::size_t>(static_cast<double>(t) / steps_per_day);
    const unsigned dow = static_cast<unsigned>((wd0 + day_n) % 7);
    double v = kWeek[dow];
    if (hourly) {
      const double hour = static_cast<double>(t % 24);
      v = 0.35 * v + 1.1 * std::exp(-0.5 * std::pow((hour - 11.0) / 3.0, 2)) +
          0.8 * std::exp(-0.5 * std::pow((hour - 19.5) / 2.0, 2)) - 0.6;
    }
    v += 0.45 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / year_steps + phase);
    v += 0.3 * static_cast<double>(t) / static_cast<double>(spec.length);
    ar = rho * ar + std::sqrt(1.0 - rho * rho) * normal(rng);
    v += 0.45 * ar + 0.1 * normal(rng);
    z[t] = v;
  }
  const double zm = Mean(z);
  const double zs = StdDev(z);
  for (double& v : z) v = (v - zm) / zs;

  // CV of exp(s * z) is increasing in s; bisect for the target CV.
  const double target_cv = spec.std / spec.mean;
  double lo = 0.0;
  double hi = 4.0;
  for (int it = 0; it < 80; ++it) {
    const double mid = 0.5 * (lo + hi);
    (CoefficientOfVariation(z, mid) < target_cv ? lo : hi) = mid;
  }
  const double spread = 0.5 * (lo + hi);
  std::vector<double> values(spec.length);
  for (std::size_t t = 0; t < spec.length; ++t) values[t] = std::exp(spread * z[t]);
  const double scale = spec.mean / Mean(values);
  for (double& v : values) v = std::max(0.0, v * scale);
  return LoadSeries(spec.name, spec.resolution, spec.start, std::move(values));
}

LoadSeries SynthesizeIcldLike(std::uint64_t seed, std::size_t n_days,
                              double mean, double std) {
  if (n_days < 60) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("need at least 60 days, got {}", n_days));
  }
  SyntheticSpec spec;
  spec.name = "icld-like";
  spec.resolution = Resolution::kDaily;
  spec.length = n_days;
  spec.mean = mean;
  spec.std = std;
  return SynthesizeSeries(seed, spec);
}

std::string RecordToJson(const PromptRecord& r) {
  json meta{{"unit_label", r.unit_label},
            {"step", ToString(r.step)},
            {"precision", r.precision},
            {"t0", r.t0},
            {"target_values", r.target_values}};
  json j{{"format", ToString(r.format)},
         {"input_text", r.input_text},
         {"target_text", r.target_text},
         {"expected_len", r.expected_len},
         {"instance_ref", r.instance_ref},
         {"meta", std::move(meta)}};
  return j.dump();
}

PromptRecord RecordFromJson(std::string_view line) {
  try {
    const json j = json::parse(line);
    PromptRecord r;
    const auto format = ParseFormat(j.at("format").get<std::string>());
    if (!format) throw Error(ErrorCode::kSchemaError, "unknown format");
    r.format = *format;
    r.input_text = j.at("input_text").get<std::string>();
    r.target_text = j.at("target_text").get<std::string>();
    r.expected_len = j.at("expected_len").get<std::size_t>();
    r.instance_ref = j.at("instance_ref").get<std::string>();
    if (r.expected_len == 0) throw Error(ErrorCode::kSchemaError, "expected_len is 0");
    if (j.contains("meta")) {
      const auto& m = j.at("meta");
      r.unit_label = m.value("unit_label", std::string("kWh"));
      const auto step = ParseResolution(m.value("step", std::string("daily")));
      if (!step) throw Error(ErrorCode::kSchemaError, "unknown step");
      r.step = *step;
      r.precision = m.value("precision", 0);
      r.t0 = m.value("t0", std::string());
      r.target_values = m.value("target_values", std::vector<double>{});
    }
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  }
}

void ExportJsonl(std::span<const PromptRecord> records,
                 const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot write '{}'", path.string()));
  }
  for (const auto& r : records) out << RecordToJson(r) << '\n';
  if (!out) {
    throw Error(ErrorCode::kIoError,
                fmt::format("write failed for '{}'", path.string()));
  }
}

std::vector<PromptRecord> ImportJsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot open '{}'", path.string()));
  }
  std::vector<PromptRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(RecordFromJson(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kSchemaError,
                  fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return out;
}

std::string HashFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kIoError,
                fmt::format("cannot open '{}'", path.string()));
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return fmt::format("{:016x}", Fnv1a64(ss.str()));
}

}  // namespace loadlm
