// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>

#include <fmt/format.h>

#include "loadlm/types.hpp"

namespace loadlm {

std::string_view ToString(Resolution r) {
  return r == Resolution::kDaily ? "daily" : "hourly";
}

std::string_view ToString(Format f) {
  switch (f) {
    case Format::kText: return "text";
    case Format::kTs: return "ts";
    case Format::kEts: return "ets";
  }
  return "text";
}

std::optional<Resolution> ParseResolution(std::string_view s) {
  if (s == "daily") return Resolution::kDaily;
  if (s == "hourly") return Resolution::kHourly;
  return std::nullopt;
}

std::optional<Format> ParseFormat(std::string_view s) {
  if (s == "text") return Format::kText;
  if (s == "ts") return Format::kTs;
  if (s == "ets") return Format::kEts;
  return std::nullopt;
}

std::chrono::seconds StepDuration(Resolution r) {
  return r == Resolution::kDaily ? std::chrono::seconds(86400)
                                 : std::chrono::seconds(3600);
}

LoadSeries::LoadSeries(std::string name, Resolution resolution,
                       Timestamp start, std::vector<double> values)
    : name_(std::move(name)),
      resolution_(resolution),
      start_(start),
      values_(std::move(values)) {
  if (values_.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("series '{}' is empty", name_));
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw Error(ErrorCode::kNonFinite,
                  fmt::format("series '{}' value {} is not finite", name_, i));
    }
    if (values_[i] < 0.0) {
      throw Error(ErrorCode::kInvalidArgument,
                  fmt::format("series '{}' value {} is negative", name_, i));
    }
  }
}

Timestamp LoadSeries::TimeAt(std::size_t i) const {
  return start_ + StepDuration(resolution_) * static_cast<std::int64_t>(i);
}

LoadSeries LoadSeries::Slice(std::size_t first, std::size_t count,
                             std::string name) const {
  if (count == 0 || first + count > values_.size()) {
    throw Error(ErrorCode::kIndexOutOfRange,
                fmt::format("slice [{}, {}) outside series of length {}",
                            first, first + count, values_.size()));
  }
  std::vector<double> v(values_.begin() + static_cast<std::ptrdiff_t>(first),
                        values_.begin() +
                            static_cast<std::ptrdiff_t>(first + count));
  return LoadSeries(std::move(name), resolution_, TimeAt(first), std::move(v));
}

WindowSpec WindowSpec::Defaults(Resolution r) {
  WindowSpec w;
  const std::size_t len = r == Resolution::kDaily ? 7 : 24;
  w.input_len = len;
  w.output_len = len;
  w.obs_len = 4 * len;
  w.stride = 1;
  return w;
}

void WindowSpec::Validate() const {
  if (input_len == 0 || output_len == 0 || obs_len == 0 || stride == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "window lengths and stride must be positive");
  }
  if (obs_len < input_len) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("obs_len {} < input_len {}", obs_len, input_len));
  }
}

std::string ForecastInstance::Ref() const {
  return fmt::format("{}#{}", series_id, index);
}

std::size_t InstanceCount(std::size_t length, const WindowSpec& spec) {
  const std::size_t span = spec.obs_len + spec.output_len;
  if (length < span) return 0;
  return (length - span) / spec.stride + 1;
}

std::vector<ForecastInstance> MakeInstances(const LoadSeries& series,
                                            const WindowSpec& spec) {
  spec.Validate();
  const std::size_t span = spec.obs_len + spec.output_len;
  if (series.size() < span) {
    throw Error(ErrorCode::kSeriesTooShort,
                fmt::format("series '{}' has {} values, needs at least {}",
                            series.name(), series.size(), span));
  }
  const auto& v = series.values();
  const std::size_t n = InstanceCount(series.size(), spec);
  std::vector<ForecastInstance> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t begin = k * spec.stride;
    const std::size_t target = begin + spec.obs_len;
    ForecastInstance inst;
    inst.series_id = series.name();
    inst.index = k;
    inst.t0 = series.TimeAt(target);
    inst.x_obs.assign(v.begin() + static_cast<std::ptrdiff_t>(begin),
                      v.begin() + static_cast<std::ptrdiff_t>(target));
    inst.x.assign(v.begin() + static_cast<std::ptrdiff_t>(target - spec.input_len),
                  v.begin() + static_cast<std::ptrdiff_t>(target));
    inst.y.assign(v.begin() + static_cast<std::ptrdiff_t>(target),
                  v.begin() + static_cast<std::ptrdiff_t>(target + spec.output_len));
    out.push_back(std::move(inst));
  }
  return out;
}

std::string FormatTimestamp(Timestamp t) {
  using namespace std::chrono;
  const auto day_point = floor<days>(t);
  const year_month_day ymd{day_point};
  const hh_mm_ss hms{t - day_point};
  return fmt::format("{:04d}-{:02d}-{:02d} {:02d}:{:02d}:{:02d}",
                     static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()),
                     static_cast<unsigned>(ymd.day()), hms.hours().count(),
                     hms.minutes().count(), hms.seconds().count());
}

std::optional<Timestamp> ParseTimestamp(std::string_view s) {
  using namespace std::chrono;
  while (!s.empty() && (s.front() == ' ' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '"' || s.back() == '\r' ||
                        s.back() == 'Z')) {
    s.remove_suffix(1);
  }
  const std::string buf(s);
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, sec = 0;
  char sep = 0;
  int consumed = 0;
  int n = std::sscanf(buf.c_str(), "%4d-%2d-%2d%n%c%2d:%2d:%2d", &y, &mo, &d,
                      &consumed, &sep, &h, &mi, &sec);
  if (n < 3) return std::nullopt;
  if (n == 3) {
    if (static_cast<std::size_t>(consumed) != buf.size()) return std::nullopt;
  } else {
    if (sep != ' ' && sep != 'T') return std::nullopt;
    if (n < 6) return std::nullopt;
    if (n == 6) sec = 0;
  }
  const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)},
                           day{static_cast<unsigned>(d)}};
  if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || sec < 0 || sec > 59) {
    return std::nullopt;
  }
  return sys_days{ymd} + hours{h} + minutes{mi} + seconds{sec};
}

}  // namespace loadlm
