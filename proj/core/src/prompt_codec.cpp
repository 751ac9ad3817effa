// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/prompt_codec.hpp"

#include <array>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

namespace loadlm {
namespace {

std::string_view StepNoun(Resolution r) {
  return r == Resolution::kDaily ? "day" : "hour";
}
std::string_view StepAdjective(Resolution r) {
  return r == Resolution::kDaily ? "daily" : "hourly";
}
std::string_view HorizonNoun(Resolution r) {
  return r == Resolution::kDaily ? "week" : "day";
}

std::string ValueListPreamble(Resolution r) {
  return fmt::format("The electricity consumption of each {} is as follows, ",
                     StepNoun(r));
}

std::string Question(Resolution r) {
  return fmt::format("What is the {} consumption of next {}?",
                     StepAdjective(r), HorizonNoun(r));
}

std::string StatsSentence(const StatSummary& s, int precision) {
  return fmt::format(
      "The maximum value is {}, the minimum value is {}, the average value is "
      "{}.",
      FormatNumber(s.max_obs, precision), FormatNumber(s.min_obs, precision),
      FormatNumber(s.avg_in, precision));
}

std::vector<std::string> RenderAll(const std::vector<double>& v,
                                   int precision) {
  std::vector<std::string> out;
  out.reserve(v.size());
  for (double d : v) out.push_back(FormatNumber(d, precision));
  return out;
}

std::vector<std::pair<int, std::string>> Positional(
    const std::vector<std::string>& values) {
  std::vector<std::pair<int, std::string>> clauses;
  clauses.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    clauses.emplace_back(static_cast<int>(i + 1), values[i]);
  }
  return clauses;
}

PromptRecord BaseRecord(const ForecastInstance& inst, Format format,
                        const CodecOptions& opts) {
  PromptRecord rec;
  rec.format = format;
  rec.instance_ref = inst.Ref();
  rec.expected_len = inst.y.size();
  rec.unit_label = opts.unit;
  rec.step = opts.step;
  rec.precision = opts.precision;
  rec.t0 = FormatTimestamp(inst.t0);
  rec.target_values.reserve(inst.y.size());
  for (double v : inst.y) {
    rec.target_values.push_back(std::stod(FormatNumber(v, opts.precision)));
  }
  return rec;
}

}  // namespace

std::string FormatNumber(double v, int precision) {
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::kNonFinite, "cannot format a non-finite value");
  }
  if (precision < 0) {
    throw Error(ErrorCode::kInvalidArgument, "precision must be non-negative");
  }
  std::array<char, 400> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                           std::chars_format::fixed);
  std::string_view s(buf.data(), static_cast<std::size_t>(res.ptr - buf.data()));

  bool negative = false;
  if (!s.empty() && s.front() == '-') {
    negative = true;
    s.remove_prefix(1);
  }
  const auto dot = s.find('.');
  std::string int_part(s.substr(0, dot));
  std::string frac_part = dot == std::string_view::npos
                              ? std::string()
                              : std::string(s.substr(dot + 1));
  const auto p = static_cast<std::size_t>(precision);

  // Digits kept, as one string; the first int_part.size() are integral.
  std::string digits = int_part + frac_part.substr(0, std::min(p, frac_part.size()));
  digits.append(p - std::min(p, frac_part.size()), '0');
  if (frac_part.size() > p && frac_part[p] >= '5') {
    std::size_t i = digits.size();
    bool carry = true;
    while (carry && i > 0) {
      --i;
      if (digits[i] == '9') {
        digits[i] = '0';
      } else {
        ++digits[i];
        carry = false;
      }
    }
    if (carry) {
      digits.insert(digits.begin(), '1');
      int_part.insert(int_part.begin(), '0');
    }
  }
  std::string integral = digits.substr(0, int_part.size());
  const std::string fractional = digits.substr(int_part.size());
  const auto nz = integral.find_first_not_of('0');
  integral = nz == std::string::npos ? "0" : integral.substr(nz);

  const bool all_zero = integral == "0" &&
                        fractional.find_first_not_of('0') == std::string::npos;
  std::string out;
  if (negative && !all_zero) out.push_back('-');
  out += integral;
  if (p > 0) {
    out.push_back('.');
    out += fractional;
  }
  return out;
}

StatSummary ComputeStats(const ForecastInstance& inst) {
  if (inst.x.empty() || inst.x_obs.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "instance has empty windows");
  }
  StatSummary s;
  s.max_obs = inst.x_obs.front();
  s.min_obs = inst.x_obs.front();
  for (double v : inst.x_obs) {
    s.max_obs = std::max(s.max_obs, v);
    s.min_obs = std::min(s.min_obs, v);
  }
  double sum = 0.0;
  for (double v : inst.x) sum += v;
  s.avg_in = sum / static_cast<double>(inst.x.size());
  return s;
}

namespace {
constexpr std::array<std::string_view, 20> kOnes = {
    "",        "one",     "two",       "three",    "four",
    "five",    "six",     "seven",     "eight",    "nine",
    "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
    "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
constexpr std::array<std::string_view, 10> kTens = {
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty",
    "ninety"};
}  // namespace

std::string PositionWord(int i) {
  if (i < 1 || i > 100) {
    throw Error(ErrorCode::kOutOfRange,
                fmt::format("position {} outside [1, 100]", i));
  }
  if (i == 100) return "one hundred";
  if (i < 20) return std::string(kOnes[static_cast<std::size_t>(i)]);
  std::string w(kTens[static_cast<std::size_t>(i / 10)]);
  if (i % 10 != 0) {
    w.push_back('-');
    w += kOnes[static_cast<std::size_t>(i % 10)];
  }
  return w;
}

int PositionFromWord(std::string_view word) {
  for (int i = 1; i <= 100; ++i) {
    if (PositionWord(i) == word) return i;
  }
  return 0;
}

std::string RenderValueListBody(Resolution step,
                                const std::vector<std::string>& values,
                                std::string_view unit) {
  return fmt::format("{}{}{}.", ValueListPreamble(step),
                     fmt::join(values, ","), unit);
}

std::string RenderEtsClauses(
    Resolution step, const std::vector<std::pair<int, std::string>>& clauses) {
  std::string out;
  for (std::size_t i = 0; i < clauses.size(); ++i) {
    out += i == 0 ? "The" : ", the";
    out += fmt::format(" electricity consumption of {} {} is {}", StepNoun(step),
                       PositionWord(clauses[i].first), clauses[i].second);
  }
  out.push_back('.');
  return out;
}

PromptRecord EncodeText(const ForecastInstance& inst, const CodecOptions& opts) {
  PromptRecord rec = BaseRecord(inst, Format::kText, opts);
  rec.input_text = fmt::format(
      "{} {}",
      RenderValueListBody(opts.step, RenderAll(inst.x, opts.precision),
                          opts.unit),
      Question(opts.step));
  rec.target_text = RenderValueListBody(
      opts.step, RenderAll(inst.y, opts.precision), opts.unit);
  return rec;
}

PromptRecord EncodeTs(const ForecastInstance& inst, const CodecOptions& opts) {
  PromptRecord rec = BaseRecord(inst, Format::kTs, opts);
  rec.input_text = fmt::format(
      "{} {} {}",
      RenderValueListBody(opts.step, RenderAll(inst.x, opts.precision),
                          opts.unit),
      StatsSentence(ComputeStats(inst), opts.precision), Question(opts.step));
  rec.target_text = RenderValueListBody(
      opts.step, RenderAll(inst.y, opts.precision), opts.unit);
  return rec;
}

PromptRecord EncodeEts(const ForecastInstance& inst, const CodecOptions& opts) {
  PromptRecord rec = BaseRecord(inst, Format::kEts, opts);
  rec.input_text = fmt::format(
      "{} {} {}",
      RenderEtsClauses(opts.step, Positional(RenderAll(inst.x, opts.precision))),
      StatsSentence(ComputeStats(inst), opts.precision), Question(opts.step));
  rec.target_text = RenderEtsClauses(
      opts.step, Positional(RenderAll(inst.y, opts.precision)));
  return rec;
}

PromptRecord Encode(const ForecastInstance& inst, Format format,
                    const CodecOptions& opts) {
  switch (format) {
    case Format::kText: return EncodeText(inst, opts);
    case Format::kTs: return EncodeTs(inst, opts);
    case Format::kEts: return EncodeEts(inst, opts);
  }
  return EncodeText(inst, opts);
}

TargetTemplate MakeTargetTemplate(Format format, Resolution step,
                                  std::size_t expected_len,
                                  std::string_view unit) {
  if (expected_len == 0) {
    throw Error(ErrorCode::kInvalidArgument, "expected_len must be positive");
  }
  TargetTemplate t;
  t.format = format;
  auto& seg = t.segments;
  if (format == Format::kEts) {
    for (std::size_t i = 1; i <= expected_len; ++i) {
      seg.emplace_back(fmt::format(
          "{} electricity consumption of {} {} is ", i == 1 ? "The" : ", the",
          StepNoun(step), PositionWord(static_cast<int>(i))));
      seg.emplace_back(NumberSlot{static_cast<int>(i)});
    }
    seg.emplace_back(std::string("."));
  } else {
    seg.emplace_back(ValueListPreamble(step));
    for (std::size_t i = 1; i <= expected_len; ++i) {
      if (i > 1) seg.emplace_back(std::string(","));
      seg.emplace_back(NumberSlot{static_cast<int>(i)});
    }
    seg.emplace_back(fmt::format("{}.", unit));
  }
  return t;
}

std::string RenderTarget(const TargetTemplate& tmpl,
                         const std::vector<std::string>& values) {
  std::string out;
  std::size_t next = 0;
  for (const auto& s : tmpl.segments) {
    if (const auto* lit = std::get_if<std::string>(&s)) {
      out += *lit;
    } else {
      if (next >= values.size()) {
        throw Error(ErrorCode::kLengthMismatch, "too few values for template");
      }
      out += values[next++];
    }
  }
  if (next != values.size()) {
    throw Error(ErrorCode::kLengthMismatch, "too many values for template");
  }
  return out;
}

}  // namespace loadlm
