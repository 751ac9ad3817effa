// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/extractor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "loadlm/prompt_codec.hpp"

namespace loadlm {
namespace {

bool IsDigit(char c) { return c >= '0' && c <= '9'; }
bool IsAlpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
char Lower(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

struct NumberToken {
  std::size_t begin = 0;
  std::size_t end = 0;
  double value = 0.0;
};

// Signed fixed-point decimal at `pos`: -?\d+(\.\d+)?, exponents rejected
std::optional<NumberToken> ReadNumber(std::string_view s, std::size_t pos,
                                      int precision) {
  std::size_t i = pos;
  if (i < s.size() && s[i] == '-') ++i;
  const std::size_t int_begin = i;
  while (i < s.size() && IsDigit(s[i])) ++i;
  if (i == int_begin) return std::nullopt;
  std::size_t frac_digits = 0;
  if (i + 1 < s.size() && s[i] == '.' && IsDigit(s[i + 1])) {
    ++i;
    while (i < s.size() && IsDigit(s[i])) {
      ++i;
      ++frac_digits;
    }
  }
  if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
    std::size_t e = i + 1;
    if (e < s.size() && (s[e] == '+' || s[e] == '-')) ++e;
    if (e < s.size() && IsDigit(s[e])) return std::nullopt;
  }
  double v = 0.0;
  auto res = std::from_chars(s.data() + pos, s.data() + i, v);
  if (res.ec != std::errc() || !std::isfinite(v)) return std::nullopt;
  if (precision >= 0 && frac_digits > static_cast<std::size_t>(precision)) {
    const std::string q = FormatNumber(v, precision);
    std::from_chars(q.data(), q.data() + q.size(), v);
  }
  return NumberToken{pos, i, v};
}

bool NumberStartsAt(std::string_view s, std::size_t i) {
  if (i >= s.size()) return false;
  if (IsDigit(s[i])) return true;
  return s[i] == '-' && i + 1 < s.size() && IsDigit(s[i + 1]);
}

std::size_t SkipSpaces(std::string_view s, std::size_t i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return i;
}

// First comma-separated numeric run after the "as follows" preamble.
std::vector<NumberToken> ScanValueRun(std::string_view s, int precision) {
  std::size_t i = 0;
  constexpr std::string_view kPreamble = "as follows";
  if (auto p = s.find(kPreamble); p != std::string_view::npos) {
    i = p + kPreamble.size();
  }
  std::vector<NumberToken> run;
  for (; i < s.size(); ++i) {
    if (!NumberStartsAt(s, i)) continue;
    // A digit glued to a preceding letter/digit is not a run start.
    if (i > 0 && (IsAlpha(s[i - 1]) || IsDigit(s[i - 1]))) continue;
    auto tok = ReadNumber(s, i, precision);
    if (!tok) continue;
    run.push_back(*tok);
    break;
  }
  if (run.empty()) return run;
  std::size_t j = run.back().end;
  while (true) {
    std::size_t k = SkipSpaces(s, j);
    if (k >= s.size() || s[k] != ',') break;
    k = SkipSpaces(s, k + 1);
    auto tok = NumberStartsAt(s, k) ? ReadNumber(s, k, precision) : std::nullopt;
    if (!tok) break;
    run.push_back(*tok);
    j = tok->end;
  }
  return run;
}

struct Clause {
  int position = 0;
  NumberToken number;
  std::size_t begin = 0;  // offset of "consumption of"
  Resolution step = Resolution::kDaily;
};

std::vector<Clause> ScanClauses(std::string_view s, int precision) {
  constexpr std::string_view kLead = "consumption of ";
  std::vector<Clause> out;
  std::size_t from = 0;
  while (true) {
    const auto at = s.find(kLead, from);
    if (at == std::string_view::npos) break;
    from = at + kLead.size();
    std::size_t i = from;
    std::size_t w = i;
    while (w < s.size() && IsAlpha(s[w])) ++w;
    std::string step_word;
    for (std::size_t k = i; k < w; ++k) step_word.push_back(Lower(s[k]));
    if (step_word != "day" && step_word != "hour") continue;
    if (w >= s.size() || s[w] != ' ') continue;
    const auto is_at = s.find(" is ", w);
    if (is_at == std::string_view::npos || is_at - w > 24) continue;
    std::string word;
    for (std::size_t k = w + 1; k < is_at; ++k) word.push_back(Lower(s[k]));
    const int pos = PositionFromWord(word);
    if (pos == 0) continue;
    const std::size_t num_at = SkipSpaces(s, is_at + 4);
    auto tok = NumberStartsAt(s, num_at) ? ReadNumber(s, num_at, precision)
                                         : std::nullopt;
    if (!tok) continue;
    Clause c;
    c.position = pos;
    c.number = *tok;
    c.begin = at;
    c.step = step_word == "day" ? Resolution::kDaily : Resolution::kHourly;
    out.push_back(c);
    from = tok->end;
  }
  return out;
}

std::vector<double> TailRepair(const std::vector<double>& raw, std::size_t n) {
  std::vector<double> r(raw.begin(),
                        raw.begin() + static_cast<std::ptrdiff_t>(std::min(n, raw.size())));
  r.resize(n, 0.0);
  return r;
}

int DecimalsOf(std::string_view token) {
  const auto dot = token.find('.');
  return dot == std::string_view::npos ? 0 : static_cast<int>(token.size() - dot - 1);
}

Verdict CountVerdict(std::size_t found, std::size_t expected) {
  if (found == 0) return {VerdictKind::kMalformed, 0};
  if (found < expected) return {VerdictKind::kMissing, expected - found};
  if (found > expected) return {VerdictKind::kExtra, found - expected};
  return {VerdictKind::kClean, 0};
}

}  // namespace

std::string Verdict::ToString() const {
  switch (kind) {
    case VerdictKind::kClean: return "Clean";
    case VerdictKind::kMissing: return fmt::format("Missing({})", count);
    case VerdictKind::kExtra: return fmt::format("Extra({})", count);
    case VerdictKind::kMalformed: return "Malformed";
  }
  return "Malformed";
}

std::optional<Verdict> Verdict::Parse(std::string_view s) {
  if (s == "Clean") return Verdict{VerdictKind::kClean, 0};
  if (s == "Malformed") return Verdict{VerdictKind::kMalformed, 0};
  auto with_count = [&](std::string_view prefix,
                        VerdictKind kind) -> std::optional<Verdict> {
    if (s.size() <= prefix.size() + 1 || s.substr(0, prefix.size()) != prefix ||
        s.back() != ')') {
      return std::nullopt;
    }
    std::size_t k = 0;
    auto body = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    auto res = std::from_chars(body.data(), body.data() + body.size(), k);
    if (res.ec != std::errc() || res.ptr != body.data() + body.size() || k == 0) {
      return std::nullopt;
    }
    return Verdict{kind, k};
  };
  if (auto v = with_count("Missing(", VerdictKind::kMissing)) return v;
  return with_count("Extra(", VerdictKind::kExtra);
}

ParseOutcome ParsePrediction(std::string_view text, const ParseOptions& opts) {
  const std::size_t n = std::max<std::size_t>(opts.expected_len, 1);
  ParseOutcome out;

  if (opts.format != Format::kEts) {
    for (const auto& t : ScanValueRun(text, opts.precision)) {
      out.raw_values.push_back(t.value);
    }
    out.verdict = CountVerdict(out.raw_values.size(), n);
    out.repaired = TailRepair(out.raw_values, n);
    return out;
  }

  const auto clauses = ScanClauses(text, opts.precision);
  std::vector<int> positions;
  for (const auto& c : clauses) {
    out.raw_values.push_back(c.number.value);
    positions.push_back(c.position);
  }
  out.positions_found = positions;
  if (clauses.empty()) {
    out.verdict = {VerdictKind::kMalformed, 0};
    out.repaired.assign(n, 0.0);
    return out;
  }

  std::vector<std::optional<double>> slot(n);
  std::size_t placed = 0;
  for (const auto& c : clauses) {
    const auto p = static_cast<std::size_t>(c.position);
    if (p >= 1 && p <= n && !slot[p - 1]) {
      slot[p - 1] = c.number.value;
      ++placed;
    }
  }
  const std::size_t missing = n - placed;
  const std::size_t surplus = clauses.size() - placed;
  bool in_order = clauses.size() == n;
  for (std::size_t i = 0; in_order && i < n; ++i) {
    in_order = positions[i] == static_cast<int>(i + 1);
  }
  if (missing > 0) {
    out.verdict = {VerdictKind::kMissing, missing};
  } else if (surplus > 0) {
    out.verdict = {VerdictKind::kExtra, surplus};
  } else if (!in_order) {
    out.verdict = {VerdictKind::kMalformed, 0};
  } else {
    out.verdict = {VerdictKind::kClean, 0};
  }

  if (opts.repair == RepairPolicy::kTailPad) {
    out.repaired = TailRepair(out.raw_values, n);
  } else {
    out.repaired.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.repaired[i] = slot[i].value_or(0.0);
  }
  return out;
}

std::string InjectFault(std::string_view target, const Fault& fault,
                        Format format) {
  if (fault.kind == Fault::Kind::kGarble) {
    std::string out(target);
    for (char& c : out) {
      if (IsDigit(c)) c = 'x';
    }
    return out;
  }

  if (format == Format::kEts) {
    const auto clauses = ScanClauses(target, -1);
    if (clauses.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "target has no Ets clauses");
    }
    std::vector<std::pair<int, std::string>> parts;
    for (const auto& c : clauses) {
      parts.emplace_back(c.position, std::string(target.substr(
                                         c.number.begin, c.number.end - c.number.begin)));
    }
    if (fault.kind == Fault::Kind::kDropValue) {
      if (fault.position < 1 || fault.position > parts.size()) {
        throw Error(ErrorCode::kIndexOutOfRange,
                    fmt::format("drop position {} outside 1..{}", fault.position,
                                parts.size()));
      }
      parts.erase(parts.begin() + static_cast<std::ptrdiff_t>(fault.position - 1));
      if (parts.empty()) return std::string(target.substr(0, clauses.front().begin));
    } else {
      parts.emplace_back(parts.back().first + 1,
                         FormatNumber(fault.value, DecimalsOf(parts.front().second)));
    }
    return RenderEtsClauses(clauses.front().step, parts);
  }

  const auto run = ScanValueRun(target, -1);
  if (run.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "target has no value list");
  }
  std::vector<std::string> tokens;
  for (const auto& t : run) {
    tokens.emplace_back(target.substr(t.begin, t.end - t.begin));
  }
  if (fault.kind == Fault::Kind::kDropValue) {
    if (fault.position < 1 || fault.position > tokens.size()) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  fmt::format("drop position {} outside 1..{}", fault.position,
                              tokens.size()));
    }
    tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(fault.position - 1));
  } else {
    tokens.push_back(FormatNumber(fault.value, DecimalsOf(tokens.front())));
  }
  return fmt::format("{}{}{}", target.substr(0, run.front().begin),
                     fmt::join(tokens, ","), target.substr(run.back().end));
}

}  // namespace loadlm
