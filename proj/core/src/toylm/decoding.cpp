// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/toylm/decoding.hpp"

#include <limits>

#include <fmt/format.h>

#include "loadlm/error.hpp"

namespace loadlm::toylm {

TemplateAutomaton::TemplateAutomaton(TargetTemplate tmpl, int precision,
                                     int max_int_digits)
    : precision_(precision), max_int_digits_(max_int_digits) {
  if (precision < 0 || max_int_digits < 1) {
    throw Error(ErrorCode::kInvalidArgument, "bad automaton number shape");
  }
  tmpl_.format = tmpl.format;
  for (auto& seg : tmpl.segments) {
    if (const auto* lit = std::get_if<std::string>(&seg); lit != nullptr && lit->empty()) {
      continue;
    }
    tmpl_.segments.push_back(std::move(seg));
  }
}

bool TemplateAutomaton::IsSlot(std::size_t seg) const {
  return seg < tmpl_.segments.size() &&
         std::holds_alternative<NumberSlot>(tmpl_.segments[seg]);
}

bool TemplateAutomaton::NumberDone(const State& s) const {
  if (s.int_digits == 0) return false;
  return precision_ == 0 ? !s.in_frac : (s.in_frac && s.frac_digits == precision_);
}

bool TemplateAutomaton::Step(State& s, int token) const {
  if (s.seg >= tmpl_.segments.size()) return false;
  if (!IsSlot(s.seg)) {
    const auto& lit = std::get<std::string>(tmpl_.segments[s.seg]);
    if (token != static_cast<unsigned char>(lit[s.offset])) return false;
    if (++s.offset == lit.size()) {
      ++s.seg;
      s.offset = 0;
    }
    return true;
  }
  const bool digit = token >= '0' && token <= '9';
  if (!s.in_frac) {
    if (digit && s.int_digits < max_int_digits_ && !s.leading_zero) {
      if (s.int_digits == 0 && token == '0') s.leading_zero = true;
      ++s.int_digits;
      return true;
    }
    if (token == '.' && precision_ > 0 && s.int_digits > 0) {
      s.in_frac = true;
      return true;
    }
  } else if (digit && s.frac_digits < precision_) {
    ++s.frac_digits;
    return true;
  }
  if (!NumberDone(s)) return false;
  State next;
  next.seg = s.seg + 1;
  if (next.seg >= tmpl_.segments.size() || !Step(next, token)) return false;
  s = next;
  return true;
}

bool TemplateAutomaton::Allowed(int token) const {
  if (token == kEos) return Complete();
  if (token < 0 || token > 255) return false;
  State s = state_;
  return Step(s, token);
}

void TemplateAutomaton::Advance(int token) {
  if (token == kEos && Complete()) {
    state_.seg = tmpl_.segments.size();
    return;
  }
  State s = state_;
  if (token < 0 || token > 255 || !Step(s, token)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("token {} rejected by the target template", token));
  }
  state_ = s;
}

bool TemplateAutomaton::Complete() const {
  const std::size_t n = tmpl_.segments.size();
  if (state_.seg >= n) return true;
  return state_.seg + 1 == n && IsSlot(state_.seg) && NumberDone(state_);
}

void TemplateAutomaton::Reset() { state_ = State{}; }

GenerationResult Generate(const ToyLm& model, std::string_view prompt,
                          std::size_t max_tokens, DecodeMode mode,
                          TemplateAutomaton* automaton) {
  if (mode == DecodeMode::kConstrained && automaton == nullptr) {
    throw Error(ErrorCode::kInvalidArgument, "constrained decoding needs an automaton");
  }
  const std::size_t ctx = model.config().context_len;
  if (prompt.size() + 2 > ctx) {
    throw Error(ErrorCode::kPromptTooLong,
                fmt::format("prompt needs {} tokens, context is {}", prompt.size() + 2, ctx));
  }
  GenerationResult out;
  if (max_tokens == 0) return out;
  IncrementalDecoder dec(model);
  dec.Step(kBos);
  for (unsigned char c : prompt) dec.Step(c);
  RowVec logits = dec.Step(kSep);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  while (out.tokens < max_tokens) {
    if (mode == DecodeMode::kConstrained) {
      for (int t = 0; t < kVocabSize; ++t) {
        if (!automaton->Allowed(t)) logits(t) = kNegInf;
      }
    }
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    const int tok = static_cast<int>(best);
    if (mode == DecodeMode::kConstrained && logits(best) == kNegInf) break;
    if (tok == kEos) {
      out.hit_eos = true;
      break;
    }
    if (tok > 255) break;
    if (automaton != nullptr && mode == DecodeMode::kConstrained) automaton->Advance(tok);
    out.text.push_back(static_cast<char>(tok));
    ++out.tokens;
    if (dec.position() >= ctx) break;
    logits = dec.Step(tok);
  }
  return out;
}

}  // namespace loadlm::toylm
