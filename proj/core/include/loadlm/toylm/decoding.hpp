// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include "loadlm/prompt_codec.hpp"
#include "loadlm/toylm/model.hpp"

namespace loadlm::toylm {

// Byte-level acceptor for one target template. Literal segments must be
// reproduced exactly; each numeric slot accepts an unsigned decimal with
// 1..max_int_digits integer digits (no leading zeros) and exactly
// `precision` fractional digits. EOS is allowed once the template is done.
class TemplateAutomaton {
 public:
  TemplateAutomaton(TargetTemplate tmpl, int precision, int max_int_digits = 9);

  bool Allowed(int token) const;
  // Throws kInvalidArgument when `token` is not allowed.
  void Advance(int token);
  bool Complete() const;
  void Reset();

 private:
  struct State {
    std::size_t seg = 0;
    std::size_t offset = 0;  // within a literal
    int int_digits = 0;
    bool leading_zero = false;
    bool in_frac = false;
    int frac_digits = 0;
  };
  bool NumberDone(const State& s) const;
  bool Step(State& s, int token) const;
  bool IsSlot(std::size_t seg) const;

  TargetTemplate tmpl_;
  int precision_;
  int max_int_digits_;
  State state_;
};

enum class DecodeMode { kGreedy, kConstrained };

struct GenerationResult {
  std::string text;
  std::size_t tokens = 0;
  bool hit_eos = false;
};

// Greedy decoding after "[BOS] prompt [SEP]". Stops at EOS, at any other
// special token in greedy mode, at `max_tokens`, or when the context fills.
// Constrained mode masks every token the automaton rejects.
// Throws kPromptTooLong when the prompt alone does not fit the context.
GenerationResult Generate(const ToyLm& model, std::string_view prompt,
                          std::size_t max_tokens, DecodeMode mode,
                          TemplateAutomaton* automaton = nullptr);

}  // namespace loadlm::toylm
