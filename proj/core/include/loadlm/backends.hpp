// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "loadlm/extractor.hpp"
#include "loadlm/prompt_codec.hpp"
#include "loadlm/toylm/decoding.hpp"
#include "loadlm/toylm/model.hpp"

namespace loadlm {

struct GenerationRequest {
  std::string prompt;
  std::size_t max_tokens = 256;
  double temperature = 0.0;
  std::optional<std::string> stop;
  std::string request_id;
  // Position of the request within its run; used by order-based schedules.
  std::size_t ordinal = 0;

  // Throws kInvalidArgument for an empty prompt, max_tokens == 0 or a
  // negative temperature.
  void Validate() const;
};

class TextBackend {
 public:
  virtual ~TextBackend() = default;
  virtual std::string generate(const GenerationRequest& req) = 0;
  virtual std::string id() const = 0;
  // False means the harness must not call generate() concurrently.
  virtual bool concurrent_safe() const = 0;
};

// Returns the registered ground-truth target for request_id.
class EchoOracle final : public TextBackend {
 public:
  explicit EchoOracle(std::span<const PromptRecord> records);
  void Register(std::string request_id, std::string target);

  std::string generate(const GenerationRequest& req) override;
  std::string id() const override { return "echo"; }
  bool concurrent_safe() const override { return true; }

 private:
  std::unordered_map<std::string, std::string> targets_;
};

enum class FaultSchedule {
  kBernoulli,   // independent draw per request, keyed by (seed, request_id)
  kSystematic,  // evenly spaced by ordinal from a seeded phase: floor or ceil of p*N
};

enum class FaultMix { kDrop, kAdd, kGarble, kMixed };

struct FaultOptions {
  double rate = 0.0;
  std::uint64_t seed = 0;
  FaultSchedule schedule = FaultSchedule::kBernoulli;
  FaultMix mix = FaultMix::kMixed;
};

// Wraps another backend and damages a seeded subset of its outputs with
// InjectFault. Outputs the inner backend produced in a different format, or
// that are already damaged, pass through unchanged but are still counted.
class FaultInjector final : public TextBackend {
 public:
  FaultInjector(std::shared_ptr<TextBackend> inner, Format format,
                const FaultOptions& opts);

  // Pure schedule decision; generate() faults exactly these requests.
  bool Draws(const GenerationRequest& req) const;
  Fault FaultFor(const GenerationRequest& req, std::size_t value_count) const;

  std::string generate(const GenerationRequest& req) override;
  std::string id() const override;
  bool concurrent_safe() const override { return inner_->concurrent_safe(); }

  std::size_t drawn() const { return drawn_.load(); }
  std::vector<std::string> faulted_ids() const;

 private:
  std::shared_ptr<TextBackend> inner_;
  Format format_;
  FaultOptions opts_;
  double phase_;
  std::atomic<std::size_t> drawn_{0};
  mutable std::mutex mu_;
  std::vector<std::string> faulted_;
};

struct ToyLmTarget {
  Format format = Format::kText;
  Resolution step = Resolution::kDaily;
  std::size_t expected_len = 7;
  int precision = 0;
  std::string unit = "kWh";
};

class ToyLmBackend final : public TextBackend {
 public:
  ToyLmBackend(std::shared_ptr<const toylm::ToyLm> model, toylm::DecodeMode mode,
               const ToyLmTarget& target, std::string label = "toylm");

  std::string generate(const GenerationRequest& req) override;
  std::string id() const override;
  bool concurrent_safe() const override { return true; }

 private:
  std::shared_ptr<const toylm::ToyLm> model_;
  toylm::DecodeMode mode_;
  ToyLmTarget target_;
  TargetTemplate tmpl_;
  std::string label_;
};

// Upper bound on the rendered length of a target for `t` with numbers of at
// most `max_int_digits` integer digits.
std::size_t TargetTokenBudget(const ToyLmTarget& t, int max_int_digits = 9);

}  // namespace loadlm
