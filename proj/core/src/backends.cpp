// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/backends.hpp"

#include <cmath>

#include <fmt/format.h>

#include "loadlm/error.hpp"
#include "loadlm/rng.hpp"

namespace loadlm {

void GenerationRequest::Validate() const {
  if (prompt.empty()) throw Error(ErrorCode::kInvalidArgument, "empty prompt");
  if (max_tokens == 0) throw Error(ErrorCode::kInvalidArgument, "max_tokens must be >= 1");
  if (!(temperature >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  }
}

EchoOracle::EchoOracle(std::span<const PromptRecord> records) {
  for (const auto& r : records) targets_[r.instance_ref] = r.target_text;
}

void EchoOracle::Register(std::string request_id, std::string target) {
  targets_[std::move(request_id)] = std::move(target);
}

std::string EchoOracle::generate(const GenerationRequest& req) {
  req.Validate();
  const auto it = targets_.find(req.request_id);
  if (it == targets_.end()) {
    throw Error(ErrorCode::kBackendUnavailable,
                fmt::format("no target registered for '{}'", req.request_id));
  }
  return it->second;
}

FaultInjector::FaultInjector(std::shared_ptr<TextBackend> inner, Format format,
                             const FaultOptions& opts)
    : inner_(std::move(inner)), format_(format), opts_(opts) {
  if (!inner_) throw Error(ErrorCode::kInvalidArgument, "fault injector needs a backend");
  if (!(opts.rate >= 0.0 && opts.rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("fault rate {} outside [0, 1]", opts.rate));
  }
  phase_ = UnitFromBits(SplitMix64(opts.seed ^ 0x9e3779b97f4a7c15ull));
}

bool FaultInjector::Draws(const GenerationRequest& req) const {
  if (opts_.rate <= 0.0) return false;
  if (opts_.schedule == FaultSchedule::kSystematic) {
    const double k = static_cast<double>(req.ordinal);
    return std::floor((k + 1.0) * opts_.rate + phase_) -
               std::floor(k * opts_.rate + phase_) >= 1.0;
  }
  const std::uint64_t h = SplitMix64(opts_.seed ^ Fnv1a64(req.request_id));
  return UnitFromBits(h) < opts_.rate;
}

Fault FaultInjector::FaultFor(const GenerationRequest& req, std::size_t value_count) const {
  const std::uint64_t h =
      SplitMix64(SplitMix64(opts_.seed + 0x632be59bd9b4e019ull) ^ Fnv1a64(req.request_id));
  FaultMix mix = opts_.mix;
  if (mix == FaultMix::kMixed) mix = static_cast<FaultMix>(h % 3);
  switch (mix) {
    case FaultMix::kDrop:
      return Fault::Drop(1 + (h >> 8) % std::max<std::size_t>(value_count, 1));
    case FaultMix::kAdd:
      return Fault::Add(static_cast<double>((h >> 16) % 10000));
    default:
      return Fault::Garble();
  }
}

std::string FaultInjector::generate(const GenerationRequest& req) {
  std::string text = inner_->generate(req);
  if (!Draws(req)) return text;
  drawn_.fetch_add(1);
  {
    std::lock_guard lock(mu_);
    faulted_.push_back(req.request_id);
  }
  ParseOptions po;
  po.format = format_;
  const auto raw = ParsePrediction(text, po).raw_values.size();
  try {
    return InjectFault(text, FaultFor(req, raw), format_);
  } catch (const Error&) {
    return InjectFault(text, Fault::Garble(), format_);
  }
}

std::string FaultInjector::id() const {
  return fmt::format("fault({:g},{}):{}", opts_.rate,
                     opts_.schedule == FaultSchedule::kSystematic ? "systematic" : "bernoulli",
                     inner_->id());
}

std::vector<std::string> FaultInjector::faulted_ids() const {
  std::lock_guard lock(mu_);
  return faulted_;
}

ToyLmBackend::ToyLmBackend(std::shared_ptr<const toylm::ToyLm> model,
                           toylm::DecodeMode mode, const ToyLmTarget& target,
                           std::string label)
    : model_(std::move(model)),
      mode_(mode),
      target_(target),
      tmpl_(MakeTargetTemplate(target.format, target.step, target.expected_len, target.unit)),
      label_(std::move(label)) {
  if (!model_) throw Error(ErrorCode::kInvalidArgument, "toy LM backend needs a model");
}

std::string ToyLmBackend::generate(const GenerationRequest& req) {
  req.Validate();
  if (mode_ == toylm::DecodeMode::kConstrained) {
    toylm::TemplateAutomaton automaton(tmpl_, target_.precision);
    return toylm::Generate(*model_, req.prompt, req.max_tokens, mode_, &automaton).text;
  }
  auto text = toylm::Generate(*model_, req.prompt, req.max_tokens, mode_).text;
  if (req.stop && !req.stop->empty()) {
    const auto pos = text.find(*req.stop);
    if (pos != std::string::npos) text.resize(pos);
  }
  return text;
}

std::string ToyLmBackend::id() const {
  return fmt::format("{}:{}", label_,
                     mode_ == toylm::DecodeMode::kConstrained ? "constrained" : "greedy");
}

std::size_t TargetTokenBudget(const ToyLmTarget& t, int max_int_digits) {
  const auto tmpl = MakeTargetTemplate(t.format, t.step, t.expected_len, t.unit);
  const std::size_t number = static_cast<std::size_t>(max_int_digits) +
                             (t.precision > 0 ? 1 + static_cast<std::size_t>(t.precision) : 0);
  std::size_t n = 0;
  for (const auto& seg : tmpl.segments) {
    if (const auto* lit = std::get_if<std::string>(&seg)) {
      n += lit->size();
    } else {
      n += number;
    }
  }
  return n + 1;
}

}  // namespace loadlm
