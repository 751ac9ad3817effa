// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/toylm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "loadlm/error.hpp"

namespace loadlm::toylm {
namespace {

struct AdamState {
  std::vector<Mat> m;
  std::vector<Mat> v;
  std::size_t t = 0;
};

void AdamStep(ToyLm& model, AdamState& st, double lr, const TrainOptions& o) {
  auto& params = model.parameters();
  if (st.m.empty()) {
    for (const auto& p : params) {
      st.m.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
      st.v.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    }
  }
  double norm2 = 0.0;
  for (const auto& p : params) {
    if (p.trainable) norm2 += p.grad.squaredNorm();
  }
  const double norm = std::sqrt(norm2);
  const double clip = o.clip_norm > 0.0 && norm > o.clip_norm ? o.clip_norm / norm : 1.0;
  ++st.t;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (!p.trainable) continue;
    st.m[i] = o.beta1 * st.m[i] + (1.0 - o.beta1) * clip * p.grad;
    st.v[i] = o.beta2 * st.v[i] + (1.0 - o.beta2) * (clip * p.grad).cwiseAbs2();
    p.value.array() -= lr * (st.m[i].array() / c1) /
                       ((st.v[i].array() / c2).sqrt() + o.eps);
  }
}

struct Loop {
  std::size_t steps = 0;
  double last_accuracy = 0.0;
  bool reached = false;
};

Loop RunLoop(ToyLm& model, std::span<const EncodedRecord> data, std::size_t batch,
             double lr, std::size_t max_steps, std::uint64_t seed,
             const TrainOptions& opts, std::vector<CurvePoint>* curve) {
  Rng rng(seed);
  Rng dropout_rng(SplitMix64(seed ^ 0xd1b54a32d192ed03ull));
  AdamState st;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const std::size_t bsz = std::max<std::size_t>(1, std::min(batch, data.size()));
  Loop out;
  double loss_acc = 0.0;
  std::size_t tok_acc = 0;
  Rng* drop = model.has_lora() && model.lora_dropout() > 0.0 ? &dropout_rng : nullptr;

  for (std::size_t step = 1; step <= max_steps; ++step) {
    std::vector<std::size_t> picked;
    while (picked.size() < bsz) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      picked.push_back(order[cursor++]);
    }
    std::size_t targets = 0;
    for (std::size_t i : picked) targets += data[i].tokens.size() - 1 - data[i].loss_from;
    model.ZeroGrad();
    const double scale = 1.0 / static_cast<double>(targets);
    for (std::size_t i : picked) {
      const auto s = model.ForwardBackward(data[i].tokens, data[i].loss_from, scale, drop);
      loss_acc += s.loss_sum;
      tok_acc += s.targets;
    }
    AdamStep(model, st, lr, opts);
    out.steps = step;

    const bool eval_now = (opts.eval_every > 0 && step % opts.eval_every == 0) ||
                          step == max_steps;
    if (eval_now && curve != nullptr) {
      const double acc = TargetAccuracy(model, data);
      const double loss = loss_acc / static_cast<double>(std::max<std::size_t>(tok_acc, 1));
      curve->push_back({step, loss, acc});
      if (opts.on_eval) opts.on_eval(step, loss, acc);
      loss_acc = 0.0;
      tok_acc = 0;
      out.last_accuracy = acc;
      if (opts.target_accuracy && acc >= *opts.target_accuracy) {
        out.reached = true;
        break;
      }
    }
  }
  return out;
}

}  // namespace

EncodedRecord EncodeForTraining(const PromptRecord& rec) {
  EncodedRecord e;
  e.tokens = TrainingSequence(rec.input_text, rec.target_text);
  e.loss_from = rec.input_text.size() + 1;
  return e;
}

void CheckContext(std::span<const PromptRecord> records, std::size_t context_len) {
  if (records.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "no training records");
  }
  for (const auto& r : records) {
    const std::size_t n = r.input_text.size() + r.target_text.size() + 3;
    if (n > context_len) {
      throw Error(ErrorCode::kContextOverflow,
                  fmt::format("record {} needs {} tokens, context is {}",
                              r.instance_ref, n, context_len));
    }
  }
}

double TargetAccuracy(const ToyLm& model, std::span<const EncodedRecord> data) {
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto& e : data) {
    const auto s = model.Score(e.tokens, e.loss_from);
    correct += s.correct;
    total += s.targets;
  }
  return total == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(total);
}

TrainResult TrainToyLm(std::span<const PromptRecord> records, const ToyLmConfig& cfg,
                       const TrainOptions& opts, const ToyLm* base) {
  cfg.Validate();
  CheckContext(records, cfg.context_len);
  std::vector<EncodedRecord> data;
  data.reserve(records.size());
  for (const auto& r : records) data.push_back(EncodeForTraining(r));

  ToyLm model = base != nullptr ? *base : ToyLm(cfg);
  if (base != nullptr && base->config().context_len < cfg.context_len) {
    CheckContext(records, base->config().context_len);
  }
  if (cfg.mode == TrainMode::kLora) {
    if (base == nullptr && opts.pretrain_steps > 0) {
      RunLoop(model, data, cfg.batch_size, opts.pretrain_lr, opts.pretrain_steps,
              SplitMix64(cfg.seed + 1), TrainOptions{}, nullptr);
    }
    if (!model.has_lora()) {
      model.AttachLora(cfg.lora_rank, cfg.lora_alpha, cfg.lora_dropout,
                       SplitMix64(cfg.seed + 2));
    }
  }
  std::vector<CurvePoint> curve;
  const Loop loop = RunLoop(model, data, cfg.batch_size, cfg.lr, opts.max_steps,
                            cfg.seed, opts, &curve);
  TrainResult out{std::move(model), std::move(curve), loop.steps, loop.last_accuracy,
                  loop.reached};
  return out;
}

}  // namespace loadlm::toylm
