// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "loadlm/prompt_codec.hpp"
#include "loadlm/toylm/model.hpp"

namespace loadlm::toylm {

struct TrainOptions {
  std::size_t max_steps = 2000;
  std::size_t eval_every = 25;
  // Stop once teacher-forced target accuracy on the training records
  // reaches this value.
  std::optional<double> target_accuracy;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Full-parameter warm-up before adapters are attached (LoRA mode, no base).
  std::size_t pretrain_steps = 200;
  double pretrain_lr = 1e-3;
  std::function<void(std::size_t step, double loss, double accuracy)> on_eval;
};

struct CurvePoint {
  std::size_t step = 0;
  double train_loss = 0.0;  // mean token loss of the batches since last eval
  double accuracy = 0.0;    // teacher-forced target-token accuracy
};

struct TrainResult {
  ToyLm model;
  std::vector<CurvePoint> curve;
  std::size_t steps = 0;
  double final_accuracy = 0.0;
  bool reached_target = false;
};

// Target-token span of a record's training sequence.
struct EncodedRecord {
  std::vector<int> tokens;
  std::size_t loss_from = 0;
};
EncodedRecord EncodeForTraining(const PromptRecord& rec);

// Throws kContextOverflow naming the first record that does not fit, and
// kEmptyTrainingSet for an empty record set.
void CheckContext(std::span<const PromptRecord> records, std::size_t context_len);

// Teacher-forced accuracy over all target tokens (including EOS).
double TargetAccuracy(const ToyLm& model, std::span<const EncodedRecord> data);

// Adam on the mean target-token cross-entropy. In LoRA mode the adapters are
// attached to `base` (or to a briefly pre-trained fresh model when no base is
// given) and only adapter weights are updated.
TrainResult TrainToyLm(std::span<const PromptRecord> records, const ToyLmConfig& cfg,
                       const TrainOptions& opts, const ToyLm* base = nullptr);

}  // namespace loadlm::toylm
