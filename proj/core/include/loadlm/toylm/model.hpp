// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

// Byte-level decoder-only transformer small enough to train on a laptop CPU.
//
// Pre-norm residual blocks with learned positional embeddings:
//   h   = x + MultiHead(LN1(x))
//   out = h + W2 * gelu(W1 * LN2(h) + b1) + b2
// followed by a final LayerNorm and a linear vocabulary head. Every linear
// map inside the blocks (Q/K/V/O projections and both feed-forward layers)
// can carry a low-rank adapter: W_eff = W + (alpha / r) * U * V.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loadlm/rng.hpp"
#include "loadlm/toylm/tensor.hpp"

namespace loadlm::toylm {

inline constexpr int kBos = 256;
inline constexpr int kSep = 257;
inline constexpr int kEos = 258;
inline constexpr int kVocabSize = 259;

std::vector<int> TokenizeBytes(std::string_view text);

// [BOS] prompt [SEP] target [EOS]; loss is taken from the SEP position on.
std::vector<int> TrainingSequence(std::string_view prompt, std::string_view target);

enum class TrainMode { kFull, kLora };

struct ToyLmConfig {
  std::size_t d_model = 64;
  std::size_t heads = 4;
  std::size_t layers = 2;
  std::size_t ffn_mult = 4;
  std::size_t context_len = 1024;
  TrainMode mode = TrainMode::kFull;
  double lr = 5e-5;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::size_t lora_rank = 8;
  double lora_alpha = 32.0;
  double lora_dropout = 0.1;

  std::size_t d_k() const { return d_model / heads; }
  std::size_t d_ffn() const { return d_model * ffn_mult; }
  // Throws kInvalidArgument for inconsistent sizes.
  void Validate() const;
};

struct Parameter {
  std::string name;
  Mat value;
  Mat grad;
  bool trainable = true;
  bool adapter = false;

  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

struct SequenceStats {
  double loss_sum = 0.0;  // summed next-token cross-entropy (nats)
  std::size_t targets = 0;
  std::size_t correct = 0;  // argmax == next token
};

class ToyLm {
 public:
  explicit ToyLm(const ToyLmConfig& cfg);

  const ToyLmConfig& config() const { return cfg_; }

  // Adds adapters to every attention and feed-forward projection and freezes
  // all base weights. U is random, V is zero, so outputs are unchanged.
  // Throws kInvalidArgument if rank > min(rows, cols) / 4 for any target.
  void AttachLora(std::size_t rank, double alpha, double dropout,
                  std::uint64_t seed);
  bool has_lora() const { return lora_rank_ > 0; }
  std::size_t lora_rank() const { return lora_rank_; }
  double lora_scale() const { return lora_scale_; }
  double lora_dropout() const { return lora_dropout_; }

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  Parameter* Find(std::string_view name);
  const Parameter* Find(std::string_view name) const;

  std::size_t BaseParameterCount() const;
  std::size_t TrainableParameterCount() const;
  // Trainable parameters divided by the base (non-adapter) model size.
  double TrainableFraction() const;

  // Logits for every position (T x vocab); deterministic, no dropout.
  // Throws kContextOverflow if tokens exceed context_len.
  Mat Forward(std::span<const int> tokens) const;

  // Forward + backward over one sequence. The loss covers positions
  // [loss_from, T-1) predicting tokens[p+1]; gradients of
  // grad_scale * loss_sum are added to the trainable parameters' grad.
  // Adapter dropout is active only when `dropout_rng` is non-null.
  SequenceStats ForwardBackward(std::span<const int> tokens,
                                std::size_t loss_from, double grad_scale,
                                Rng* dropout_rng);

  // Loss/accuracy only (no gradients, no dropout).
  SequenceStats Score(std::span<const int> tokens, std::size_t loss_from) const;

  void ZeroGrad();

  // Effective weight of a linear map with its adapter folded in.
  Mat EffectiveWeight(std::size_t layer, std::string_view proj) const;

  void Save(const std::filesystem::path& path) const;
  static ToyLm Load(const std::filesystem::path& path);

 private:
  friend class IncrementalDecoder;

  struct Linear {
    int w = -1;
    int b = -1;
    int u = -1;
    int v = -1;
  };
  struct Block {
    int ln1_g = -1, ln1_b = -1;
    Linear q, k, v, o;
    int ln2_g = -1, ln2_b = -1;
    Linear fc1, fc2;
  };
  struct LinearCache;
  struct LayerNormCache;
  struct BlockCache;
  struct Trace;

  int Add(std::string name, Mat value, bool trainable = true, bool adapter = false);
  void Rebuild();  // recomputes layout indices from parameter names
  Linear* LinearByName(std::size_t layer, std::string_view proj);
  const Linear* LinearByName(std::size_t layer, std::string_view proj) const;

  Mat LinearForward(const Mat& x, const Linear& lin, Rng* rng,
                    LinearCache* cache) const;
  Mat LinearBackward(const Mat& dy, const Linear& lin, const LinearCache& cache);
  Mat RunForward(std::span<const int> tokens, std::size_t logits_from,
                 Rng* rng, Trace* trace) const;

  ToyLmConfig cfg_;
  std::vector<Parameter> params_;
  int tok_emb_ = -1;
  int pos_emb_ = -1;
  std::vector<Block> blocks_;
  int lnf_g_ = -1, lnf_b_ = -1;
  Linear head_;
  std::size_t lora_rank_ = 0;
  double lora_scale_ = 0.0;
  double lora_dropout_ = 0.0;
};

// Single-token stepping with a key/value cache and adapters folded into the
// weights. The model must outlive the decoder and stay unmodified.
class IncrementalDecoder {
 public:
  explicit IncrementalDecoder(const ToyLm& model);

  // Feeds one token and returns next-token logits. Throws kPromptTooLong
  // when the context is full.
  RowVec Step(int token);
  std::size_t position() const { return pos_; }

 private:
  struct LayerWeights {
    RowVec ln1_g, ln1_b, ln2_g, ln2_b;
    Mat wq, wk, wv, wo, w1, w2;
    RowVec b1, b2;
    Mat k_cache, v_cache;
  };
  const ToyLm& model_;
  std::vector<LayerWeights> layers_;
  RowVec lnf_g_, lnf_b_, head_b_;
  Mat head_w_;
  std::size_t pos_ = 0;
};

}  // namespace loadlm::toylm
