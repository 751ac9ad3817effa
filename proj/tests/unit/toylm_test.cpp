// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>

#include <gtest/gtest.h>

#include "loadlm/toylm/model.hpp"
#include "loadlm/toylm/trainer.hpp"
#include "test_util.hpp"

namespace loadlm::toylm {
namespace {

using testing::CodeOf;
using testing::TempDir;

ToyLmConfig Tiny() {
  ToyLmConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.layers = 2;
  cfg.context_len = 24;
  cfg.seed = 5;
  return cfg;
}

std::vector<int> RandomTokens(Rng& rng, std::size_t n) {
  std::vector<int> t(n);
  for (auto& v : t) v = static_cast<int>(testing::UniformInt(rng, 0, kVocabSize - 1));
  return t;
}

// Perturbs every entry of every trainable parameter; relative error is
// ||fd - analytic|| / (||fd|| + ||analytic||) per parameter tensor.
void CheckGradients(ToyLm& model, const std::vector<int>& tokens, std::size_t loss_from,
                    bool adapters_only) {
  model.ZeroGrad();
  model.ForwardBackward(tokens, loss_from, 1.0, nullptr);
  const double h = 1e-5;
  std::size_t checked = 0;
  for (auto& p : model.parameters()) {
    if (!p.trainable) continue;
    ASSERT_EQ(p.adapter, adapters_only) << p.name;
    Mat fd(p.value.rows(), p.value.cols());
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double keep = p.value.data()[i];
      p.value.data()[i] = keep + h;
      const double up = model.Score(tokens, loss_from).loss_sum;
      p.value.data()[i] = keep - h;
      const double down = model.Score(tokens, loss_from).loss_sum;
      p.value.data()[i] = keep;
      fd.data()[i] = (up - down) / (2 * h);
      ++checked;
    }
    const double rel = (fd - p.grad).norm() / std::max(1e-12, fd.norm() + p.grad.norm());
    EXPECT_LT(rel, 1e-4) << p.name;
    EXPECT_GT(p.grad.norm(), 0.0) << p.name;
  }
  EXPECT_GT(checked, 0u);
}

TEST(ToyLmGradients, FullModelMatchesFiniteDifferences) {
  ToyLm model(Tiny());
  Rng rng(1);
  CheckGradients(model, RandomTokens(rng, 12), 3, false);
}

TEST(ToyLmGradients, AdapterWeightsMatchFiniteDifferences) {
  ToyLm model(Tiny());
  model.AttachLora(2, 4.0, 0.0, 3);
  Rng rng(2);
  for (auto& p : model.parameters()) {
    if (p.adapter) {
      for (Eigen::Index i = 0; i < p.value.size(); ++i) {
        p.value.data()[i] = testing::Normal(rng, 0, 0.3);
      }
    }
  }
  CheckGradients(model, RandomTokens(rng, 12), 4, true);
}

TEST(ToyLm, ParameterNamesAndCounts) {
  ToyLm model(Tiny());
  for (const char* name : {"tok_emb", "pos_emb", "h0.ln1.g", "h1.attn.q.w", "h1.attn.o.w",
                           "h0.ffn.fc1.b", "h1.ffn.fc2.w", "lnf.g", "head.w", "head.b"}) {
    EXPECT_NE(model.Find(name), nullptr) << name;
  }
  EXPECT_EQ(model.Find("h2.attn.q.w"), nullptr);
  std::size_t total = 0;
  for (const auto& p : model.parameters()) total += p.size();
  EXPECT_EQ(model.BaseParameterCount(), total);
  EXPECT_EQ(model.TrainableParameterCount(), total);
  EXPECT_DOUBLE_EQ(model.TrainableFraction(), 1.0);
  const std::size_t d = 16, f = 64, v = kVocabSize, ctx = 24;
  const std::size_t per_block = 2 * 2 * d + 4 * d * d + d * f + f + f * d + d;
  EXPECT_EQ(total, v * d + ctx * d + 2 * per_block + 2 * d + d * v + v);
}

TEST(ToyLm, LoraFractionAndEquivalence) {
  ToyLmConfig cfg;
  ASSERT_EQ(cfg.d_model, 64u);
  ToyLm model(cfg);
  Rng rng(4);
  const auto tokens = RandomTokens(rng, 30);
  const Mat before = model.Forward(tokens);
  model.AttachLora(8, 32.0, 0.1, 9);
  EXPECT_LE(model.TrainableFraction(), 0.10);
  EXPECT_GT(model.TrainableFraction(), 0.0);
  EXPECT_TRUE(model.Forward(tokens).isApprox(before, 1e-14));
  for (const auto& p : model.parameters()) EXPECT_EQ(p.trainable, p.adapter) << p.name;
  EXPECT_NE(model.Find("h0.attn.q.lora_u"), nullptr);
  EXPECT_NE(model.Find("h1.ffn.fc2.lora_v"), nullptr);

  // U = 0 with V nonzero is also the base model.
  for (auto& p : model.parameters()) {
    if (!p.adapter) continue;
    if (p.name.ends_with("lora_u")) p.value.setZero();
    else p.value.setConstant(0.7);
  }
  EXPECT_TRUE(model.Forward(tokens).isApprox(before, 1e-14));

  ToyLm other(cfg);
  EXPECT_EQ(CodeOf([&] { other.AttachLora(17, 32.0, 0.1, 1); }), ErrorCode::kInvalidArgument);
  EXPECT_NO_THROW(other.AttachLora(16, 32.0, 0.1, 1));
}

TEST(ToyLm, EffectiveWeightFoldsAdapter) {
  ToyLm model(Tiny());
  model.AttachLora(2, 8.0, 0.0, 1);
  model.Find("h0.attn.v.lora_v")->value.setConstant(0.5);
  const Mat& w = model.Find("h0.attn.v.w")->value;
  const Mat& u = model.Find("h0.attn.v.lora_u")->value;
  const Mat& v = model.Find("h0.attn.v.lora_v")->value;
  EXPECT_TRUE(model.EffectiveWeight(0, "v").isApprox(w + (8.0 / 2.0) * u * v, 1e-14));
}

TEST(ToyLm, ForwardIsCausal) {
  ToyLm model(Tiny());
  Rng rng(6);
  auto tokens = RandomTokens(rng, 10);
  const Mat a = model.Forward(tokens);
  tokens[7] = (tokens[7] + 1) % kVocabSize;
  const Mat b = model.Forward(tokens);
  EXPECT_TRUE(a.topRows(7).isApprox(b.topRows(7), 1e-14));
  EXPECT_FALSE(a.row(7).isApprox(b.row(7)));
}

TEST(ToyLm, ContextOverflow) {
  ToyLm model(Tiny());
  const std::vector<int> tokens(25, 65);
  EXPECT_EQ(CodeOf([&] { model.Forward(tokens); }), ErrorCode::kContextOverflow);
}

TEST(ToyLm, IncrementalDecoderMatchesForward) {
  ToyLm model(Tiny());
  model.AttachLora(2, 8.0, 0.0, 1);
  Rng rng(7);
  for (auto& p : model.parameters()) {
    if (p.adapter) p.value.setConstant(0.05);
  }
  const auto tokens = RandomTokens(rng, 24);
  const Mat full = model.Forward(tokens);
  IncrementalDecoder dec(model);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const RowVec row = dec.Step(tokens[t]);
    ASSERT_TRUE(row.isApprox(full.row(static_cast<Eigen::Index>(t)), 1e-10)) << t;
  }
  EXPECT_EQ(dec.position(), 24u);
  EXPECT_EQ(CodeOf([&] { dec.Step(1); }), ErrorCode::kPromptTooLong);
}

TEST(ToyLm, TokenizationAndTrainingSequence) {
  EXPECT_EQ(TokenizeBytes("A\xff"), (std::vector<int>{65, 255}));
  EXPECT_EQ(TrainingSequence("ab", "c"), (std::vector<int>{kBos, 97, 98, kSep, 99, kEos}));
}

TEST(ToyLm, ConfigValidation) {
  auto cfg = Tiny();
  cfg.heads = 3;
  EXPECT_EQ(CodeOf([&] { ToyLm m(cfg); }), ErrorCode::kInvalidArgument);
  cfg = Tiny();
  cfg.context_len = 0;
  EXPECT_EQ(CodeOf([&] { ToyLm m(cfg); }), ErrorCode::kInvalidArgument);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  TempDir dir("ckpt");
  ToyLm model(Tiny());
  model.AttachLora(2, 8.0, 0.1, 1);
  model.Find("h1.ffn.fc1.lora_v")->value.setConstant(0.25);
  model.Save(dir / "m.bin");
  const ToyLm back = ToyLm::Load(dir / "m.bin");
  Rng rng(8);
  const auto tokens = RandomTokens(rng, 20);
  EXPECT_EQ(back.Forward(tokens), model.Forward(tokens));
  EXPECT_EQ(back.lora_rank(), 2u);
  EXPECT_DOUBLE_EQ(back.lora_scale(), 4.0);
  EXPECT_DOUBLE_EQ(back.TrainableFraction(), model.TrainableFraction());

  std::string bytes;
  {
    std::ifstream in(dir / "m.bin", std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::ofstream(dir / "trunc.bin", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  EXPECT_EQ(CodeOf([&] { ToyLm::Load(dir / "trunc.bin"); }), ErrorCode::kSchemaError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream(dir / "magic.bin", std::ios::binary) << bad;
  EXPECT_EQ(CodeOf([&] { ToyLm::Load(dir / "magic.bin"); }), ErrorCode::kSchemaError);
  EXPECT_EQ(CodeOf([&] { ToyLm::Load(dir / "absent.bin"); }), ErrorCode::kIoError);
}

std::vector<PromptRecord> Records(std::size_t n) {
  std::vector<PromptRecord> recs(n);
  for (std::size_t i = 0; i < n; ++i) {
    recs[i].input_text = "x" + std::to_string(i);
    recs[i].target_text = "y" + std::to_string(i * 7 % 10);
    recs[i].instance_ref = "r#" + std::to_string(i);
  }
  return recs;
}

TEST(Trainer, ZeroStepsLeavesModelUnchanged) {
  const auto cfg = Tiny();
  TrainOptions opts;
  opts.max_steps = 0;
  const auto res = TrainToyLm(Records(4), cfg, opts);
  EXPECT_EQ(res.steps, 0u);
  EXPECT_TRUE(res.curve.empty());
  const ToyLm fresh(cfg);
  const std::vector<int> tokens{kBos, 1, 2, 3};
  EXPECT_EQ(res.model.Forward(tokens), fresh.Forward(tokens));
}

TEST(Trainer, FullBatchLossDecreases) {
  auto cfg = Tiny();
  cfg.lr = 1e-3;
  cfg.batch_size = 8;
  TrainOptions opts;
  opts.max_steps = 10;
  opts.eval_every = 1;
  const auto res = TrainToyLm(Records(8), cfg, opts);
  ASSERT_EQ(res.curve.size(), 10u);
  for (std::size_t i = 1; i < res.curve.size(); ++i) {
    EXPECT_LT(res.curve[i].train_loss, res.curve[i - 1].train_loss) << i;
  }
}

TEST(Trainer, LoraTrainsOnlyAdapters) {
  auto cfg = Tiny();
  cfg.mode = TrainMode::kLora;
  cfg.lora_rank = 2;
  cfg.lr = 1e-2;
  const ToyLm base(Tiny());
  TrainOptions opts;
  opts.max_steps = 5;
  const auto res = TrainToyLm(Records(4), cfg, opts, &base);
  ASSERT_TRUE(res.model.has_lora());
  for (const auto& p : res.model.parameters()) {
    if (!p.adapter) {
      EXPECT_EQ(p.value, base.Find(p.name)->value) << p.name;
    }
  }
  EXPECT_NE(res.model.Find("h0.attn.q.lora_v")->value.norm(), 0.0);
}

TEST(Trainer, SeededRunsAreReproducible) {
  auto cfg = Tiny();
  cfg.lr = 1e-3;
  cfg.batch_size = 2;
  TrainOptions opts;
  opts.max_steps = 6;
  const auto a = TrainToyLm(Records(5), cfg, opts);
  const auto b = TrainToyLm(Records(5), cfg, opts);
  const std::vector<int> tokens{kBos, 120, 49, kSep};
  EXPECT_EQ(a.model.Forward(tokens), b.model.Forward(tokens));
}

TEST(Trainer, RejectsOversizedAndEmptySets) {
  auto recs = Records(3);
  recs[1].input_text = std::string(30, 'a');
  try {
    TrainToyLm(recs, Tiny(), TrainOptions{});
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kContextOverflow);
    EXPECT_NE(std::string(e.what()).find("r#1"), std::string::npos);
  }
  EXPECT_EQ(CodeOf([] { TrainToyLm({}, Tiny(), TrainOptions{}); }), ErrorCode::kEmptyTrainingSet);
}

TEST(Trainer, MemorizesSmallSet) {
  auto cfg = Tiny();
  cfg.lr = 3e-3;
  cfg.batch_size = 8;
  TrainOptions opts;
  opts.max_steps = 600;
  opts.target_accuracy = 1.0;
  const auto res = TrainToyLm(Records(8), cfg, opts);
  EXPECT_TRUE(res.reached_target) << res.final_accuracy;
}

}  // namespace
}  // namespace loadlm::toylm
