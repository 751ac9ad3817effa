// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <thread>

#include <gtest/gtest.h>

#include "loadlm/backends.hpp"
#include "loadlm/dataset.hpp"
#include "loadlm/extractor.hpp"
#include "loadlm/prompt_codec.hpp"
#include "test_util.hpp"

namespace loadlm {
namespace {

using testing::CodeOf;

std::vector<PromptRecord> MakeRecords(Format f, std::size_t n) {
  const auto series = SynthesizeIcldLike(17, std::max<std::size_t>(n + 40, 60));
  const auto insts = MakeInstances(series, WindowSpec{});
  std::vector<PromptRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Encode(insts[i], f, CodecOptions{}));
  return out;
}

GenerationRequest RequestFor(const PromptRecord& r, std::size_t ordinal) {
  GenerationRequest req;
  req.prompt = r.input_text;
  req.request_id = r.instance_ref;
  req.ordinal = ordinal;
  return req;
}

TEST(GenerationRequest, Validate) {
  GenerationRequest req;
  req.prompt = "p";
  EXPECT_NO_THROW(req.Validate());
  req.max_tokens = 0;
  EXPECT_EQ(CodeOf([&] { req.Validate(); }), ErrorCode::kInvalidArgument);
  req.max_tokens = 5;
  req.temperature = -0.1;
  EXPECT_EQ(CodeOf([&] { req.Validate(); }), ErrorCode::kInvalidArgument);
  req.temperature = 0;
  req.prompt.clear();
  EXPECT_EQ(CodeOf([&] { req.Validate(); }), ErrorCode::kInvalidArgument);
}

TEST(EchoOracle, ReturnsRegisteredTargets) {
  const auto recs = MakeRecords(Format::kEts, 5);
  EchoOracle echo(recs);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(echo.generate(RequestFor(recs[i], i)), recs[i].target_text);
  }
  GenerationRequest unknown;
  unknown.prompt = "x";
  unknown.request_id = "nope";
  EXPECT_EQ(CodeOf([&] { echo.generate(unknown); }), ErrorCode::kBackendUnavailable);
  echo.Register("nope", "hello");
  EXPECT_EQ(echo.generate(unknown), "hello");
  EXPECT_EQ(echo.id(), "echo");
  EXPECT_TRUE(echo.concurrent_safe());
}

TEST(FaultInjector, ZeroRateIsIdentity) {
  const auto recs = MakeRecords(Format::kText, 50);
  auto echo = std::make_shared<EchoOracle>(recs);
  for (auto schedule : {FaultSchedule::kBernoulli, FaultSchedule::kSystematic}) {
    FaultInjector fi(echo, Format::kText, FaultOptions{0.0, 1, schedule, FaultMix::kMixed});
    for (std::size_t i = 0; i < recs.size(); ++i) {
      ASSERT_EQ(fi.generate(RequestFor(recs[i], i)), recs[i].target_text);
    }
    EXPECT_EQ(fi.drawn(), 0u);
  }
}

TEST(FaultInjector, RejectsBadOptions) {
  auto echo = std::make_shared<EchoOracle>(std::vector<PromptRecord>{});
  EXPECT_EQ(CodeOf([&] { FaultInjector(echo, Format::kText, FaultOptions{1.5}); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(CodeOf([&] { FaultInjector(nullptr, Format::kText, FaultOptions{}); }),
            ErrorCode::kInvalidArgument);
}

TEST(FaultInjector, BernoulliMatchesSeededOracle) {
  const auto recs = MakeRecords(Format::kTs, 400);
  auto echo = std::make_shared<EchoOracle>(recs);
  const FaultOptions opts{0.2, 99, FaultSchedule::kBernoulli, FaultMix::kMixed};
  FaultInjector fi(echo, Format::kTs, opts);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const bool oracle =
        UnitFromBits(SplitMix64(opts.seed ^ Fnv1a64(recs[i].instance_ref))) < opts.rate;
    expected += oracle;
    const auto req = RequestFor(recs[i], i);
    ASSERT_EQ(fi.Draws(req), oracle);
    // Ordinal does not matter for the Bernoulli schedule.
    auto shifted = req;
    shifted.ordinal += 1000;
    ASSERT_EQ(fi.Draws(shifted), oracle);
    fi.generate(req);
  }
  EXPECT_EQ(fi.drawn(), expected);
  EXPECT_GT(expected, 50u);
  EXPECT_LT(expected, 110u);
}

TEST(FaultInjector, SystematicCountIsFloorOrCeil) {
  const auto recs = MakeRecords(Format::kText, 1);
  auto echo = std::make_shared<EchoOracle>(recs);
  for (double p : {0.016, 0.022, 0.035, 0.085, 0.5, 1.0}) {
    for (std::size_t n : {1u, 7u, 148u, 1000u}) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        FaultInjector fi(echo, Format::kText, FaultOptions{p, seed, FaultSchedule::kSystematic});
        std::size_t count = 0;
        for (std::size_t k = 0; k < n; ++k) {
          auto req = RequestFor(recs[0], k);
          count += fi.Draws(req);
        }
        const double pn = p * static_cast<double>(n);
        ASSERT_GE(static_cast<double>(count), std::floor(pn - 1e-9)) << p << " " << n;
        ASSERT_LE(static_cast<double>(count), std::ceil(pn + 1e-9)) << p << " " << n;
      }
    }
  }
}

TEST(FaultInjector, FaultedOutputsAreNeverCleanAndOthersUntouched) {
  for (Format f : {Format::kText, Format::kTs, Format::kEts}) {
    const auto recs = MakeRecords(f, 300);
    auto echo = std::make_shared<EchoOracle>(recs);
    for (FaultMix mix : {FaultMix::kDrop, FaultMix::kAdd, FaultMix::kGarble, FaultMix::kMixed}) {
      FaultInjector fi(echo, f, FaultOptions{0.3, 5, FaultSchedule::kBernoulli, mix});
      std::size_t dirty = 0;
      for (std::size_t i = 0; i < recs.size(); ++i) {
        const auto req = RequestFor(recs[i], i);
        const auto out = fi.generate(req);
        const auto verdict = ParsePrediction(out, ParseOptions{f, recs[i].expected_len, 0}).verdict;
        if (fi.Draws(req)) {
          EXPECT_FALSE(verdict.clean()) << out;
        } else {
          EXPECT_EQ(out, recs[i].target_text);
        }
        dirty += !verdict.clean();
      }
      EXPECT_EQ(dirty, fi.drawn());
      EXPECT_EQ(fi.faulted_ids().size(), fi.drawn());
    }
  }
}

TEST(FaultInjector, ConcurrentCallsCountEveryDraw) {
  const auto recs = MakeRecords(Format::kText, 400);
  auto echo = std::make_shared<EchoOracle>(recs);
  FaultInjector fi(echo, Format::kText, FaultOptions{0.1, 3, FaultSchedule::kSystematic});
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = t; i < recs.size(); i += 4) fi.generate(RequestFor(recs[i], i));
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_EQ(fi.drawn(), 40u);
  EXPECT_EQ(fi.id(), "fault(0.1,systematic):echo");
}

TEST(ToyLmBackend, IdsAndConstrainedShape) {
  toylm::ToyLmConfig cfg;
  cfg.d_model = 16;
  cfg.heads = 2;
  cfg.layers = 1;
  cfg.context_len = 256;
  auto model = std::make_shared<const toylm::ToyLm>(cfg);
  const ToyLmTarget target{Format::kTs, Resolution::kDaily, 2, 0, "kWh"};
  ToyLmBackend constrained(model, toylm::DecodeMode::kConstrained, target);
  ToyLmBackend greedy(model, toylm::DecodeMode::kGreedy, target);
  EXPECT_EQ(constrained.id(), "toylm:constrained");
  EXPECT_EQ(greedy.id(), "toylm:greedy");
  GenerationRequest req;
  req.prompt = "hello";
  req.max_tokens = TargetTokenBudget(target);
  const auto out = constrained.generate(req);
  EXPECT_TRUE(ParsePrediction(out, ParseOptions{Format::kTs, 2, 0}).verdict.clean()) << out;
  req.max_tokens = 5;
  EXPECT_LE(greedy.generate(req).size(), 5u);
}

TEST(TargetTokenBudget, BoundsRenderedTargets) {
  for (Format f : {Format::kText, Format::kTs, Format::kEts}) {
    const ToyLmTarget t{f, Resolution::kHourly, 24, 2, "kWh"};
    const auto tmpl = MakeTargetTemplate(f, t.step, t.expected_len);
    const auto widest = RenderTarget(tmpl, std::vector<std::string>(24, "999999999.99"));
    EXPECT_EQ(TargetTokenBudget(t), widest.size() + 1);
  }
}

}  // namespace
}  // namespace loadlm
