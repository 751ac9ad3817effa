// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <fstream>
#include <thread>

#include <json.hpp>

#include <gtest/gtest.h>

#include "loadlm/dataset.hpp"
#include "loadlm/harness.hpp"
#include "loadlm/prompt_codec.hpp"
#include "test_util.hpp"

namespace loadlm {
namespace {

using nlohmann::json;
using testing::CodeOf;
using testing::TempDir;

std::vector<PromptRecord> MakeRecords(Format f, std::size_t n, int precision = 0) {
  const auto series = SynthesizeIcldLike(23, std::max<std::size_t>(n + 40, 60));
  const auto insts = MakeInstances(series, WindowSpec{});
  std::vector<PromptRecord> out;
  CodecOptions o;
  o.precision = precision;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Encode(insts[i], f, o));
  return out;
}

std::string Read(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Echo with per-request jitter so completions finish out of order.
class JitterEcho final : public TextBackend {
 public:
  explicit JitterEcho(std::span<const PromptRecord> recs, bool safe = true)
      : echo_(recs), safe_(safe) {}
  std::string generate(const GenerationRequest& req) override {
    const int now = ++active_;
    if (now > 1) overlapped_ = true;
    std::this_thread::sleep_for(std::chrono::microseconds(Fnv1a64(req.request_id) % 2000));
    if (req.request_id == fail_on_) {
      --active_;
      throw Error(ErrorCode::kTimeout, "injected");
    }
    auto text = echo_.generate(req);
    --active_;
    return text;
  }
  std::string id() const override { return "jitter"; }
  bool concurrent_safe() const override { return safe_; }

  std::string fail_on_;
  std::atomic<bool> overlapped_{false};

 private:
  EchoOracle echo_;
  bool safe_;
  std::atomic<int> active_{0};
};

TEST(BoundedQueue, DeliversEverythingOnce) {
  BoundedQueue<int> q(3);
  std::atomic<long> sum{0};
  std::vector<std::thread> consumers;
  for (int c = 0; c < 3; ++c) {
    consumers.emplace_back([&] {
      while (auto v = q.Pop()) sum += *v;
    });
  }
  std::vector<std::thread> producers;
  for (int p = 0; p < 2; ++p) {
    producers.emplace_back([&, p] {
      for (int i = 1; i <= 500; ++i) q.Push(p * 1000 + i);
    });
  }
  for (auto& t : producers) t.join();
  q.Close();
  for (auto& t : consumers) t.join();
  EXPECT_EQ(sum.load(), 2 * 125250L + 500L * 1000L);
  EXPECT_FALSE(q.Push(1));
  EXPECT_EQ(q.Pop(), std::nullopt);
}

TEST(RunEval, ResultsFollowRecordOrder) {
  const auto recs = MakeRecords(Format::kTs, 60);
  JitterEcho backend(recs);
  EvalOptions opts;
  opts.workers = 6;
  opts.queue_capacity = 4;
  opts.ordinal_offset = 100;
  const auto res = RunEval(recs, backend, opts);
  ASSERT_EQ(res.samples.size(), recs.size());
  for (std::size_t i = 0; i < recs.size(); ++i) {
    EXPECT_EQ(res.samples[i].instance_ref, recs[i].instance_ref);
    EXPECT_EQ(res.samples[i].ordinal, 100 + i);
    EXPECT_EQ(res.samples[i].completion, recs[i].target_text);
  }
}

TEST(RunEval, EchoIsExactForEveryFormatAndPrecision) {
  for (Format f : {Format::kText, Format::kTs, Format::kEts}) {
    for (int precision : {0, 2}) {
      const auto recs = MakeRecords(f, 40, precision);
      EchoOracle echo(recs);
      EvalOptions opts;
      opts.method = "echo";
      const auto res = RunEval(recs, echo, opts);
      EXPECT_EQ(res.report.n_samples, 40u);
      EXPECT_EQ(res.report.n_hallucinated, 0u);
      EXPECT_EQ(res.report.mae, 0.0);
      EXPECT_EQ(res.report.rmse, 0.0);
      EXPECT_EQ(res.report.method, "echo");
      ASSERT_EQ(res.report.per_format_breakdown.size(), 1u);
      EXPECT_EQ(res.report.per_format_breakdown.begin()->first, ToString(f));
    }
  }
}

TEST(RunEval, NonConcurrentBackendIsSerialized) {
  const auto recs = MakeRecords(Format::kText, 30);
  JitterEcho backend(recs, false);
  EvalOptions opts;
  opts.workers = 8;
  RunEval(recs, backend, opts);
  EXPECT_FALSE(backend.overlapped_.load());
}

TEST(RunEval, BackendErrorIsRethrown) {
  const auto recs = MakeRecords(Format::kText, 30);
  JitterEcho backend(recs);
  backend.fail_on_ = recs[17].instance_ref;
  EXPECT_EQ(CodeOf([&] { RunEval(recs, backend, EvalOptions{}); }), ErrorCode::kTimeout);
}

TEST(RunEval, FaultCountEqualsHallucinationCount) {
  const auto recs = MakeRecords(Format::kEts, 200);
  auto echo = std::make_shared<EchoOracle>(recs);
  FaultInjector fi(echo, Format::kEts, FaultOptions{0.085, 4, FaultSchedule::kSystematic});
  const auto res = RunEval(recs, fi, EvalOptions{});
  EXPECT_EQ(res.report.n_hallucinated, fi.drawn());
  EXPECT_EQ(fi.drawn(), 17u);
  EXPECT_DOUBLE_EQ(res.report.hallucination_rate, 17.0 / 200.0);
  EXPECT_GT(res.report.mae, 0.0);
}

TEST(Summarize, MixedFormats) {
  std::vector<SampleOutcome> samples(3);
  samples[0].format = Format::kText;
  samples[0].parsed.verdict = Verdict{VerdictKind::kClean, 0};
  samples[0].parsed.repaired = {1, 2};
  samples[0].target = {1, 4};
  samples[1].format = Format::kEts;
  samples[1].parsed.verdict = Verdict{VerdictKind::kMissing, 1};
  samples[1].parsed.repaired = {0, 3};
  samples[1].target = {2, 3};
  samples[2].format = Format::kEts;
  samples[2].parsed.verdict = Verdict{VerdictKind::kClean, 0};
  samples[2].parsed.repaired = {5, 5};
  samples[2].target = {5, 5};
  const auto r = Summarize(samples, "m");
  EXPECT_EQ(r.n_samples, 3u);
  EXPECT_EQ(r.n_hallucinated, 1u);
  EXPECT_DOUBLE_EQ(r.mae, 4.0 / 6.0);
  EXPECT_DOUBLE_EQ(r.rmse, std::sqrt(8.0 / 6.0));
  EXPECT_EQ(r.per_format_breakdown.at("ets").n_samples, 2u);
  EXPECT_DOUBLE_EQ(r.per_format_breakdown.at("ets").mae, 0.5);
  EXPECT_DOUBLE_EQ(r.per_format_breakdown.at("text").rmse, std::sqrt(2.0));
}

TEST(EvalConfig, JsonRoundTripAndUnknownKeys) {
  EvalConfig cfg;
  cfg.dataset = "data/test_ets.jsonl";
  cfg.format = Format::kEts;
  cfg.precision = 2;
  cfg.seed = 7;
  cfg.backend = "fault:echo";
  cfg.fault_rate = 0.035;
  cfg.fault_schedule = FaultSchedule::kBernoulli;
  cfg.fault_mix = FaultMix::kDrop;
  cfg.repair = RepairPolicy::kTailPad;
  cfg.method = "GPT-2";
  cfg.workers = 2;
  cfg.max_tokens = 99;
  const auto text = EvalConfigToJson(cfg);
  const auto back = EvalConfigFromJson(text);
  EXPECT_EQ(EvalConfigToJson(back), text);
  EXPECT_EQ(back.format, Format::kEts);
  EXPECT_EQ(back.fault_schedule, FaultSchedule::kBernoulli);
  EXPECT_EQ(back.max_tokens, 99u);
  EXPECT_EQ(CodeOf([] { EvalConfigFromJson(R"({"dataset":"x","api_key":"k"})"); }),
            ErrorCode::kSchemaError);
  EXPECT_EQ(CodeOf([] { EvalConfigFromJson("[1"); }), ErrorCode::kSchemaError);
  EXPECT_EQ(EvalConfigFromJson(R"({"dataset":"x"})").backend, "echo");
}

TEST(MakeBackend, Descriptors) {
  const auto recs = MakeRecords(Format::kText, 5);
  EvalConfig cfg;
  EXPECT_EQ(MakeBackend(cfg, recs)->id(), "echo");
  cfg.backend = "fault:echo";
  cfg.fault_rate = 0.5;
  EXPECT_EQ(MakeBackend(cfg, recs)->id(), "fault(0.5,systematic):echo");
  cfg.backend = "gpt9";
  EXPECT_EQ(CodeOf([&] { MakeBackend(cfg, recs); }), ErrorCode::kInvalidArgument);
  cfg.backend = "toylm:/nonexistent.bin";
  EXPECT_EQ(CodeOf([&] { MakeBackend(cfg, recs); }), ErrorCode::kIoError);
}

TEST(RunAndWrite, ArtifactsAreReproducible) {
  TempDir dir("run");
  std::vector<PromptRecord> recs;
  for (Format f : {Format::kText, Format::kEts}) {
    const auto part = MakeRecords(f, 50);
    recs.insert(recs.end(), part.begin(), part.end());
  }
  ExportJsonl(recs, dir / "data.jsonl");
  EvalConfig cfg;
  cfg.dataset = dir / "data.jsonl";
  cfg.backend = "fault:echo";
  cfg.fault_rate = 0.1;
  cfg.seed = 3;
  const auto a = RunAndWrite(cfg, dir / "runs");
  for (const char* f : {"report.json", "report.md", "report.csv", "outcomes.jsonl",
                        "forecast.csv", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(a.dir / f)) << f;
  }
  EXPECT_EQ(a.result.report.n_samples, 100u);
  EXPECT_EQ(a.result.report.n_hallucinated, 10u);
  EXPECT_EQ(a.result.report.per_format_breakdown.size(), 2u);

  const auto manifest = json::parse(a.manifest_json);
  EXPECT_EQ(manifest["n_samples"], 100);
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["dataset_hash"], HashFile(dir / "data.jsonl"));

  const auto first_report = Read(a.dir / "report.json");
  const auto first_outcomes = Read(a.dir / "outcomes.jsonl");
  const auto first_forecast = Read(a.dir / "forecast.csv");
  const auto replay = EvalConfigFromManifest(a.dir / "manifest.json");
  const auto b = RunAndWrite(replay, dir / "runs2");
  EXPECT_EQ(b.dir.filename(), a.dir.filename());
  EXPECT_EQ(Read(b.dir / "report.json"), first_report);
  EXPECT_EQ(Read(b.dir / "outcomes.jsonl"), first_outcomes);
  EXPECT_EQ(Read(b.dir / "forecast.csv"), first_forecast);
  EXPECT_EQ(Read(b.dir / "manifest.json"), a.manifest_json);

  std::size_t lines = 0;
  std::ifstream fc(a.dir / "forecast.csv");
  std::string line;
  std::getline(fc, line);
  EXPECT_EQ(line, "instance_ref,format,t0,step,forecast,truth");
  while (std::getline(fc, line)) ++lines;
  EXPECT_EQ(lines, 100u * 7u);

  cfg.seed = 4;
  EXPECT_NE(RunAndWrite(cfg, dir / "runs").dir, a.dir);
  cfg.format = Format::kTs;
  EXPECT_EQ(CodeOf([&] { RunAndWrite(cfg, dir / "runs"); }), ErrorCode::kInvalidArgument);
}

}  // namespace
}  // namespace loadlm
