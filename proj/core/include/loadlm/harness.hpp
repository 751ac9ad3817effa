// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

// Encode -> generate -> parse -> score pipeline and run artifacts.

#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadlm/backends.hpp"
#include "loadlm/extractor.hpp"
#include "loadlm/metrics.hpp"
#include "loadlm/prompt_codec.hpp"

namespace loadlm {

// Fixed-capacity multi-producer/multi-consumer queue. Pop returns nullopt
// once the queue is closed and drained.
template <typename T>
class BoundedQueue {
 public:
  explicit BoundedQueue(std::size_t capacity) : capacity_(capacity == 0 ? 1 : capacity) {}

  // Returns false if the queue was closed before the item could be added.
  bool Push(T item) {
    std::unique_lock lock(mu_);
    not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) return false;
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return true;
  }

  std::optional<T> Pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T item = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return item;
  }

  void Close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

 private:
  std::size_t capacity_;
  std::deque<T> items_;
  bool closed_ = false;
  std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
};

struct EvalOptions {
  std::optional<int> precision;  // defaults to each record's own precision
  RepairPolicy repair = RepairPolicy::kAuto;
  std::size_t workers = 4;
  std::size_t queue_capacity = 64;
  std::size_t max_tokens = 0;  // 0: derived from the target template
  std::size_t ordinal_offset = 0;
  std::string method = "LLM";
};

struct SampleOutcome {
  std::size_t ordinal = 0;
  std::string instance_ref;
  Format format = Format::kText;
  std::string t0;
  std::string completion;
  ParseOutcome parsed;
  std::vector<double> target;
};

struct EvalResult {
  MetricsReport report;
  std::vector<SampleOutcome> samples;  // in record order
};

// Runs every record through `backend`. Results are stamped with their
// record position, so the output does not depend on completion order.
// The first backend error aborts the run and is rethrown.
EvalResult RunEval(std::span<const PromptRecord> records, TextBackend& backend,
                   const EvalOptions& opts);

// Metrics over samples with a per-format breakdown.
MetricsReport Summarize(std::span<const SampleOutcome> samples, const std::string& method);

struct EvalConfig {
  std::filesystem::path dataset;
  std::optional<Format> format;  // none: every record in the dataset
  std::optional<int> precision;
  std::uint64_t seed = 0;
  std::string backend = "echo";  // echo | fault:echo | toylm:<ckpt> | remote
  std::string decode = "greedy";  // toylm only: greedy | constrained
  double fault_rate = 0.0;
  FaultSchedule fault_schedule = FaultSchedule::kSystematic;
  FaultMix fault_mix = FaultMix::kMixed;
  RepairPolicy repair = RepairPolicy::kAuto;
  std::string method;  // report label; defaults to the backend id
  std::size_t workers = 4;
  std::size_t max_tokens = 0;
};

std::string EvalConfigToJson(const EvalConfig& cfg);
// Unknown keys are rejected with kSchemaError.
EvalConfig EvalConfigFromJson(std::string_view json);

// Backend for records of one format, per the descriptor in `cfg`.
std::shared_ptr<TextBackend> MakeBackend(const EvalConfig& cfg,
                                         std::span<const PromptRecord> records);

struct RunArtifacts {
  std::filesystem::path dir;
  EvalResult result;
  std::string manifest_json;
};

// Loads the dataset, evaluates each format group, and writes report.json,
// report.md, report.csv, outcomes.jsonl, forecast.csv and manifest.json into
// out_root/run-<hash>, where the hash covers the configuration and the
// dataset contents.
RunArtifacts RunAndWrite(const EvalConfig& cfg, const std::filesystem::path& out_root);

// Re-runs the configuration recorded in a manifest.json.
EvalConfig EvalConfigFromManifest(const std::filesystem::path& manifest);

}  // namespace loadlm
