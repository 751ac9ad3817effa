// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

// Client for OpenAI-compatible completion endpoints.
//
//   POST {base}/v1/completions
//   Authorization: Bearer {key}            (omitted when no key is set)
//   {"model": m, "prompt": p, "max_tokens": n, "temperature": t, "stop": s?}
//   200 -> {"choices": [{"text": "..."}], ...}
//
// A base URL that already ends in /v1 is not extended twice. 429, 5xx and
// transport failures are retried with exponential backoff.

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <semaphore>
#include <string>

#include "loadlm/backends.hpp"

namespace loadlm {

struct RemoteConfig {
  std::string base_url;
  std::string api_key;
  std::string model;
  std::chrono::milliseconds timeout{60'000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  std::size_t max_in_flight = 4;

  // LOADLM_API_BASE (required), LOADLM_API_KEY, LOADLM_MODEL.
  // Throws kBackendUnavailable when the endpoint is not configured.
  static RemoteConfig FromEnv();
};

// Builds the JSON request body.
std::string CompletionRequestBody(const RemoteConfig& cfg, const GenerationRequest& req);
// First choice's text. Throws kMalformedResponse.
std::string CompletionText(const std::string& body);

class RemoteClient final : public TextBackend {
 public:
  explicit RemoteClient(RemoteConfig cfg);

  std::string generate(const GenerationRequest& req) override;
  std::string id() const override;
  bool concurrent_safe() const override { return true; }

  std::size_t attempts_made() const { return attempts_.load(); }

 private:
  RemoteConfig cfg_;
  std::string scheme_host_;
  std::string path_;
  std::unique_ptr<std::counting_semaphore<>> slots_;
  std::atomic<std::size_t> attempts_{0};
};

}  // namespace loadlm
