// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/remote_client.hpp"

#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "loadlm/error.hpp"

namespace loadlm {
namespace {

std::string Env(const char* name) {
  const char* v = std::getenv(name);
  return v == nullptr ? std::string() : std::string(v);
}

class SlotGuard {
 public:
  explicit SlotGuard(std::counting_semaphore<>& s) : s_(s) { s_.acquire(); }
  ~SlotGuard() { s_.release(); }
  SlotGuard(const SlotGuard&) = delete;
  SlotGuard& operator=(const SlotGuard&) = delete;

 private:
  std::counting_semaphore<>& s_;
};

}  // namespace

RemoteConfig RemoteConfig::FromEnv() {
  RemoteConfig cfg;
  cfg.base_url = Env("LOADLM_API_BASE");
  cfg.api_key = Env("LOADLM_API_KEY");
  cfg.model = Env("LOADLM_MODEL");
  if (cfg.base_url.empty()) {
    throw Error(ErrorCode::kBackendUnavailable, "LOADLM_API_BASE is not set");
  }
  return cfg;
}

std::string CompletionRequestBody(const RemoteConfig& cfg, const GenerationRequest& req) {
  nlohmann::json body = {{"model", cfg.model},
                         {"prompt", req.prompt},
                         {"max_tokens", req.max_tokens},
                         {"temperature", req.temperature}};
  if (req.stop) body["stop"] = *req.stop;
  return body.dump();
}

std::string CompletionText(const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedResponse, fmt::format("invalid JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() ||
      j["choices"].empty()) {
    throw Error(ErrorCode::kMalformedResponse, "response has no choices array");
  }
  const auto& first = j["choices"][0];
  if (!first.is_object() || !first.contains("text") || !first["text"].is_string()) {
    throw Error(ErrorCode::kMalformedResponse, "first choice has no text field");
  }
  return first["text"].get<std::string>();
}

RemoteClient::RemoteClient(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.max_attempts < 1 || cfg_.max_in_flight < 1) {
    throw Error(ErrorCode::kInvalidArgument, "remote client needs attempts and slots >= 1");
  }
  std::string url = cfg_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos ||
      (url.compare(0, scheme_end, "http") != 0 && url.compare(0, scheme_end, "https") != 0)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("bad endpoint URL '{}'", url));
  }
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_ = url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "" : url.substr(path_start);
  if (path.size() >= 3 && path.compare(path.size() - 3, 3, "/v1") == 0) {
    path_ = path + "/completions";
  } else {
    path_ = path + "/v1/completions";
  }
  slots_ = std::make_unique<std::counting_semaphore<>>(
      static_cast<std::ptrdiff_t>(cfg_.max_in_flight));
}

std::string RemoteClient::id() const {
  return cfg_.model.empty() ? "remote" : fmt::format("remote:{}", cfg_.model);
}

std::string RemoteClient::generate(const GenerationRequest& req) {
  req.Validate();
  const std::string body = CompletionRequestBody(cfg_, req);
  SlotGuard slot(*slots_);

  httplib::Client client(scheme_host_);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(cfg_.timeout);
  const auto usecs =
      std::chrono::duration_cast<std::chrono::microseconds>(cfg_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  httplib::Headers headers;
  if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

  ErrorCode last = ErrorCode::kBackendUnavailable;
  std::string detail;
  for (int attempt = 0; attempt < cfg_.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(cfg_.backoff_base * (1 << (attempt - 1)));
    attempts_.fetch_add(1);
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      const auto err = res.error();
      last = err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout
                 ? ErrorCode::kTimeout
                 : ErrorCode::kBackendUnavailable;
      detail = httplib::to_string(err);
      continue;
    }
    if (res->status == 200) return CompletionText(res->body);
    detail = fmt::format("HTTP {}", res->status);
    if (res->status == 429) {
      last = ErrorCode::kRateLimited;
      continue;
    }
    if (res->status >= 500) {
      last = ErrorCode::kBackendUnavailable;
      continue;
    }
    throw Error(ErrorCode::kBackendUnavailable,
                fmt::format("{} from {}{}: {}", detail, scheme_host_, path_, res->body));
  }
  throw Error(last, fmt::format("{} after {} attempts ({}{})", detail, cfg_.max_attempts,
                                scheme_host_, path_));
}

}  // namespace loadlm
