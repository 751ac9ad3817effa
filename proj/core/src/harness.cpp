// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/harness.hpp"

#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>

#include "loadlm/dataset.hpp"
#include "loadlm/error.hpp"
#include "loadlm/remote_client.hpp"
#include "loadlm/rng.hpp"
#include "loadlm/toylm/model.hpp"

namespace loadlm {
namespace {

using nlohmann::json;

std::size_t TokenBudget(const PromptRecord& r) {
  ToyLmTarget t;
  t.format = r.format;
  t.step = r.step;
  t.expected_len = r.expected_len;
  t.precision = r.precision;
  t.unit = r.unit_label;
  return TargetTokenBudget(t);
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("write failed for {}", path.string()));
}

std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string_view ScheduleName(FaultSchedule s) {
  return s == FaultSchedule::kSystematic ? "systematic" : "bernoulli";
}

std::string_view MixName(FaultMix m) {
  switch (m) {
    case FaultMix::kDrop: return "drop";
    case FaultMix::kAdd: return "add";
    case FaultMix::kGarble: return "garble";
    default: return "mixed";
  }
}

std::string Hex16(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace

EvalResult RunEval(std::span<const PromptRecord> records, TextBackend& backend,
                   const EvalOptions& opts) {
  EvalResult out;
  out.samples.resize(records.size());
  const std::size_t workers =
      backend.concurrent_safe()
          ? std::max<std::size_t>(1, std::min(opts.workers, records.size()))
          : 1;
  BoundedQueue<std::size_t> queue(opts.queue_capacity);
  std::mutex err_mu;
  std::exception_ptr first_error;

  auto work = [&] {
    while (auto idx = queue.Pop()) {
      const PromptRecord& r = records[*idx];
      SampleOutcome& s = out.samples[*idx];
      try {
        GenerationRequest req;
        req.prompt = r.input_text;
        req.max_tokens = opts.max_tokens > 0 ? opts.max_tokens : TokenBudget(r);
        req.request_id = r.instance_ref;
        req.ordinal = opts.ordinal_offset + *idx;
        s.completion = backend.generate(req);
        ParseOptions po;
        po.format = r.format;
        po.expected_len = r.expected_len;
        po.precision = opts.precision.value_or(r.precision);
        po.repair = opts.repair;
        s.parsed = ParsePrediction(s.completion, po);
      } catch (...) {
        std::lock_guard lock(err_mu);
        if (!first_error) first_error = std::current_exception();
        queue.Close();
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const PromptRecord& r = records[i];
    SampleOutcome& s = out.samples[i];
    s.ordinal = opts.ordinal_offset + i;
    s.instance_ref = r.instance_ref;
    s.format = r.format;
    s.t0 = r.t0;
    s.target = r.target_values;
    if (!queue.Push(i)) break;
  }
  queue.Close();
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  out.report = Summarize(out.samples, opts.method);
  return out;
}

MetricsReport Summarize(std::span<const SampleOutcome> samples, const std::string& method) {
  std::vector<ParseOutcome> outcomes;
  std::vector<std::vector<double>> targets;
  std::map<Format, std::pair<std::vector<ParseOutcome>, std::vector<std::vector<double>>>>
      groups;
  for (const auto& s : samples) {
    outcomes.push_back(s.parsed);
    targets.push_back(s.target);
    groups[s.format].first.push_back(s.parsed);
    groups[s.format].second.push_back(s.target);
  }
  MetricsReport report = Evaluate(outcomes, targets);
  report.method = method;
  for (const auto& [fmt_key, g] : groups) {
    report.per_format_breakdown[std::string(ToString(fmt_key))] =
        Evaluate(g.first, g.second).Totals();
  }
  return report;
}

std::string EvalConfigToJson(const EvalConfig& cfg) {
  json j = {{"dataset", cfg.dataset.string()},
            {"format", cfg.format ? std::string(ToString(*cfg.format)) : "all"},
            {"precision", cfg.precision ? json(*cfg.precision) : json(nullptr)},
            {"seed", cfg.seed},
            {"backend", cfg.backend},
            {"decode", cfg.decode},
            {"fault_rate", cfg.fault_rate},
            {"fault_schedule", ScheduleName(cfg.fault_schedule)},
            {"fault_mix", MixName(cfg.fault_mix)},
            {"repair", cfg.repair == RepairPolicy::kTailPad ? "tailpad" : "auto"},
            {"method", cfg.method},
            {"workers", cfg.workers},
            {"max_tokens", cfg.max_tokens}};
  return j.dump(2);
}

EvalConfig EvalConfigFromJson(std::string_view text) {
  EvalConfig cfg;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, fmt::format("config is not JSON: {}", e.what()));
  }
  if (!j.is_object()) throw Error(ErrorCode::kSchemaError, "config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "dataset") {
        cfg.dataset = v.get<std::string>();
      } else if (key == "format") {
        const auto s = v.get<std::string>();
        if (s != "all") {
          cfg.format = ParseFormat(s);
          if (!cfg.format) throw Error(ErrorCode::kSchemaError, fmt::format("bad format '{}'", s));
        }
      } else if (key == "precision") {
        if (!v.is_null()) cfg.precision = v.get<int>();
      } else if (key == "seed") {
        cfg.seed = v.get<std::uint64_t>();
      } else if (key == "backend") {
        cfg.backend = v.get<std::string>();
      } else if (key == "decode") {
        cfg.decode = v.get<std::string>();
      } else if (key == "fault_rate") {
        cfg.fault_rate = v.get<double>();
      } else if (key == "fault_schedule") {
        const auto s = v.get<std::string>();
        if (s == "systematic") cfg.fault_schedule = FaultSchedule::kSystematic;
        else if (s == "bernoulli") cfg.fault_schedule = FaultSchedule::kBernoulli;
        else throw Error(ErrorCode::kSchemaError, fmt::format("bad fault_schedule '{}'", s));
      } else if (key == "fault_mix") {
        const auto s = v.get<std::string>();
        if (s == "drop") cfg.fault_mix = FaultMix::kDrop;
        else if (s == "add") cfg.fault_mix = FaultMix::kAdd;
        else if (s == "garble") cfg.fault_mix = FaultMix::kGarble;
        else if (s == "mixed") cfg.fault_mix = FaultMix::kMixed;
        else throw Error(ErrorCode::kSchemaError, fmt::format("bad fault_mix '{}'", s));
      } else if (key == "repair") {
        const auto s = v.get<std::string>();
        if (s == "auto") cfg.repair = RepairPolicy::kAuto;
        else if (s == "tailpad") cfg.repair = RepairPolicy::kTailPad;
        else throw Error(ErrorCode::kSchemaError, fmt::format("bad repair '{}'", s));
      } else if (key == "method") {
        cfg.method = v.get<std::string>();
      } else if (key == "workers") {
        cfg.workers = v.get<std::size_t>();
      } else if (key == "max_tokens") {
        cfg.max_tokens = v.get<std::size_t>();
      } else {
        throw Error(ErrorCode::kSchemaError, fmt::format("unknown config key '{}'", key));
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, fmt::format("bad config value: {}", e.what()));
  }
  return cfg;
}

std::shared_ptr<TextBackend> MakeBackend(const EvalConfig& cfg,
                                         std::span<const PromptRecord> records) {
  const std::string& desc = cfg.backend;
  if (desc == "echo") return std::make_shared<EchoOracle>(records);
  if (desc.rfind("fault:", 0) == 0) {
    if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no records to evaluate");
    EvalConfig inner_cfg = cfg;
    inner_cfg.backend = desc.substr(6);
    FaultOptions fo;
    fo.rate = cfg.fault_rate;
    fo.seed = cfg.seed;
    fo.schedule = cfg.fault_schedule;
    fo.mix = cfg.fault_mix;
    return std::make_shared<FaultInjector>(MakeBackend(inner_cfg, records),
                                           records.front().format, fo);
  }
  if (desc.rfind("toylm:", 0) == 0) {
    if (records.empty()) throw Error(ErrorCode::kInvalidArgument, "no records to evaluate");
    auto model = std::make_shared<const toylm::ToyLm>(toylm::ToyLm::Load(desc.substr(6)));
    toylm::DecodeMode mode;
    if (cfg.decode == "greedy") mode = toylm::DecodeMode::kGreedy;
    else if (cfg.decode == "constrained") mode = toylm::DecodeMode::kConstrained;
    else throw Error(ErrorCode::kInvalidArgument, fmt::format("bad decode mode '{}'", cfg.decode));
    const PromptRecord& r = records.front();
    ToyLmTarget t{r.format, r.step, r.expected_len, cfg.precision.value_or(r.precision),
                  r.unit_label};
    for (const auto& other : records) {
      if (other.format != r.format || other.step != r.step ||
          other.expected_len != r.expected_len) {
        throw Error(ErrorCode::kInvalidArgument,
                    "toy LM evaluation needs records of one format and horizon");
      }
    }
    return std::make_shared<ToyLmBackend>(std::move(model), mode, t);
  }
  if (desc == "remote") return std::make_shared<RemoteClient>(RemoteConfig::FromEnv());
  throw Error(ErrorCode::kInvalidArgument, fmt::format("unknown backend '{}'", desc));
}

RunArtifacts RunAndWrite(const EvalConfig& cfg, const std::filesystem::path& out_root) {
  std::vector<PromptRecord> all = ImportJsonl(cfg.dataset);
  std::vector<PromptRecord> records;
  for (auto& r : all) {
    if (!cfg.format || r.format == *cfg.format) records.push_back(std::move(r));
  }
  if (records.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("{} has no records for the selected format", cfg.dataset.string()));
  }
  if (cfg.precision) {
    for (const auto& r : records) {
      if (r.precision != *cfg.precision) {
        throw Error(ErrorCode::kInvalidArgument,
                    fmt::format("record {} was encoded with precision {}, run uses {}",
                                r.instance_ref, r.precision, *cfg.precision));
      }
    }
  }

  const std::string method = cfg.method.empty() ? cfg.backend : cfg.method;
  EvalResult result;
  std::vector<std::string> backend_ids;
  std::size_t offset = 0;
  for (Format f : {Format::kText, Format::kTs, Format::kEts}) {
    std::vector<PromptRecord> group;
    for (const auto& r : records) {
      if (r.format == f) group.push_back(r);
    }
    if (group.empty()) continue;
    auto backend = MakeBackend(cfg, group);
    backend_ids.push_back(backend->id());
    EvalOptions eo;
    eo.precision = cfg.precision;
    eo.repair = cfg.repair;
    eo.workers = cfg.workers;
    eo.max_tokens = cfg.max_tokens;
    eo.ordinal_offset = offset;
    eo.method = method;
    auto part = RunEval(group, *backend, eo);
    offset += group.size();
    for (auto& s : part.samples) result.samples.push_back(std::move(s));
  }
  result.report = Summarize(result.samples, method);

  const std::string config_json = EvalConfigToJson(cfg);
  const std::string dataset_hash = HashFile(cfg.dataset);
  const std::string config_hash = Hex16(Fnv1a64(config_json));
  const std::string run_hash = Hex16(Fnv1a64(config_json + "\n" + dataset_hash));

  json manifest = {{"tool", "loadlm"},
                   {"version", "0.1.0"},
                   {"seed", cfg.seed},
                   {"config", json::parse(config_json)},
                   {"config_hash", config_hash},
                   {"dataset", cfg.dataset.string()},
                   {"dataset_hash", dataset_hash},
                   {"backend_id", backend_ids.size() == 1 ? json(backend_ids.front())
                                                          : json(backend_ids)},
                   {"n_samples", result.samples.size()}};

  RunArtifacts art;
  art.dir = out_root / ("run-" + run_hash);
  std::filesystem::create_directories(art.dir);
  WriteText(art.dir / "report.json", RenderReport(result.report, ReportStyle::kJson));
  WriteText(art.dir / "report.md", RenderReport(result.report, ReportStyle::kMarkdownTable));
  WriteText(art.dir / "report.csv", RenderReport(result.report, ReportStyle::kCsv));

  std::string outcomes;
  std::string forecast = "instance_ref,format,t0,step,forecast,truth\n";
  for (const auto& s : result.samples) {
    json line = {{"ordinal", s.ordinal},
                 {"instance_ref", s.instance_ref},
                 {"format", ToString(s.format)},
                 {"verdict", s.parsed.verdict.ToString()},
                 {"completion", s.completion},
                 {"raw_values", s.parsed.raw_values},
                 {"repaired", s.parsed.repaired},
                 {"target", s.target}};
    outcomes += line.dump() + "\n";
    for (std::size_t i = 0; i < s.target.size(); ++i) {
      const double pred = i < s.parsed.repaired.size() ? s.parsed.repaired[i] : 0.0;
      forecast += fmt::format("{},{},{},{},{},{}\n", s.instance_ref, ToString(s.format), s.t0,
                              i + 1, pred, s.target[i]);
    }
  }
  WriteText(art.dir / "outcomes.jsonl", outcomes);
  WriteText(art.dir / "forecast.csv", forecast);
  art.manifest_json = manifest.dump(2) + "\n";
  WriteText(art.dir / "manifest.json", art.manifest_json);
  art.result = std::move(result);
  return art;
}

EvalConfig EvalConfigFromManifest(const std::filesystem::path& manifest) {
  const std::string text = ReadText(manifest);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, fmt::format("manifest is not JSON: {}", e.what()));
  }
  if (!j.is_object() || !j.contains("config")) {
    throw Error(ErrorCode::kSchemaError, "manifest has no config object");
  }
  return EvalConfigFromJson(j["config"].dump());
}

}  // namespace loadlm
