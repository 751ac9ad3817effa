// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "loadlm/baselines.hpp"
#include "loadlm/dataset.hpp"
#include "loadlm/error.hpp"
#include "loadlm/harness.hpp"
#include "loadlm/metrics.hpp"
#include "loadlm/prompt_codec.hpp"
#include "loadlm/toylm/trainer.hpp"

namespace loadlm::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, fmt::format("cannot write {}", path.string()));
  out << text;
}

Resolution RequireResolution(const std::string& s) {
  auto r = ParseResolution(s);
  if (!r) throw Error(ErrorCode::kInvalidArgument, fmt::format("bad resolution '{}'", s));
  return *r;
}

Format RequireFormat(const std::string& s) {
  auto f = ParseFormat(s);
  if (!f) throw Error(ErrorCode::kInvalidArgument, fmt::format("bad format '{}'", s));
  return *f;
}

// ---------------------------------------------------------------- build

struct BuildArgs {
  std::string csv;
  std::string synthetic;
  std::string timestamp_col = "datetime";
  std::string value_col = "nat_demand";
  std::string resolution = "hourly";
  bool fill_gaps = false;
  std::size_t length = 0;
  std::uint64_t seed = 42;
  std::vector<int> splits;
  std::vector<std::string> formats{"text", "ts", "ets"};
  int precision = 0;
  std::size_t input_len = 0;
  std::size_t output_len = 0;
  std::size_t obs_len = 0;
  std::size_t stride = 1;
  std::string out_dir = "data";
};

LoadSeries BuildSeries(const BuildArgs& a) {
  if (!a.csv.empty()) {
    CsvOptions co;
    co.timestamp_col = a.timestamp_col;
    co.value_col = a.value_col;
    co.resolution = RequireResolution(a.resolution);
    co.gaps = a.fill_gaps ? GapPolicy::kForwardFill : GapPolicy::kReject;
    co.name = fs::path(a.csv).stem().string();
    return IngestCsv(a.csv, co);
  }
  if (a.synthetic == "icld") {
    return SynthesizeIcldLike(a.seed, a.length > 0 ? a.length : 1100);
  }
  if (a.synthetic == "elfd") {
    using namespace std::chrono;
    SyntheticSpec spec;
    spec.name = "elfd_like";
    spec.resolution = Resolution::kHourly;
    spec.mean = 1184.82;
    spec.std = 192.26;
    spec.start = sys_days{year{2015} / January / 1};
    const auto end = sys_days{year{2020} / July / 1};
    spec.length = a.length > 0 ? a.length
                               : static_cast<std::size_t>((end - sys_days{year{2015} / January / 1}).count()) * 24;
    return SynthesizeSeries(a.seed, spec);
  }
  throw Error(ErrorCode::kInvalidArgument, "build needs --csv or --synthetic icld|elfd");
}

int CmdBuild(const BuildArgs& a, std::ostream& out) {
  const LoadSeries series = BuildSeries(a);
  std::vector<int> splits = a.splits;
  if (splits.empty() && a.synthetic == "icld") splits = {24, 6, 6};
  if (splits.empty() && a.synthetic == "elfd") splits = {48, 12, 6};
  if (!splits.empty() && splits.size() != 3) {
    throw Error(ErrorCode::kInvalidArgument, "--splits takes train,val,test months");
  }

  std::vector<std::pair<std::string, LoadSeries>> parts;
  if (splits.empty()) {
    parts.emplace_back("all", series);
  } else {
    auto s = SplitByMonths(series, splits[0], splits[1], splits[2]);
    parts.emplace_back("train", std::move(s.train));
    parts.emplace_back("val", std::move(s.val));
    parts.emplace_back("test", std::move(s.test));
  }

  WindowSpec w = WindowSpec::Defaults(series.resolution());
  if (a.input_len > 0) {
    w.input_len = a.input_len;
    w.obs_len = 4 * a.input_len;
  }
  if (a.output_len > 0) w.output_len = a.output_len;
  if (a.obs_len > 0) w.obs_len = a.obs_len;
  w.stride = a.stride;
  w.Validate();

  std::vector<Format> formats;
  for (const auto& f : a.formats) formats.push_back(RequireFormat(f));

  fs::create_directories(a.out_dir);
  json summary = {{"series", series.name()},
                  {"resolution", ToString(series.resolution())},
                  {"points", series.size()},
                  {"start", FormatTimestamp(series.start())},
                  {"window",
                   {{"input_len", w.input_len},
                    {"output_len", w.output_len},
                    {"obs_len", w.obs_len},
                    {"stride", w.stride}}},
                  {"precision", a.precision},
                  {"splits", json::object()}};
  CodecOptions co;
  co.step = series.resolution();
  co.precision = a.precision;
  for (const auto& [name, part] : parts) {
    const fs::path csv = fs::path(a.out_dir) / (name + ".csv");
    WriteSeriesCsv(part, csv);
    const auto instances = MakeInstances(part, w);
    json files = json::object();
    for (Format f : formats) {
      std::vector<PromptRecord> records;
      records.reserve(instances.size());
      for (const auto& inst : instances) records.push_back(Encode(inst, f, co));
      const fs::path path = fs::path(a.out_dir) / fmt::format("{}_{}.jsonl", name, ToString(f));
      ExportJsonl(records, path);
      files[std::string(ToString(f))] = path.filename().string();
    }
    summary["splits"][name] = {{"points", part.size()},
                               {"start", FormatTimestamp(part.start())},
                               {"instances", instances.size()},
                               {"series_csv", csv.filename().string()},
                               {"jsonl", files}};
  }
  WriteFile(fs::path(a.out_dir) / "build.json", summary.dump(2) + "\n");
  out << summary.dump(2) << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval

int CmdEval(const EvalConfig& cfg, const std::string& out_root, std::ostream& out) {
  const RunArtifacts art = RunAndWrite(cfg, out_root);
  out << RenderReport(art.result.report, ReportStyle::kMarkdownTable);
  out << "run: " << art.dir.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- train

struct DLinearArgs {
  std::string train;
  std::string val;
  std::string test;
  std::string resolution = "hourly";
  std::size_t input_len = 24;
  std::size_t output_len = 24;
  DLinearConfig cfg;
  std::string out = "dlinear.json";
  std::string curve;
  std::string report;
  std::string method = "Dlinear";
};

std::vector<ForecastInstance> WindowsFromCsv(const std::string& path, Resolution r,
                                             std::size_t in, std::size_t out_len) {
  CsvOptions co;
  co.timestamp_col = "timestamp";
  co.value_col = "load";
  co.resolution = r;
  co.name = fs::path(path).stem().string();
  const LoadSeries s = IngestCsv(path, co);
  WindowSpec w{in, out_len, in, 1};
  return MakeInstances(s, w);
}

int CmdTrainDLinear(const DLinearArgs& a, std::ostream& out) {
  const Resolution r = RequireResolution(a.resolution);
  const auto train = WindowsFromCsv(a.train, r, a.input_len, a.output_len);
  std::vector<ForecastInstance> val;
  if (!a.val.empty()) val = WindowsFromCsv(a.val, r, a.input_len, a.output_len);
  const auto fit = FitDLinear(train, val, a.cfg);
  fit.model.Save(a.out);
  if (!a.curve.empty()) {
    std::string csv = "epoch,train_loss,val_mae\n";
    for (const auto& e : fit.curve) {
      csv += fmt::format("{},{},{}\n", e.epoch, e.train_loss, e.val_mae);
    }
    WriteFile(a.curve, csv);
  }
  json summary = {{"model", a.out},
                  {"epochs", fit.curve.size()},
                  {"best_epoch", fit.best_epoch},
                  {"train_windows", train.size()},
                  {"val_windows", val.size()}};
  if (!a.test.empty()) {
    const auto test = WindowsFromCsv(a.test, r, a.input_len, a.output_len);
    std::vector<std::vector<double>> preds;
    std::vector<std::vector<double>> truth;
    for (const auto& inst : test) {
      preds.push_back(fit.model.Predict(inst.x));
      truth.push_back(inst.y);
    }
    MetricsReport rep = EvaluateForecasts(preds, truth);
    rep.method = a.method;
    summary["test"] = {{"windows", test.size()}, {"mae", rep.mae}, {"rmse", rep.rmse}};
    if (!a.report.empty()) WriteFile(a.report, RenderReport(rep, ReportStyle::kJson));
  }
  out << summary.dump(2) << "\n";
  return 0;
}

struct ToyArgs {
  std::string dataset;
  std::string format;
  std::size_t limit = 0;
  std::string mode = "full";
  toylm::ToyLmConfig cfg;
  toylm::TrainOptions opts;
  double target_accuracy = 0.0;
  std::string out = "toylm.bin";
  std::string curve;
};

int CmdTrainToy(ToyArgs a, std::ostream& out) {
  std::vector<PromptRecord> records;
  for (auto& r : ImportJsonl(a.dataset)) {
    if (!a.format.empty() && r.format != RequireFormat(a.format)) continue;
    records.push_back(std::move(r));
    if (a.limit > 0 && records.size() == a.limit) break;
  }
  if (a.mode == "lora") {
    a.cfg.mode = toylm::TrainMode::kLora;
  } else if (a.mode != "full") {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("bad mode '{}'", a.mode));
  }
  if (a.target_accuracy > 0.0) a.opts.target_accuracy = a.target_accuracy;
  const auto started = std::chrono::steady_clock::now();
  auto res = toylm::TrainToyLm(records, a.cfg, a.opts);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  res.model.Save(a.out);
  if (!a.curve.empty()) {
    std::string csv = "step,train_loss,accuracy\n";
    for (const auto& p : res.curve) {
      csv += fmt::format("{},{},{}\n", p.step, p.train_loss, p.accuracy);
    }
    WriteFile(a.curve, csv);
  }
  json summary = {{"checkpoint", a.out},
                  {"records", records.size()},
                  {"steps", res.steps},
                  {"accuracy", res.final_accuracy},
                  {"trainable_fraction", res.model.TrainableFraction()},
                  {"seconds", secs}};
  out << summary.dump(2) << "\n";
  return 0;
}

// --------------------------------------------------------------- report

int CmdReport(const std::vector<std::string>& inputs, const std::string& out_path,
              std::ostream& out) {
  std::vector<MetricsReport> reports;
  for (const auto& in : inputs) {
    fs::path p = in;
    if (fs::is_directory(p)) p /= "report.json";
    reports.push_back(ReportFromJson(ReadFile(p)));
  }
  const std::string table = RenderComparison(reports);
  if (!out_path.empty()) WriteFile(out_path, table);
  out << table;
  return 0;
}

void PrintError(std::ostream& err, std::string_view code, std::string_view message) {
  err << json{{"error", code}, {"message", message}}.dump() << "\n";
}

}  // namespace

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LLM load-forecasting toolkit", "loadlm"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* b = app.add_subcommand("build", "Build JSONL prompt datasets from a CSV or a synthetic series");
  b->add_option("--csv", build.csv, "Input CSV");
  b->add_option("--synthetic", build.synthetic, "Synthetic series: icld | elfd");
  b->add_option("--timestamp-col", build.timestamp_col);
  b->add_option("--value-col", build.value_col);
  b->add_option("--resolution", build.resolution, "daily | hourly (CSV input)");
  b->add_flag("--fill-gaps", build.fill_gaps, "Forward-fill missing steps instead of failing");
  b->add_option("--length", build.length, "Synthetic length in steps");
  b->add_option("--seed", build.seed);
  b->add_option("--splits", build.splits, "train,val,test months")->delimiter(',');
  b->add_option("--formats", build.formats, "text,ts,ets")->delimiter(',');
  b->add_option("--precision", build.precision);
  b->add_option("--input-len", build.input_len);
  b->add_option("--output-len", build.output_len);
  b->add_option("--obs-len", build.obs_len);
  b->add_option("--stride", build.stride);
  b->add_option("--out", build.out_dir, "Output directory");

  EvalConfig eval_cfg;
  std::string eval_out = "runs";
  std::string config_path;
  std::string manifest_path;
  std::string format_s;
  std::string schedule_s;
  std::string mix_s;
  std::string repair_s;
  int precision = 0;
  auto* e = app.add_subcommand("eval", "Run encode -> generate -> parse -> score");
  auto* o_dataset = e->add_option("--dataset", eval_cfg.dataset, "Prompt dataset (JSONL)");
  auto* o_format = e->add_option("--format", format_s, "text | ts | ets | all");
  auto* o_backend = e->add_option("--backend", eval_cfg.backend,
                                  "echo | fault:echo | toylm:<ckpt> | remote");
  auto* o_decode = e->add_option("--decode", eval_cfg.decode, "greedy | constrained (toylm)");
  auto* o_rate = e->add_option("--fault-rate", eval_cfg.fault_rate);
  auto* o_sched = e->add_option("--fault-schedule", schedule_s, "systematic | bernoulli");
  auto* o_mix = e->add_option("--fault-mix", mix_s, "drop | add | garble | mixed");
  auto* o_repair = e->add_option("--repair", repair_s, "auto | tailpad");
  auto* o_prec = e->add_option("--precision", precision);
  auto* o_seed = e->add_option("--seed", eval_cfg.seed);
  auto* o_method = e->add_option("--method", eval_cfg.method, "Report label");
  auto* o_workers = e->add_option("--workers", eval_cfg.workers);
  auto* o_maxtok = e->add_option("--max-tokens", eval_cfg.max_tokens);
  e->add_option("--out", eval_out, "Root directory for run artifacts");
  e->add_option("--config", config_path, "JSON config; flags override its keys");
  e->add_option("--manifest", manifest_path, "Re-run the configuration in a manifest.json");

  auto* t = app.add_subcommand("train", "Train a baseline or the toy LM");
  t->require_subcommand(1);
  DLinearArgs dl;
  auto* td = t->add_subcommand("dlinear", "Fit DLinear on series CSVs written by build");
  td->add_option("--train", dl.train)->required();
  td->add_option("--val", dl.val);
  td->add_option("--test", dl.test);
  td->add_option("--resolution", dl.resolution);
  td->add_option("--input-len", dl.input_len);
  td->add_option("--output-len", dl.output_len);
  td->add_option("--kernel", dl.cfg.kernel_size);
  td->add_flag("--individual", dl.cfg.individual);
  td->add_option("--batch", dl.cfg.batch_size);
  td->add_option("--lr", dl.cfg.learning_rate);
  td->add_option("--epochs", dl.cfg.max_epochs);
  td->add_option("--patience", dl.cfg.patience);
  td->add_option("--seed", dl.cfg.seed);
  td->add_option("--out", dl.out, "Model JSON");
  td->add_option("--curve", dl.curve, "Training curve CSV");
  td->add_option("--report", dl.report, "Test-split report JSON");
  td->add_option("--method", dl.method);

  ToyArgs ta;
  auto* tt = t->add_subcommand("toylm", "Train the byte-level toy transformer");
  tt->add_option("--dataset", ta.dataset)->required();
  tt->add_option("--format", ta.format);
  tt->add_option("--limit", ta.limit, "Use the first N records");
  tt->add_option("--mode", ta.mode, "full | lora");
  tt->add_option("--d-model", ta.cfg.d_model);
  tt->add_option("--heads", ta.cfg.heads);
  tt->add_option("--layers", ta.cfg.layers);
  tt->add_option("--context", ta.cfg.context_len);
  tt->add_option("--lr", ta.cfg.lr);
  tt->add_option("--batch", ta.cfg.batch_size);
  tt->add_option("--seed", ta.cfg.seed);
  tt->add_option("--lora-rank", ta.cfg.lora_rank);
  tt->add_option("--lora-alpha", ta.cfg.lora_alpha);
  tt->add_option("--lora-dropout", ta.cfg.lora_dropout);
  tt->add_option("--steps", ta.opts.max_steps);
  tt->add_option("--eval-every", ta.opts.eval_every);
  tt->add_option("--target-accuracy", ta.target_accuracy);
  tt->add_option("--out", ta.out, "Checkpoint path");
  tt->add_option("--curve", ta.curve, "Training curve CSV");

  std::vector<std::string> report_inputs;
  std::string report_out;
  auto* r = app.add_subcommand("report", "Merge run reports into one comparison table");
  r->add_option("reports", report_inputs, "report.json files or run directories")->required();
  r->add_option("--out", report_out, "Also write the table here");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    PrintError(err, "UsageError", ex.what());
    return 2;
  }

  try {
    if (b->parsed()) return CmdBuild(build, out);
    if (e->parsed()) {
      EvalConfig cfg;
      if (!manifest_path.empty()) {
        cfg = EvalConfigFromManifest(manifest_path);
      } else if (!config_path.empty()) {
        cfg = EvalConfigFromJson(ReadFile(config_path));
      }
      if (o_dataset->count()) cfg.dataset = eval_cfg.dataset;
      if (o_format->count()) {
        cfg.format = format_s == "all" ? std::nullopt : std::optional(RequireFormat(format_s));
      }
      if (o_backend->count()) cfg.backend = eval_cfg.backend;
      if (o_decode->count()) cfg.decode = eval_cfg.decode;
      if (o_rate->count()) cfg.fault_rate = eval_cfg.fault_rate;
      if (o_sched->count()) {
        cfg.fault_schedule = EvalConfigFromJson(json{{"fault_schedule", schedule_s}}.dump())
                                 .fault_schedule;
      }
      if (o_mix->count()) {
        cfg.fault_mix = EvalConfigFromJson(json{{"fault_mix", mix_s}}.dump()).fault_mix;
      }
      if (o_repair->count()) {
        cfg.repair = EvalConfigFromJson(json{{"repair", repair_s}}.dump()).repair;
      }
      if (o_prec->count()) cfg.precision = precision;
      if (o_seed->count()) cfg.seed = eval_cfg.seed;
      if (o_method->count()) cfg.method = eval_cfg.method;
      if (o_workers->count()) cfg.workers = eval_cfg.workers;
      if (o_maxtok->count()) cfg.max_tokens = eval_cfg.max_tokens;
      if (cfg.dataset.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "eval needs --dataset, --config or --manifest");
      }
      return CmdEval(cfg, eval_out, out);
    }
    if (td->parsed()) return CmdTrainDLinear(dl, out);
    if (tt->parsed()) return CmdTrainToy(ta, out);
    if (r->parsed()) return CmdReport(report_inputs, report_out, out);
  } catch (const Error& ex) {
    PrintError(err, ErrorName(ex.code()), ex.what());
    return 1;
  } catch (const std::exception& ex) {
    PrintError(err, "InternalError", ex.what());
    return 1;
  }
  return 1;
}

}  // namespace loadlm::cli
