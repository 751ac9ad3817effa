// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#include "loadlm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "loadlm/rng.hpp"

namespace loadlm {
namespace {

using nlohmann::json;

// Row i averages padded[i .. i+k) where padded replicates the edge values.
Eigen::MatrixXd MovingAverageMatrix(std::size_t n, int kernel) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(n));
  const int half = (kernel - 1) / 2;
  const double w = 1.0 / kernel;
  for (int i = 0; i < static_cast<int>(n); ++i) {
    for (int j = i - half; j <= i + half; ++j) {
      const int src = std::clamp(j, 0, static_cast<int>(n) - 1);
      a(i, src) += w;
    }
  }
  return a;
}

void CheckKernel(int kernel) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw Error(ErrorCode::kBadKernel,
                fmt::format("moving-average kernel must be odd and >= 1, got {}",
                            kernel));
  }
}

Eigen::VectorXd Normalized(const DLinearModel& m, std::span<const double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = (v[i] - m.scale_mean) / m.scale_std;
  }
  return out;
}

struct Decomposed {
  Eigen::VectorXd trend;
  Eigen::VectorXd seasonal;
};

Decomposed Decompose(const Eigen::MatrixXd& ma, const Eigen::VectorXd& xn) {
  Decomposed d;
  d.trend = ma * xn;
  d.seasonal = xn - d.trend;
  return d;
}

json MatrixJson(const Eigen::MatrixXd& w, const Eigen::VectorXd& b) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(w.size()));
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
  }
  return json{{"rows", w.rows()},
              {"cols", w.cols()},
              {"weights", flat},
              {"bias", std::vector<double>(b.data(), b.data() + b.size())}};
}

void MatrixFromJson(const json& j, Eigen::MatrixXd& w, Eigen::VectorXd& b) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto flat = j.at("weights").get<std::vector<double>>();
  const auto bias = j.at("bias").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols ||
      static_cast<Eigen::Index>(bias.size()) != rows) {
    throw Error(ErrorCode::kSchemaError, "weight block size mismatch");
  }
  w.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
  }
  b = Eigen::Map<const Eigen::VectorXd>(bias.data(), rows);
}

double MaeOn(const DLinearModel& m, std::span<const ForecastInstance> set) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& inst : set) {
    const auto pred = m.Predict(inst.x);
    for (std::size_t j = 0; j < pred.size(); ++j) sum += std::abs(pred[j] - inst.y[j]);
    n += pred.size();
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

}  // namespace

std::vector<double> MovingAverage(std::span<const double> x, int kernel) {
  CheckKernel(kernel);
  const int n = static_cast<int>(x.size());
  const int half = (kernel - 1) / 2;
  std::vector<double> out(x.size());
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = i - half; j <= i + half; ++j) s += x[static_cast<std::size_t>(std::clamp(j, 0, n - 1))];
    out[static_cast<std::size_t>(i)] = s / kernel;
  }
  return out;
}

std::vector<double> PredictPersistence(std::span<const double> x,
                                       std::size_t horizon) {
  if (x.empty()) throw Error(ErrorCode::kInputTooShort, "persistence needs input");
  return std::vector<double>(horizon, x.back());
}

std::vector<double> PredictSeasonalNaive(std::span<const double> x,
                                         std::size_t period,
                                         std::size_t horizon) {
  if (period == 0 || x.size() < period) {
    throw Error(ErrorCode::kInputTooShort,
                fmt::format("seasonal naive needs {} values, got {}", period,
                            x.size()));
  }
  std::vector<double> out(horizon);
  const std::size_t base = x.size() - period;
  for (std::size_t h = 0; h < horizon; ++h) out[h] = x[base + h % period];
  return out;
}

DLinearModel DLinearModel::Init(std::size_t input_len, std::size_t output_len,
                                int kernel_size) {
  CheckKernel(kernel_size);
  DLinearModel m;
  m.kernel_size = kernel_size;
  m.input_len = input_len;
  m.output_len = output_len;
  const auto out = static_cast<Eigen::Index>(output_len);
  const auto in = static_cast<Eigen::Index>(input_len);
  m.trend_weights = Eigen::MatrixXd::Constant(out, in, 1.0 / static_cast<double>(input_len));
  m.seasonal_weights = Eigen::MatrixXd::Constant(out, in, 1.0 / static_cast<double>(input_len));
  m.trend_bias = Eigen::VectorXd::Zero(out);
  m.seasonal_bias = Eigen::VectorXd::Zero(out);
  return m;
}

std::vector<double> DLinearModel::Predict(std::span<const double> x) const {
  if (x.size() != input_len) {
    throw Error(ErrorCode::kShapeMismatch,
                fmt::format("expected {} inputs, got {}", input_len, x.size()));
  }
  const auto ma = MovingAverageMatrix(input_len, kernel_size);
  const auto d = Decompose(ma, Normalized(*this, x));
  const Eigen::VectorXd yn = trend_weights * d.trend + trend_bias +
                             seasonal_weights * d.seasonal + seasonal_bias;
  std::vector<double> y(output_len);
  for (std::size_t j = 0; j < output_len; ++j) {
    y[j] = yn(static_cast<Eigen::Index>(j)) * scale_std + scale_mean;
  }
  return y;
}

void DLinearModel::Save(const std::filesystem::path& path) const {
  json j{{"kind", "dlinear"},
         {"version", 1},
         {"kernel_size", kernel_size},
         {"individual", individual},
         {"input_len", input_len},
         {"output_len", output_len},
         {"scaler", {{"mean", scale_mean}, {"std", scale_std}}},
         {"trend", MatrixJson(trend_weights, trend_bias)},
         {"seasonal", MatrixJson(seasonal_weights, seasonal_bias)}};
  std::ofstream out(path);
  if (!out) {
    throw Error(ErrorCode::kIoError, fmt::format("cannot write '{}'", path.string()));
  }
  out << j.dump(1) << '\n';
}

DLinearModel DLinearModel::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::kIoError, fmt::format("cannot open '{}'", path.string()));
  }
  try {
    const json j = json::parse(in);
    if (j.at("kind") != "dlinear") throw Error(ErrorCode::kSchemaError, "not a dlinear checkpoint");
    DLinearModel m;
    m.kernel_size = j.at("kernel_size").get<int>();
    m.individual = j.at("individual").get<bool>();
    m.input_len = j.at("input_len").get<std::size_t>();
    m.output_len = j.at("output_len").get<std::size_t>();
    m.scale_mean = j.at("scaler").at("mean").get<double>();
    m.scale_std = j.at("scaler").at("std").get<double>();
    MatrixFromJson(j.at("trend"), m.trend_weights, m.trend_bias);
    MatrixFromJson(j.at("seasonal"), m.seasonal_weights, m.seasonal_bias);
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaError, e.what());
  }
}

double DLinearLoss(const DLinearModel& m, std::span<const ForecastInstance> batch) {
  const auto ma = MovingAverageMatrix(m.input_len, m.kernel_size);
  double sum = 0.0;
  for (const auto& inst : batch) {
    const auto d = Decompose(ma, Normalized(m, inst.x));
    const Eigen::VectorXd err = m.trend_weights * d.trend + m.trend_bias +
                                m.seasonal_weights * d.seasonal +
                                m.seasonal_bias - Normalized(m, inst.y);
    sum += err.squaredNorm();
  }
  return sum / static_cast<double>(batch.size() * m.output_len);
}

DLinearGradients DLinearLossGradients(const DLinearModel& m,
                                      std::span<const ForecastInstance> batch) {
  const auto ma = MovingAverageMatrix(m.input_len, m.kernel_size);
  DLinearGradients g;
  g.trend_weights = Eigen::MatrixXd::Zero(m.trend_weights.rows(), m.trend_weights.cols());
  g.seasonal_weights = Eigen::MatrixXd::Zero(m.seasonal_weights.rows(), m.seasonal_weights.cols());
  g.trend_bias = Eigen::VectorXd::Zero(m.trend_bias.size());
  g.seasonal_bias = Eigen::VectorXd::Zero(m.seasonal_bias.size());
  const double scale = 2.0 / static_cast<double>(batch.size() * m.output_len);
  for (const auto& inst : batch) {
    const auto d = Decompose(ma, Normalized(m, inst.x));
    const Eigen::VectorXd err = m.trend_weights * d.trend + m.trend_bias +
                                m.seasonal_weights * d.seasonal +
                                m.seasonal_bias - Normalized(m, inst.y);
    g.trend_weights.noalias() += scale * err * d.trend.transpose();
    g.seasonal_weights.noalias() += scale * err * d.seasonal.transpose();
    g.trend_bias += scale * err;
    g.seasonal_bias += scale * err;
  }
  return g;
}

DLinearFit FitDLinear(std::span<const ForecastInstance> train,
                      std::span<const ForecastInstance> val,
                      const DLinearConfig& cfg) {
  if (train.empty()) {
    throw Error(ErrorCode::kEmptyTrainingSet, "DLinear needs training windows");
  }
  if (cfg.batch_size == 0) {
    throw Error(ErrorCode::kInvalidArgument, "batch size must be positive");
  }
  DLinearModel model = DLinearModel::Init(train.front().x.size(),
                                          train.front().y.size(), cfg.kernel_size);
  model.individual = cfg.individual;
  if (cfg.scale_std > 0.0) {
    model.scale_mean = cfg.scale_mean;
    model.scale_std = cfg.scale_std;
  } else {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& inst : train) {
      for (double v : inst.x) { sum += v; sq += v * v; ++n; }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sq / static_cast<double>(n) - mean * mean);
    model.scale_mean = mean;
    model.scale_std = var > 0.0 ? std::sqrt(var) : 1.0;
  }

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<ForecastInstance> batch;
  batch.reserve(cfg.batch_size);

  DLinearFit fit;
  fit.model = model;
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      batch.clear();
      for (std::size_t k = b; k < std::min(order.size(), b + cfg.batch_size); ++k) {
        batch.push_back(train[order[k]]);
      }
      const auto g = DLinearLossGradients(model, batch);
      model.trend_weights -= cfg.learning_rate * g.trend_weights;
      model.seasonal_weights -= cfg.learning_rate * g.seasonal_weights;
      model.trend_bias -= cfg.learning_rate * g.trend_bias;
      model.seasonal_bias -= cfg.learning_rate * g.seasonal_bias;
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = DLinearLoss(model, train);
    stats.val_mae = val.empty() ? MaeOn(model, train) : MaeOn(model, val);
    fit.curve.push_back(stats);
    if (stats.val_mae < best) {
      best = stats.val_mae;
      fit.model = model;
      fit.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return fit;
}

}  // namespace loadlm
