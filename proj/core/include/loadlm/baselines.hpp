// Copyright 2026 The loadlm Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "loadlm/types.hpp"

namespace loadlm {

// Centered moving average with edge-replication padding; same length as x.
// Throws kBadKernel for even or non-positive kernels.
std::vector<double> MovingAverage(std::span<const double> x, int kernel);

// Repeats the last value. Throws kInputTooShort on empty input.
std::vector<double> PredictPersistence(std::span<const double> x,
                                       std::size_t horizon);
// Tiles the last `period` values. Throws kInputTooShort if len(x) < period.
std::vector<double> PredictSeasonalNaive(std::span<const double> x,
                                         std::size_t period,
                                         std::size_t horizon);

// Linear forecaster over a moving-average trend / residual decomposition:
//   y = W_t * MA(x) + b_t + W_s * (x - MA(x)) + b_s
// Inputs are z-scored with the training mean/std before the heads and the
// output is mapped back to load units.
struct DLinearModel {
  int kernel_size = 25;
  bool individual = false;  // univariate: one shared head either way
  std::size_t input_len = 0;
  std::size_t output_len = 0;
  double scale_mean = 0.0;
  double scale_std = 1.0;
  Eigen::MatrixXd trend_weights;    // output_len x input_len
  Eigen::VectorXd trend_bias;       // output_len
  Eigen::MatrixXd seasonal_weights; // output_len x input_len
  Eigen::VectorXd seasonal_bias;    // output_len

  static DLinearModel Init(std::size_t input_len, std::size_t output_len,
                           int kernel_size);

  std::vector<double> Predict(std::span<const double> x) const;

  void Save(const std::filesystem::path& path) const;
  static DLinearModel Load(const std::filesystem::path& path);
};

struct DLinearConfig {
  int kernel_size = 25;
  bool individual = false;
  std::size_t batch_size = 32;
  double learning_rate = 0.001;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;  // epochs without validation MAE improvement
  std::uint64_t seed = 0;
  bool shuffle = true;
  // Fixed normalization; when unset (std <= 0) it is estimated from the
  // training windows.
  double scale_mean = 0.0;
  double scale_std = 0.0;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // normalized-scale MSE after the epoch
  double val_mae = 0.0;     // load units; train MAE when no validation set
};

struct DLinearFit {
  DLinearModel model;   // best-on-validation weights
  std::vector<EpochStats> curve;
  std::size_t best_epoch = 0;
};

// Mini-batch gradient descent on normalized-scale MSE with seeded shuffling
// and early stopping. Throws kEmptyTrainingSet.
DLinearFit FitDLinear(std::span<const ForecastInstance> train,
                      std::span<const ForecastInstance> val,
                      const DLinearConfig& cfg);

struct DLinearGradients {
  Eigen::MatrixXd trend_weights;
  Eigen::VectorXd trend_bias;
  Eigen::MatrixXd seasonal_weights;
  Eigen::VectorXd seasonal_bias;
};

// Normalized-scale mean squared error over the batch and horizon.
double DLinearLoss(const DLinearModel& m, std::span<const ForecastInstance> batch);
DLinearGradients DLinearLossGradients(const DLinearModel& m,
                                      std::span<const ForecastInstance> batch);

}  // namespace loadlm
