#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "globenet/data.hpp"
#include "globenet/network.hpp"

namespace globenet {

/// Mean over all 2N components of (pred - target)^2.
double mse_loss(const Tensor& pred, const Tensor& target);
/// d mse_loss / d pred.
Tensor mse_loss_gradient(const Tensor& pred, const Tensor& target);

struct BackpropResult {
  double loss = 0.0;
  Gradients grads;
};

/// Loss and exact reverse-mode gradients of the MSE objective.
BackpropResult backprop(const Network& net, const Tensor& batch, const Tensor& targets);

struct AdamConfig {
  double learning_rate = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment accumulators mirroring a parameter list.
struct AdamState {
  AdamConfig config;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(const Network& net, AdamConfig cfg);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(AdamState& state, const std::vector<Tensor*>& params, const Gradients& grads);
void adam_step(AdamState& state, Network& net, const Gradients& grads);

/// Deterministic partition. By-image: train takes floor(ratio*N) shuffled
/// samples. By-storm: whole storms, train size the largest achievable value
/// not above ratio*N (or the smallest above it when nothing fits).
std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio, std::uint64_t seed,
                                          bool by_storm = false);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double learning_rate = 1e-5;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
};

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // sample-weighted mean batch MSE
  double train_rmse = 0.0;  // sqrt(mean squared distance), as in rmse()
};

using EpochCallback = std::function<void(const EpochStats&)>;

/// Mini-batch Adam over `ds`; mutates `net` and returns one entry per epoch.
std::vector<EpochStats> train(Network& net, const Dataset& ds, const TrainConfig& cfg,
                              const EpochCallback& on_epoch = {});

/// `epoch,train_loss,train_rmse` with 9 significant digits.
std::string history_csv(const std::vector<EpochStats>& history);

/// Predictions for every sample, evaluated in chunks of `batch_size`.
Tensor predict_dataset(const Network& net, const Dataset& ds, std::size_t batch_size = 64);

// ---------------------------------------------------------------------------
// Gradient verification

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  /// Exclude coordinates whose +-step probe moves a piecewise activation
  /// across 0 or switches a max-pool argmax; they are counted as skipped.
  bool skip_nonsmooth = true;
  /// 0 checks every coordinate; otherwise at most this many per parameter,
  /// drawn deterministically from `seed`.
  std::size_t max_coords_per_param = 0;
  std::uint64_t seed = 0;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool passed = false;
};

/// |a - b| / max(|a|, |b|, 1e-8)
double relative_error(double a, double b);

/// Compares backprop gradients with central differences.
GradCheckReport grad_check(const Network& net, const Tensor& batch, const Tensor& targets,
                           const GradCheckOptions& options = {});
/// Same comparison against a caller-supplied gradient.
GradCheckReport grad_check_against(const Network& net, const Tensor& batch, const Tensor& targets,
                                   const Gradients& analytic, const GradCheckOptions& options = {});

void print_report(std::ostream& os, const GradCheckReport& report);


/// Small fixture network: 6x6x2 input, conv3x3(3) -> conv_act -> maxpool(2,2)
/// -> flatten -> dense 4/3/2 with fc_act -> dense(2) -> sigmoid.
Network build_tiny_network(std::uint64_t seed, Activation conv_act = Activation::elu(),
                           Activation fc_act = Activation::tanh());

/// Inputs uniform in [0,1) for `net` plus (N,2) targets uniform in [0.1,0.9).
std::pair<Tensor, Tensor> random_batch(const Network& net, std::size_t n, std::uint64_t seed);

}  // namespace globenet
