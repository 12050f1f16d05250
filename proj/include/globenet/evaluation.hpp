#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "globenet/data.hpp"
#include "globenet/network.hpp"
#include "globenet/training.hpp"

namespace globenet {

/// Mean Earth radius used for every kilometre conversion.
inline constexpr double kEarthRadiusKm = 6371.0;

/// sqrt(mean over samples of the squared Euclidean distance between (N,2) rows).
double rmse(const Tensor& pred, const Tensor& truth);

/// Great-circle distance between two (lat, lon) points in degrees.
double haversine_km(Point a, Point b);

/// Mean great-circle error of normalized predictions after denormalizing both sides.
double km_error(const Tensor& pred_n, const Tensor& truth_n, const GeoDomain& domain = {});

struct MetricsRow {
  NetworkKind model = NetworkKind::Simple;
  ActivationKind conv_activation = ActivationKind::ReLU;
  ActivationKind fc_activation = ActivationKind::Sigmoid;
  std::size_t epochs = 0;
  double train_rmse = 0.0;
  double test_rmse = 0.0;
  double test_km = 0.0;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// Header `model,conv_act,fc_act,epochs,train_rmse,test_rmse,test_km,seed,wall_s`;
/// wall_s is written as 0 unless `with_timing`, so reruns stay byte-identical.
std::string metrics_csv(const std::vector<MetricsRow>& rows, bool with_timing = false);

/// RMSE and km error of `net` on `ds`. Predictions are clamped into [0,1]
/// before the km conversion so Linear-output models can be scored.
struct Evaluation {
  double rmse = 0.0;
  double km = 0.0;
};
Evaluation evaluate(const Network& net, const Dataset& ds);

struct GridOptions {
  double split_ratio = 0.9;
  std::vector<std::size_t> simple_filters = NetworkSpec::default_stage_filters(NetworkKind::Simple);
  std::vector<std::size_t> complex_filters = NetworkSpec::default_stage_filters(NetworkKind::Complex);
  std::vector<std::size_t> fc_sizes{512, 256, 64};
  std::function<void(const MetricsRow&)> on_row;
};

/// Spec for one grid cell: defaults plus the chosen activation pair.
NetworkSpec grid_cell_spec(NetworkKind kind, ActivationKind conv, ActivationKind fc, InputShape input,
                           const GridOptions& options = {});

/// All 12 {Simple, Complex} x {ReLU, LeakyReLU, ELU} x {Sigmoid, Tanh} cells
/// trained on one shared split, in that canonical order.
std::vector<MetricsRow> run_grid(const Dataset& ds, const TrainConfig& base, const GridOptions& options = {});

}  // namespace globenet
