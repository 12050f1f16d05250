#include "globenet/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace globenet {

double rmse(const Tensor& pred, const Tensor& truth) {
  if (pred.shape() != truth.shape()) {
    throw ShapeError("rmse shape mismatch: " + pred.shape().to_string() + " vs " + truth.shape().to_string());
  }
  if (pred.rank() != 2 || pred.dim(1) != 2) throw ShapeError("rmse expects (N,2) tensors");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.dim(0)));
}

double haversine_km(Point a, Point b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double dlat = (b[0] - a[0]) * rad;
  const double dlon = (b[1] - a[1]) * rad;
  const double s = std::sin(dlat / 2.0);
  const double t = std::sin(dlon / 2.0);
  const double h = s * s + std::cos(a[0] * rad) * std::cos(b[0] * rad) * t * t;
  return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double km_error(const Tensor& pred_n, const Tensor& truth_n, const GeoDomain& domain) {
  if (pred_n.shape() != truth_n.shape() || pred_n.rank() != 2 || pred_n.dim(1) != 2) {
    throw ShapeError("km_error expects matching (N,2) tensors");
  }
  double sum = 0.0;
  const std::size_t n = pred_n.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = denormalize_coords(pred_n[2 * i], pred_n[2 * i + 1], domain);
    const Point t = denormalize_coords(truth_n[2 * i], truth_n[2 * i + 1], domain);
    sum += haversine_km(p, t);
  }
  return sum / static_cast<double>(n);
}

std::string metrics_csv(const std::vector<MetricsRow>& rows, bool with_timing) {
  std::string out = "model,conv_act,fc_act,epochs,train_rmse,test_rmse,test_km,seed,wall_s\n";
  char buf[256];
  for (const MetricsRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%s,%s,%zu,%.6g,%.6g,%.6g,%llu,%.3f\n",
                  std::string(network_kind_name(r.model)).c_str(),
                  std::string(activation_name(r.conv_activation)).c_str(),
                  std::string(activation_name(r.fc_activation)).c_str(), r.epochs, r.train_rmse, r.test_rmse,
                  r.test_km, static_cast<unsigned long long>(r.seed), with_timing ? r.wall_seconds : 0.0);
    out += buf;
  }
  return out;
}

Evaluation evaluate(const Network& net, const Dataset& ds) {
  Tensor pred = predict_dataset(net, ds);
  const Tensor truth = targets_of(ds);
  Evaluation e;
  e.rmse = rmse(pred, truth);
  for (double& v : pred.mutable_values()) v = std::clamp(v, 0.0, 1.0);
  e.km = km_error(pred, truth, ds.domain);
  return e;
}

NetworkSpec grid_cell_spec(NetworkKind kind, ActivationKind conv, ActivationKind fc, InputShape input,
                           const GridOptions& options) {
  NetworkSpec spec = kind == NetworkKind::Simple ? NetworkSpec::simple(input) : NetworkSpec::complex(input);
  spec.stage_filters = kind == NetworkKind::Simple ? options.simple_filters : options.complex_filters;
  spec.fc_sizes = options.fc_sizes;
  spec.conv_activation = default_activation(conv);
  spec.fc_activation = default_activation(fc);
  return spec;
}

std::vector<MetricsRow> run_grid(const Dataset& ds, const TrainConfig& base, const GridOptions& options) {
  base.validate();
  const auto [train_set, test_set] = split_dataset(ds, options.split_ratio, base.seed);
  const InputShape input{ds.height, ds.width, ds.channels};

  std::vector<MetricsRow> rows;
  for (NetworkKind kind : {NetworkKind::Simple, NetworkKind::Complex}) {
    for (ActivationKind conv : {ActivationKind::ReLU, ActivationKind::LeakyReLU, ActivationKind::ELU}) {
      for (ActivationKind fc : {ActivationKind::Sigmoid, ActivationKind::Tanh}) {
        const auto start = std::chrono::steady_clock::now();
        Network net = build_network(grid_cell_spec(kind, conv, fc, input, options), base.seed);
        train(net, train_set, base);
        MetricsRow row;
        row.model = kind;
        row.conv_activation = conv;
        row.fc_activation = fc;
        row.epochs = base.epochs;
        row.seed = base.seed;
        row.train_rmse = evaluate(net, train_set).rmse;
        const Evaluation test = evaluate(net, test_set);
        row.test_rmse = test.rmse;
        row.test_km = test.km;
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (options.on_row) options.on_row(row);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

}  // namespace globenet
