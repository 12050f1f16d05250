#include "globenet/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <ostream>

#include "globenet/random.hpp"

namespace globenet {

namespace {

void check_pair(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("prediction " + pred.shape().to_string() + " and target " + target.shape().to_string() +
                     " differ in shape");
  }
}

}  // namespace

double mse_loss(const Tensor& pred, const Tensor& target) {
  check_pair(pred, target);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.size());
}

Tensor mse_loss_gradient(const Tensor& pred, const Tensor& target) {
  check_pair(pred, target);
  Tensor g(pred.shape());
  const double scale = 2.0 / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) g[i] = scale * (pred[i] - target[i]);
  return g;
}

BackpropResult backprop(const Network& net, const Tensor& batch, const Tensor& targets) {
  ForwardTrace trace;
  const Tensor pred = net.forward(batch, trace);
  BackpropResult r;
  r.loss = mse_loss(pred, targets);
  r.grads = net.backward(trace, mse_loss_gradient(pred, targets));
  return r;
}

// ---------------------------------------------------------------------------
// Adam

AdamState::AdamState(const Network& net, AdamConfig cfg) : config(cfg) {
  for (const Tensor* p : net.parameters()) {
    m.emplace_back(p->shape());
    v.emplace_back(p->shape());
  }
}

void adam_step(AdamState& state, const std::vector<Tensor*>& params, const Gradients& grads) {
  if (params.size() != grads.values.size() || params.size() != state.m.size()) {
    throw ShapeError("adam_step: parameter, gradient and state lists are not aligned");
  }
  const AdamConfig& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(c.beta1, t);
  const double correct2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& theta = *params[k];
    const Tensor& g = grads.values[k];
    if (g.shape() != theta.shape() || state.m[k].shape() != theta.shape()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + grads.names.at(k));
    }
    double* th = theta.mutable_data();
    double* m = state.m[k].mutable_data();
    double* v = state.v[k].mutable_data();
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correct1;
      const double v_hat = v[i] / correct2;
      th[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
    }
  }
}

void adam_step(AdamState& state, Network& net, const Gradients& grads) {
  adam_step(state, net.mutable_parameters(), grads);
}

// ---------------------------------------------------------------------------
// Splitting

std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double ratio, std::uint64_t seed, bool by_storm) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ValueError("split ratio must lie in (0, 1)");
  const std::size_t n = ds.size();
  if (n < 2) throw ValueError("dataset too small to split: " + std::to_string(n) + " samples");
  Rng rng(seed);
  const double want = ratio * static_cast<double>(n);

  std::vector<std::size_t> train_idx, test_idx;
  if (!by_storm) {
    const auto n_train = static_cast<std::size_t>(std::floor(want + 1e-9));
    if (n_train == 0 || n_train == n) {
      throw ValueError("split ratio leaves one side empty for " + std::to_string(n) + " samples");
    }
    const std::vector<std::size_t> order = shuffled_indices(n, rng);
    train_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    test_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  } else {
    // Storms in order of first appearance, then shuffled.
    std::vector<std::string> storms;
    std::map<std::string, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < n; ++i) {
      auto& list = members[ds.samples[i].storm_id];
      if (list.empty()) storms.push_back(ds.samples[i].storm_id);
      list.push_back(i);
    }
    if (storms.size() < 2) throw ValueError("by-storm split needs at least two storms");
    shuffle(storms, rng);

    // Subset-sum over storm sizes; reach[k][s]: sum s achievable from the first k storms.
    const std::size_t k_max = storms.size();
    std::vector<std::vector<char>> reach(k_max + 1, std::vector<char>(n + 1, 0));
    reach[0][0] = 1;
    for (std::size_t k = 0; k < k_max; ++k) {
      const std::size_t size = members[storms[k]].size();
      for (std::size_t s = 0; s <= n; ++s) {
        if (!reach[k][s]) continue;
        reach[k + 1][s] = 1;
        if (s + size <= n) reach[k + 1][s + size] = 1;
      }
    }
    std::size_t best = 0;
    for (std::size_t s = 1; s < n; ++s) {
      if (reach[k_max][s] && static_cast<double>(s) <= want + 1e-9) best = s;
    }
    if (best == 0) {
      for (std::size_t s = 1; s < n && best == 0; ++s) {
        if (reach[k_max][s]) best = s;
      }
    }
    if (best == 0) throw ValueError("no whole-storm split leaves both sides non-empty");

    std::vector<char> in_train(k_max, 0);
    std::size_t s = best;
    for (std::size_t k = k_max; k-- > 0;) {
      if (reach[k][s]) continue;  // reachable without storm k
      in_train[k] = 1;
      s -= members[storms[k]].size();
    }
    for (std::size_t k = 0; k < k_max; ++k) {
      auto& dst = in_train[k] ? train_idx : test_idx;
      const auto& m = members[storms[k]];
      dst.insert(dst.end(), m.begin(), m.end());
    }
  }
  return {ds.subset(train_idx), ds.subset(test_idx)};
}

// ---------------------------------------------------------------------------
// Training loop

void TrainConfig::validate() const {
  if (epochs < 1) throw ValueError("epochs must be >= 1");
  if (batch_size < 1) throw ValueError("batch size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ValueError("learning rate must be >= 0");
}

std::vector<EpochStats> train(Network& net, const Dataset& ds, const TrainConfig& cfg,
                              const EpochCallback& on_epoch) {
  cfg.validate();
  if (ds.empty()) throw ValueError("cannot train on an empty dataset");
  const InputShape in = net.input_shape();
  if (ds.height != in[0] || ds.width != in[1] || ds.channels != in[2]) {
    throw ShapeError("dataset images do not match the network input");
  }

  AdamState adam(net, AdamConfig{cfg.learning_rate});
  std::vector<EpochStats> history;
  const std::size_t n = ds.size();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (cfg.shuffle) {
      Rng rng(cfg.seed ^ epoch);
      shuffle(order, rng);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - start);
      const auto [images, targets] = make_batch(ds, std::span(order).subspan(start, count));
      const BackpropResult r = backprop(net, images, targets);
      adam_step(adam, net, r.grads);
      loss_sum += r.loss * static_cast<double>(count);
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(n);
    // mean over components = mean squared distance / 2
    stats.train_rmse = std::sqrt(2.0 * stats.train_loss);
    history.push_back(stats);
    if (on_epoch) on_epoch(stats);
  }
  return history;
}

std::string history_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,train_loss,train_rmse\n";
  char buf[96];
  for (const EpochStats& e : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", e.epoch, e.train_loss, e.train_rmse);
    out += buf;
  }
  return out;
}

Tensor predict_dataset(const Network& net, const Dataset& ds, std::size_t batch_size) {
  if (ds.empty()) throw ValueError("cannot predict on an empty dataset");
  Tensor out(Shape{ds.size(), 2});
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, ds.size() - start);
    idx.resize(count);
    for (std::size_t i = 0; i < count; ++i) idx[i] = start + i;
    const Tensor pred = net.predict(make_batch(ds, idx).first);
    std::copy(pred.data(), pred.data() + pred.size(), out.mutable_data() + 2 * start);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient check

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

GradCheckReport grad_check(const Network& net, const Tensor& batch, const Tensor& targets,
                           const GradCheckOptions& options) {
  return grad_check_against(net, batch, targets, backprop(net, batch, targets).grads, options);
}

GradCheckReport grad_check_against(const Network& net, const Tensor& batch, const Tensor& targets,
                                   const Gradients& analytic, const GradCheckOptions& options) {
  Network probe = net;
  std::vector<Tensor*> params = probe.mutable_parameters();
  if (analytic.values.size() != params.size()) throw ShapeError("gradient list does not match network");

  ForwardTrace trace;
  probe.forward(batch, trace);
  const std::vector<std::uint32_t> base_regime = probe.regime_signature(trace);

  // Loss at the current parameters; nullopt when the regime changed.
  auto loss_here = [&]() -> std::optional<double> {
    if (!options.skip_nonsmooth) return mse_loss(probe.predict(batch), targets);
    const Tensor pred = probe.forward(batch, trace);
    if (probe.regime_signature(trace) != base_regime) return std::nullopt;
    return mse_loss(pred, targets);
  };

  Rng rng(options.seed);
  GradCheckReport report;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& theta = *params[k];
    const Tensor& g = analytic.values[k];
    if (g.shape() != theta.shape()) throw ShapeError("gradient shape mismatch for " + analytic.names[k]);

    std::vector<std::size_t> coords(theta.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (options.max_coords_per_param > 0 && coords.size() > options.max_coords_per_param) {
      shuffle(coords, rng);
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    ParamCheck pc{probe.parameter_names()[k], 0.0, 0, 0};
    for (std::size_t i : coords) {
      const double saved = theta[i];
      theta[i] = saved + options.step;
      const auto plus = loss_here();
      theta[i] = saved - options.step;
      const auto minus = loss_here();
      theta[i] = saved;
      if (!plus || !minus) {
        ++pc.skipped;
        continue;
      }
      const double numeric = (*plus - *minus) / (2.0 * options.step);
      pc.max_rel_error = std::max(pc.max_rel_error, relative_error(g[i], numeric));
      ++pc.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, pc.max_rel_error);
    report.checked += pc.checked;
    report.skipped += pc.skipped;
    report.params.push_back(std::move(pc));
  }
  report.passed = report.checked > 0 && report.max_rel_error < options.tolerance;
  return report;
}

void print_report(std::ostream& os, const GradCheckReport& report) {
  const auto flags = os.flags();
  os << std::scientific << std::setprecision(3);
  for (const ParamCheck& p : report.params) {
    os << "  " << std::left << std::setw(28) << p.name << std::right << " max_rel_err " << p.max_rel_error
       << "  checked " << p.checked << "  skipped " << p.skipped << '\n';
  }
  os << "max relative error " << report.max_rel_error << " over " << report.checked << " coordinates ("
     << report.skipped << " skipped as nonsmooth): " << (report.passed ? "PASS" : "FAIL") << '\n';
  os.flags(flags);
}


Network build_tiny_network(std::uint64_t seed, Activation conv_act, Activation fc_act) {
  std::vector<LayerSpec> layers{ConvLayerSpec{3, 3, 1, Padding::Same}, ActivationLayerSpec{conv_act},
                                PoolLayerSpec{2, 2, Padding::Same}, FlattenLayerSpec{}};
  for (std::size_t units : {4, 3, 2}) {
    layers.push_back(DenseLayerSpec{units});
    layers.push_back(ActivationLayerSpec{fc_act});
  }
  layers.push_back(DenseLayerSpec{2});
  layers.push_back(ActivationLayerSpec{Activation::sigmoid()});
  return Network::from_layers({6, 6, 2}, std::move(layers), seed);
}

std::pair<Tensor, Tensor> random_batch(const Network& net, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const InputShape in = net.input_shape();
  Tensor x(Shape{n, in[0], in[1], in[2]});
  for (double& v : x.mutable_values()) v = uniform01(rng);
  Tensor t(Shape{n, 2});
  for (double& v : t.mutable_values()) v = uniform(rng, 0.1, 0.9);
  return {std::move(x), std::move(t)};
}

}  // namespace globenet
