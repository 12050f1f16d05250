// Acceptance run: one PASS/FAIL line per criterion, INFO lines for context.
// Exits nonzero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "globenet/cli.hpp"
#include "globenet/data.hpp"
#include "globenet/evaluation.hpp"
#include "globenet/io.hpp"
#include "globenet/layers.hpp"
#include "globenet/network.hpp"
#include "globenet/training.hpp"
#include "grad_probes.hpp"
#include "oracles.hpp"

using namespace globenet;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s  %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void info(const std::string& line) {
  std::printf("INFO  %s\n", line.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// ---------------------------------------------------------------------------

struct GradCell {
  std::string name;
  GradCheckReport report;
};

std::vector<GradCell> gradient_cells(double step) {
  GradCheckOptions opt;
  opt.step = step;
  std::vector<GradCell> cells;
  for (std::uint64_t seed : {0, 1}) {
    Network net = build_tiny_network(seed);
    auto [x, t] = random_batch(net, 1, seed + 1);
    cells.push_back({fmt("tiny seed %llu", static_cast<unsigned long long>(seed)), grad_check(net, x, t, opt)});
  }
  for (const probes::Probe& p : probes::kProbes)
    for (const Activation& a : probes::kAllActivations) {
      Network net = Network::from_layers(p.input, p.layers(a), 0);
      auto [x, t] = random_batch(net, 1, 1);
      cells.push_back({fmt("%s/%s", p.name, std::string(activation_name(a.kind)).c_str()), grad_check(net, x, t, opt)});
    }
  for (NetworkKind kind : {NetworkKind::Simple, NetworkKind::Complex})
    for (const Activation& conv : {Activation::relu(), Activation::leaky_relu(), Activation::elu()})
      for (const Activation& fc : {Activation::sigmoid(), Activation::tanh()}) {
        Network net = probes::tiny_topology(kind, conv, fc, 0);
        auto [x, t] = random_batch(net, 2, 1);
        cells.push_back({fmt("%s %s/%s", std::string(network_kind_name(kind)).c_str(),
                             std::string(activation_name(conv.kind)).c_str(),
                             std::string(activation_name(fc.kind)).c_str()),
                         grad_check(net, x, t, opt)});
      }
  return cells;
}

void gradient_suite() {
  Stopwatch sw;
  const auto cells = gradient_cells(1e-3);
  const double secs = sw.seconds();
  double worst = 0;
  std::size_t checked = 0, skipped = 0;
  std::string failed;
  for (const GradCell& c : cells) {
    worst = std::max(worst, c.report.max_rel_error);
    checked += c.report.checked;
    skipped += c.report.skipped;
    if (!c.report.passed || c.report.checked == 0) failed += fmt(" [%s %.3g]", c.name.c_str(), c.report.max_rel_error);
  }
  verdict(failed.empty() && secs < 120.0, "gradient suite (h=1e-3, rel err < 1e-4, < 2 min)",
          fmt("%zu cells, %zu coords checked, %zu skipped as nonsmooth, max rel err %.3g, %.1fs%s%s", cells.size(),
              checked, skipped, worst, secs, failed.empty() ? "" : "; failing:", failed.c_str()));

  const auto fine = gradient_cells(1e-4);
  double fine_worst = 0;
  std::size_t fine_failed = 0;
  for (const GradCell& c : fine) {
    fine_worst = std::max(fine_worst, c.report.max_rel_error);
    if (!c.report.passed) ++fine_failed;
  }
  info(fmt("same cells at h=1e-4: max rel err %.3g, %zu of %zu cells above 1e-4", fine_worst, fine_failed,
           fine.size()));
}

// ---------------------------------------------------------------------------

ConvParams<double> random_conv(std::size_t k, std::size_t cin, std::size_t cout, std::mt19937_64& rng) {
  return {oracle::random_tensor(Shape{k, k, cin, cout}, rng), oracle::random_tensor(Shape{cout}, rng), 1,
          Padding::Same};
}

void oracle_equivalence() {
  Stopwatch sw;
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> ext(1, 12), ch(1, 4), ks(0, 2), st(1, 3), win(1, 3);
  double conv_err = 0, pool_err = 0, inc_err = 0;
  int conv_cases = 0, pool_cases = 0, inc_cases = 0;
  while (conv_cases < 100) {
    const std::size_t N = ch(rng), H = ext(rng), W = ext(rng), C = ch(rng), CO = ch(rng);
    const std::size_t K = 1 + 2 * ks(rng), S = st(rng);
    const bool same = rng() % 2 == 0;
    if (!same && (H < K || W < K)) continue;
    Tensor x = oracle::random_tensor(Shape{N, H, W, C}, rng);
    Tensor k = oracle::random_tensor(Shape{K, K, C, CO}, rng);
    Tensor b = oracle::random_tensor(Shape{CO}, rng);
    Tensor got = conv2d(x, ConvParams<double>{k, b, S, same ? Padding::Same : Padding::Valid});
    conv_err = std::max(conv_err, max_abs_diff(got, oracle::conv(x, k, b, long(S), same)));
    ++conv_cases;
  }
  while (pool_cases < 100) {
    const std::size_t N = ch(rng), H = ext(rng), W = ext(rng), C = ch(rng), K = win(rng), S = st(rng);
    const bool same = rng() % 2 == 0;
    if (!same && (H < K || W < K)) continue;
    Tensor x = oracle::random_tensor(Shape{N, H, W, C}, rng);
    Tensor got = maxpool2d(x, PoolParams{K, S, same ? Padding::Same : Padding::Valid});
    pool_err = std::max(pool_err, max_abs_diff(got, oracle::maxpool(x, long(K), long(S), same)));
    ++pool_cases;
  }
  std::uniform_int_distribution<std::size_t> width(1, 4), side(1, 8);
  while (inc_cases < 100) {
    const std::size_t C = width(rng), H = side(rng), W = side(rng);
    InceptionParams<double> q;
    q.branch1 = random_conv(1, C, width(rng), rng);
    q.branch2_reduce = random_conv(1, C, width(rng), rng);
    q.branch2 = random_conv(3, q.branch2_reduce.out_channels(), width(rng), rng);
    q.branch3_reduce = random_conv(1, C, width(rng), rng);
    q.branch3 = random_conv(5, q.branch3_reduce.out_channels(), width(rng), rng);
    q.branch4 = random_conv(1, C, width(rng), rng);
    q.activation = Activation::relu();
    Tensor x = oracle::random_tensor(Shape{1 + rng() % 2, H, W, C}, rng);
    auto branch = [](const Tensor& in, const ConvParams<double>& c) {
      return oracle::relu(oracle::conv(in, c.kernels, c.bias, 1, true));
    };
    Tensor want = oracle::concat({branch(x, q.branch1), branch(branch(x, q.branch2_reduce), q.branch2),
                                  branch(branch(x, q.branch3_reduce), q.branch3),
                                  branch(oracle::maxpool(x, 3, 1, true), q.branch4)});
    inc_err = std::max(inc_err, max_abs_diff(inception_forward(x, q), want));
    ++inc_cases;
  }
  const double secs = sw.seconds();
  verdict(conv_err <= 1e-12 && pool_err <= 1e-12 && inc_err <= 1e-12 && secs < 60.0,
          "oracle equivalence (<= 1e-12 on >= 100 cases each, < 1 min)",
          fmt("conv %d cases max %.3g, maxpool %d cases max %.3g, inception %d cases max %.3g, %.1fs", conv_cases,
              conv_err, pool_cases, pool_err, inc_cases, inc_err, secs));
}

// ---------------------------------------------------------------------------

Dataset synth(std::size_t count, std::uint64_t seed, double noise = 0.05) {
  SynthConfig cfg;
  cfg.count = count;
  cfg.seed = seed;
  cfg.noise_level = noise;
  return synth_generate(cfg);
}

void end_to_end() {
  Stopwatch sw;
  const Dataset train_set = synth(2000, 0), test_set = synth(200, 1);
  Network net = build_network(NetworkSpec::simple({64, 64, 4}), 0);
  const auto history = train(net, train_set, TrainConfig{30, 32, 1e-3, 0, true}, [&](const EpochStats& e) {
    if (e.epoch % 5 == 0 || e.epoch == 1) info(fmt("  simple epoch %zu train rmse %.4f (%.0fs)", e.epoch, e.train_rmse, sw.seconds()));
  });
  const Evaluation ev = evaluate(net, test_set);
  const double secs = sw.seconds();
  const double baseline = std::sqrt(1.0 / 6.0);
  verdict(ev.rmse <= 0.08, "end-to-end synthetic learning (Simple CNN, test RMSE <= 0.08)",
          fmt("test RMSE %.4f (%.1f km) vs constant-centre baseline %.4f; final train RMSE %.4f; %.0fs", ev.rmse, ev.km,
              baseline, history.back().train_rmse, secs));
  if (secs > 15 * 60) info(fmt("end-to-end run took %.0fs, above the 15 min target", secs));
}

void complex_vs_simple() {
  Stopwatch sw;
  const Dataset ds = synth(500, 2);
  const auto [train_set, test_set] = split_dataset(ds, 0.9, 0);
  const TrainConfig cfg{10, 32, 1e-3, 0, true};
  double rmse_of[2];
  for (NetworkKind kind : {NetworkKind::Simple, NetworkKind::Complex}) {
    Network net = build_network(grid_cell_spec(kind, ActivationKind::ELU, ActivationKind::Tanh, {64, 64, 4}), 0);
    train(net, train_set, cfg);
    rmse_of[kind == NetworkKind::Complex] = evaluate(net, test_set).rmse;
  }
  const double ratio = rmse_of[1] / rmse_of[0];
  info(fmt("complex/simple RMSE ratio %.3f is %s the 1.1x ordering target", ratio, ratio <= 1.1 ? "within" : "above"));
  verdict(ratio <= 2.0, "complex vs simple (ELU/Tanh, 500 samples, 10 epochs, fail only above 2x)",
          fmt("simple %.4f, complex %.4f, ratio %.3f, %.0fs", rmse_of[0], rmse_of[1], ratio, sw.seconds()));
}

// ---------------------------------------------------------------------------

Tensor rows(std::vector<double> v) {
  const std::size_t n = v.size() / 2;
  return Tensor(Shape{n, 2}, std::move(v));
}

void metric_examples() {
  const double r0 = rmse(rows({0.2, 0.7}), rows({0.2, 0.7}));
  const double r1 = rmse(rows({0.1, 0.1}), rows({0.4, 0.5}));
  const double r2 = rmse(rows({0.3, 0.3, 0.6, 0.6}), rows({0.2, 0.3, 0.6, 0.7}));
  verdict(std::abs(r0) <= 1e-12 && std::abs(r1 - 0.5) <= 1e-12 && std::abs(r2 - 0.1) <= 1e-12,
          "rmse examples (0, 0.5, 0.1 to 1e-12)", fmt("%.17g, %.17g, %.17g", r0, r1, r2));

  const double h1 = haversine_km({0, 0}, {0, 1}), h90 = haversine_km({0, 0}, {0, 90});
  verdict(std::abs(h1 - 111.1949) <= 1e-3 && std::abs(h90 - 10007.543) <= 1e-2,
          "haversine ((0,0)->(0,1) = 111.1949 +- 0.001, (0,0)->(0,90) = 10007.543 +- 0.01)",
          fmt("%.6f km, %.6f km", h1, h90));
}

void grid_protocol() {
  Stopwatch sw;
  const Dataset ds = synth(200, 3);
  const TrainConfig cfg{3, 32, 1e-3, 0, true};
  const auto a = run_grid(ds, cfg), b = run_grid(ds, cfg);
  bool covers = a.size() == 12;
  std::size_t i = 0;
  double worst = 0;
  for (NetworkKind m : {NetworkKind::Simple, NetworkKind::Complex})
    for (ActivationKind c : {ActivationKind::ReLU, ActivationKind::LeakyReLU, ActivationKind::ELU})
      for (ActivationKind f : {ActivationKind::Sigmoid, ActivationKind::Tanh}) {
        if (i < a.size()) {
          covers = covers && a[i].model == m && a[i].conv_activation == c && a[i].fc_activation == f;
          worst = std::max(worst, a[i].test_rmse);
        }
        ++i;
      }
  const bool identical = metrics_csv(a) == metrics_csv(b);
  verdict(covers && identical, "grid protocol (12 rows, all combinations, byte-identical rerun)",
          fmt("%zu rows, %s, CSV %s, %.0fs", a.size(), covers ? "canonical order" : "combinations wrong",
              identical ? "identical" : "differs", sw.seconds()));
  info(fmt("grid at 3 epochs: worst test RMSE %.4f (constant-centre baseline %.4f)", worst, std::sqrt(1.0 / 6.0)));
}

// ---------------------------------------------------------------------------

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "globenet");
  std::vector<const char*> argv;
  for (const auto& s : args) argv.push_back(s.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string dataset_bytes(const fs::path& dir) {
  std::string all = io::read_file(dir / "manifest.csv");
  for (const auto& e : fs::directory_iterator(dir / "images")) all += e.path().filename().string() + io::read_file(e.path());
  return all;
}

void determinism_and_formats() {
  Stopwatch sw;
  const fs::path root = fs::temp_directory_path() / "globenet_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  auto p = [&](const char* name) { return (root / name).string(); };

  bool ok = true;
  for (const char* d : {"d1", "d2"}) {
    ok &= cli({"synth", "--out", p(d), "--count", "48", "--size", "32", "--seed", "5"}).code == 0;
  }
  const bool synth_same = ok && dataset_bytes(root / "d1") == dataset_bytes(root / "d2");

  bool train_ok = true;
  for (const char* m : {"m1", "m2"}) {
    const std::string model = p(m), hist = model + ".csv";
    train_ok &= cli({"train", "--data", p("d1"), "--model", "complex", "--conv-act", "elu", "--fc-act", "tanh",
                     "--epochs", "2", "--batch", "16", "--lr", "1e-3", "--seed", "4", "--out", model, "--history",
                     hist})
                    .code == 0;
  }
  const bool train_same = train_ok && io::read_file(p("m1")) == io::read_file(p("m2")) &&
                          io::read_file(p("m1") + std::string(".csv")) == io::read_file(p("m2") + std::string(".csv"));

  bool eval_ok = true;
  for (const char* r : {"r1.csv", "r2.csv"}) {
    eval_ok &= cli({"eval", "--model", p("m1"), "--data", p("d2"), "--report", p(r)}).code == 0;
  }
  const bool eval_same = eval_ok && io::read_file(p("r1.csv")) == io::read_file(p("r2.csv"));

  // GNI: f32 storage bounds the relative error by 2^-24.
  std::mt19937_64 rng(6);
  double gni_rel = 0;
  for (int i = 0; i < 50; ++i) {
    Tensor img = oracle::random_tensor(Shape{1 + rng() % 16, 1 + rng() % 16, 1 + rng() % 4}, rng, 0, 1);
    Tensor back = decode_image(encode_image(img));
    for (std::size_t j = 0; j < img.size(); ++j)
      if (img[j] != 0) gni_rel = std::max(gni_rel, std::abs(back[j] - img[j]) / std::abs(img[j]));
  }

  // GNM1: the CLI-trained model holds arbitrary doubles before saving; compare a
  // fresh in-memory training run against its decoded copy.
  const Dataset small = load_dataset(root / "d1");
  Network net = build_network(grid_cell_spec(NetworkKind::Simple, ActivationKind::ReLU, ActivationKind::Sigmoid,
                                             {32, 32, 4}),
                              7);
  train(net, small, TrainConfig{2, 16, 1e-3, 7, true});
  const LoadedModel loaded = decode_model(encode_model(net));
  double gnm_rel = 0;
  auto pa = net.parameters(), pb = loaded.network.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t j = 0; j < pa[i]->size(); ++j) {
      const double a = (*pa[i])[j], b = (*pb[i])[j];
      if (a != 0) gnm_rel = std::max(gnm_rel, std::abs(a - b) / std::abs(a));
    }
  const double bound = std::ldexp(1.0, -24);
  fs::remove_all(root);

  verdict(synth_same && train_same && eval_same && gni_rel <= bound && gnm_rel <= bound,
          "determinism and formats (byte-identical reruns, 32-bit round trips)",
          fmt("synth %s, train %s, eval %s, GNI max rel err %.3g, GNM1 max rel err %.3g (bound %.3g), %.0fs",
              synth_same ? "identical" : "DIFFERS", train_same ? "identical" : "DIFFERS",
              eval_same ? "identical" : "DIFFERS", gni_rel, gnm_rel, bound, sw.seconds()));
}

void adam_first_step() {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> exponent(-6, 6);
  const double lr = 1e-3;
  double lo = INFINITY, hi = 0;
  for (int i = 0; i < 1000; ++i) {
    const double g = (rng() % 2 ? 1 : -1) * std::pow(10.0, exponent(rng));
    Tensor theta(Shape{1}, {0.25});
    AdamState s;
    s.config.learning_rate = lr;
    s.m = {Tensor(Shape{1})};
    s.v = {Tensor(Shape{1})};
    adam_step(s, {&theta}, Gradients{{"p"}, {Tensor(Shape{1}, {g})}});
    const double step = std::abs(theta[0] - 0.25) / lr;
    lo = std::min(lo, step);
    hi = std::max(hi, step);
  }
  verdict(lo >= 0.99 && hi <= 1.01, "Adam first step (|step| in [0.99, 1.01] lr)",
          fmt("1000 constant gradients with |g| in [1e-6, 1e6]: |step|/lr in [%.6f, %.6f]", lo, hi));
}

}  // namespace

int main() {
  Stopwatch total;
  gradient_suite();
  oracle_equivalence();
  metric_examples();
  adam_first_step();
  determinism_and_formats();
  grid_protocol();
  complex_vs_simple();
  end_to_end();
  info(fmt("total %.0fs, %d criteria failed", total.seconds(), failures));
  return failures == 0 ? 0 : 1;
}
