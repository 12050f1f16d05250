#include "globenet/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iomanip>
#include <ostream>

#include "globenet/data.hpp"
#include "globenet/evaluation.hpp"
#include "globenet/io.hpp"
#include "globenet/network.hpp"
#include "globenet/training.hpp"

namespace globenet {

namespace {

const std::map<std::string, NetworkKind> kModels{{"simple", NetworkKind::Simple},
                                                 {"complex", NetworkKind::Complex}};
const std::map<std::string, ActivationKind> kConvActs{
    {"relu", ActivationKind::ReLU}, {"leaky", ActivationKind::LeakyReLU}, {"elu", ActivationKind::ELU}};
const std::map<std::string, ActivationKind> kFcActs{{"sigmoid", ActivationKind::Sigmoid},
                                                    {"tanh", ActivationKind::Tanh}};
const std::map<std::string, ActivationKind> kFinalActs{{"sigmoid", ActivationKind::Sigmoid},
                                                       {"linear", ActivationKind::Linear}};

struct SynthArgs {
  std::string out;
  std::size_t count = 64, size = 64, channels = 4;
  double noise = 0.05;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  std::string data, out, history;
  NetworkKind model = NetworkKind::Simple;
  ActivationKind conv_act = ActivationKind::ReLU;
  ActivationKind fc_act = ActivationKind::Sigmoid;
  ActivationKind final_act = ActivationKind::Sigmoid;
  std::size_t epochs = 30, batch = 32;
  double lr = 1e-5;
  std::uint64_t seed = 0;
  int equalize = 0;
};

struct EvalArgs {
  std::string model, data, report;
  int equalize = 0;
  bool timing = false;
};

struct GradcheckArgs {
  std::uint64_t seed = 0;
  double tol = 1e-4;
  std::string net = "tiny";
};

struct GridArgs {
  std::string data, out;
  std::size_t epochs = 30, batch = 32;
  double lr = 1e-5;
  std::uint64_t seed = 0;
  int equalize = 0;
  bool timing = false;
};

int do_synth(const SynthArgs& a, std::ostream& out) {
  SynthConfig cfg;
  cfg.count = a.count;
  cfg.height = cfg.width = a.size;
  cfg.channels = a.channels;
  cfg.seed = a.seed;
  cfg.noise_level = a.noise;
  const Dataset ds = synth_generate(cfg);
  write_dataset(a.out, ds);
  out << "wrote " << ds.size() << " samples (" << a.size << "x" << a.size << "x" << a.channels << ") to "
      << a.out << '\n';
  return 0;
}

int do_train(const TrainArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data, LoadOptions{{}, a.equalize});
  const InputShape input{ds.height, ds.width, ds.channels};
  NetworkSpec spec = a.model == NetworkKind::Simple ? NetworkSpec::simple(input) : NetworkSpec::complex(input);
  spec.conv_activation = default_activation(a.conv_act);
  spec.fc_activation = default_activation(a.fc_act);
  spec.final_activation = default_activation(a.final_act);
  TrainConfig cfg{a.epochs, a.batch, a.lr, a.seed, true};
  cfg.validate();
  Network net = build_network(spec, a.seed);

  out << "training " << network_kind_name(a.model) << " cnn (" << net.parameter_count() << " parameters) on "
      << ds.size() << " samples\n";
  const auto history = train(net, ds, cfg, [&out](const EpochStats& e) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "epoch %3zu  loss %.6g  rmse %.6g\n", e.epoch, e.train_loss, e.train_rmse);
    out << buf << std::flush;
  });

  ModelMetadata meta{cfg.epochs, cfg.seed, cfg.learning_rate, history.back().train_rmse};
  save_model(a.out, net, meta);
  if (!a.history.empty()) io::write_file_atomic(a.history, history_csv(history));
  out << "saved model to " << a.out << '\n';
  return 0;
}

int do_eval(const EvalArgs& a, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedModel model = load_model(a.model);
  const Dataset ds = load_dataset(a.data, LoadOptions{{}, a.equalize});
  const Evaluation e = evaluate(model.network, ds);

  MetricsRow row;
  if (const auto& spec = model.network.spec()) {
    row.model = spec->kind;
    row.conv_activation = spec->conv_activation.kind;
    row.fc_activation = spec->fc_activation.kind;
  }
  row.epochs = model.metadata.epochs;
  row.seed = model.metadata.seed;
  row.train_rmse = model.metadata.train_rmse.value_or(0.0);
  row.test_rmse = e.rmse;
  row.test_km = e.km;
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const std::string csv = metrics_csv({row}, a.timing);
  if (!a.report.empty()) io::write_file_atomic(a.report, csv);
  out << csv;
  return 0;
}

int do_gradcheck(const GradcheckArgs& a, std::ostream& out) {
  Network net = [&] {
    if (a.net == "tiny") return build_tiny_network(a.seed);
    NetworkSpec spec = a.net == "simple" ? NetworkSpec::simple({16, 16, 4}) : NetworkSpec::complex({16, 16, 4});
    spec.stage_filters = a.net == "simple" ? std::vector<std::size_t>{3, 4, 4, 5}
                                           : std::vector<std::size_t>{4, 4, 2, 2, 2, 1, 2, 2};
    spec.fc_sizes = {6, 5, 4};
    spec.conv_activation = Activation::elu();
    spec.fc_activation = Activation::tanh();
    return build_network(spec, a.seed);
  }();
  // One sample for the tiny net keeps components from cancelling across the batch.
  const auto [batch, targets] = random_batch(net, a.net == "tiny" ? 1 : 2, a.seed + 1);
  GradCheckOptions opt;
  opt.tolerance = a.tol;
  opt.seed = a.seed;
  if (a.net != "tiny") opt.max_coords_per_param = 64;
  const GradCheckReport report = grad_check(net, batch, targets, opt);
  print_report(out, report);
  return report.passed ? 0 : 1;
}

int do_grid(const GridArgs& a, std::ostream& out) {
  const Dataset ds = load_dataset(a.data, LoadOptions{{}, a.equalize});
  TrainConfig cfg{a.epochs, a.batch, a.lr, a.seed, true};
  cfg.validate();
  GridOptions opt;
  opt.on_row = [&out](const MetricsRow& r) {
    char buf[192];
    std::snprintf(buf, sizeof buf, "%-8s %-6s %-8s test_rmse %.6g  test_km %.1f  (%.1fs)\n",
                  std::string(network_kind_name(r.model)).c_str(),
                  std::string(activation_name(r.conv_activation)).c_str(),
                  std::string(activation_name(r.fc_activation)).c_str(), r.test_rmse, r.test_km, r.wall_seconds);
    out << buf << std::flush;
  };
  const auto rows = run_grid(ds, cfg, opt);
  io::write_file_atomic(a.out, metrics_csv(rows, a.timing));
  out << "wrote " << rows.size() << " rows to " << a.out << '\n';
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Typhoon-eye coordinate regression with convolutional networks"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic cyclone dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of samples")->check(CLI::PositiveNumber);
  s->add_option("--size", synth.size, "Square image side (H = W)")->check(CLI::Range(16, 8192));
  s->add_option("--channels", synth.channels, "Channels per image")->check(CLI::PositiveNumber);
  s->add_option("--noise", synth.noise, "Uniform noise amplitude")->check(CLI::NonNegativeNumber);
  s->add_option("--seed", synth.seed, "Random seed");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a network and write a GNM1 model");
  t->add_option("--data", tr.data, "Dataset directory with manifest.csv")->required();
  t->add_option("--model", tr.model, "simple|complex")->transform(CLI::CheckedTransformer(kModels));
  t->add_option("--conv-act", tr.conv_act, "relu|leaky|elu")->transform(CLI::CheckedTransformer(kConvActs));
  t->add_option("--fc-act", tr.fc_act, "sigmoid|tanh")->transform(CLI::CheckedTransformer(kFcActs));
  t->add_option("--final-act", tr.final_act, "sigmoid|linear")->transform(CLI::CheckedTransformer(kFinalActs));
  t->add_option("--epochs", tr.epochs, "Training epochs")->check(CLI::PositiveNumber);
  t->add_option("--lr", tr.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  t->add_option("--batch", tr.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  t->add_option("--seed", tr.seed, "Random seed");
  t->add_option("--out", tr.out, "Model file to write")->required();
  t->add_option("--history", tr.history, "Per-epoch history CSV");
  t->add_option("--equalize", tr.equalize, "Histogram-equalize inputs with this many levels (0 = off)")
      ->check(CLI::NonNegativeNumber);

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Score a model on a dataset");
  e->add_option("--model", ev.model, "GNM1 model file")->required();
  e->add_option("--data", ev.data, "Dataset directory")->required();
  e->add_option("--report", ev.report, "Metrics CSV to write");
  e->add_option("--equalize", ev.equalize, "Histogram-equalize inputs (0 = off)")->check(CLI::NonNegativeNumber);
  e->add_flag("--timing", ev.timing, "Record wall-clock seconds in the CSV");

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Compare backprop against central differences");
  g->add_option("--seed", gc.seed, "Random seed");
  g->add_option("--tol", gc.tol, "Relative error tolerance")->check(CLI::PositiveNumber);
  g->add_option("--net", gc.net, "tiny|simple|complex")->check(CLI::IsMember({"tiny", "simple", "complex"}));

  GridArgs gr;
  auto* r = app.add_subcommand("grid", "Train and score all 12 model/activation combinations");
  r->add_option("--data", gr.data, "Dataset directory")->required();
  r->add_option("--epochs", gr.epochs, "Training epochs")->check(CLI::PositiveNumber);
  r->add_option("--lr", gr.lr, "Adam learning rate")->check(CLI::NonNegativeNumber);
  r->add_option("--batch", gr.batch, "Mini-batch size")->check(CLI::PositiveNumber);
  r->add_option("--seed", gr.seed, "Random seed");
  r->add_option("--out", gr.out, "Grid CSV to write")->required();
  r->add_option("--equalize", gr.equalize, "Histogram-equalize inputs (0 = off)")->check(CLI::NonNegativeNumber);
  r->add_flag("--timing", gr.timing, "Record wall-clock seconds in the CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }

  try {
    if (s->parsed()) return do_synth(synth, out);
    if (t->parsed()) return do_train(tr, out);
    if (e->parsed()) return do_eval(ev, out);
    if (g->parsed()) return do_gradcheck(gc, out);
    if (r->parsed()) return do_grid(gr, out);
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const FormatError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace globenet
