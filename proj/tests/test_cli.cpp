#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "globenet/cli.hpp"
#include "globenet/io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "globenet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = globenet::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("globenet_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read(const fs::path& p) { return globenet::io::read_file(p); }

std::string tree_bytes(const fs::path& dir) {
  std::string all = read(dir / "manifest.csv");
  for (int i = 0; i < 12; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "images/%06d.gni", i);
    all += read(dir / name);
  }
  return all;
}

}  // namespace

TEST_CASE("synth is reproducible") {
  const fs::path dir = scratch("synth");
  const std::vector<std::string> args{"synth", "--out", (dir / "a").string(), "--count", "12", "--size", "16", "--seed", "3"};
  REQUIRE(run(args).code == 0);
  auto args_b = args;
  args_b[2] = (dir / "b").string();
  REQUIRE(run(args_b).code == 0);
  CHECK(tree_bytes(dir / "a") == tree_bytes(dir / "b"));
  fs::remove_all(dir);
}

TEST_CASE("train and eval are reproducible") {
  const fs::path dir = scratch("train");
  const std::string data = (dir / "data").string();
  REQUIRE(run({"synth", "--out", data, "--count", "12", "--size", "16", "--seed", "1"}).code == 0);
  std::vector<std::string> train{"train", "--data", data, "--model", "complex", "--conv-act", "elu", "--fc-act",
                                 "tanh", "--epochs", "2", "--batch", "4", "--lr", "1e-3", "--seed", "2",
                                 "--out", (dir / "a.gnm").string(), "--history", (dir / "a.csv").string()};
  const Result r = run(train);
  REQUIRE_MESSAGE(r.code == 0, r.err);
  train[18] = (dir / "b.gnm").string();
  train[20] = (dir / "b.csv").string();
  REQUIRE(run(train).code == 0);
  CHECK(read(dir / "a.gnm") == read(dir / "b.gnm"));
  CHECK(read(dir / "a.csv") == read(dir / "b.csv"));
  CHECK(read(dir / "a.csv").starts_with("epoch,train_loss,train_rmse\n"));

  const Result e1 = run({"eval", "--model", (dir / "a.gnm").string(), "--data", data, "--report", (dir / "m1.csv").string()});
  const Result e2 = run({"eval", "--model", (dir / "b.gnm").string(), "--data", data, "--report", (dir / "m2.csv").string()});
  REQUIRE(e1.code == 0);
  REQUIRE(e2.code == 0);
  CHECK(read(dir / "m1.csv") == read(dir / "m2.csv"));
  CHECK(read(dir / "m1.csv").starts_with("model,conv_act,fc_act,epochs,train_rmse,test_rmse,test_km,seed,wall_s\n"));
  CHECK(read(dir / "m1.csv").find("complex,elu,tanh,2,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  const std::string missing = (dir / "nowhere").string();
  const Result io = run({"train", "--data", missing, "--out", (dir / "m.gnm").string()});
  CHECK(io.code == 2);
  CHECK(io.err.find(missing) != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "m.gnm"));

  CHECK(run({"train", "--data", missing, "--out", (dir / "m.gnm").string(), "--lr", "-1"}).code == 1);
  CHECK(run({"train", "--data", missing, "--out", (dir / "m.gnm").string(), "--conv-act", "tanh"}).code == 1);
  CHECK(run({"synth", "--out", (dir / "s").string(), "--size", "8"}).code == 1);
  CHECK_FALSE(fs::exists(dir / "s"));
  CHECK(run({"synth", "--out", (dir / "s").string(), "--count", "0"}).code == 1);
  CHECK(run({"bogus"}).code == 1);
  CHECK(run({}).code == 1);
  CHECK(run({"--help"}).code == 0);

  {
    std::ofstream(dir / "junk.gnm") << "not a model";
  }
  REQUIRE(run({"synth", "--out", (dir / "d").string(), "--count", "2", "--size", "16"}).code == 0);
  CHECK(run({"eval", "--model", (dir / "junk.gnm").string(), "--data", (dir / "d").string()}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck command") {
  const Result r = run({"gradcheck", "--seed", "1"});
  CHECK_MESSAGE(r.code == 0, r.out);
  CHECK(run({"gradcheck", "--net", "huge"}).code == 1);
  CHECK(run({"gradcheck", "--tol", "0"}).code == 1);
}
