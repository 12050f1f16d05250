#include <json.hpp>

#include "globenet/io.hpp"
#include "globenet/network.hpp"

namespace globenet {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "GNM1";

json to_json(const Activation& a) {
  json j{{"kind", activation_name(a.kind)}};
  if (a.has_alpha()) j["alpha"] = a.alpha;
  return j;
}

Activation activation_from_json(const json& j) {
  const auto kind = parse_activation_kind(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("unknown activation " + j.at("kind").dump());
  Activation a = default_activation(*kind);
  if (j.contains("alpha")) a.alpha = j.at("alpha").get<double>();
  return a;
}

const char* padding_name(Padding p) { return p == Padding::Same ? "same" : "valid"; }

Padding padding_from_json(const json& j) {
  const std::string s = j.get<std::string>();
  if (s == "same") return Padding::Same;
  if (s == "valid") return Padding::Valid;
  throw FormatError("unknown padding " + s);
}

json to_json(const NetworkSpec& s) {
  return {{"kind", network_kind_name(s.kind)},
          {"input_shape", s.input_shape},
          {"conv_activation", to_json(s.conv_activation)},
          {"fc_activation", to_json(s.fc_activation)},
          {"stage_filters", s.stage_filters},
          {"fc_sizes", s.fc_sizes},
          {"final_activation", to_json(s.final_activation)}};
}

NetworkSpec spec_from_json(const json& j) {
  NetworkSpec s;
  const auto kind = parse_network_kind(j.at("kind").get<std::string>());
  if (!kind) throw FormatError("unknown network kind");
  s.kind = *kind;
  s.input_shape = j.at("input_shape").get<InputShape>();
  s.conv_activation = activation_from_json(j.at("conv_activation"));
  s.fc_activation = activation_from_json(j.at("fc_activation"));
  s.stage_filters = j.at("stage_filters").get<std::vector<std::size_t>>();
  s.fc_sizes = j.at("fc_sizes").get<std::vector<std::size_t>>();
  s.final_activation = activation_from_json(j.at("final_activation"));
  return s;
}

json to_json(const LayerSpec& layer) {
  return std::visit(
      [](const auto& l) -> json {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, ConvLayerSpec>) {
          return {{"type", "conv"}, {"kernel", l.kernel}, {"filters", l.filters},
                  {"stride", l.stride}, {"padding", padding_name(l.padding)}};
        } else if constexpr (std::is_same_v<L, PoolLayerSpec>) {
          return {{"type", "pool"}, {"window", l.window}, {"stride", l.stride},
                  {"padding", padding_name(l.padding)}};
        } else if constexpr (std::is_same_v<L, ActivationLayerSpec>) {
          return {{"type", "activation"}, {"activation", to_json(l.activation)}};
        } else if constexpr (std::is_same_v<L, FlattenLayerSpec>) {
          return {{"type", "flatten"}};
        } else if constexpr (std::is_same_v<L, DenseLayerSpec>) {
          return {{"type", "dense"}, {"units", l.units}};
        } else {
          return {{"type", "inception"},
                  {"widths", {l.branch1, l.branch2_reduce, l.branch2, l.branch3_reduce, l.branch3, l.branch4}},
                  {"activation", to_json(l.activation)}};
        }
      },
      layer);
}

LayerSpec layer_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "conv") {
    return ConvLayerSpec{j.at("kernel"), j.at("filters"), j.at("stride"), padding_from_json(j.at("padding"))};
  }
  if (type == "pool") {
    return PoolLayerSpec{j.at("window"), j.at("stride"), padding_from_json(j.at("padding"))};
  }
  if (type == "activation") return ActivationLayerSpec{activation_from_json(j.at("activation"))};
  if (type == "flatten") return FlattenLayerSpec{};
  if (type == "dense") return DenseLayerSpec{j.at("units")};
  if (type == "inception") {
    const auto w = j.at("widths").get<std::vector<std::size_t>>();
    if (w.size() != 6) throw FormatError("inception layer needs 6 widths");
    return InceptionLayerSpec{w[0], w[1], w[2], w[3], w[4], w[5], activation_from_json(j.at("activation"))};
  }
  throw FormatError("unknown layer type " + type);
}

}  // namespace

std::string encode_model(const Network& net, const ModelMetadata& meta) {
  json header;
  header["format"] = kMagic;
  header["input_shape"] = net.input_shape();
  header["network_spec"] = net.spec() ? to_json(*net.spec()) : json(nullptr);
  json layers = json::array();
  for (const LayerSpec& l : net.layer_specs()) layers.push_back(to_json(l));
  header["layers"] = std::move(layers);
  header["parameters"] = net.parameter_names();
  json training{{"epochs", meta.epochs}, {"seed", meta.seed}, {"learning_rate", meta.learning_rate}};
  training["train_rmse"] = meta.train_rmse ? json(*meta.train_rmse) : json(nullptr);
  header["training"] = std::move(training);

  const std::string text = header.dump();
  std::string out(kMagic);
  io::put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const Tensor* t : net.parameters()) {
    io::put_u32(out, static_cast<std::uint32_t>(t->rank()));
    for (std::size_t d : t->shape().dims()) io::put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t->values()) io::put_f32(out, static_cast<float>(v));
  }
  return out;
}

LoadedModel decode_model(std::string_view bytes) {
  io::ByteReader in(bytes);
  if (in.take(4, "magic") != kMagic) throw FormatError("not a GNM1 model file (bad magic)");
  const std::uint32_t len = in.u32("header length");
  json header;
  try {
    header = json::parse(in.take(len, "header"));
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("model header is not valid JSON: ") + e.what());
  }

  try {
    std::optional<NetworkSpec> spec;
    if (!header.at("network_spec").is_null()) spec = spec_from_json(header.at("network_spec"));
    std::vector<LayerSpec> layers;
    for (const json& l : header.at("layers")) layers.push_back(layer_from_json(l));
    if (spec && topology_layers(*spec) != layers) {
      throw FormatError("model layer list does not match its network spec");
    }
    const auto input = header.at("input_shape").get<InputShape>();
    Network net = Network::from_layers(input, std::move(layers), 0, std::move(spec));

    if (header.at("parameters").get<std::vector<std::string>>() != net.parameter_names()) {
      throw FormatError("model parameter names do not match its layer list");
    }
    for (Tensor* t : net.mutable_parameters()) {
      const std::uint32_t rank = in.u32("parameter rank");
      if (rank != t->rank()) throw FormatError("parameter rank mismatch");
      for (std::size_t d : t->shape().dims()) {
        if (in.u32("parameter extent") != d) throw FormatError("parameter extent mismatch");
      }
      for (double& v : t->mutable_values()) v = static_cast<double>(in.f32("parameter values"));
      if (!t->all_finite()) throw FormatError("non-finite parameter value");
    }
    if (in.remaining() != 0) throw FormatError("trailing bytes after last parameter");

    ModelMetadata meta;
    if (header.contains("training")) {
      const json& tr = header.at("training");
      meta.epochs = tr.value("epochs", std::size_t{0});
      meta.seed = tr.value("seed", std::uint64_t{0});
      meta.learning_rate = tr.value("learning_rate", 0.0);
      if (tr.contains("train_rmse") && !tr.at("train_rmse").is_null()) {
        meta.train_rmse = tr.at("train_rmse").get<double>();
      }
    }
    return {std::move(net), meta};
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  } catch (const ShapeError& e) {
    throw FormatError(std::string("model header describes an invalid network: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Network& net, const ModelMetadata& meta) {
  io::write_file_atomic(path, encode_model(net, meta));
}

LoadedModel load_model(const std::filesystem::path& path) { return decode_model(io::read_file(path)); }

}  // namespace globenet
