#include "hrpm/mlp_io.hpp"

#include <fstream>

namespace hrpm {

namespace {

const char* activation_name(Activation a) { return a == Activation::Relu ? "relu" : "identity"; }

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "identity") return Activation::Identity;
  throw DataError("unknown activation '" + s + "' in checkpoint");
}

}  // namespace

nlohmann::json to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index i = 0; i < l.weight.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weight.cols(); ++j) w.push_back(l.weight(i, j));
    }
    layers.push_back({{"inputs", l.weight.cols()},
                      {"outputs", l.weight.rows()},
                      {"activation", activation_name(l.activation)},
                      {"weight", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"format", kCheckpointFormat}, {"version", kCheckpointVersion}, {"layers", layers}};
}

Mlp mlp_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw DataError("not an mlp checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + j.at("version").dump());
    }
    std::vector<Mlp::Layer> layers;
    for (const auto& lj : j.at("layers")) {
      const auto in = lj.at("inputs").get<Eigen::Index>();
      const auto out = lj.at("outputs").get<Eigen::Index>();
      const auto w = lj.at("weight").get<std::vector<double>>();
      const auto b = lj.at("bias").get<std::vector<double>>();
      if (in < 1 || out < 1) throw ShapeError("checkpoint layer sizes must be positive");
      if (static_cast<Eigen::Index>(w.size()) != in * out) throw ShapeError("checkpoint weight size mismatch");
      if (static_cast<Eigen::Index>(b.size()) != out) throw ShapeError("checkpoint bias size mismatch");
      Mlp::Layer layer;
      layer.weight = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          w.data(), out, in);
      layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data(), out);
      layer.activation = parse_activation(lj.at("activation").get<std::string>());
      layers.push_back(std::move(layer));
    }
    if (layers.empty()) throw ShapeError("checkpoint has no layers");
    Mlp net(std::move(layers));
    if (!net.all_finite()) throw DataError("checkpoint holds non-finite parameters");
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  }
}

void write_json_file(const nlohmann::json& j, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) { write_json_file(to_json(net), path); }

Mlp load_checkpoint(const std::filesystem::path& path) { return mlp_from_json(read_json_file(path)); }

}  // namespace hrpm
