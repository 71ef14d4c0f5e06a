#include "platoon/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace platoon {
namespace {

using nlohmann::json;

const char* const kLayerNames[4] = {"enc_pos", "enc_vel", "trunk", "head"};

json layer_to_json(const char* name, const LayerParams& layer) {
    json j;
    j["name"] = name;
    j["noisy"] = layer.noisy;
    j["rows"] = layer.out();
    j["cols"] = layer.in();
    j["mu_w"] = layer.mu_w.a;
    j["mu_b"] = layer.mu_b;
    if (layer.noisy) {
        j["sigma_w"] = layer.sigma_w.a;
        j["sigma_b"] = layer.sigma_b;
    }
    return j;
}

LayerParams layer_from_json(const json& j, const char* name, int rows, int cols,
                            bool noisy) {
    const std::string ctx = "checkpoint layer '" + std::string(name) + "': ";
    if (j.value("name", "") != name) {
        throw std::runtime_error(ctx + "unexpected layer name '" +
                                 j.value("name", std::string("<missing>")) + "'");
    }
    if (j.at("rows").get<int>() != rows || j.at("cols").get<int>() != cols) {
        throw std::runtime_error(ctx + "shape " + std::to_string(j.at("rows").get<int>()) +
                                 "x" + std::to_string(j.at("cols").get<int>()) +
                                 " does not match configured " + std::to_string(rows) +
                                 "x" + std::to_string(cols));
    }
    if (j.at("noisy").get<bool>() != noisy) {
        throw std::runtime_error(ctx + "noisy flag mismatch");
    }
    LayerParams layer;
    layer.noisy = noisy;
    layer.mu_w = Matrix(rows, cols);
    layer.mu_w.a = j.at("mu_w").get<std::vector<double>>();
    layer.mu_b = j.at("mu_b").get<std::vector<double>>();
    if (layer.mu_w.a.size() != static_cast<std::size_t>(rows) * cols ||
        layer.mu_b.size() != static_cast<std::size_t>(rows)) {
        throw std::runtime_error(ctx + "flattened mu array length mismatch");
    }
    if (noisy) {
        layer.sigma_w = Matrix(rows, cols);
        layer.sigma_w.a = j.at("sigma_w").get<std::vector<double>>();
        layer.sigma_b = j.at("sigma_b").get<std::vector<double>>();
        if (layer.sigma_w.a.size() != static_cast<std::size_t>(rows) * cols ||
            layer.sigma_b.size() != static_cast<std::size_t>(rows)) {
            throw std::runtime_error(ctx + "flattened sigma array length mismatch");
        }
    }
    return layer;
}

}  // namespace

void save_checkpoint(const QNetworkParams& net, const std::filesystem::path& path) {
    json j;
    j["format_version"] = kCheckpointFormatVersion;
    j["arch"] = {{"pos_inputs", net.arch.pos_inputs},
                 {"vel_inputs", net.arch.vel_inputs},
                 {"encoder_width", net.arch.encoder_width},
                 {"trunk_width", net.arch.trunk_width},
                 {"actions", net.arch.actions},
                 {"noisy_encoders", net.arch.noisy_encoders}};
    j["layers"] = json::array();
    const auto layers = net.layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        j["layers"].push_back(layer_to_json(kLayerNames[i], *layers[i]));
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
    out << j.dump(1) << "\n";
}

QNetworkParams load_checkpoint(const std::filesystem::path& path, const NetArch& arch) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("malformed checkpoint " + path.string() + ": " + e.what());
    }
    if (j.value("format_version", -1) != kCheckpointFormatVersion) {
        throw std::runtime_error("unsupported checkpoint format_version in " + path.string());
    }
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != 4) {
        throw std::runtime_error("checkpoint must contain exactly 4 layers");
    }
    QNetworkParams net;
    net.arch = arch;
    net.enc_pos = layer_from_json(layers[0], kLayerNames[0], arch.encoder_width,
                                  arch.pos_inputs, arch.noisy_encoders);
    net.enc_vel = layer_from_json(layers[1], kLayerNames[1], arch.encoder_width,
                                  arch.vel_inputs, arch.noisy_encoders);
    net.trunk = layer_from_json(layers[2], kLayerNames[2], arch.trunk_width,
                                2 * arch.encoder_width, true);
    net.head = layer_from_json(layers[3], kLayerNames[3], arch.actions, arch.trunk_width,
                               true);
    return net;
}

}  // namespace platoon
