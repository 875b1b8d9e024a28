#pragma once

// Versioned JSON serialization for selector and association models.
// Weights round-trip bit-exactly (serializer emits shortest reprs that
// reparse to the identical double).

#include <fstream>
#include <string>

#include <json.hpp>

#include "motkit/selection.hpp"
#include "motkit/tracker.hpp"

namespace motkit {

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json j;
    j["widths"] = net.widths();
    nlohmann::json layers = nlohmann::json::array();
    for (const Mlp::Layer& l : net.layers()) {
        nlohmann::json jl;
        jl["w"] = l.w;  // row-major, out x in
        jl["b"] = l.b;
        layers.push_back(std::move(jl));
    }
    j["layers"] = std::move(layers);
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    MlpSpec spec;
    spec.widths = j.at("widths").get<std::vector<int>>();
    Mlp net = Mlp::init(spec);
    const auto& layers = j.at("layers");
    if (layers.size() != net.layers().size())
        throw std::runtime_error("model file: layer count mismatch");
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
        auto w = layers[k].at("w").get<std::vector<double>>();
        auto b = layers[k].at("b").get<std::vector<double>>();
        if (w.size() != net.layers()[k].w.size() || b.size() != net.layers()[k].b.size())
            throw std::runtime_error("model file: weight shape mismatch");
        net.layers()[k].w = std::move(w);
        net.layers()[k].b = std::move(b);
    }
    return net;
}

inline nlohmann::json selector_config_to_json(const SelectorConfig& c) {
    return {{"s_buff", c.s_buff},
            {"s_upper", c.s_upper},
            {"lambda_thres", c.lambda_thres},
            {"iou_min", c.iou_min}};
}

inline SelectorConfig selector_config_from_json(const nlohmann::json& j) {
    SelectorConfig c;
    c.s_buff = j.at("s_buff").get<double>();
    c.s_upper = j.at("s_upper").get<double>();
    c.lambda_thres = j.at("lambda_thres").get<double>();
    c.iou_min = j.at("iou_min").get<double>();
    return c;
}

}  // namespace detail

struct ModelBundle {
    SelectorModel selector;
    bool has_assoc = false;
    AssociationModel assoc;
};

inline nlohmann::json model_to_json(const ModelBundle& m) {
    nlohmann::json j;
    j["version"] = kModelFormatVersion;
    j["mode"] = m.selector.mode == SelectorMode::Frame ? "frame" : "instance";
    j["feature_len"] = m.selector.feature_len;
    j["history_len"] = m.selector.history_len;
    j["config"] = detail::selector_config_to_json(m.selector.config);
    j["encoder"] = detail::mlp_to_json(m.selector.encoder);
    j["trunk"] = detail::mlp_to_json(m.selector.trunk);
    if (m.has_assoc) {
        j["assoc_node"] = detail::mlp_to_json(m.assoc.node);
        j["assoc_edge"] = detail::mlp_to_json(m.assoc.edge);
    }
    return j;
}

inline ModelBundle model_from_json(const nlohmann::json& j) {
    if (j.at("version").get<int>() != kModelFormatVersion)
        throw std::runtime_error("model file: unsupported version");
    ModelBundle m;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "frame")
        m.selector.mode = SelectorMode::Frame;
    else if (mode == "instance")
        m.selector.mode = SelectorMode::Instance;
    else
        throw std::runtime_error("model file: unknown mode '" + mode + "'");
    m.selector.feature_len = j.at("feature_len").get<int>();
    m.selector.history_len = j.at("history_len").get<int>();
    m.selector.config = detail::selector_config_from_json(j.at("config"));
    m.selector.encoder = detail::mlp_from_json(j.at("encoder"));
    m.selector.trunk = detail::mlp_from_json(j.at("trunk"));
    if (j.contains("assoc_node")) {
        m.has_assoc = true;
        m.assoc.feature_len = m.selector.feature_len;
        m.assoc.node = detail::mlp_from_json(j.at("assoc_node"));
        m.assoc.edge = detail::mlp_from_json(j.at("assoc_edge"));
    }
    return m;
}

inline void save_model(const ModelBundle& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << model_to_json(m).dump(2) << '\n';
}

inline ModelBundle load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

}  // namespace motkit
