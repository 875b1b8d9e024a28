#pragma once

// Run configuration: one versioned JSON document covering the simulator,
// selector, tracker, training and evaluation criteria. Unknown keys are
// rejected so typos in experiment configs fail loudly instead of silently
// falling back to defaults.

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "motkit/metrics.hpp"
#include "motkit/selection.hpp"
#include "motkit/simulator.hpp"
#include "motkit/tracker.hpp"
#include "motkit/training.hpp"

namespace motkit {

inline constexpr int kConfigFormatVersion = 1;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::uint64_t seed = 1;
    int num_frames = 1000;
    int num_sequences = 1;
    int feature_len = 128;
    int encoder_hidden = 64;
    SelectorConfig selector;
    TrackerConfig tracker;
    TrainConfig train;
    SimConfig sim;
    std::vector<MatchCriterion> criteria = {MatchCriterion::iou3d(0.25)};
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed,
                           const std::string& scope) {
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + scope);
}

template <typename T>
void read_into(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

inline void load_selector(const nlohmann::json& j, SelectorConfig& c) {
    reject_unknown(j, {"s_buff", "s_upper", "lambda_thres", "iou_min"}, "selector");
    read_into(j, "s_buff", c.s_buff);
    read_into(j, "s_upper", c.s_upper);
    read_into(j, "lambda_thres", c.lambda_thres);
    read_into(j, "iou_min", c.iou_min);
    if (!c.valid()) throw ConfigError("config: invalid selector parameters");
}

inline void load_tracker(const nlohmann::json& j, TrackerConfig& c) {
    reject_unknown(j,
                   {"min_hits", "max_age", "history_len", "association", "selector",
                    "global_threshold", "feature_gate", "iou_gate"},
                   "tracker");
    read_into(j, "min_hits", c.min_hits);
    read_into(j, "max_age", c.max_age);
    read_into(j, "history_len", c.history_len);
    read_into(j, "global_threshold", c.global_threshold);
    read_into(j, "feature_gate", c.feature_gate);
    read_into(j, "iou_gate", c.iou_gate);
    if (j.contains("association")) {
        const std::string a = j.at("association").get<std::string>();
        if (a == "feature")
            c.association = TrackerConfig::Association::FeatureAffinity;
        else if (a == "iou")
            c.association = TrackerConfig::Association::IouAffinity;
        else if (a == "greedy")
            c.association = TrackerConfig::Association::GreedyBaseline;
        else
            throw ConfigError("config: unknown association '" + a + "'");
    }
    if (j.contains("selector")) {
        const std::string s = j.at("selector").get<std::string>();
        if (s == "off")
            c.selector = TrackerConfig::Selector::Off;
        else if (s == "global")
            c.selector = TrackerConfig::Selector::GlobalThreshold;
        else if (s == "frame")
            c.selector = TrackerConfig::Selector::Frame;
        else if (s == "instance")
            c.selector = TrackerConfig::Selector::Instance;
        else
            throw ConfigError("config: unknown selector '" + s + "'");
    }
    if (!c.valid()) throw ConfigError("config: invalid tracker parameters");
}

inline void load_train(const nlohmann::json& j, TrainConfig& c) {
    reject_unknown(j,
                   {"learning_rate", "batch_size", "epochs", "optimizer", "seed",
                    "selection_loss_weight", "affinity_loss_weight"},
                   "train");
    read_into(j, "learning_rate", c.learning_rate);
    read_into(j, "batch_size", c.batch_size);
    read_into(j, "epochs", c.epochs);
    read_into(j, "seed", c.seed);
    read_into(j, "selection_loss_weight", c.selection_loss_weight);
    read_into(j, "affinity_loss_weight", c.affinity_loss_weight);
    if (j.contains("optimizer")) {
        const std::string o = j.at("optimizer").get<std::string>();
        if (o == "sgd")
            c.optimizer = TrainConfig::Optimizer::Sgd;
        else if (o == "adam")
            c.optimizer = TrainConfig::Optimizer::Adam;
        else
            throw ConfigError("config: unknown optimizer '" + o + "'");
    }
    if (c.learning_rate <= 0.0) throw ConfigError("config: learning_rate must be > 0");
    if (!c.valid()) throw ConfigError("config: invalid train parameters");
}

inline void load_sim(const nlohmann::json& j, SimConfig& c) {
    reject_unknown(
        j, {"preset",          "arena_half_extent", "spawn_radius",      "init_objects_min",
            "init_objects_max", "spawn_prob",       "despawn_prob",      "far_despawn_prob",
            "speed_min",        "speed_max",        "heading_jitter",    "sigma_pos",
            "sigma_size",       "sigma_theta",      "miss_base",         "miss_dist_onset",
            "miss_dist_slope",  "miss_max",         "fp_rate",           "fp_spawn_radius",
            "ghost_spawn_prob", "ghost_mean_lifetime", "ghost_score_boost", "mu_tp",
            "mu_fp",            "score_decay_slope", "score_decay_onset", "drift_amplitude",
            "drift_period",     "regime_length",    "regime_magnitude",  "regime_low_prob",
            "regime_low_offset", "sigma_score",     "fp_drift_coupling", "seed"},
        "sim");
    if (j.contains("preset")) {
        const std::string p = j.at("preset").get<std::string>();
        if (p == "default")
            c = default_sim_config(c.seed);
        else if (p == "drift")
            c = drift_sim_config(c.seed);
        else if (p == "crossed")
            c = crossed_sim_config(c.seed);
        else
            throw ConfigError("config: unknown sim preset '" + p + "'");
    }
    read_into(j, "arena_half_extent", c.arena_half_extent);
    read_into(j, "spawn_radius", c.spawn_radius);
    read_into(j, "init_objects_min", c.init_objects_min);
    read_into(j, "init_objects_max", c.init_objects_max);
    read_into(j, "spawn_prob", c.spawn_prob);
    read_into(j, "despawn_prob", c.despawn_prob);
    read_into(j, "far_despawn_prob", c.far_despawn_prob);
    read_into(j, "speed_min", c.speed_min);
    read_into(j, "speed_max", c.speed_max);
    read_into(j, "heading_jitter", c.heading_jitter);
    read_into(j, "sigma_pos", c.sigma_pos);
    read_into(j, "sigma_size", c.sigma_size);
    read_into(j, "sigma_theta", c.sigma_theta);
    read_into(j, "miss_base", c.miss_base);
    read_into(j, "miss_dist_onset", c.miss_dist_onset);
    read_into(j, "miss_dist_slope", c.miss_dist_slope);
    read_into(j, "miss_max", c.miss_max);
    read_into(j, "fp_rate", c.fp_rate);
    read_into(j, "fp_spawn_radius", c.fp_spawn_radius);
    read_into(j, "ghost_spawn_prob", c.ghost_spawn_prob);
    read_into(j, "ghost_mean_lifetime", c.ghost_mean_lifetime);
    read_into(j, "ghost_score_boost", c.ghost_score_boost);
    read_into(j, "mu_tp", c.mu_tp);
    read_into(j, "mu_fp", c.mu_fp);
    read_into(j, "score_decay_slope", c.score_decay_slope);
    read_into(j, "score_decay_onset", c.score_decay_onset);
    read_into(j, "drift_amplitude", c.drift_amplitude);
    read_into(j, "drift_period", c.drift_period);
    read_into(j, "regime_length", c.regime_length);
    read_into(j, "regime_magnitude", c.regime_magnitude);
    read_into(j, "regime_low_prob", c.regime_low_prob);
    read_into(j, "regime_low_offset", c.regime_low_offset);
    read_into(j, "sigma_score", c.sigma_score);
    read_into(j, "fp_drift_coupling", c.fp_drift_coupling);
    read_into(j, "seed", c.seed);
    if (!c.valid()) throw ConfigError("config: invalid sim parameters");
}

inline MatchCriterion load_criterion(const nlohmann::json& j) {
    reject_unknown(j, {"kind", "threshold"}, "criteria[]");
    MatchCriterion c;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "iou3d")
        c.kind = MatchCriterion::Kind::Iou3d;
    else if (kind == "center_distance")
        c.kind = MatchCriterion::Kind::CenterDistance;
    else
        throw ConfigError("config: unknown criterion kind '" + kind + "'");
    c.threshold = j.at("threshold").get<double>();
    const bool ok = c.kind == MatchCriterion::Kind::Iou3d
                        ? (c.threshold > 0.0 && c.threshold <= 1.0)
                        : c.threshold > 0.0;
    if (!ok) throw ConfigError("config: criterion threshold out of range");
    return c;
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j) {
    detail::reject_unknown(j,
                           {"version", "seed", "num_frames", "num_sequences", "feature_len",
                            "encoder_hidden", "selector", "tracker", "train", "sim", "criteria"},
                           "top level");
    if (!j.contains("version")) throw ConfigError("config: missing 'version'");
    if (j.at("version").get<int>() != kConfigFormatVersion)
        throw ConfigError("config: unsupported version");
    RunConfig cfg;
    detail::read_into(j, "seed", cfg.seed);
    detail::read_into(j, "num_frames", cfg.num_frames);
    detail::read_into(j, "num_sequences", cfg.num_sequences);
    detail::read_into(j, "feature_len", cfg.feature_len);
    detail::read_into(j, "encoder_hidden", cfg.encoder_hidden);
    if (cfg.num_frames <= 0 || cfg.num_sequences <= 0 || cfg.feature_len <= 0 ||
        cfg.encoder_hidden <= 0)
        throw ConfigError("config: sizes must be positive");
    cfg.sim.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    if (j.contains("selector")) detail::load_selector(j.at("selector"), cfg.selector);
    if (j.contains("tracker")) detail::load_tracker(j.at("tracker"), cfg.tracker);
    if (j.contains("train")) detail::load_train(j.at("train"), cfg.train);
    if (j.contains("sim")) detail::load_sim(j.at("sim"), cfg.sim);
    if (j.contains("criteria")) {
        cfg.criteria.clear();
        for (const auto& jc : j.at("criteria")) cfg.criteria.push_back(detail::load_criterion(jc));
        if (cfg.criteria.empty()) throw ConfigError("config: criteria must be non-empty");
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return config_from_json(j);
}

}  // namespace motkit
