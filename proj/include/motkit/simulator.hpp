#pragma once

// Deterministic synthetic world and detector model. Scores are logit-like
// reals whose distribution shifts per frame (drift + regime changes) and per
// object (distance decay), which is the regime that motivates dynamic
// detection selection. Everything is reproducible from the seed.

#include <cmath>
#include <random>
#include <vector>

#include "motkit/metrics.hpp"
#include "motkit/selection.hpp"

namespace motkit {

struct SimConfig {
    // World
    double arena_half_extent = 54.0;  // objects despawn beyond this radius
    double spawn_radius = 36.0;
    int init_objects_min = 3, init_objects_max = 6;
    double spawn_prob = 0.05;          // per frame
    double despawn_prob = 0.01;        // per object per frame
    double far_despawn_prob = 0.06;    // extra hazard beyond score_decay_onset
    double speed_min = 0.2, speed_max = 0.9;  // m/frame
    double heading_jitter = 0.03;             // rad/frame

    // Detector noise
    double sigma_pos = 0.12, sigma_size = 0.04, sigma_theta = 0.02;

    // Miss-probability curve vs distance
    double miss_base = 0.07, miss_dist_onset = 30.0, miss_dist_slope = 0.005, miss_max = 0.45;

    // False positives: transient Poisson clutter plus persistent ghosts.
    // Clutter concentrates near the sensor (reflections, ground returns);
    // the far zone is dominated by real objects with decayed scores.
    double fp_rate = 2.0;
    double fp_spawn_radius = 30.0;  // 0 -> whole arena
    double ghost_spawn_prob = 0.03;
    double ghost_mean_lifetime = 6.0;
    double ghost_score_boost = 1.2;

    // Score model
    double mu_tp = 8.0, mu_fp = 1.3;
    double score_decay_slope = 0.30, score_decay_onset = 46.0;
    double drift_amplitude = 0.7, drift_period = 150.0;
    int regime_length = 120;
    double regime_magnitude = 0.8;   // regular regimes: uniform offset in +-magnitude
    double regime_low_prob = 0.18;   // chance a regime is a low-score episode
    double regime_low_offset = -3.5;
    double sigma_score = 1.2;
    // How much of the frame drift false positives inherit. Confidence dips
    // hit object scores; clutter may stay in its band (coupling 0).
    double fp_drift_coupling = 1.0;

    std::uint64_t seed = 1;

    bool valid() const {
        auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
        return arena_half_extent > 0 && spawn_radius > 0 && init_objects_min >= 0 &&
               init_objects_max >= init_objects_min && prob(spawn_prob) && prob(despawn_prob) &&
               prob(far_despawn_prob) && speed_min >= 0 && speed_max >= speed_min &&
               sigma_pos >= 0 && sigma_size >= 0 && sigma_theta >= 0 && prob(miss_base) &&
               prob(miss_max) && miss_dist_slope >= 0 && fp_rate >= 0 &&
               prob(ghost_spawn_prob) && ghost_mean_lifetime >= 1.0 && prob(regime_low_prob) &&
               regime_length > 0 && drift_period > 0 && sigma_score >= 0;
    }
};

// One frame with full supervision: TP/FP attribution, the oracle threshold
// and per-detection true-positiveness targets.
struct LabeledFrame {
    int frame = 0;
    std::vector<GtBox> gts;
    std::vector<Detection> dets;
    std::vector<bool> det_is_tp;       // matching-based
    std::vector<int> det_gt_id;        // matched GT persistent id, -1 for FP
    std::vector<int> det_gen_gt_id;    // generative attribution, -1 for FP
    double oracle_tau = 0.0;
    bool tau_fallback = false;         // no TPs in the frame
    std::vector<double> lambda_labels;
};

class Simulator {
public:
    explicit Simulator(const SimConfig& cfg) : cfg_(cfg) {
        if (!cfg.valid()) throw std::invalid_argument("SimConfig: invalid");
    }

    const SimConfig& config() const { return cfg_; }

    // Shared per-frame score offset: sinusoid plus seeded piecewise-constant
    // regime shifts. Regime changes ramp in over a few frames, the way a
    // sensor degrades, rather than jumping in one frame.
    double drift(int frame) const {
        const int k = frame / cfg_.regime_length;
        const int pos = frame - k * cfg_.regime_length;
        const int ramp = std::min(15, cfg_.regime_length / 4);
        double offset = regime_offset(k);
        if (k > 0 && pos < ramp) {
            const double mix = static_cast<double>(pos + 1) / (ramp + 1);
            offset = regime_offset(k - 1) * (1.0 - mix) + offset * mix;
        }
        return cfg_.drift_amplitude * std::sin(2.0 * kPi * frame / cfg_.drift_period) + offset;
    }

    // Ground-truth trajectories with persistent ids: constant velocity with
    // small heading jitter, spawn/despawn hazards, despawn at the arena edge.
    GtFrames generate_scene(int num_frames) {
        std::mt19937_64 rng(cfg_.seed);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::vector<Object> objects;
        int next_id = 1;
        std::uniform_int_distribution<int> init_n(cfg_.init_objects_min, cfg_.init_objects_max);
        const int n0 = init_n(rng);
        for (int i = 0; i < n0; ++i) objects.push_back(spawn_object(rng, next_id++));

        GtFrames frames;
        for (int f = 0; f < num_frames; ++f) {
            std::vector<GtBox> snapshot;
            for (const Object& o : objects)
                snapshot.push_back({make_box(o.x, o.y, 0.5 * o.h, o.l, o.w, o.h, o.theta), o.id});
            frames.push_back(std::move(snapshot));

            std::vector<Object> alive;
            for (Object o : objects) {
                o.x += o.vx;
                o.y += o.vy;
                const double jitter = (u01(rng) * 2.0 - 1.0) * cfg_.heading_jitter;
                const double c = std::cos(jitter), s = std::sin(jitter);
                const double vx = c * o.vx - s * o.vy, vy = s * o.vx + c * o.vy;
                o.vx = vx;
                o.vy = vy;
                o.theta = normalize_angle(std::atan2(o.vy, o.vx));
                const double dist = std::hypot(o.x, o.y);
                double hazard = cfg_.despawn_prob;
                if (dist > cfg_.score_decay_onset) hazard += cfg_.far_despawn_prob;
                if (dist <= cfg_.arena_half_extent && u01(rng) >= hazard) alive.push_back(o);
            }
            objects = std::move(alive);
            if (u01(rng) < cfg_.spawn_prob) objects.push_back(spawn_object(rng, next_id++));
        }
        return frames;
    }

    struct DetectionRun {
        std::vector<std::vector<Detection>> frames;
        std::vector<std::vector<int>> gen_gt_id;  // parallel to frames, -1 for FP
    };

    // Detector model over a generated scene: distance-dependent misses,
    // Gaussian box noise, distance-decayed TP scores, Poisson clutter and
    // persistent ghost false positives. All scores share the frame drift.
    DetectionRun detect(const GtFrames& scene) {
        std::mt19937_64 rng(cfg_.seed ^ 0xD1B54A32D192ED03ull);
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::poisson_distribution<int> clutter(cfg_.fp_rate);
        std::vector<Ghost> ghosts;

        DetectionRun run;
        for (int f = 0; f < static_cast<int>(scene.size()); ++f) {
            const double dr = drift(f);
            std::vector<Detection> dets;
            std::vector<int> gen_ids;

            for (const GtBox& gt : scene[static_cast<std::size_t>(f)]) {
                const double dist = std::hypot(gt.box.x, gt.box.y);
                const double miss = std::min(
                    cfg_.miss_max,
                    cfg_.miss_base + cfg_.miss_dist_slope * std::max(0.0, dist - cfg_.miss_dist_onset));
                if (u01(rng) < miss) continue;
                Box3D b = gt.box;
                b.x += gauss(rng) * cfg_.sigma_pos;
                b.y += gauss(rng) * cfg_.sigma_pos;
                b.z += gauss(rng) * cfg_.sigma_pos;
                b.l = std::max(0.3, b.l + gauss(rng) * cfg_.sigma_size);
                b.w = std::max(0.3, b.w + gauss(rng) * cfg_.sigma_size);
                b.h = std::max(0.3, b.h + gauss(rng) * cfg_.sigma_size);
                b.theta = normalize_angle(b.theta + gauss(rng) * cfg_.sigma_theta);
                const double score = cfg_.mu_tp -
                                     cfg_.score_decay_slope *
                                         std::max(0.0, dist - cfg_.score_decay_onset) +
                                     dr + gauss(rng) * cfg_.sigma_score;
                dets.push_back({b, score, f, std::nullopt});
                gen_ids.push_back(gt.id);
            }

            // Persistent ghosts (recurring detector artifacts).
            if (u01(rng) < cfg_.ghost_spawn_prob) {
                Ghost g;
                g.box = random_fp_box(rng);
                std::geometric_distribution<int> life(1.0 / cfg_.ghost_mean_lifetime);
                g.frames_left = 1 + life(rng);
                ghosts.push_back(g);
            }
            std::vector<Ghost> live;
            for (Ghost g : ghosts) {
                Box3D b = g.box;
                b.x += gauss(rng) * cfg_.sigma_pos;
                b.y += gauss(rng) * cfg_.sigma_pos;
                const double score = cfg_.mu_fp + cfg_.ghost_score_boost +
                                     cfg_.fp_drift_coupling * dr +
                                     gauss(rng) * cfg_.sigma_score;
                dets.push_back({b, score, f, std::nullopt});
                gen_ids.push_back(-1);
                if (--g.frames_left > 0) live.push_back(g);
            }
            ghosts = std::move(live);

            // Transient clutter.
            const int n_fp = clutter(rng);
            for (int i = 0; i < n_fp; ++i) {
                const double score =
                    cfg_.mu_fp + cfg_.fp_drift_coupling * dr + gauss(rng) * cfg_.sigma_score;
                dets.push_back({random_fp_box(rng), score, f, std::nullopt});
                gen_ids.push_back(-1);
            }

            run.frames.push_back(std::move(dets));
            run.gen_gt_id.push_back(std::move(gen_ids));
        }
        return run;
    }

private:
    double regime_offset(int k) const {
        std::mt19937_64 rng(cfg_.seed * 0x9E3779B97F4A7C15ull + 0xC2B2AE3D27D4EB4Full +
                            static_cast<std::uint64_t>(k));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        std::uniform_real_distribution<double> mag(-cfg_.regime_magnitude, cfg_.regime_magnitude);
        const double low = u01(rng);
        return low < cfg_.regime_low_prob ? cfg_.regime_low_offset : mag(rng);
    }

    struct Object {
        int id = 0;
        double x = 0, y = 0;
        double vx = 0, vy = 0;
        double l = 4.2, w = 1.8, h = 1.5;
        double theta = 0;
    };
    struct Ghost {
        Box3D box;
        int frames_left = 0;
    };

    Object spawn_object(std::mt19937_64& rng, int id) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        Object o;
        o.id = id;
        const double r = cfg_.spawn_radius * std::sqrt(u01(rng));
        const double phi = 2.0 * kPi * u01(rng);
        o.x = r * std::cos(phi);
        o.y = r * std::sin(phi);
        const double speed = cfg_.speed_min + (cfg_.speed_max - cfg_.speed_min) * u01(rng);
        const double heading = 2.0 * kPi * u01(rng) - kPi;
        o.vx = speed * std::cos(heading);
        o.vy = speed * std::sin(heading);
        o.theta = normalize_angle(heading);
        o.l = 4.2 + (u01(rng) - 0.5) * 1.0;
        o.w = 1.8 + (u01(rng) - 0.5) * 0.4;
        o.h = 1.5 + (u01(rng) - 0.5) * 0.3;
        return o;
    }

    Box3D random_fp_box(std::mt19937_64& rng) {
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        const double radius =
            cfg_.fp_spawn_radius > 0.0 ? cfg_.fp_spawn_radius : cfg_.arena_half_extent;
        const double r = radius * std::sqrt(u01(rng));
        const double phi = 2.0 * kPi * u01(rng);
        const double h = 1.3 + u01(rng) * 0.4;
        return make_box(r * std::cos(phi), r * std::sin(phi), 0.5 * h, 3.0 + u01(rng) * 2.0,
                        1.5 + u01(rng) * 0.5, h, 2.0 * kPi * u01(rng) - kPi);
    }

    SimConfig cfg_;
};

// TP/FP attribution, oracle threshold and instance labels for every frame.
// The generative flags ride along untouched for consistency checks.
inline std::vector<LabeledFrame> label_scene(const GtFrames& scene,
                                             const Simulator::DetectionRun& run,
                                             const SelectorConfig& cfg) {
    std::vector<LabeledFrame> out;
    for (std::size_t f = 0; f < scene.size(); ++f) {
        LabeledFrame lf;
        lf.frame = static_cast<int>(f);
        lf.gts = scene[f];
        lf.dets = run.frames[f];
        lf.det_gen_gt_id = run.gen_gt_id[f];

        std::vector<Box3D> gt_boxes;
        for (const GtBox& g : lf.gts) gt_boxes.push_back(g.box);
        const TpFpLabels labels = match_tp_fp(lf.dets, gt_boxes, MatchCriterion::iou3d(cfg.iou_min));

        ScoreSplit split;
        lf.det_is_tp.resize(lf.dets.size());
        lf.det_gt_id.assign(lf.dets.size(), -1);
        lf.lambda_labels.assign(lf.dets.size(), 0.0);
        for (std::size_t i = 0; i < lf.dets.size(); ++i) {
            lf.det_is_tp[i] = labels.det_is_tp[i];
            if (labels.det_is_tp[i]) {
                lf.det_gt_id[i] = lf.gts[static_cast<std::size_t>(labels.det_gt_index[i])].id;
                lf.lambda_labels[i] = 1.0;
                split.tp_scores.push_back(lf.dets[i].score);
            } else {
                split.fp_scores.push_back(lf.dets[i].score);
            }
        }
        const GtThreshold tau = gt_threshold(split, cfg);
        lf.oracle_tau = tau.tau;
        lf.tau_fallback = tau.empty_tp;
        out.push_back(std::move(lf));
    }
    return out;
}

// Benchmark presets used by the CLI and the acceptance runs.

inline SimConfig default_sim_config(std::uint64_t seed = 1) {
    SimConfig cfg;
    cfg.seed = seed;
    return cfg;
}

// Strong downward score episodes, no distance decay: any global threshold
// either sits below the deep regimes (keeping most clutter) or truncates
// whole stretches of true positives.
inline SimConfig drift_sim_config(std::uint64_t seed = 1) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.score_decay_slope = 0.0;
    cfg.drift_amplitude = 1.0;
    cfg.drift_period = 100.0;
    cfg.regime_length = 120;
    cfg.regime_magnitude = 1.0;
    cfg.regime_low_prob = 0.5;
    cfg.regime_low_offset = -5.5;
    cfg.fp_drift_coupling = 0.0;
    cfg.miss_base = 0.0;
    cfg.fp_rate = 1.0;
    cfg.ghost_spawn_prob = 0.05;
    cfg.mu_fp = 2.0;
    cfg.sigma_score = 0.8;
    return cfg;
}

// Far true positives score below near false positives in the same frame:
// no per-frame threshold separates them, but position+score jointly do.
inline SimConfig crossed_sim_config(std::uint64_t seed = 1) {
    SimConfig cfg;
    cfg.seed = seed;
    cfg.arena_half_extent = 50.0;
    cfg.spawn_radius = 45.0;
    cfg.far_despawn_prob = 0.02;
    cfg.score_decay_slope = 0.30;
    cfg.score_decay_onset = 20.0;
    cfg.miss_base = 0.03;
    cfg.miss_dist_slope = 0.001;
    cfg.miss_max = 0.15;
    cfg.fp_spawn_radius = 18.0;
    cfg.mu_fp = 3.2;
    cfg.ghost_score_boost = 0.5;
    cfg.sigma_score = 0.5;
    cfg.drift_amplitude = 0.3;
    cfg.regime_magnitude = 0.3;
    cfg.regime_low_prob = 0.0;
    return cfg;
}

}  // namespace motkit
