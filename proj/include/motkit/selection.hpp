#pragma once

// Detection selection: ground-truth threshold construction, TP/FP label
// supervision, frame-level threshold filtering and instance-level
// probabilistic selection.

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <vector>

#include "motkit/assignment.hpp"
#include "motkit/neural.hpp"

namespace motkit {

struct SelectorConfig {
    double s_buff = 3.0;        // buffer below the minimum TP score
    double s_upper = 3.0;       // upper bound on the GT threshold
    double lambda_thres = 0.1;  // instance-level keep probability
    double iou_min = 0.25;      // TP/FP labeling gate

    bool valid() const {
        return s_buff >= 0.0 && lambda_thres > 0.0 && lambda_thres < 1.0 &&
               iou_min > 0.0 && iou_min <= 1.0;
    }
};

// Disjoint partition of one frame's detection scores by TP/FP attribute.
struct ScoreSplit {
    std::vector<double> tp_scores;
    std::vector<double> fp_scores;
};

struct GtThreshold {
    double tau = 0.0;
    bool empty_tp = false;  // no TP in the frame; tau fell back to s_upper
};

// tau = min(min(S_TP) - s_buff, s_upper). Both branches keep tau strictly
// below every TP score, so filtering at tau never removes a TP. Frames with
// no TPs fall back to s_upper and are flagged for exclusion from regression
// targets.
inline GtThreshold gt_threshold(const ScoreSplit& split, const SelectorConfig& cfg) {
    if (cfg.s_buff < 0.0) throw std::invalid_argument("gt_threshold: s_buff must be >= 0");
    if (split.tp_scores.empty()) return {cfg.s_upper, true};
    const double min_tp = *std::min_element(split.tp_scores.begin(), split.tp_scores.end());
    return {std::min(min_tp - cfg.s_buff, cfg.s_upper), false};
}

// Per-detection true-positiveness labels: 1 for detections matched to a GT
// box under iou_min, 0 otherwise.
inline std::vector<double> gt_instance_labels(const std::vector<Detection>& dets,
                                              const std::vector<Box3D>& gts,
                                              const SelectorConfig& cfg) {
    std::vector<double> lambdas(dets.size(), 0.0);
    if (gts.empty()) return lambdas;
    const TpFpLabels labels = match_tp_fp(dets, gts, MatchCriterion::iou3d(cfg.iou_min));
    for (std::size_t i = 0; i < dets.size(); ++i)
        if (labels.det_is_tp[i]) lambdas[i] = 1.0;
    return lambdas;
}

// Survivor indices with score strictly greater than tau, original order.
inline std::vector<std::size_t> high_pass_filter(const std::vector<Detection>& dets,
                                                 double tau) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < dets.size(); ++i)
        if (dets[i].score > tau) kept.push_back(i);
    return kept;
}

struct LengthMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Survivor indices with lambda strictly greater than lambda_thres.
inline std::vector<std::size_t> select_instances(const std::vector<Detection>& dets,
                                                 const std::vector<double>& lambdas,
                                                 const SelectorConfig& cfg) {
    if (lambdas.size() != dets.size())
        throw LengthMismatch("select_instances: |lambda| != |detections|");
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < dets.size(); ++i)
        if (lambdas[i] > cfg.lambda_thres) kept.push_back(i);
    return kept;
}

enum class SelectorMode { Frame, Instance };

// Learned selector: a shared raw-box encoder plus a regression (frame mode)
// or classification (instance mode) trunk.
//   frame:    tau_hat = trunk(maxpool(features of detections + tracklets))
//   instance: lambda_hat = sigmoid(trunk(concat(det_feat, maxpool(tracklet_feats))))
struct SelectorModel {
    SelectorMode mode = SelectorMode::Frame;
    int feature_len = 128;
    int history_len = 5;
    SelectorConfig config;
    Mlp encoder;  // encoder_input_dim(history_len) -> ... -> feature_len
    Mlp trunk;    // frame: feature_len -> ... -> 1; instance: 2*feature_len -> ... -> 1

    int trunk_input_dim() const {
        return mode == SelectorMode::Frame ? feature_len : 2 * feature_len;
    }

    static SelectorModel init(SelectorMode mode, int feature_len, int history_len,
                              const SelectorConfig& cfg, std::uint64_t seed,
                              int encoder_hidden = 64) {
        SelectorModel m;
        m.mode = mode;
        m.feature_len = feature_len;
        m.history_len = history_len;
        m.config = cfg;
        m.encoder = Mlp::init({{encoder_input_dim(history_len), encoder_hidden, feature_len}, seed});
        m.trunk = Mlp::init({{m.trunk_input_dim(), 32, 8, 1}, seed + 1});
        return m;
    }
};

// Frame-level threshold regression over the pooled feature set. An empty
// set falls back to -inf (keep everything).
inline double frame_threshold(const SelectorModel& model, const std::vector<FeatureVec>& feats) {
    if (model.mode != SelectorMode::Frame)
        throw std::logic_error("frame_threshold: model is not in frame mode");
    if (feats.empty()) return -std::numeric_limits<double>::infinity();
    return model.trunk.forward(maxpool_set(feats).pooled)[0];
}

// Instance-level true-positiveness. The pooled tracklet context is a zero
// vector when no tracklets exist yet.
inline double instance_prob(const SelectorModel& model, const FeatureVec& det_feat,
                            const std::vector<FeatureVec>& tracklet_feats) {
    if (model.mode != SelectorMode::Instance)
        throw std::logic_error("instance_prob: model is not in instance mode");
    FeatureVec in(static_cast<std::size_t>(2 * model.feature_len), 0.0);
    std::copy(det_feat.begin(), det_feat.end(), in.begin());
    if (!tracklet_feats.empty()) {
        const FeatureVec ctx = maxpool_set(tracklet_feats).pooled;
        std::copy(ctx.begin(), ctx.end(), in.begin() + model.feature_len);
    }
    return sigmoid(model.trunk.forward(in)[0]);
}

}  // namespace motkit
