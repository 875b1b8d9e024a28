#pragma once

// Online tracking loop: motion prediction, affinity estimation, detection
// selection, optimal association and tracklet lifecycle management.

#include <algorithm>
#include <deque>
#include <limits>
#include <numeric>
#include <vector>

#include "motkit/assignment.hpp"
#include "motkit/metrics.hpp"
#include "motkit/neural.hpp"
#include "motkit/selection.hpp"

namespace motkit {

struct TrackerConfig {
    int min_hits = 3;  // consecutive matches before a track is confirmed
    int max_age = 2;   // consecutive misses before a track dies
    int history_len = 5;

    enum class Association { FeatureAffinity, IouAffinity, GreedyBaseline };
    Association association = Association::IouAffinity;

    enum class Selector { Off, GlobalThreshold, Frame, Instance };
    Selector selector = Selector::Off;
    double global_threshold = 0.0;

    double feature_gate = 0.5;  // minimum affinity for feature mode
    double iou_gate = 0.1;      // minimum affinity for iou / greedy mode

    bool valid() const { return min_hits >= 1 && max_age >= 1 && history_len >= 1; }

    double gate() const {
        return association == Association::FeatureAffinity ? feature_gate : iou_gate;
    }
};

struct Tracklet {
    int id = 0;
    std::deque<HistoryEntry> history;  // oldest front, newest back; bounded
    int hits = 1;
    int misses = 0;
    enum class State { Tentative, Confirmed, Dead };
    State state = State::Tentative;
    FeatureVec feature;  // cached encoding, refreshed each step
    double score_sum = 0.0;
    int score_count = 0;

    const Box3D& last_box() const { return history.back().box; }
    double last_score() const { return history.back().score; }
    double confidence() const {
        return score_count > 0 ? score_sum / score_count : 0.0;
    }

    // Encoder input view: current tuple plus strictly older entries,
    // most recent first.
    std::vector<HistoryEntry> past_entries() const {
        std::vector<HistoryEntry> past;
        for (auto it = history.rbegin() + 1; it != history.rend(); ++it) past.push_back(*it);
        return past;
    }
};

// Constant-velocity extrapolation of the center from the last two history
// entries; size and heading carry forward. Single-entry histories predict
// in place.
inline Box3D predict(const Tracklet& t) {
    Box3D next = t.last_box();
    if (t.history.size() >= 2) {
        const Box3D& prev = t.history[t.history.size() - 2].box;
        next.x += next.x - prev.x;
        next.y += next.y - prev.y;
        next.z += next.z - prev.z;
    }
    return next;
}

// Simplified association network: one mean-neighbor message-passing round
// (linear node update on [own feature, mean of the other side]) followed by
// a two-layer edge MLP on concatenated pair features; sigmoid output.
struct AssociationModel {
    int feature_len = 128;
    Mlp node;  // 2F -> F, linear
    Mlp edge;  // 2F -> 32 -> 1

    static AssociationModel init(int feature_len, std::uint64_t seed) {
        AssociationModel m;
        m.feature_len = feature_len;
        m.node = Mlp::init({{2 * feature_len, feature_len}, seed});
        m.edge = Mlp::init({{2 * feature_len, 32, 1}, seed + 1});
        return m;
    }
};

struct AffinityMatrix {
    std::size_t rows = 0, cols = 0;  // tracklets x detections
    std::vector<double> values;

    double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
};

namespace detail {

inline FeatureVec mean_of(const std::vector<FeatureVec>& vecs, int dim) {
    FeatureVec m(static_cast<std::size_t>(dim), 0.0);
    if (vecs.empty()) return m;
    for (const FeatureVec& v : vecs)
        for (std::size_t d = 0; d < m.size(); ++d) m[d] += v[d];
    for (double& x : m) x /= static_cast<double>(vecs.size());
    return m;
}

inline FeatureVec concat(const FeatureVec& a, const FeatureVec& b) {
    FeatureVec out;
    out.reserve(a.size() + b.size());
    out.insert(out.end(), a.begin(), a.end());
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace detail

// Feature-mode affinity over already-encoded node features.
inline AffinityMatrix affinity_feature(const AssociationModel& model,
                                       const std::vector<FeatureVec>& tracklet_feats,
                                       const std::vector<FeatureVec>& det_feats) {
    const int F = model.feature_len;
    const FeatureVec det_mean = detail::mean_of(det_feats, F);
    const FeatureVec trk_mean = detail::mean_of(tracklet_feats, F);
    std::vector<FeatureVec> u_trk, u_det;
    for (const FeatureVec& f : tracklet_feats)
        u_trk.push_back(model.node.forward(detail::concat(f, det_mean)));
    for (const FeatureVec& f : det_feats)
        u_det.push_back(model.node.forward(detail::concat(f, trk_mean)));

    AffinityMatrix a;
    a.rows = tracklet_feats.size();
    a.cols = det_feats.size();
    a.values.assign(a.rows * a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j)
            a(i, j) = sigmoid(model.edge.forward(detail::concat(u_trk[i], u_det[j]))[0]);
    return a;
}

// IoU-mode affinity against constant-velocity predictions.
inline AffinityMatrix affinity_iou(const std::vector<Tracklet>& tracklets,
                                   const std::vector<Detection>& dets) {
    AffinityMatrix a;
    a.rows = tracklets.size();
    a.cols = dets.size();
    a.values.assign(a.rows * a.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const Box3D pred = predict(tracklets[i]);
        for (std::size_t j = 0; j < a.cols; ++j) a(i, j) = iou_3d(pred, dets[j].box);
    }
    return a;
}

struct FilteredDetection {
    int frame = 0;
    std::size_t det_index = 0;  // index in the raw input frame
    double score = 0.0;
    double threshold_or_lambda = 0.0;  // tau_hat (frame) or lambda_hat (instance)
};

struct TrackedBox {
    Box3D box;
    int id = 0;
    double confidence = 0.0;  // track-level, mean of associated scores
    double det_score = 0.0;
};

struct StepResult {
    std::vector<std::pair<int, std::size_t>> assignments;  // (track id, raw det index)
    std::vector<FilteredDetection> filtered;
    std::vector<TrackedBox> outputs;
    double tau_hat = -std::numeric_limits<double>::infinity();  // frame mode only
};

class Tracker {
public:
    Tracker(const TrackerConfig& cfg, const SelectorModel* selector = nullptr,
            const AssociationModel* assoc = nullptr)
        : cfg_(cfg), selector_(selector), assoc_(assoc) {
        if (!cfg.valid()) throw std::invalid_argument("TrackerConfig: invalid");
        if ((cfg.selector == TrackerConfig::Selector::Frame ||
             cfg.selector == TrackerConfig::Selector::Instance) &&
            selector_ == nullptr)
            throw std::invalid_argument("Tracker: learned selector mode without a model");
        if (cfg.association == TrackerConfig::Association::FeatureAffinity &&
            (assoc_ == nullptr || selector_ == nullptr))
            throw std::invalid_argument("Tracker: feature affinity needs encoder + association model");
    }

    const std::vector<Tracklet>& tracklets() const { return tracklets_; }

    StepResult step(const std::vector<Detection>& frame_dets) {
        StepResult result;
        const int frame = frame_index_++;

        // Encoded features for raw detections and live tracklets (needed by
        // the learned selector and feature affinity).
        std::vector<FeatureVec> det_feats, trk_feats;
        const bool needs_features =
            selector_ != nullptr && (cfg_.selector == TrackerConfig::Selector::Frame ||
                                     cfg_.selector == TrackerConfig::Selector::Instance ||
                                     cfg_.association == TrackerConfig::Association::FeatureAffinity);
        if (needs_features) {
            for (const Detection& d : frame_dets)
                det_feats.push_back(encode_detection(selector_->encoder, d, {}, selector_->history_len));
            for (Tracklet& t : tracklets_) {
                t.feature = selector_->encoder.forward(encoder_input(
                    t.last_box(), t.last_score(), t.past_entries(), selector_->history_len));
                trk_feats.push_back(t.feature);
            }
        }

        // Detection selection over the raw frame.
        std::vector<std::size_t> kept;
        switch (cfg_.selector) {
            case TrackerConfig::Selector::Off:
                kept.resize(frame_dets.size());
                std::iota(kept.begin(), kept.end(), 0);
                break;
            case TrackerConfig::Selector::GlobalThreshold:
                kept = high_pass_filter(frame_dets, cfg_.global_threshold);
                for (std::size_t i = 0; i < frame_dets.size(); ++i)
                    if (frame_dets[i].score <= cfg_.global_threshold)
                        result.filtered.push_back({frame, i, frame_dets[i].score, cfg_.global_threshold});
                break;
            case TrackerConfig::Selector::Frame: {
                std::vector<FeatureVec> all = det_feats;
                all.insert(all.end(), trk_feats.begin(), trk_feats.end());
                result.tau_hat = frame_threshold(*selector_, all);
                kept = high_pass_filter(frame_dets, result.tau_hat);
                for (std::size_t i = 0; i < frame_dets.size(); ++i)
                    if (frame_dets[i].score <= result.tau_hat)
                        result.filtered.push_back({frame, i, frame_dets[i].score, result.tau_hat});
                break;
            }
            case TrackerConfig::Selector::Instance: {
                std::vector<double> lambdas(frame_dets.size(), 0.0);
                for (std::size_t i = 0; i < frame_dets.size(); ++i)
                    lambdas[i] = instance_prob(*selector_, det_feats[i], trk_feats);
                kept = select_instances(frame_dets, lambdas, selector_->config);
                for (std::size_t i = 0; i < frame_dets.size(); ++i)
                    if (lambdas[i] <= selector_->config.lambda_thres)
                        result.filtered.push_back({frame, i, frame_dets[i].score, lambdas[i]});
                break;
            }
        }

        // Canonical survivor order makes the step invariant to the input
        // order of the frame's detections.
        std::sort(kept.begin(), kept.end(), [&](std::size_t a, std::size_t b) {
            const Detection &da = frame_dets[a], &db = frame_dets[b];
            if (da.score != db.score) return da.score > db.score;
            const auto ka = std::tie(da.box.x, da.box.y, da.box.z, da.box.theta, da.box.l, da.box.w, da.box.h);
            const auto kb = std::tie(db.box.x, db.box.y, db.box.z, db.box.theta, db.box.l, db.box.w, db.box.h);
            return ka < kb;
        });

        std::vector<Detection> survivors;
        std::vector<FeatureVec> surv_feats;
        for (std::size_t idx : kept) {
            survivors.push_back(frame_dets[idx]);
            if (needs_features) surv_feats.push_back(det_feats[idx]);
        }

        // Affinity over survivors, solved as a gated assignment.
        AffinityMatrix aff;
        if (cfg_.association == TrackerConfig::Association::FeatureAffinity)
            aff = affinity_feature(*assoc_, trk_feats, surv_feats);
        else
            aff = affinity_iou(tracklets_, survivors);

        std::vector<int> det_to_track(survivors.size(), -1);  // tracklet index
        std::vector<char> trk_matched(tracklets_.size(), 0);
        const double gate = cfg_.gate();
        if (cfg_.association == TrackerConfig::Association::GreedyBaseline) {
            struct Cand {
                double a;
                std::size_t t, d;
            };
            std::vector<Cand> cands;
            for (std::size_t t = 0; t < aff.rows; ++t)
                for (std::size_t d = 0; d < aff.cols; ++d)
                    if (aff(t, d) >= gate) cands.push_back({aff(t, d), t, d});
            std::stable_sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
                if (x.a != y.a) return x.a > y.a;
                return std::tie(x.t, x.d) < std::tie(y.t, y.d);
            });
            for (const Cand& c : cands)
                if (!trk_matched[c.t] && det_to_track[c.d] < 0) {
                    trk_matched[c.t] = 1;
                    det_to_track[c.d] = static_cast<int>(c.t);
                }
        } else {
            CostMatrix cost(aff.rows, aff.cols, kForbidden);
            for (std::size_t t = 0; t < aff.rows; ++t)
                for (std::size_t d = 0; d < aff.cols; ++d)
                    if (aff(t, d) >= gate) cost(t, d) = -aff(t, d);
            for (const auto& [t, d] : hungarian(cost).pairs) {
                trk_matched[t] = 1;
                det_to_track[d] = static_cast<int>(t);
            }
        }

        // Lifecycle updates.
        for (std::size_t d = 0; d < survivors.size(); ++d) {
            if (det_to_track[d] < 0) continue;
            Tracklet& t = tracklets_[static_cast<std::size_t>(det_to_track[d])];
            t.history.push_back({survivors[d].box, survivors[d].score});
            while (static_cast<int>(t.history.size()) > cfg_.history_len) t.history.pop_front();
            ++t.hits;
            t.misses = 0;
            if (t.hits >= cfg_.min_hits) t.state = Tracklet::State::Confirmed;
            t.score_sum += survivors[d].score;
            ++t.score_count;
            result.assignments.emplace_back(t.id, kept[d]);
        }
        for (std::size_t t = 0; t < tracklets_.size(); ++t) {
            if (trk_matched[t]) continue;
            Tracklet& trk = tracklets_[t];
            ++trk.misses;
            if (trk.misses >= cfg_.max_age) trk.state = Tracklet::State::Dead;
        }

        // Outputs before births: a track reports on frames it was matched,
        // once confirmed or during the early-sequence grace window.
        for (std::size_t d = 0; d < survivors.size(); ++d) {
            if (det_to_track[d] < 0) continue;
            const Tracklet& t = tracklets_[static_cast<std::size_t>(det_to_track[d])];
            if (t.state == Tracklet::State::Confirmed || frame < cfg_.min_hits)
                result.outputs.push_back({survivors[d].box, t.id, t.confidence(), survivors[d].score});
        }

        // Births from unmatched survivors, in canonical order.
        for (std::size_t d = 0; d < survivors.size(); ++d) {
            if (det_to_track[d] >= 0) continue;
            Tracklet t;
            t.id = next_id_++;
            t.history.push_back({survivors[d].box, survivors[d].score});
            t.hits = 1;
            t.misses = 0;
            t.state = cfg_.min_hits <= 1 ? Tracklet::State::Confirmed : Tracklet::State::Tentative;
            t.score_sum = survivors[d].score;
            t.score_count = 1;
            if (t.state == Tracklet::State::Confirmed || frame < cfg_.min_hits)
                result.outputs.push_back({survivors[d].box, t.id, t.confidence(), survivors[d].score});
            result.assignments.emplace_back(t.id, kept[d]);
            tracklets_.push_back(std::move(t));
        }

        // Drop the dead.
        tracklets_.erase(std::remove_if(tracklets_.begin(), tracklets_.end(),
                                        [](const Tracklet& t) {
                                            return t.state == Tracklet::State::Dead;
                                        }),
                         tracklets_.end());
        return result;
    }

private:
    TrackerConfig cfg_;
    const SelectorModel* selector_;
    const AssociationModel* assoc_;
    std::vector<Tracklet> tracklets_;
    int frame_index_ = 0;
    int next_id_ = 1;
};

struct TrackResult {
    HypFrames frames;                          // reported boxes per frame
    std::vector<FilteredDetection> filtered;   // selection diagnostics
    std::vector<double> tau_hats;              // per frame (frame mode)
};

// Runs the full loop over an ordered sequence of frames. Every reported box
// of a track carries the track's whole-life confidence (mean of associated
// detection scores), which is what the recall sweep filters on.
inline TrackResult run_sequence(const std::vector<std::vector<Detection>>& frames,
                                const TrackerConfig& cfg,
                                const SelectorModel* selector = nullptr,
                                const AssociationModel* assoc = nullptr) {
    Tracker tracker(cfg, selector, assoc);
    TrackResult out;
    std::map<int, std::pair<double, long>> score_acc;  // id -> (sum, count)
    for (const auto& dets : frames) {
        StepResult step = tracker.step(dets);
        std::vector<HypBox> boxes;
        for (const TrackedBox& t : step.outputs) {
            boxes.push_back({t.box, t.id, 0.0});
            auto& acc = score_acc[t.id];
            acc.first += t.det_score;
            acc.second += 1;
        }
        out.frames.push_back(std::move(boxes));
        out.filtered.insert(out.filtered.end(), step.filtered.begin(), step.filtered.end());
        out.tau_hats.push_back(step.tau_hat);
    }
    for (auto& frame : out.frames)
        for (HypBox& h : frame) {
            const auto& acc = score_acc[h.id];
            h.confidence = acc.first / static_cast<double>(acc.second);
        }
    return out;
}

}  // namespace motkit
