#pragma once

// Supervised training of the selector heads and the association network.
// Losses are summed with configurable weights over the shared encoder, so
// selection is optimized jointly with association rather than as a frozen
// pre-processing step.

#include <algorithm>
#include <map>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include "motkit/neural.hpp"
#include "motkit/selection.hpp"
#include "motkit/simulator.hpp"
#include "motkit/tracker.hpp"

namespace motkit {

struct TrainConfig {
    double learning_rate = 1e-3;
    int batch_size = 32;  // frames per optimizer step
    int epochs = 200;
    enum class Optimizer { Sgd, Adam };
    Optimizer optimizer = Optimizer::Sgd;
    std::uint64_t seed = 0;
    double selection_loss_weight = 1.0;
    double affinity_loss_weight = 1.0;

    bool valid() const {
        return learning_rate >= 0.0 && batch_size >= 1 && epochs >= 0 &&
               selection_loss_weight >= 0.0 && affinity_loss_weight >= 0.0;
    }
};

struct DivergenceDetected : std::runtime_error {
    DivergenceDetected() : std::runtime_error("training loss became non-finite") {}
};

// One supervised frame, already reduced to raw encoder inputs. Tracklet
// inputs are oracle tracklets rebuilt from earlier TP detections.
struct TrainingFrame {
    std::vector<FeatureVec> det_inputs;
    std::vector<FeatureVec> tracklet_inputs;
    std::vector<int> tracklet_gt_ids;
    bool has_tau = false;  // false for frames with no TP (excluded from regression)
    double tau_target = 0.0;
    std::vector<double> lambda_targets;
    std::vector<double> correspondence;  // tracklets x dets, row-major
    bool has_correspondence = false;
};

// Rebuilds per-frame training inputs from labeled simulator output. The
// tracklet proxy for a GT id holds its TP detections from the preceding
// history window, most recent first.
inline std::vector<TrainingFrame> build_training_frames(const std::vector<LabeledFrame>& labeled,
                                                        int history_len) {
    std::vector<TrainingFrame> out;
    // gt id -> recent TP detections (newest back), maintained over frames
    std::map<int, std::vector<HistoryEntry>> tracks;
    std::map<int, int> last_seen;

    for (const LabeledFrame& lf : labeled) {
        TrainingFrame tf;
        tf.has_tau = !lf.tau_fallback;
        tf.tau_target = lf.oracle_tau;
        tf.lambda_targets = lf.lambda_labels;
        for (const Detection& d : lf.dets)
            tf.det_inputs.push_back(encoder_input(d.box, d.score, {}, history_len));

        for (const auto& [gt_id, entries] : tracks) {
            if (entries.empty()) continue;
            if (lf.frame - last_seen[gt_id] > history_len) continue;  // stale
            std::vector<HistoryEntry> past(entries.rbegin() + 1, entries.rend());
            tf.tracklet_inputs.push_back(
                encoder_input(entries.back().box, entries.back().score, past, history_len));
            tf.tracklet_gt_ids.push_back(gt_id);
        }
        if (!tf.tracklet_gt_ids.empty() && !lf.dets.empty()) {
            tf.correspondence.assign(tf.tracklet_gt_ids.size() * lf.dets.size(), 0.0);
            for (std::size_t t = 0; t < tf.tracklet_gt_ids.size(); ++t)
                for (std::size_t d = 0; d < lf.dets.size(); ++d)
                    if (lf.det_gt_id[d] == tf.tracklet_gt_ids[t])
                        tf.correspondence[t * lf.dets.size() + d] = 1.0;
            tf.has_correspondence = true;
        }
        out.push_back(std::move(tf));

        // Advance oracle tracks with this frame's TP detections.
        for (std::size_t d = 0; d < lf.dets.size(); ++d) {
            if (lf.det_gt_id[d] < 0) continue;
            auto& entries = tracks[lf.det_gt_id[d]];
            entries.push_back({lf.dets[d].box, lf.dets[d].score});
            if (static_cast<int>(entries.size()) > history_len) entries.erase(entries.begin());
            last_seen[lf.det_gt_id[d]] = lf.frame;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Differentiable passes. Each returns the loss and accumulates parameter
// gradients; the gradient-check suite drives these directly.

// Frame mode: L2(trunk(maxpool(encoder(every object))), tau_target). The
// weight scales the accumulated gradients; the returned loss is unweighted.
inline double frame_loss_pass(const SelectorModel& model, const TrainingFrame& fr,
                              MlpGrads& enc_g, MlpGrads& trunk_g, double weight = 1.0) {
    const std::size_t n = fr.det_inputs.size() + fr.tracklet_inputs.size();
    if (n == 0) return 0.0;
    std::vector<Mlp::Tape> tapes(n);
    std::vector<FeatureVec> feats;
    feats.reserve(n);
    std::size_t k = 0;
    for (const FeatureVec& x : fr.det_inputs) feats.push_back(model.encoder.forward(x, &tapes[k++]));
    for (const FeatureVec& x : fr.tracklet_inputs)
        feats.push_back(model.encoder.forward(x, &tapes[k++]));

    const MaxPoolResult pool = maxpool_set(feats);
    Mlp::Tape trunk_tape;
    const double tau_hat = model.trunk.forward(pool.pooled, &trunk_tape)[0];
    const double loss = l2_loss(tau_hat, fr.tau_target);

    const FeatureVec dpool = mlp_backward(
        model.trunk, trunk_tape, {weight * l2_loss_grad(tau_hat, fr.tau_target)}, trunk_g);
    std::vector<FeatureVec> dfeats(n, FeatureVec(static_cast<std::size_t>(model.feature_len), 0.0));
    maxpool_backward(pool, dpool, dfeats);
    for (std::size_t i = 0; i < n; ++i) {
        bool zero = true;
        for (double v : dfeats[i])
            if (v != 0.0) {
                zero = false;
                break;
            }
        if (!zero) mlp_backward(model.encoder, tapes[i], dfeats[i], enc_g);
    }
    return loss;
}

// Instance mode: mean over detections of BCE(sigmoid(trunk(concat(det_feat,
// maxpool(tracklet_feats)))), lambda). The pooled context is shared across
// the frame's detections.
inline double instance_loss_pass(const SelectorModel& model, const TrainingFrame& fr,
                                 MlpGrads& enc_g, MlpGrads& trunk_g, double weight = 1.0) {
    const std::size_t nd = fr.det_inputs.size();
    if (nd == 0) return 0.0;
    const std::size_t nt = fr.tracklet_inputs.size();
    const std::size_t F = static_cast<std::size_t>(model.feature_len);

    std::vector<Mlp::Tape> trk_tapes(nt);
    std::vector<FeatureVec> trk_feats;
    for (std::size_t t = 0; t < nt; ++t)
        trk_feats.push_back(model.encoder.forward(fr.tracklet_inputs[t], &trk_tapes[t]));
    MaxPoolResult pool;
    FeatureVec ctx(F, 0.0);
    if (nt > 0) {
        pool = maxpool_set(trk_feats);
        ctx = pool.pooled;
    }

    double loss = 0.0;
    FeatureVec dctx(F, 0.0);
    for (std::size_t d = 0; d < nd; ++d) {
        Mlp::Tape det_tape;
        const FeatureVec det_feat = model.encoder.forward(fr.det_inputs[d], &det_tape);
        FeatureVec in(2 * F, 0.0);
        std::copy(det_feat.begin(), det_feat.end(), in.begin());
        std::copy(ctx.begin(), ctx.end(), in.begin() + static_cast<long>(F));
        Mlp::Tape trunk_tape;
        const double logit = model.trunk.forward(in, &trunk_tape)[0];
        loss += bce_with_logits(logit, fr.lambda_targets[d]);

        const double dlogit = weight * bce_with_logits_grad(logit, fr.lambda_targets[d]) /
                              static_cast<double>(nd);
        const FeatureVec din = mlp_backward(model.trunk, trunk_tape, {dlogit}, trunk_g);
        const FeatureVec ddet(din.begin(), din.begin() + static_cast<long>(F));
        mlp_backward(model.encoder, det_tape, ddet, enc_g);
        for (std::size_t i = 0; i < F; ++i) dctx[i] += din[F + i];
    }
    if (nt > 0) {
        std::vector<FeatureVec> dtrk(nt, FeatureVec(F, 0.0));
        maxpool_backward(pool, dctx, dtrk);
        for (std::size_t t = 0; t < nt; ++t) {
            bool zero = true;
            for (double v : dtrk[t])
                if (v != 0.0) {
                    zero = false;
                    break;
                }
            if (!zero) mlp_backward(model.encoder, trk_tapes[t], dtrk[t], enc_g);
        }
    }
    return loss / static_cast<double>(nd);
}

// Association supervision: mean BCE between the edge scores and the GT
// correspondence matrix, backpropagated through the message-passing round
// and the shared encoder.
inline double affinity_loss_pass(const SelectorModel& model, const AssociationModel& assoc,
                                 const TrainingFrame& fr, MlpGrads& enc_g, MlpGrads& node_g,
                                 MlpGrads& edge_g, double weight = 1.0) {
    const std::size_t nt = fr.tracklet_inputs.size();
    const std::size_t nd = fr.det_inputs.size();
    if (!fr.has_correspondence || nt == 0 || nd == 0) return 0.0;
    const std::size_t F = static_cast<std::size_t>(model.feature_len);

    std::vector<Mlp::Tape> trk_tapes(nt), det_tapes(nd);
    std::vector<FeatureVec> trk_feats, det_feats;
    for (std::size_t t = 0; t < nt; ++t)
        trk_feats.push_back(model.encoder.forward(fr.tracklet_inputs[t], &trk_tapes[t]));
    for (std::size_t d = 0; d < nd; ++d)
        det_feats.push_back(model.encoder.forward(fr.det_inputs[d], &det_tapes[d]));

    const FeatureVec det_mean = detail::mean_of(det_feats, model.feature_len);
    const FeatureVec trk_mean = detail::mean_of(trk_feats, model.feature_len);

    std::vector<Mlp::Tape> unode_trk_tapes(nt), unode_det_tapes(nd);
    std::vector<FeatureVec> u_trk(nt), u_det(nd);
    for (std::size_t t = 0; t < nt; ++t)
        u_trk[t] = assoc.node.forward(detail::concat(trk_feats[t], det_mean), &unode_trk_tapes[t]);
    for (std::size_t d = 0; d < nd; ++d)
        u_det[d] = assoc.node.forward(detail::concat(det_feats[d], trk_mean), &unode_det_tapes[d]);

    const double npairs = static_cast<double>(nt * nd);
    double loss = 0.0;
    std::vector<FeatureVec> du_trk(nt, FeatureVec(F, 0.0)), du_det(nd, FeatureVec(F, 0.0));
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t d = 0; d < nd; ++d) {
            Mlp::Tape edge_tape;
            const double logit =
                assoc.edge.forward(detail::concat(u_trk[t], u_det[d]), &edge_tape)[0];
            const double target = fr.correspondence[t * nd + d];
            loss += bce_with_logits(logit, target);
            const double dlogit = weight * bce_with_logits_grad(logit, target) / npairs;
            const FeatureVec dpair = mlp_backward(assoc.edge, edge_tape, {dlogit}, edge_g);
            for (std::size_t i = 0; i < F; ++i) {
                du_trk[t][i] += dpair[i];
                du_det[d][i] += dpair[F + i];
            }
        }

    std::vector<FeatureVec> dfeat_trk(nt, FeatureVec(F, 0.0)), dfeat_det(nd, FeatureVec(F, 0.0));
    FeatureVec ddet_mean(F, 0.0), dtrk_mean(F, 0.0);
    for (std::size_t t = 0; t < nt; ++t) {
        const FeatureVec din = mlp_backward(assoc.node, unode_trk_tapes[t], du_trk[t], node_g);
        for (std::size_t i = 0; i < F; ++i) {
            dfeat_trk[t][i] += din[i];
            ddet_mean[i] += din[F + i];
        }
    }
    for (std::size_t d = 0; d < nd; ++d) {
        const FeatureVec din = mlp_backward(assoc.node, unode_det_tapes[d], du_det[d], node_g);
        for (std::size_t i = 0; i < F; ++i) {
            dfeat_det[d][i] += din[i];
            dtrk_mean[i] += din[F + i];
        }
    }
    // Mean aggregation distributes uniformly.
    for (std::size_t d = 0; d < nd; ++d)
        for (std::size_t i = 0; i < F; ++i)
            dfeat_det[d][i] += ddet_mean[i] / static_cast<double>(nd);
    for (std::size_t t = 0; t < nt; ++t)
        for (std::size_t i = 0; i < F; ++i)
            dfeat_trk[t][i] += dtrk_mean[i] / static_cast<double>(nt);

    for (std::size_t t = 0; t < nt; ++t) mlp_backward(model.encoder, trk_tapes[t], dfeat_trk[t], enc_g);
    for (std::size_t d = 0; d < nd; ++d) mlp_backward(model.encoder, det_tapes[d], dfeat_det[d], enc_g);
    return loss / npairs;
}

struct TrainResult {
    std::vector<double> loss_curve;  // mean weighted loss per epoch
};

// Mini-batch training of the selector (and optionally the association
// network) over labeled frames. Weighted losses share the encoder.
inline TrainResult train(SelectorModel& model, AssociationModel* assoc,
                         const std::vector<TrainingFrame>& data, const TrainConfig& cfg) {
    if (!cfg.valid()) throw std::invalid_argument("TrainConfig: invalid");

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const TrainingFrame& fr = data[i];
        const bool sel_ok = model.mode == SelectorMode::Frame
                                ? fr.has_tau && fr.det_inputs.size() + fr.tracklet_inputs.size() > 0
                                : !fr.det_inputs.empty();
        if (sel_ok) usable.push_back(i);
    }
    if (usable.empty()) throw std::invalid_argument("train: no usable frames in dataset");

    MlpGrads enc_g(model.encoder), trunk_g(model.trunk);
    std::vector<Mlp*> nets = {&model.encoder, &model.trunk};
    std::vector<MlpGrads*> grads = {&enc_g, &trunk_g};
    std::unique_ptr<MlpGrads> node_g, edge_g;
    if (assoc) {
        node_g = std::make_unique<MlpGrads>(assoc->node);
        edge_g = std::make_unique<MlpGrads>(assoc->edge);
        nets.push_back(&assoc->node);
        nets.push_back(&assoc->edge);
        grads.push_back(node_g.get());
        grads.push_back(edge_g.get());
    }

    SgdOptimizer sgd{cfg.learning_rate};
    AdamOptimizer adam;
    adam.lr = cfg.learning_rate;

    std::mt19937_64 rng(cfg.seed);
    TrainResult result;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = usable;
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            for (MlpGrads* g : grads) g->zero();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const TrainingFrame& fr = data[order[k]];
                double frame_loss = 0.0;
                if (cfg.selection_loss_weight > 0.0) {
                    const double w = cfg.selection_loss_weight;
                    const double sel = model.mode == SelectorMode::Frame
                                           ? frame_loss_pass(model, fr, enc_g, trunk_g, w)
                                           : instance_loss_pass(model, fr, enc_g, trunk_g, w);
                    frame_loss += w * sel;
                }
                if (assoc && cfg.affinity_loss_weight > 0.0)
                    frame_loss += cfg.affinity_loss_weight *
                                  affinity_loss_pass(model, *assoc, fr, enc_g, *node_g, *edge_g,
                                                     cfg.affinity_loss_weight);
                batch_loss += frame_loss;
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (MlpGrads* g : grads) g->scale(inv);
            // Loss weights scale the gradients through the summed loss; the
            // optimizer consumes the already-weighted average.
            if (cfg.optimizer == TrainConfig::Optimizer::Sgd)
                sgd.step(nets, grads);
            else
                adam.step(nets, grads);
            epoch_loss += batch_loss;
        }
        epoch_loss /= static_cast<double>(order.size());
        if (!std::isfinite(epoch_loss)) throw DivergenceDetected{};
        result.loss_curve.push_back(epoch_loss);
    }
    return result;
}

}  // namespace motkit
