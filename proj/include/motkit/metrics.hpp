#pragma once

// CLEAR MOT counters and the confidence-sweep sAMOTA/AMOTA/AMOTP family.

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "motkit/assignment.hpp"
#include "motkit/geometry.hpp"

namespace motkit {

// A ground-truth box with a persistent identity.
struct GtBox {
    Box3D box;
    int id = 0;
};

// A tracker hypothesis box; confidence is the track-level score used by
// the recall sweep.
struct HypBox {
    Box3D box;
    int id = 0;
    double confidence = 0.0;
};

using GtFrames = std::vector<std::vector<GtBox>>;
using HypFrames = std::vector<std::vector<HypBox>>;

struct EmptyGroundTruth : std::runtime_error {
    EmptyGroundTruth() : std::runtime_error("metrics: no ground-truth boxes") {}
};

// Raw CLEAR counters; sequences merge by summation.
struct ClearCounts {
    long tp = 0, fp = 0, fn = 0, ids = 0, frag = 0;
    long num_gt = 0;
    double overlap_sum = 0.0;  // sum of match quality over TP pairs

    ClearCounts& operator+=(const ClearCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        ids += o.ids;
        frag += o.frag;
        num_gt += o.num_gt;
        overlap_sum += o.overlap_sum;
        return *this;
    }
};

struct MetricsReport {
    double samota = 0.0, amota = 0.0, amotp = 0.0;
    double mota = 0.0, motp = 0.0;
    long ids = 0, frag = 0, fp = 0, fn = 0, tp = 0;
    long num_gt = 0;
    double recall = 0.0;
};

namespace detail {

// Match quality in [0, 1], higher is better for both criteria.
inline double match_quality(const MatchCriterion& c, double gate_value) {
    return c.kind == MatchCriterion::Kind::Iou3d ? gate_value
                                                 : 1.0 - gate_value / c.threshold;
}

}  // namespace detail

// Per-frame gated optimal matching with continuity preference: pairs matched
// in the previous frame are kept whenever they still satisfy the gate, and
// the solver only runs on the remainder.
inline ClearCounts clear_counts(const HypFrames& hyps, const GtFrames& gts,
                                const MatchCriterion& criterion) {
    const std::size_t frames = std::max(hyps.size(), gts.size());
    ClearCounts out;

    std::map<int, int> prev_match;     // gt id -> hyp id matched in previous frame
    std::map<int, int> last_match;     // gt id -> hyp id at last successful match
    std::set<int> gap_open;            // gt ids in an interruption (present but unmatched)

    for (std::size_t f = 0; f < frames; ++f) {
        static const std::vector<GtBox> no_gt;
        static const std::vector<HypBox> no_hyp;
        const std::vector<GtBox>& gt = f < gts.size() ? gts[f] : no_gt;
        const std::vector<HypBox>& hyp = f < hyps.size() ? hyps[f] : no_hyp;
        out.num_gt += static_cast<long>(gt.size());

        std::vector<char> gt_done(gt.size(), 0), hyp_done(hyp.size(), 0);
        std::vector<std::pair<std::size_t, std::size_t>> matches;  // (gt idx, hyp idx)

        // Continuity: re-apply still-valid previous-frame pairs.
        for (std::size_t g = 0; g < gt.size(); ++g) {
            const auto it = prev_match.find(gt[g].id);
            if (it == prev_match.end()) continue;
            for (std::size_t h = 0; h < hyp.size(); ++h) {
                if (hyp_done[h] || hyp[h].id != it->second) continue;
                const double gate = criterion.gate(gt[g].box, hyp[h].box);
                if (!std::isnan(gate)) {
                    gt_done[g] = hyp_done[h] = 1;
                    matches.emplace_back(g, h);
                }
                break;
            }
        }

        // Optimal gated matching over the remainder.
        std::vector<std::size_t> grem, hrem;
        for (std::size_t g = 0; g < gt.size(); ++g)
            if (!gt_done[g]) grem.push_back(g);
        for (std::size_t h = 0; h < hyp.size(); ++h)
            if (!hyp_done[h]) hrem.push_back(h);
        if (!grem.empty() && !hrem.empty()) {
            CostMatrix cost(grem.size(), hrem.size(), kForbidden);
            for (std::size_t i = 0; i < grem.size(); ++i)
                for (std::size_t j = 0; j < hrem.size(); ++j) {
                    const double gate = criterion.gate(gt[grem[i]].box, hyp[hrem[j]].box);
                    if (!std::isnan(gate)) cost(i, j) = criterion.cost(gate);
                }
            for (const auto& [i, j] : hungarian(cost).pairs) matches.emplace_back(grem[i], hrem[j]);
        }

        std::map<int, int> cur_match;
        std::vector<char> gt_matched(gt.size(), 0), hyp_matched(hyp.size(), 0);
        for (const auto& [g, h] : matches) {
            gt_matched[g] = 1;
            hyp_matched[h] = 1;
            ++out.tp;
            const double gate = criterion.gate(gt[g].box, hyp[h].box);
            out.overlap_sum += detail::match_quality(criterion, gate);

            const int gid = gt[g].id, hid = hyp[h].id;
            const auto last = last_match.find(gid);
            if (last != last_match.end() && last->second != hid) ++out.ids;
            if (gap_open.count(gid)) {
                ++out.frag;
                gap_open.erase(gid);
            }
            last_match[gid] = hid;
            cur_match[gid] = hid;
        }
        for (std::size_t g = 0; g < gt.size(); ++g)
            if (!gt_matched[g]) {
                ++out.fn;
                if (last_match.count(gt[g].id)) gap_open.insert(gt[g].id);
            }
        for (std::size_t h = 0; h < hyp.size(); ++h)
            if (!hyp_matched[h]) ++out.fp;
        prev_match = std::move(cur_match);
    }
    return out;
}

inline MetricsReport report_from_counts(const ClearCounts& c) {
    if (c.num_gt == 0) throw EmptyGroundTruth{};
    MetricsReport r;
    r.tp = c.tp;
    r.fp = c.fp;
    r.fn = c.fn;
    r.ids = c.ids;
    r.frag = c.frag;
    r.num_gt = c.num_gt;
    r.mota = 1.0 - static_cast<double>(c.fp + c.fn + c.ids) / static_cast<double>(c.num_gt);
    r.motp = c.tp > 0 ? c.overlap_sum / static_cast<double>(c.tp) : 0.0;
    r.recall = static_cast<double>(c.tp) / static_cast<double>(c.num_gt);
    return r;
}

inline MetricsReport clear_metrics(const HypFrames& hyps, const GtFrames& gts,
                                   const MatchCriterion& criterion) {
    return report_from_counts(clear_counts(hyps, gts, criterion));
}

// Independent sequences merge by counter summation; continuity state never
// crosses a sequence boundary.
inline MetricsReport clear_metrics_multi(const std::vector<HypFrames>& hyps,
                                         const std::vector<GtFrames>& gts,
                                         const MatchCriterion& criterion) {
    if (hyps.size() != gts.size())
        throw std::invalid_argument("clear_metrics_multi: sequence count mismatch");
    ClearCounts total;
    for (std::size_t s = 0; s < gts.size(); ++s) total += clear_counts(hyps[s], gts[s], criterion);
    return report_from_counts(total);
}

namespace detail {

inline HypFrames filter_by_confidence(const HypFrames& hyps, double cutoff) {
    HypFrames out(hyps.size());
    for (std::size_t f = 0; f < hyps.size(); ++f)
        for (const HypBox& h : hyps[f])
            if (h.confidence >= cutoff) out[f].push_back(h);
    return out;
}

struct SweepPoint {
    double cutoff = 0.0;
    double recall = 0.0;
    double mota = 0.0;   // clamped at 0
    double smota = 0.0;  // scaled, clamped at 0
    double motp = 0.0;
};

}  // namespace detail

// Confidence sweep: every distinct track confidence is evaluated as a
// cutoff; each of the L evenly spaced recall targets then picks the cutoff
// with the nearest achieved recall (ties toward higher recall, then higher
// cutoff). Unreachable targets contribute zero.
inline MetricsReport amota_suite_multi(const std::vector<HypFrames>& hyps,
                                       const std::vector<GtFrames>& gts,
                                       const MatchCriterion& criterion, int recall_steps = 40) {
    if (hyps.size() != gts.size())
        throw std::invalid_argument("amota_suite_multi: sequence count mismatch");
    long num_gt = 0;
    for (const auto& seq : gts)
        for (const auto& frame : seq) num_gt += static_cast<long>(frame.size());
    if (num_gt == 0) throw EmptyGroundTruth{};

    std::set<double> cutoffs;
    for (const auto& seq : hyps)
        for (const auto& frame : seq)
            for (const HypBox& h : frame) cutoffs.insert(h.confidence);

    std::vector<detail::SweepPoint> points;
    for (const double c : cutoffs) {
        ClearCounts cc;
        for (std::size_t s = 0; s < hyps.size(); ++s)
            cc += clear_counts(detail::filter_by_confidence(hyps[s], c), gts[s], criterion);
        detail::SweepPoint p;
        p.cutoff = c;
        p.recall = static_cast<double>(cc.tp) / static_cast<double>(num_gt);
        p.mota = std::max(0.0, 1.0 - static_cast<double>(cc.fp + cc.fn + cc.ids) /
                                         static_cast<double>(num_gt));
        p.motp = cc.tp > 0 ? cc.overlap_sum / static_cast<double>(cc.tp) : 0.0;
        if (p.recall > 0.0) {
            const double r = p.recall;
            p.smota = std::max(
                0.0, 1.0 - (static_cast<double>(cc.fp + cc.ids + cc.fn) -
                            (1.0 - r) * static_cast<double>(num_gt)) /
                               (r * static_cast<double>(num_gt)));
        }
        points.push_back(p);
    }

    MetricsReport r = clear_metrics_multi(hyps, gts, criterion);
    r.samota = r.amota = r.amotp = 0.0;
    double best_recall = 0.0;
    for (const auto& p : points) best_recall = std::max(best_recall, p.recall);
    r.recall = best_recall;

    if (!points.empty()) {
        for (int i = 1; i <= recall_steps; ++i) {
            const double target = static_cast<double>(i) / recall_steps;
            const detail::SweepPoint* best = nullptr;
            for (const auto& p : points) {
                if (!best) {
                    best = &p;
                    continue;
                }
                const double d = std::fabs(p.recall - target);
                const double bd = std::fabs(best->recall - target);
                if (d < bd || (d == bd && (p.recall > best->recall ||
                                           (p.recall == best->recall && p.cutoff > best->cutoff))))
                    best = &p;
            }
            r.amota += best->mota;
            r.samota += best->smota;
            r.amotp += best->motp;
        }
        r.amota /= recall_steps;
        r.samota /= recall_steps;
        r.amotp /= recall_steps;
    }
    return r;
}

inline MetricsReport amota_suite(const HypFrames& hyps, const GtFrames& gts,
                                 const MatchCriterion& criterion, int recall_steps = 40) {
    return amota_suite_multi({hyps}, {gts}, criterion, recall_steps);
}

}  // namespace motkit
