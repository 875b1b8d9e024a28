#pragma once

// Optimal bipartite assignment (Jonker-Volgenant style shortest augmenting
// paths) plus detection <-> ground-truth matching used for TP/FP labeling.

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "motkit/detection.hpp"
#include "motkit/geometry.hpp"

namespace motkit {

inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

// Rectangular cost matrix; +inf marks a forbidden pair.
class CostMatrix {
public:
    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> data_;
};

struct Assignment {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::size_t> unmatched_rows;
    std::vector<std::size_t> unmatched_cols;
    double total_cost = 0.0;
};

namespace detail {

// Square minimization solver over potentials; cost must be finite.
// Returns row -> col.
inline std::vector<int> solve_square(const std::vector<double>& cost, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
        std::vector<char> used(static_cast<size_t>(n) + 1, 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            const int i0 = p[static_cast<size_t>(j0)];
            int j1 = 0;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const double cur = cost[static_cast<size_t>(i0 - 1) * n + (j - 1)] -
                                   u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<size_t>(j)] != 0) row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

}  // namespace detail

// Minimum-total-cost maximum matching over the finite entries. Forbidden
// (+inf) pairs are never selected; rows/cols left over are reported
// unmatched. Empty matrices yield an empty assignment.
inline Assignment hungarian(const CostMatrix& c) {
    Assignment out;
    const std::size_t m = c.rows(), n = c.cols();
    if (m == 0 || n == 0) {
        for (std::size_t r = 0; r < m; ++r) out.unmatched_rows.push_back(r);
        for (std::size_t j = 0; j < n; ++j) out.unmatched_cols.push_back(j);
        return out;
    }

    const std::size_t dim = std::max(m, n);
    double max_abs = 0.0;
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j) {
            const double e = c(r, j);
            if (std::isfinite(e)) max_abs = std::max(max_abs, std::fabs(e));
        }
    // Large enough that one sentinel edge outweighs any all-finite saving,
    // so the solver maximizes the number of finite matches first.
    const double big = (2.0 * static_cast<double>(dim) + 1.0) * (max_abs + 1.0);

    std::vector<double> padded(dim * dim, big);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t j = 0; j < n; ++j)
            if (std::isfinite(c(r, j))) padded[r * dim + j] = c(r, j);

    const std::vector<int> row_to_col = detail::solve_square(padded, static_cast<int>(dim));

    std::vector<char> col_used(n, 0);
    for (std::size_t r = 0; r < m; ++r) {
        const int j = row_to_col[r];
        if (j >= 0 && static_cast<std::size_t>(j) < n && std::isfinite(c(r, static_cast<std::size_t>(j)))) {
            out.pairs.emplace_back(r, static_cast<std::size_t>(j));
            out.total_cost += c(r, static_cast<std::size_t>(j));
            col_used[static_cast<std::size_t>(j)] = 1;
        } else {
            out.unmatched_rows.push_back(r);
        }
    }
    for (std::size_t j = 0; j < n; ++j)
        if (!col_used[j]) out.unmatched_cols.push_back(j);
    return out;
}

// Matching criterion shared by TP/FP labeling and metric evaluation.
struct MatchCriterion {
    enum class Kind { Iou3d, CenterDistance };
    Kind kind = Kind::Iou3d;
    double threshold = 0.25;  // IoU_min, or Dist_thres in meters

    static MatchCriterion iou3d(double iou_min) { return {Kind::Iou3d, iou_min}; }
    static MatchCriterion center_distance(double dist) { return {Kind::CenterDistance, dist}; }

    // Gate value, higher = better match; NaN if the pair fails the gate.
    double gate(const Box3D& a, const Box3D& b) const {
        if (kind == Kind::Iou3d) {
            const double v = iou_3d(a, b);
            return v >= threshold ? v : std::numeric_limits<double>::quiet_NaN();
        }
        const double d = ::motkit::center_distance(a, b);
        return d <= threshold ? d : std::numeric_limits<double>::quiet_NaN();
    }

    // Cost for the assignment solver (minimization).
    double cost(double gate_value) const {
        return kind == Kind::Iou3d ? -gate_value : gate_value;
    }
};

struct TpFpLabels {
    std::vector<bool> det_is_tp;            // per detection
    std::vector<bool> gt_matched;           // per ground-truth box
    std::vector<int> det_gt_index;          // matched GT index, -1 for FP
    std::vector<double> det_overlap;        // gate value for TPs, NaN for FPs
    std::size_t tp_count = 0, fp_count = 0, missed_count = 0;
};

// Globally optimal gated matching between detections and GT boxes.
// Pairs failing the criterion are forbidden up front, so every returned
// match satisfies the gate.
inline TpFpLabels match_tp_fp(const std::vector<Detection>& dets,
                              const std::vector<Box3D>& gts,
                              const MatchCriterion& criterion) {
    if (criterion.threshold <= 0.0)
        throw std::invalid_argument("match_tp_fp: criterion threshold must be positive");
    const std::size_t nd = dets.size(), ng = gts.size();
    CostMatrix cost(nd, ng, kForbidden);
    std::vector<double> gate_vals(nd * ng, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < nd; ++i)
        for (std::size_t j = 0; j < ng; ++j) {
            const double g = criterion.gate(dets[i].box, gts[j]);
            if (!std::isnan(g)) {
                cost(i, j) = criterion.cost(g);
                gate_vals[i * ng + j] = g;
            }
        }
    const Assignment a = hungarian(cost);

    TpFpLabels labels;
    labels.det_is_tp.assign(nd, false);
    labels.gt_matched.assign(ng, false);
    labels.det_gt_index.assign(nd, -1);
    labels.det_overlap.assign(nd, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [r, c] : a.pairs) {
        labels.det_is_tp[r] = true;
        labels.gt_matched[c] = true;
        labels.det_gt_index[r] = static_cast<int>(c);
        labels.det_overlap[r] = gate_vals[r * ng + c];
    }
    for (std::size_t i = 0; i < nd; ++i) labels.det_is_tp[i] ? ++labels.tp_count : ++labels.fp_count;
    for (std::size_t j = 0; j < ng; ++j)
        if (!labels.gt_matched[j]) ++labels.missed_count;
    return labels;
}

}  // namespace motkit
