#pragma once

// Independent reference implementations used only by tests: Monte-Carlo
// IoU estimation, brute-force assignment over permutations, brute-force
// gated matching and central finite differences. None of these share code
// with the library paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "motkit/assignment.hpp"
#include "motkit/geometry.hpp"

namespace oracle {

// Point-in-box test by rotating the point into the box frame.
inline bool point_in_box_bev(const motkit::Box3D& b, double px, double py) {
    const double c = std::cos(b.theta), s = std::sin(b.theta);
    const double dx = px - b.x, dy = py - b.y;
    const double lx = c * dx + s * dy;
    const double ly = -s * dx + c * dy;
    return std::fabs(lx) <= 0.5 * b.l && std::fabs(ly) <= 0.5 * b.w;
}

inline bool point_in_box_3d(const motkit::Box3D& b, double px, double py, double pz) {
    return point_in_box_bev(b, px, py) && std::fabs(pz - b.z) <= 0.5 * b.h;
}

struct Aabb {
    double lo[3], hi[3];
};

inline Aabb union_aabb(const motkit::Box3D& a, const motkit::Box3D& b) {
    Aabb box;
    for (int d = 0; d < 3; ++d) {
        box.lo[d] = std::numeric_limits<double>::infinity();
        box.hi[d] = -box.lo[d];
    }
    for (const motkit::Box3D* p : {&a, &b}) {
        for (const motkit::Vec3& v : motkit::corners_3d(*p)) {
            const double q[3] = {v.x, v.y, v.z};
            for (int d = 0; d < 3; ++d) {
                box.lo[d] = std::min(box.lo[d], q[d]);
                box.hi[d] = std::max(box.hi[d], q[d]);
            }
        }
    }
    return box;
}

// Shared-sample IoU estimate: count(in both) / count(in either).
inline double mc_iou_bev(const motkit::Box3D& a, const motkit::Box3D& b, int samples,
                         std::mt19937_64& rng) {
    const Aabb box = union_aabb(a, b);
    std::uniform_real_distribution<double> ux(box.lo[0], box.hi[0]);
    std::uniform_real_distribution<double> uy(box.lo[1], box.hi[1]);
    long both = 0, either = 0;
    for (int i = 0; i < samples; ++i) {
        const double x = ux(rng), y = uy(rng);
        const bool ia = point_in_box_bev(a, x, y);
        const bool ib = point_in_box_bev(b, x, y);
        both += ia && ib;
        either += ia || ib;
    }
    return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

inline double mc_iou_3d(const motkit::Box3D& a, const motkit::Box3D& b, int samples,
                        std::mt19937_64& rng) {
    const Aabb box = union_aabb(a, b);
    std::uniform_real_distribution<double> ux(box.lo[0], box.hi[0]);
    std::uniform_real_distribution<double> uy(box.lo[1], box.hi[1]);
    std::uniform_real_distribution<double> uz(box.lo[2], box.hi[2]);
    long both = 0, either = 0;
    for (int i = 0; i < samples; ++i) {
        const double x = ux(rng), y = uy(rng), z = uz(rng);
        const bool ia = point_in_box_3d(a, x, y, z);
        const bool ib = point_in_box_3d(b, x, y, z);
        both += ia && ib;
        either += ia || ib;
    }
    return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

// Exhaustive minimum-cost maximum matching: pad to square, try every
// permutation, prefer more finite matches, then lower finite cost.
struct BruteAssignment {
    std::size_t cardinality = 0;
    double total_cost = 0.0;
};

inline BruteAssignment brute_force_assignment(const motkit::CostMatrix& c) {
    const std::size_t m = c.rows(), n = c.cols();
    const std::size_t dim = std::max(m, n);
    BruteAssignment best;
    best.total_cost = std::numeric_limits<double>::infinity();
    if (dim == 0) {
        best.total_cost = 0.0;
        return best;
    }
    std::vector<std::size_t> perm(dim);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        std::size_t card = 0;
        double cost = 0.0;
        for (std::size_t r = 0; r < dim; ++r) {
            const std::size_t col = perm[r];
            if (r < m && col < n && std::isfinite(c(r, col))) {
                ++card;
                cost += c(r, col);
            }
        }
        if (card > best.cardinality || (card == best.cardinality && cost < best.total_cost)) {
            best.cardinality = card;
            best.total_cost = cost;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    if (!std::isfinite(best.total_cost)) best.total_cost = 0.0;
    return best;
}

// Exhaustive gated TP/FP matching over permutations; returns the maximum
// number of gated matches and, among those, the best total gate value
// (max IoU sum / min distance sum).
struct BruteMatch {
    std::size_t matches = 0;
    std::vector<int> det_gt;  // matched gt per det, -1 if none
};

inline BruteMatch brute_force_gated_match(const std::vector<motkit::Detection>& dets,
                                          const std::vector<motkit::Box3D>& gts,
                                          const motkit::MatchCriterion& criterion) {
    const std::size_t nd = dets.size(), ng = gts.size();
    const std::size_t dim = std::max(nd, ng);
    BruteMatch best;
    best.det_gt.assign(nd, -1);
    if (dim == 0) return best;
    double best_objective = -std::numeric_limits<double>::infinity();
    std::vector<std::size_t> perm(dim);
    std::iota(perm.begin(), perm.end(), 0);
    do {
        std::size_t matches = 0;
        double objective = 0.0;
        std::vector<int> det_gt(nd, -1);
        for (std::size_t r = 0; r < dim && r < nd; ++r) {
            const std::size_t col = perm[r];
            if (col >= ng) continue;
            const double g = criterion.gate(dets[r].box, gts[col]);
            if (std::isnan(g)) continue;
            ++matches;
            objective += criterion.kind == motkit::MatchCriterion::Kind::Iou3d ? g : -g;
            det_gt[r] = static_cast<int>(col);
        }
        if (matches > best.matches ||
            (matches == best.matches && objective > best_objective)) {
            best.matches = matches;
            best_objective = objective;
            best.det_gt = det_gt;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

// Central finite difference of a scalar function at x.
inline double central_diff(const std::function<double(double)>& f, double x,
                           double step = 1e-5) {
    return (f(x + step) - f(x - step)) / (2.0 * step);
}

inline bool grad_close(double analytic, double numeric, double rel_tol = 1e-5) {
    const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-3});
    return std::fabs(analytic - numeric) / denom <= rel_tol;
}

}  // namespace oracle
