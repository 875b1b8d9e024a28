#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "motkit/assignment.hpp"
#include "oracles.hpp"

using namespace motkit;

namespace {

// Dyadic entries so brute-force comparison is exact in floating point.
CostMatrix random_cost(std::mt19937_64& rng, std::size_t max_dim = 7) {
    std::uniform_int_distribution<int> dim(1, static_cast<int>(max_dim));
    std::uniform_int_distribution<int> entry(-200, 200);
    CostMatrix c(static_cast<std::size_t>(dim(rng)), static_cast<std::size_t>(dim(rng)));
    for (std::size_t r = 0; r < c.rows(); ++r)
        for (std::size_t j = 0; j < c.cols(); ++j) c(r, j) = entry(rng) / 4.0;
    return c;
}

}  // namespace

TEST_CASE("hungarian identity-cost diagonal", "[assignment]") {
    CostMatrix c(3, 3, 1.0);
    for (std::size_t i = 0; i < 3; ++i) c(i, i) = 0.0;
    const Assignment a = hungarian(c);
    REQUIRE(a.pairs.size() == 3);
    CHECK(a.total_cost == 0.0);
    for (const auto& [r, col] : a.pairs) CHECK(r == col);
}

TEST_CASE("hungarian trivial and empty cases", "[assignment]") {
    CostMatrix one(1, 1);
    one(0, 0) = 5.0;
    const Assignment a = hungarian(one);
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.total_cost == 5.0);

    const Assignment empty = hungarian(CostMatrix{});
    CHECK(empty.pairs.empty());
    CHECK(empty.total_cost == 0.0);

    CostMatrix cols_only(0, 3);
    const Assignment b = hungarian(cols_only);
    CHECK(b.pairs.empty());
    CHECK(b.unmatched_cols.size() == 3);
}

TEST_CASE("hungarian matches brute force on random matrices", "[assignment][oracle]") {
    std::mt19937_64 rng(7);
    for (int it = 0; it < 200; ++it) {
        const CostMatrix c = random_cost(rng);
        const Assignment got = hungarian(c);
        const oracle::BruteAssignment want = oracle::brute_force_assignment(c);
        CHECK(got.pairs.size() == want.cardinality);
        CHECK(got.total_cost == want.total_cost);
    }
}

TEST_CASE("hungarian respects forbidden pairs", "[assignment]") {
    CostMatrix c(2, 2, kForbidden);
    c(0, 0) = 1.0;
    c(1, 0) = 0.0;  // both rows want col 0; row 1 has no alternative
    const Assignment a = hungarian(c);
    REQUIRE(a.pairs.size() == 1);
    CHECK(a.pairs[0] == std::make_pair<std::size_t, std::size_t>(1, 0));
    REQUIRE(a.unmatched_rows.size() == 1);
    CHECK(a.unmatched_rows[0] == 0);

    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    for (int it = 0; it < 200; ++it) {
        CostMatrix m = random_cost(rng);
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t j = 0; j < m.cols(); ++j)
                if (coin(rng) < 0.4) m(r, j) = kForbidden;
        const Assignment got = hungarian(m);
        for (const auto& [r, j] : got.pairs) CHECK(std::isfinite(m(r, j)));
        const oracle::BruteAssignment want = oracle::brute_force_assignment(m);
        CHECK(got.pairs.size() == want.cardinality);
        CHECK(got.total_cost == want.total_cost);
    }
}

TEST_CASE("hungarian beats greedy and is permutation-stable", "[assignment]") {
    std::mt19937_64 rng(9);
    for (int it = 0; it < 100; ++it) {
        const CostMatrix c = random_cost(rng);

        // Greedy row-by-row baseline.
        std::vector<char> used(c.cols(), 0);
        double greedy = 0.0;
        std::size_t greedy_card = 0;
        for (std::size_t r = 0; r < c.rows(); ++r) {
            double best = kForbidden;
            std::size_t best_j = c.cols();
            for (std::size_t j = 0; j < c.cols(); ++j)
                if (!used[j] && c(r, j) < best) {
                    best = c(r, j);
                    best_j = j;
                }
            if (best_j < c.cols()) {
                used[best_j] = 1;
                greedy += best;
                ++greedy_card;
            }
        }
        const Assignment opt = hungarian(c);
        if (opt.pairs.size() == greedy_card) CHECK(opt.total_cost <= greedy + 1e-12);

        // Permuting rows permutes the assignment; total cost is invariant.
        std::vector<std::size_t> perm(c.rows());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        CostMatrix p(c.rows(), c.cols());
        for (std::size_t r = 0; r < c.rows(); ++r)
            for (std::size_t j = 0; j < c.cols(); ++j) p(r, j) = c(perm[r], j);
        const Assignment pa = hungarian(p);
        CHECK(pa.total_cost == opt.total_cost);
        CHECK(pa.pairs.size() == opt.pairs.size());
    }
}

TEST_CASE("match_tp_fp exact detections", "[assignment]") {
    std::vector<Box3D> gts = {make_box(0, 0, 0, 4, 2, 1.5, 0.2),
                              make_box(10, 5, 0, 4, 2, 1.5, -0.4)};
    std::vector<Detection> dets;
    for (const Box3D& g : gts) dets.push_back({g, 5.0, 0, std::nullopt});

    const TpFpLabels l = match_tp_fp(dets, gts, MatchCriterion::iou3d(0.25));
    CHECK(l.tp_count == 2);
    CHECK(l.fp_count == 0);
    CHECK(l.missed_count == 0);
    CHECK(l.det_overlap[0] == 1.0);
}

TEST_CASE("match_tp_fp labels far detection FP", "[assignment]") {
    std::vector<Box3D> gts = {make_box(0, 0, 0, 4, 2, 1.5, 0)};
    std::vector<Detection> dets = {{make_box(50, 50, 0, 4, 2, 1.5, 0), 9.0, 0, std::nullopt},
                                   {gts[0], 5.0, 0, std::nullopt}};
    const TpFpLabels l = match_tp_fp(dets, gts, MatchCriterion::iou3d(0.25));
    CHECK_FALSE(l.det_is_tp[0]);
    CHECK(l.det_is_tp[1]);
    CHECK(l.fp_count == 1);
}

TEST_CASE("match_tp_fp two dets competing for one gt", "[assignment]") {
    // Overlaps ~0.6 and ~0.5; the higher-overlap det wins.
    const Box3D gt = make_box(0, 0, 0, 4, 2, 1.5, 0);
    std::vector<Detection> dets = {
        {make_box(0.5, 0, 0, 4, 2, 1.5, 0), 3.0, 0, std::nullopt},
        {make_box(0.25, 0, 0, 4, 2, 1.5, 0), 7.0, 0, std::nullopt},
    };
    const TpFpLabels l = match_tp_fp(dets, {gt}, MatchCriterion::iou3d(0.25));
    CHECK_FALSE(l.det_is_tp[0]);
    CHECK(l.det_is_tp[1]);

    const oracle::BruteMatch want = oracle::brute_force_gated_match(dets, {gt}, MatchCriterion::iou3d(0.25));
    CHECK(want.matches == l.tp_count);
    CHECK(want.det_gt[1] == 0);
}

TEST_CASE("match_tp_fp counts partition detections and gts", "[assignment]") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> pos(-10, 10);
    std::uniform_int_distribution<int> n(0, 6);
    for (int it = 0; it < 100; ++it) {
        std::vector<Box3D> gts;
        const int ng = n(rng);
        for (int i = 0; i < ng; ++i) gts.push_back(make_box(pos(rng), pos(rng), 0, 4, 2, 1.5, 0));
        std::vector<Detection> dets;
        const int nd = n(rng);
        for (int i = 0; i < nd; ++i) {
            Box3D b = make_box(pos(rng), pos(rng), 0, 4, 2, 1.5, 0);
            dets.push_back({b, 1.0, 0, std::nullopt});
        }
        const MatchCriterion crit = it % 2 == 0 ? MatchCriterion::iou3d(0.25)
                                                : MatchCriterion::center_distance(2.0);
        const TpFpLabels l = match_tp_fp(dets, gts, crit);
        CHECK(l.tp_count + l.fp_count == dets.size());
        CHECK(l.tp_count + l.missed_count == gts.size());
        for (std::size_t i = 0; i < dets.size(); ++i)
            if (l.det_is_tp[i]) {
                const double g = crit.gate(dets[i].box, gts[static_cast<std::size_t>(l.det_gt_index[i])]);
                CHECK_FALSE(std::isnan(g));
            }
    }
}
