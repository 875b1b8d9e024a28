#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <limits>
#include <random>

#include "motkit/model_io.hpp"
#include "motkit/selection.hpp"
#include "motkit/tracker.hpp"

using namespace motkit;

namespace {

std::vector<Detection> dets_with_scores(const std::vector<double>& scores) {
    std::vector<Detection> out;
    for (std::size_t i = 0; i < scores.size(); ++i)
        out.push_back({make_box(4.0 * static_cast<double>(i), 0, 0.75, 4, 2, 1.5, 0),
                       scores[i], 0, std::nullopt});
    return out;
}

}  // namespace

TEST_CASE("gt_threshold buffer and upper bound", "[selection]") {
    SelectorConfig cfg;  // s_buff = 3, s_upper = 3

    // Weak TPs present: the buffered branch wins (min(0.1, 3) = 0.1).
    const GtThreshold weak = gt_threshold({{13.0, 3.5, 3.1}, {}}, cfg);
    CHECK_THAT(weak.tau, Catch::Matchers::WithinAbs(0.1, 1e-12));
    CHECK_FALSE(weak.empty_tp);

    // Lone confident TP: unclamped value would be 10, the bound caps it at 3.
    CHECK(gt_threshold({{13.0}, {}}, cfg).tau == 3.0);

    // Branch boundary: min(s_upper, s_upper) exactly.
    CHECK(gt_threshold({{cfg.s_upper + cfg.s_buff}, {}}, cfg).tau == cfg.s_upper);

    // Empty TP set falls back to the upper bound and is flagged.
    const GtThreshold fb = gt_threshold({{}, {1.0, 2.0}}, cfg);
    CHECK(fb.tau == cfg.s_upper);
    CHECK(fb.empty_tp);
}

TEST_CASE("gt_threshold ignores FP scores and shifts with TP scores", "[selection]") {
    SelectorConfig cfg;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> score(-2.0, 12.0);
    for (int it = 0; it < 100; ++it) {
        ScoreSplit split;
        const int ntp = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < ntp; ++i) split.tp_scores.push_back(score(rng));
        for (int i = 0; i < 5; ++i) split.fp_scores.push_back(score(rng));
        const double tau = gt_threshold(split, cfg).tau;

        // Oracle preservation: every TP is strictly above tau.
        for (double s : split.tp_scores) CHECK(s > tau);

        // FP multiset is irrelevant.
        ScoreSplit no_fp{split.tp_scores, {}};
        CHECK(gt_threshold(no_fp, cfg).tau == tau);

        // Shift property on the unclamped branch.
        const double min_tp = *std::min_element(split.tp_scores.begin(), split.tp_scores.end());
        if (min_tp - cfg.s_buff < cfg.s_upper) {
            ScoreSplit shifted;
            const double c = -1.5;
            for (double s : split.tp_scores) shifted.tp_scores.push_back(s + c);
            const double tau2 = gt_threshold(shifted, cfg).tau;
            if (min_tp + c - cfg.s_buff < cfg.s_upper)
                CHECK_THAT(tau2, Catch::Matchers::WithinAbs(tau + c, 1e-12));
        }
    }
}

TEST_CASE("high_pass_filter strictness and order", "[selection]") {
    const auto dets = dets_with_scores({-0.39, 1.00, 1.77, 5.22});

    CHECK(high_pass_filter(dets, -std::numeric_limits<double>::infinity()).size() == 4);

    // Strict comparison: the max-scoring detection is dropped at tau = max.
    CHECK(high_pass_filter(dets, 5.22).empty());

    const auto kept = high_pass_filter(dets, 2.0);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0] == 3);

    // Monotonicity: survivors shrink as tau grows.
    std::vector<std::size_t> prev = high_pass_filter(dets, -10.0);
    for (double tau : {-1.0, 0.5, 1.5, 3.0, 6.0}) {
        const auto cur = high_pass_filter(dets, tau);
        for (std::size_t idx : cur)
            CHECK(std::find(prev.begin(), prev.end(), idx) != prev.end());
        prev = cur;
    }
}

TEST_CASE("select_instances strictness", "[selection]") {
    const auto dets = dets_with_scores({1, 2, 3});
    SelectorConfig cfg;

    CHECK(select_instances(dets, {1, 1, 1}, cfg).size() == 3);
    CHECK(select_instances(dets, {0, 0, 0}, cfg).empty());

    const auto kept = select_instances(dets, {0.05, 0.1, 0.11}, cfg);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0] == 2);

    CHECK_THROWS_AS(select_instances(dets, {0.5}, cfg), LengthMismatch);

    SelectorConfig zero = cfg;
    zero.lambda_thres = 1e-300;  // effectively zero while staying in (0,1)
    CHECK(select_instances(dets, {0.0, 1e-200, 0.2}, zero).size() == 2);
}

TEST_CASE("gt_instance_labels", "[selection]") {
    SelectorConfig cfg;
    std::vector<Box3D> gts = {make_box(0, 0, 0.75, 4, 2, 1.5, 0),
                              make_box(10, 0, 0.75, 4, 2, 1.5, 0)};
    std::vector<Detection> dets;
    for (const Box3D& g : gts) dets.push_back({g, 5.0, 0, std::nullopt});
    CHECK(gt_instance_labels(dets, gts, cfg) == std::vector<double>{1.0, 1.0});
    CHECK(gt_instance_labels(dets, {}, cfg) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("frame_threshold degenerate weights and maxpool properties", "[selection]") {
    SelectorModel model = SelectorModel::init(SelectorMode::Frame, 4, 2, {}, 7, 6);

    // Zero weights and biases: tau_hat is 0 regardless of input.
    SelectorModel zero = model;
    for (auto& l : zero.trunk.layers()) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    CHECK(frame_threshold(zero, {{1, 2, 3, 4}}) == 0.0);

    const FeatureVec f{0.3, -1.2, 0.8, 2.0};
    const double single = frame_threshold(model, {f});
    CHECK(frame_threshold(model, {f, f, f}) == single);  // maxpool idempotence

    CHECK(frame_threshold(model, {}) == -std::numeric_limits<double>::infinity());
    CHECK_THROWS_AS(instance_prob(model, f, {}), std::logic_error);
}

TEST_CASE("model serialization round-trips bit-exactly", "[selection]") {
    ModelBundle m;
    m.selector = SelectorModel::init(SelectorMode::Instance, 12, 3, {}, 991, 10);
    m.has_assoc = true;
    m.assoc = AssociationModel::init(12, 997);

    const auto path = std::filesystem::temp_directory_path() / "motkit_model_roundtrip.json";
    save_model(m, path.string());
    const ModelBundle back = load_model(path.string());
    std::filesystem::remove(path);

    CHECK(back.selector.mode == m.selector.mode);
    CHECK(back.selector.feature_len == m.selector.feature_len);
    CHECK(back.selector.history_len == m.selector.history_len);
    CHECK(back.selector.config.lambda_thres == m.selector.config.lambda_thres);
    REQUIRE(back.has_assoc);
    for (std::size_t k = 0; k < m.selector.encoder.layers().size(); ++k) {
        CHECK(back.selector.encoder.layers()[k].w == m.selector.encoder.layers()[k].w);
        CHECK(back.selector.encoder.layers()[k].b == m.selector.encoder.layers()[k].b);
    }
    for (std::size_t k = 0; k < m.selector.trunk.layers().size(); ++k)
        CHECK(back.selector.trunk.layers()[k].w == m.selector.trunk.layers()[k].w);
    for (std::size_t k = 0; k < m.assoc.edge.layers().size(); ++k)
        CHECK(back.assoc.edge.layers()[k].w == m.assoc.edge.layers()[k].w);

    // Serialized weights reparse to the identical doubles; a fresh dump of
    // the reloaded model is byte-identical.
    CHECK(model_to_json(back).dump() == model_to_json(m).dump());
}

TEST_CASE("instance_prob range and sharing", "[selection]") {
    SelectorModel model = SelectorModel::init(SelectorMode::Instance, 4, 2, {}, 11, 6);

    SelectorModel zero = model;
    for (auto& l : zero.trunk.layers()) {
        std::fill(l.w.begin(), l.w.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    }
    CHECK(instance_prob(zero, {1, 2, 3, 4}, {}) == 0.5);

    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int it = 0; it < 20; ++it) {
        FeatureVec det(4), ctx(4);
        for (double& x : det) x = g(rng);
        for (double& x : ctx) x = g(rng);
        const double p = instance_prob(model, det, {ctx});
        CHECK(p > 0.0);
        CHECK(p < 1.0);
        CHECK(instance_prob(model, det, {ctx}) == p);  // shared network, deterministic
    }
    CHECK_THROWS_AS(frame_threshold(model, {{1, 2, 3, 4}}), std::logic_error);
}
