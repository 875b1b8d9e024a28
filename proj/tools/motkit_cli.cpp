// motkit command line: simulate -> label -> train -> track -> eval -> sweep.
// Every command is deterministic given the config and seed; CSV and KITTI
// outputs are formatted with fixed precision so identical runs are byte
// identical. Exit codes: 0 success, 1 input error, 2 internal error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "motkit/motkit.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string seq_name(int s, const char* suffix) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "seq_%02d_%s", s, suffix);
    return buf;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot open " + path.string() + " for writing");
    return out;
}

// --------------------------------------------------------------------------
// Scene directory access

struct SceneSequence {
    motkit::GtFrames gt;
    std::vector<std::vector<motkit::Detection>> dets;
};

SceneSequence load_scene_sequence(const fs::path& dir, int s) {
    SceneSequence seq;
    const fs::path gt_path = dir / seq_name(s, "gt.txt");
    const fs::path det_path = dir / seq_name(s, "det.txt");
    if (!fs::exists(gt_path)) throw InputError("missing " + gt_path.string());
    if (!fs::exists(det_path)) throw InputError("missing " + det_path.string());
    seq.gt = motkit::gt_frames_from_kitti(motkit::parse_kitti_file(gt_path.string()));
    seq.dets = motkit::detections_from_kitti(motkit::parse_kitti_file(det_path.string()));
    const std::size_t n = std::max(seq.gt.size(), seq.dets.size());
    seq.gt.resize(n);
    seq.dets.resize(n);
    return seq;
}

std::vector<motkit::LabeledFrame> label_in_process(const SceneSequence& scene,
                                                   const motkit::SelectorConfig& cfg) {
    motkit::Simulator::DetectionRun run;
    run.frames = scene.dets;
    run.gen_gt_id.assign(scene.dets.size(), {});
    for (std::size_t f = 0; f < scene.dets.size(); ++f)
        run.gen_gt_id[f].assign(scene.dets[f].size(), -1);
    return motkit::label_scene(scene.gt, run, cfg);
}

json labels_to_json(const std::vector<motkit::LabeledFrame>& frames) {
    json out;
    out["version"] = 1;
    json jf = json::array();
    for (const motkit::LabeledFrame& lf : frames) {
        json j;
        j["frame"] = lf.frame;
        j["tau"] = lf.oracle_tau;
        j["tau_fallback"] = lf.tau_fallback;
        j["tp"] = lf.det_is_tp;
        j["gt_id"] = lf.det_gt_id;
        j["lambda"] = lf.lambda_labels;
        jf.push_back(std::move(j));
    }
    out["frames"] = std::move(jf);
    return out;
}

std::vector<motkit::LabeledFrame> labels_from_scene_and_json(const SceneSequence& scene,
                                                             const json& j) {
    if (j.at("version").get<int>() != 1) throw InputError("labels: unsupported version");
    const auto& jf = j.at("frames");
    if (jf.size() != scene.dets.size()) throw InputError("labels: frame count mismatch");
    std::vector<motkit::LabeledFrame> out;
    for (std::size_t f = 0; f < jf.size(); ++f) {
        motkit::LabeledFrame lf;
        lf.frame = jf[f].at("frame").get<int>();
        lf.gts = scene.gt[f];
        lf.dets = scene.dets[f];
        lf.oracle_tau = jf[f].at("tau").get<double>();
        lf.tau_fallback = jf[f].at("tau_fallback").get<bool>();
        lf.det_is_tp = jf[f].at("tp").get<std::vector<bool>>();
        lf.det_gt_id = jf[f].at("gt_id").get<std::vector<int>>();
        lf.lambda_labels = jf[f].at("lambda").get<std::vector<double>>();
        if (lf.det_is_tp.size() != lf.dets.size())
            throw InputError("labels: detection count mismatch at frame " + std::to_string(f));
        lf.det_gen_gt_id = lf.det_gt_id;  // generative flags are not persisted
        out.push_back(std::move(lf));
    }
    return out;
}

// --------------------------------------------------------------------------
// Commands

struct CommonArgs {
    std::string config_path;
    motkit::RunConfig cfg;
    void load() { cfg = motkit::load_config(config_path); }
};

int cmd_simulate(CommonArgs& args, const std::string& out_dir) {
    args.load();
    fs::create_directories(out_dir);
    for (int s = 0; s < args.cfg.num_sequences; ++s) {
        motkit::SimConfig sim = args.cfg.sim;
        sim.seed = args.cfg.sim.seed + static_cast<std::uint64_t>(s);
        motkit::Simulator simulator(sim);
        const motkit::GtFrames scene = simulator.generate_scene(args.cfg.num_frames);
        const motkit::Simulator::DetectionRun run = simulator.detect(scene);

        auto gt_out = open_out(fs::path(out_dir) / seq_name(s, "gt.txt"));
        motkit::emit_kitti(motkit::kitti_from_gt(scene), gt_out);
        auto det_out = open_out(fs::path(out_dir) / seq_name(s, "det.txt"));
        motkit::emit_kitti(motkit::kitti_from_detections(run.frames), det_out);
    }
    std::cout << "simulate: wrote " << args.cfg.num_sequences << " sequence(s) to " << out_dir
              << "\n";
    return 0;
}

int cmd_label(CommonArgs& args, const std::string& scene_dir, const std::string& out_dir) {
    args.load();
    fs::create_directories(out_dir);
    long frames = 0;
    for (int s = 0; s < args.cfg.num_sequences; ++s) {
        const SceneSequence scene = load_scene_sequence(scene_dir, s);
        const auto labeled = label_in_process(scene, args.cfg.selector);
        frames += static_cast<long>(labeled.size());
        auto out = open_out(fs::path(out_dir) / seq_name(s, "labels.json"));
        out << labels_to_json(labeled).dump(2) << '\n';
    }
    std::cout << "label: labeled " << frames << " frame(s) across " << args.cfg.num_sequences
              << " sequence(s)\n";
    return 0;
}

int cmd_train(CommonArgs& args, const std::string& scene_dir, const std::string& labels_dir,
              const std::string& mode, bool with_assoc, const std::string& model_path,
              const std::string& loss_csv) {
    args.load();
    std::vector<motkit::TrainingFrame> data;
    for (int s = 0; s < args.cfg.num_sequences; ++s) {
        const SceneSequence scene = load_scene_sequence(scene_dir, s);
        const fs::path lp = fs::path(labels_dir) / seq_name(s, "labels.json");
        std::ifstream in(lp);
        if (!in) throw InputError("missing " + lp.string());
        json j;
        in >> j;
        const auto labeled = labels_from_scene_and_json(scene, j);
        auto frames = motkit::build_training_frames(labeled, args.cfg.tracker.history_len);
        data.insert(data.end(), frames.begin(), frames.end());
    }

    motkit::SelectorMode smode;
    if (mode == "frame")
        smode = motkit::SelectorMode::Frame;
    else if (mode == "instance")
        smode = motkit::SelectorMode::Instance;
    else
        throw InputError("train: --mode must be frame or instance");

    motkit::ModelBundle bundle;
    bundle.selector =
        motkit::SelectorModel::init(smode, args.cfg.feature_len, args.cfg.tracker.history_len,
                                    args.cfg.selector, args.cfg.seed, args.cfg.encoder_hidden);
    bundle.has_assoc = with_assoc;
    if (with_assoc)
        bundle.assoc = motkit::AssociationModel::init(args.cfg.feature_len, args.cfg.seed + 100);

    const motkit::TrainResult result =
        motkit::train(bundle.selector, with_assoc ? &bundle.assoc : nullptr, data, args.cfg.train);

    motkit::save_model(bundle, model_path);
    if (!loss_csv.empty()) {
        auto out = open_out(loss_csv);
        out << "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_curve.size(); ++e)
            out << e << ',' << fmt(result.loss_curve[e]) << '\n';
    }
    std::cout << "train: " << result.loss_curve.size() << " epoch(s), final loss "
              << (result.loss_curve.empty() ? std::string("n/a") : fmt(result.loss_curve.back()))
              << ", model written to " << model_path << "\n";
    return 0;
}

int cmd_track(CommonArgs& args, const std::string& scene_dir, const std::string& model_path,
              const std::string& selector_override, const std::string& out_dir) {
    args.load();
    motkit::TrackerConfig tracker_cfg = args.cfg.tracker;
    if (!selector_override.empty()) {
        if (selector_override == "off")
            tracker_cfg.selector = motkit::TrackerConfig::Selector::Off;
        else if (selector_override == "global")
            tracker_cfg.selector = motkit::TrackerConfig::Selector::GlobalThreshold;
        else if (selector_override == "frame")
            tracker_cfg.selector = motkit::TrackerConfig::Selector::Frame;
        else if (selector_override == "instance")
            tracker_cfg.selector = motkit::TrackerConfig::Selector::Instance;
        else
            throw InputError("track: unknown selector '" + selector_override + "'");
    }

    motkit::ModelBundle bundle;
    const motkit::SelectorModel* selector = nullptr;
    const motkit::AssociationModel* assoc = nullptr;
    const bool needs_model =
        tracker_cfg.selector == motkit::TrackerConfig::Selector::Frame ||
        tracker_cfg.selector == motkit::TrackerConfig::Selector::Instance ||
        tracker_cfg.association == motkit::TrackerConfig::Association::FeatureAffinity;
    if (needs_model) {
        if (model_path.empty()) throw InputError("track: this configuration needs --model");
        bundle = motkit::load_model(model_path);
        selector = &bundle.selector;
        const bool mode_ok =
            (tracker_cfg.selector != motkit::TrackerConfig::Selector::Frame ||
             bundle.selector.mode == motkit::SelectorMode::Frame) &&
            (tracker_cfg.selector != motkit::TrackerConfig::Selector::Instance ||
             bundle.selector.mode == motkit::SelectorMode::Instance);
        if (!mode_ok) throw InputError("track: model mode does not match selector mode");
        if (tracker_cfg.association == motkit::TrackerConfig::Association::FeatureAffinity) {
            if (!bundle.has_assoc)
                throw InputError("track: feature association needs a model trained with --assoc");
            assoc = &bundle.assoc;
        }
    }

    fs::create_directories(out_dir);
    long reported = 0;
    for (int s = 0; s < args.cfg.num_sequences; ++s) {
        const SceneSequence scene = load_scene_sequence(scene_dir, s);
        const motkit::TrackResult result =
            motkit::run_sequence(scene.dets, tracker_cfg, selector, assoc);

        auto track_out = open_out(fs::path(out_dir) / seq_name(s, "track.txt"));
        motkit::emit_kitti(motkit::kitti_from_hyp(result.frames), track_out);

        auto diag = open_out(fs::path(out_dir) / seq_name(s, "filtered.csv"));
        diag << "frame,det_index,score,threshold_or_lambda\n";
        for (const motkit::FilteredDetection& fd : result.filtered)
            diag << fd.frame << ',' << fd.det_index << ',' << fmt(fd.score) << ','
                 << fmt(fd.threshold_or_lambda) << '\n';
        for (const auto& frame : result.frames) reported += static_cast<long>(frame.size());
    }
    std::cout << "track: reported " << reported << " box(es) across " << args.cfg.num_sequences
              << " sequence(s)\n";
    return 0;
}

std::string criterion_name(const motkit::MatchCriterion& c) {
    char buf[64];
    if (c.kind == motkit::MatchCriterion::Kind::Iou3d)
        std::snprintf(buf, sizeof(buf), "iou3d@%.2f", c.threshold);
    else
        std::snprintf(buf, sizeof(buf), "dist@%.2f", c.threshold);
    return buf;
}

int cmd_eval(CommonArgs& args, const std::string& scene_dir, const std::string& results_dir,
             const std::string& report_csv) {
    args.load();
    std::vector<motkit::GtFrames> gts;
    std::vector<motkit::HypFrames> hyps;
    for (int s = 0; s < args.cfg.num_sequences; ++s) {
        const SceneSequence scene = load_scene_sequence(scene_dir, s);
        const fs::path tp = fs::path(results_dir) / seq_name(s, "track.txt");
        if (!fs::exists(tp)) throw InputError("missing " + tp.string());
        motkit::HypFrames hyp =
            motkit::hyp_frames_from_kitti(motkit::parse_kitti_file(tp.string()));
        hyp.resize(std::max(hyp.size(), scene.gt.size()));
        gts.push_back(scene.gt);
        hyps.push_back(std::move(hyp));
    }

    std::ofstream csv;
    if (!report_csv.empty()) csv = open_out(report_csv);
    if (csv.is_open()) csv << "criterion,samota,amota,amotp,mota,motp,ids,frag,fp,fn\n";
    std::printf("%-12s %9s %9s %9s %9s %9s %6s %6s %6s %6s\n", "criterion", "sAMOTA", "AMOTA",
                "AMOTP", "MOTA", "MOTP", "IDS", "FRAG", "FP", "FN");
    for (const motkit::MatchCriterion& c : args.cfg.criteria) {
        const motkit::MetricsReport r = motkit::amota_suite_multi(hyps, gts, c);
        std::printf("%-12s %9.4f %9.4f %9.4f %9.4f %9.4f %6ld %6ld %6ld %6ld\n",
                    criterion_name(c).c_str(), r.samota, r.amota, r.amotp, r.mota, r.motp, r.ids,
                    r.frag, r.fp, r.fn);
        if (csv.is_open())
            csv << criterion_name(c) << ',' << fmt(r.samota) << ',' << fmt(r.amota) << ','
                << fmt(r.amotp) << ',' << fmt(r.mota) << ',' << fmt(r.motp) << ',' << r.ids << ','
                << r.frag << ',' << r.fp << ',' << r.fn << '\n';
    }
    return 0;
}

// Global-threshold grid search: the manual baseline. Detection-level removal
// and retention are measured against Hungarian TP/FP labels; tracking metrics
// use the first configured criterion. Best row = highest MOTA (ties toward
// the lower threshold).
int cmd_sweep(CommonArgs& args, const std::string& scene_dir, const std::string& out_csv,
              int grid_size) {
    args.load();
    if (grid_size < 2) throw InputError("sweep: --grid must be >= 2");

    std::vector<SceneSequence> scenes;
    std::vector<std::vector<motkit::LabeledFrame>> labels;
    std::vector<double> all_scores;
    for (int s = 0; s < args.cfg.num_sequences; ++s) {
        scenes.push_back(load_scene_sequence(scene_dir, s));
        labels.push_back(label_in_process(scenes.back(), args.cfg.selector));
        for (const auto& frame : scenes.back().dets)
            for (const motkit::Detection& d : frame) all_scores.push_back(d.score);
    }
    if (all_scores.empty()) throw InputError("sweep: no detections in scene");
    std::sort(all_scores.begin(), all_scores.end());

    long total_tp = 0, total_fp = 0;
    for (const auto& seq : labels)
        for (const motkit::LabeledFrame& lf : seq)
            for (bool tp : lf.det_is_tp) tp ? ++total_tp : ++total_fp;

    // Evenly spaced score quantiles, plus a keep-everything row.
    std::vector<double> thresholds = {all_scores.front() - 1.0};
    for (int g = 0; g < grid_size; ++g) {
        const std::size_t idx = static_cast<std::size_t>(
            static_cast<double>(g) / (grid_size - 1) * static_cast<double>(all_scores.size() - 1));
        thresholds.push_back(all_scores[idx]);
    }
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

    motkit::TrackerConfig tracker_cfg = args.cfg.tracker;
    tracker_cfg.selector = motkit::TrackerConfig::Selector::GlobalThreshold;
    const motkit::MatchCriterion criterion = args.cfg.criteria.front();

    auto out = open_out(out_csv);
    out << "threshold,fp_removed,tp_removed,fp_removal,tp_retention,fp,fn,ids,mota,recall,best\n";

    struct Row {
        double threshold, fp_removal, tp_retention, mota, recall;
        long fp_removed, tp_removed, fp, fn, ids;
    };
    std::vector<Row> rows;
    for (double tau : thresholds) {
        long fp_removed = 0, tp_removed = 0;
        std::vector<motkit::HypFrames> hyps;
        std::vector<motkit::GtFrames> gts;
        for (std::size_t s = 0; s < scenes.size(); ++s) {
            for (const motkit::LabeledFrame& lf : labels[s])
                for (std::size_t i = 0; i < lf.dets.size(); ++i)
                    if (lf.dets[i].score <= tau) lf.det_is_tp[i] ? ++tp_removed : ++fp_removed;
            tracker_cfg.global_threshold = tau;
            motkit::TrackResult r = motkit::run_sequence(scenes[s].dets, tracker_cfg);
            r.frames.resize(std::max(r.frames.size(), scenes[s].gt.size()));
            hyps.push_back(std::move(r.frames));
            gts.push_back(scenes[s].gt);
        }
        const motkit::MetricsReport m = motkit::clear_metrics_multi(hyps, gts, criterion);
        Row row;
        row.threshold = tau;
        row.fp_removed = fp_removed;
        row.tp_removed = tp_removed;
        row.fp_removal = total_fp > 0 ? static_cast<double>(fp_removed) / total_fp : 0.0;
        row.tp_retention = total_tp > 0 ? 1.0 - static_cast<double>(tp_removed) / total_tp : 1.0;
        row.mota = m.mota;
        row.recall = m.recall;
        row.fp = m.fp;
        row.fn = m.fn;
        row.ids = m.ids;
        rows.push_back(row);
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
        if (rows[i].mota > rows[best].mota) best = i;

    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Row& r = rows[i];
        out << fmt(r.threshold) << ',' << r.fp_removed << ',' << r.tp_removed << ','
            << fmt(r.fp_removal) << ',' << fmt(r.tp_retention) << ',' << r.fp << ',' << r.fn << ','
            << r.ids << ',' << fmt(r.mota) << ',' << fmt(r.recall) << ',' << (i == best ? 1 : 0)
            << '\n';
    }
    std::printf("sweep: best threshold %s (MOTA %.4f, FP removal %.4f, TP retention %.4f)\n",
                fmt(rows[best].threshold).c_str(), rows[best].mota, rows[best].fp_removal,
                rows[best].tp_retention);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"3D multi-object tracking toolkit with learned detection selection"};
    app.require_subcommand(1);

    CommonArgs args;

    std::string out_dir, scene_dir, labels_dir, model_path, loss_csv, mode = "frame";
    std::string selector_override, report_csv, out_csv, results_dir;
    bool with_assoc = false;
    int grid_size = 25;

    CLI::App* sim = app.add_subcommand("simulate", "generate synthetic scenes and detections");
    sim->add_option("--config", args.config_path, "run config JSON")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    CLI::App* label = app.add_subcommand("label", "attach TP/FP labels and oracle thresholds");
    label->add_option("--config", args.config_path)->required();
    label->add_option("--scene", scene_dir, "scene directory from simulate")->required();
    label->add_option("--out", out_dir, "labels output directory")->required();

    CLI::App* train = app.add_subcommand("train", "train a selector model");
    train->add_option("--config", args.config_path)->required();
    train->add_option("--scene", scene_dir)->required();
    train->add_option("--labels", labels_dir)->required();
    train->add_option("--mode", mode, "frame | instance");
    train->add_flag("--assoc", with_assoc, "also train the association network");
    train->add_option("--out", model_path, "model JSON path")->required();
    train->add_option("--loss-csv", loss_csv, "loss curve CSV path");

    CLI::App* track = app.add_subcommand("track", "run the tracker over a scene");
    track->add_option("--config", args.config_path)->required();
    track->add_option("--scene", scene_dir)->required();
    track->add_option("--model", model_path, "model JSON from train");
    track->add_option("--selector", selector_override, "off | global | frame | instance");
    track->add_option("--out", out_dir, "results directory")->required();

    CLI::App* eval = app.add_subcommand("eval", "evaluate tracking results");
    eval->add_option("--config", args.config_path)->required();
    eval->add_option("--scene", scene_dir)->required();
    eval->add_option("--results", results_dir)->required();
    eval->add_option("--report", report_csv, "report CSV path");

    CLI::App* sweep = app.add_subcommand("sweep", "global-threshold grid search baseline");
    sweep->add_option("--config", args.config_path)->required();
    sweep->add_option("--scene", scene_dir)->required();
    sweep->add_option("--out", out_csv, "sweep CSV path")->required();
    sweep->add_option("--grid", grid_size, "number of grid thresholds");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return cmd_simulate(args, out_dir);
        if (label->parsed()) return cmd_label(args, scene_dir, out_dir);
        if (train->parsed())
            return cmd_train(args, scene_dir, labels_dir, mode, with_assoc, model_path, loss_csv);
        if (track->parsed())
            return cmd_track(args, scene_dir, model_path, selector_override, out_dir);
        if (eval->parsed()) return cmd_eval(args, scene_dir, results_dir, report_csv);
        if (sweep->parsed()) return cmd_sweep(args, scene_dir, out_csv, grid_size);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const motkit::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const motkit::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
