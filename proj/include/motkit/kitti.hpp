#pragma once

// KITTI tracking-label ingestion and emission. Lines are whitespace
// separated with 16 fields, plus an optional trailing score (17). Numeric
// output is fixed at 6 decimal places and emission orders lines by
// (frame, track_id), so parse -> emit is reproducible byte for byte.

#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "motkit/detection.hpp"
#include "motkit/geometry.hpp"
#include "motkit/metrics.hpp"

namespace motkit {

struct KittiTrackLine {
    int frame = 0;
    int track_id = -1;  // -1 for raw detections
    std::string type = "Car";
    double truncated = 0.0;
    int occluded = 0;
    double alpha = 0.0;
    double bbox_left = -1.0, bbox_top = -1.0, bbox_right = -1.0, bbox_bottom = -1.0;
    double dim_h = 0.0, dim_w = 0.0, dim_l = 0.0;   // meters
    double loc_x = 0.0, loc_y = 0.0, loc_z = 0.0;   // camera coords, bottom-anchored
    double rotation_y = 0.0;
    std::optional<double> score;
};

struct ParseError : std::runtime_error {
    int line_no;
    std::string field;
    ParseError(int line, std::string fld, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ", field '" + fld + "': " + what),
          line_no(line),
          field(std::move(fld)) {}
};

namespace detail {

inline double parse_real(const std::string& tok, int line_no, const char* field) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception& e) {
        throw ParseError(line_no, field, std::string("not a number: '") + tok + "'");
    }
}

inline int parse_int(const std::string& tok, int line_no, const char* field) {
    try {
        std::size_t pos = 0;
        const int v = std::stoi(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception& e) {
        throw ParseError(line_no, field, std::string("not an integer: '") + tok + "'");
    }
}

inline std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

}  // namespace detail

inline std::vector<KittiTrackLine> parse_kitti(std::istream& in) {
    std::vector<KittiTrackLine> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream ss(line);
        std::vector<std::string> tok;
        std::string t;
        while (ss >> t) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() != 17 && tok.size() != 18)
            throw ParseError(line_no, "line", "expected 17 or 18 fields, got " +
                                                  std::to_string(tok.size()));
        KittiTrackLine l;
        l.frame = detail::parse_int(tok[0], line_no, "frame");
        if (l.frame < 0) throw ParseError(line_no, "frame", "negative frame index");
        l.track_id = detail::parse_int(tok[1], line_no, "track_id");
        l.type = tok[2];
        l.truncated = detail::parse_real(tok[3], line_no, "truncated");
        l.occluded = detail::parse_int(tok[4], line_no, "occluded");
        l.alpha = detail::parse_real(tok[5], line_no, "alpha");
        l.bbox_left = detail::parse_real(tok[6], line_no, "bbox_left");
        l.bbox_top = detail::parse_real(tok[7], line_no, "bbox_top");
        l.bbox_right = detail::parse_real(tok[8], line_no, "bbox_right");
        l.bbox_bottom = detail::parse_real(tok[9], line_no, "bbox_bottom");
        l.dim_h = detail::parse_real(tok[10], line_no, "height");
        l.dim_w = detail::parse_real(tok[11], line_no, "width");
        l.dim_l = detail::parse_real(tok[12], line_no, "length");
        l.loc_x = detail::parse_real(tok[13], line_no, "x");
        l.loc_y = detail::parse_real(tok[14], line_no, "y");
        l.loc_z = detail::parse_real(tok[15], line_no, "z");
        l.rotation_y = detail::parse_real(tok[16], line_no, "rotation_y");
        if (tok.size() == 18) l.score = detail::parse_real(tok[17], line_no, "score");
        out.push_back(std::move(l));
    }
    return out;
}

inline std::vector<KittiTrackLine> parse_kitti_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return parse_kitti(in);
}

inline void emit_kitti(std::vector<KittiTrackLine> lines, std::ostream& out) {
    std::stable_sort(lines.begin(), lines.end(),
                     [](const KittiTrackLine& a, const KittiTrackLine& b) {
                         if (a.frame != b.frame) return a.frame < b.frame;
                         return a.track_id < b.track_id;
                     });
    for (const KittiTrackLine& l : lines) {
        out << l.frame << ' ' << l.track_id << ' ' << l.type << ' '
            << detail::format_real(l.truncated) << ' ' << l.occluded << ' '
            << detail::format_real(l.alpha) << ' ' << detail::format_real(l.bbox_left) << ' '
            << detail::format_real(l.bbox_top) << ' ' << detail::format_real(l.bbox_right) << ' '
            << detail::format_real(l.bbox_bottom) << ' ' << detail::format_real(l.dim_h) << ' '
            << detail::format_real(l.dim_w) << ' ' << detail::format_real(l.dim_l) << ' '
            << detail::format_real(l.loc_x) << ' ' << detail::format_real(l.loc_y) << ' '
            << detail::format_real(l.loc_z) << ' ' << detail::format_real(l.rotation_y);
        if (l.score) out << ' ' << detail::format_real(*l.score);
        out << '\n';
    }
}

inline void emit_kitti_file(const std::vector<KittiTrackLine>& lines, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    emit_kitti(lines, out);
}

// --------------------------------------------------------------------------
// Conversion between the KITTI camera frame (x right, y down, z forward,
// bottom-anchored location) and the library's world frame (x forward,
// y left, z up, center-anchored).

inline Box3D box_from_kitti(const KittiTrackLine& l) {
    const double h = l.dim_h;
    return make_box(l.loc_z, -l.loc_x, -l.loc_y + 0.5 * h, l.dim_l, l.dim_w, h,
                    normalize_angle(-l.rotation_y - 0.5 * kPi));
}

inline void box_to_kitti(const Box3D& b, KittiTrackLine& l) {
    l.dim_h = b.h;
    l.dim_w = b.w;
    l.dim_l = b.l;
    l.loc_x = -b.y;
    l.loc_y = -(b.z - 0.5 * b.h);
    l.loc_z = b.x;
    l.rotation_y = normalize_angle(-b.theta - 0.5 * kPi);
}

// Per-frame views used by the pipeline.

inline GtFrames gt_frames_from_kitti(const std::vector<KittiTrackLine>& lines) {
    int max_frame = -1;
    for (const KittiTrackLine& l : lines) max_frame = std::max(max_frame, l.frame);
    GtFrames frames(static_cast<std::size_t>(max_frame + 1));
    for (const KittiTrackLine& l : lines)
        frames[static_cast<std::size_t>(l.frame)].push_back({box_from_kitti(l), l.track_id});
    return frames;
}

inline HypFrames hyp_frames_from_kitti(const std::vector<KittiTrackLine>& lines) {
    int max_frame = -1;
    for (const KittiTrackLine& l : lines) max_frame = std::max(max_frame, l.frame);
    HypFrames frames(static_cast<std::size_t>(max_frame + 1));
    for (const KittiTrackLine& l : lines)
        frames[static_cast<std::size_t>(l.frame)].push_back(
            {box_from_kitti(l), l.track_id, l.score.value_or(0.0)});
    return frames;
}

inline std::vector<std::vector<Detection>> detections_from_kitti(
    const std::vector<KittiTrackLine>& lines) {
    int max_frame = -1;
    for (const KittiTrackLine& l : lines) max_frame = std::max(max_frame, l.frame);
    std::vector<std::vector<Detection>> frames(static_cast<std::size_t>(max_frame + 1));
    for (const KittiTrackLine& l : lines)
        frames[static_cast<std::size_t>(l.frame)].push_back(
            {box_from_kitti(l), l.score.value_or(0.0), l.frame, std::nullopt});
    return frames;
}

inline std::vector<KittiTrackLine> kitti_from_gt(const GtFrames& frames) {
    std::vector<KittiTrackLine> lines;
    for (std::size_t f = 0; f < frames.size(); ++f)
        for (const GtBox& g : frames[f]) {
            KittiTrackLine l;
            l.frame = static_cast<int>(f);
            l.track_id = g.id;
            box_to_kitti(g.box, l);
            lines.push_back(std::move(l));
        }
    return lines;
}

inline std::vector<KittiTrackLine> kitti_from_detections(
    const std::vector<std::vector<Detection>>& frames) {
    std::vector<KittiTrackLine> lines;
    for (std::size_t f = 0; f < frames.size(); ++f)
        for (const Detection& d : frames[f]) {
            KittiTrackLine l;
            l.frame = static_cast<int>(f);
            l.track_id = -1;
            box_to_kitti(d.box, l);
            l.score = d.score;
            lines.push_back(std::move(l));
        }
    return lines;
}

inline std::vector<KittiTrackLine> kitti_from_hyp(const HypFrames& frames) {
    std::vector<KittiTrackLine> lines;
    for (std::size_t f = 0; f < frames.size(); ++f)
        for (const HypBox& h : frames[f]) {
            KittiTrackLine l;
            l.frame = static_cast<int>(f);
            l.track_id = h.id;
            box_to_kitti(h.box, l);
            l.score = h.confidence;
            lines.push_back(std::move(l));
        }
    return lines;
}

}  // namespace motkit
