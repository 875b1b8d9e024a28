#pragma once

// Oriented 3D boxes, rotated IoU (BEV and 3D), center distance and
// camera projection. All operations are pure; boxes are plain values.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace motkit {

constexpr double kPi = 3.14159265358979323846;

// Wrap an angle into [-pi, pi).
inline double normalize_angle(double theta) {
    double t = std::fmod(theta + kPi, 2.0 * kPi);
    if (t < 0.0) t += 2.0 * kPi;
    return t - kPi;
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
};

// Oriented 3D bounding box. (x, y, z) is the object center, z is the
// vertical axis. l runs along the heading, w perpendicular to it, h is
// vertical extent. theta is measured counter-clockwise from +x in the
// ground plane.
struct Box3D {
    double x = 0.0, y = 0.0, z = 0.0;
    double l = 1.0, w = 1.0, h = 1.0;
    double theta = 0.0;

    bool valid() const {
        return std::isfinite(x) && std::isfinite(y) && std::isfinite(z) &&
               std::isfinite(theta) && std::isfinite(l) && std::isfinite(w) &&
               std::isfinite(h) && l > 0.0 && w > 0.0 && h > 0.0 &&
               theta >= -kPi && theta < kPi;
    }
    double volume() const { return l * w * h; }
};

inline Box3D make_box(double x, double y, double z, double l, double w, double h,
                      double theta) {
    Box3D b{x, y, z, l, w, h, normalize_angle(theta)};
    if (!b.valid()) throw std::invalid_argument("make_box: invalid box parameters");
    return b;
}

// Axis-aligned 2D rectangle in image space, parameterized by center and size.
struct Box2D {
    double xc = 0.0, yc = 0.0;
    double w = 0.0, h = 0.0;
};

// 3x4 projection matrix, row-major.
struct CameraMatrix {
    std::array<double, 12> p{};

    double operator()(int r, int c) const { return p[static_cast<size_t>(r) * 4 + c]; }
    double& operator()(int r, int c) { return p[static_cast<size_t>(r) * 4 + c]; }

    static CameraMatrix identity_like() {
        CameraMatrix m;
        m(0, 0) = 1.0;
        m(1, 1) = 1.0;
        m(2, 2) = 1.0;
        return m;
    }
};

struct NonPositiveDepth : std::runtime_error {
    NonPositiveDepth() : std::runtime_error("corner projects behind the camera") {}
};

namespace detail {

struct Pt {
    double x, y;
};

// Ground-plane footprint, counter-clockwise.
inline std::array<Pt, 4> bev_corners(const Box3D& b) {
    const double c = std::cos(b.theta), s = std::sin(b.theta);
    const double hl = 0.5 * b.l, hw = 0.5 * b.w;
    auto rot = [&](double lx, double ly) {
        return Pt{b.x + c * lx - s * ly, b.y + s * lx + c * ly};
    };
    return {rot(hl, hw), rot(-hl, hw), rot(-hl, -hw), rot(hl, -hw)};
}

inline double shoelace(const Pt* pts, int n) {
    double a = 0.0;
    for (int i = 0; i < n; ++i) {
        const Pt& p = pts[i];
        const Pt& q = pts[(i + 1) % n];
        a += p.x * q.y - q.x * p.y;
    }
    return 0.5 * a;
}

// Sutherland-Hodgman clip of a convex polygon against one directed edge
// (inside = left of a->b). Output vertex count is bounded by in+1.
inline int clip_edge(const Pt* in, int n, Pt a, Pt b, Pt* out) {
    auto side = [&](const Pt& p) {
        return (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    };
    int m = 0;
    for (int i = 0; i < n; ++i) {
        const Pt& cur = in[i];
        const Pt& nxt = in[(i + 1) % n];
        const double dc = side(cur), dn = side(nxt);
        if (dc >= 0.0) {
            out[m++] = cur;
            if (dn < 0.0) {
                const double t = dc / (dc - dn);
                out[m++] = {cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)};
            }
        } else if (dn >= 0.0) {
            const double t = dc / (dc - dn);
            out[m++] = {cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)};
        }
    }
    return m;
}

// Intersection area of the two rotated footprints. Clipping a convex quad
// against a convex quad yields at most 8 vertices.
inline double bev_intersection_area(const Box3D& a, const Box3D& b) {
    auto pa = bev_corners(a);
    auto pb = bev_corners(b);
    Pt buf1[16], buf2[16];
    std::copy(pa.begin(), pa.end(), buf1);
    int n = 4;
    Pt* src = buf1;
    Pt* dst = buf2;
    for (int e = 0; e < 4 && n > 0; ++e) {
        n = clip_edge(src, n, pb[e], pb[(e + 1) % 4], dst);
        std::swap(src, dst);
    }
    if (n < 3) return 0.0;
    const double area = shoelace(src, n);
    // Slivers from degenerate contact collapse to zero.
    return area > 1e-12 ? area : 0.0;
}

// Footprint area from the same corner polygon the clipper sees, so that
// identical boxes produce a bit-identical intersection and union (and an
// IoU of exactly 1).
inline double bev_area(const Box3D& b) {
    const auto c = detail::bev_corners(b);
    return detail::shoelace(c.data(), 4);
}

}  // namespace detail

// Rotated IoU of the two ground-plane footprints.
inline double iou_bev(const Box3D& a, const Box3D& b) {
    const double inter = detail::bev_intersection_area(a, b);
    if (inter <= 0.0) return 0.0;
    const double uni = detail::bev_area(a) + detail::bev_area(b) - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

// Volumetric IoU: BEV intersection extruded over the vertical overlap.
// Box volumes use the same interval arithmetic as the overlap so that
// identical boxes land on exactly 1.
inline double iou_3d(const Box3D& a, const Box3D& b) {
    const double zlo = std::max(a.z - 0.5 * a.h, b.z - 0.5 * b.h);
    const double zhi = std::min(a.z + 0.5 * a.h, b.z + 0.5 * b.h);
    const double dz = zhi - zlo;
    if (dz <= 0.0) return 0.0;
    const double inter = detail::bev_intersection_area(a, b) * dz;
    if (inter <= 0.0) return 0.0;
    const double ha = (a.z + 0.5 * a.h) - (a.z - 0.5 * a.h);
    const double hb = (b.z + 0.5 * b.h) - (b.z - 0.5 * b.h);
    const double uni = detail::bev_area(a) * ha + detail::bev_area(b) * hb - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

inline double center_distance(const Box3D& a, const Box3D& b, bool planar = false) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    const double dz = planar ? 0.0 : a.z - b.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// The 8 vertices: bottom face counter-clockwise, then the top face in the
// same order. Corner centroid equals the box center.
inline std::array<Vec3, 8> corners_3d(const Box3D& b) {
    const double c = std::cos(b.theta), s = std::sin(b.theta);
    const double hl = 0.5 * b.l, hw = 0.5 * b.w, hh = 0.5 * b.h;
    const double sx[4] = {+hl, -hl, -hl, +hl};
    const double sy[4] = {+hw, +hw, -hw, -hw};
    std::array<Vec3, 8> out;
    for (int k = 0; k < 2; ++k) {
        const double dz = k == 0 ? -hh : +hh;
        for (int i = 0; i < 4; ++i) {
            out[static_cast<size_t>(4 * k + i)] = {b.x + c * sx[i] - s * sy[i],
                                                   b.y + s * sx[i] + c * sy[i],
                                                   b.z + dz};
        }
    }
    return out;
}

// Minimum axis-aligned rectangle enclosing the 8 projected corners.
// Throws NonPositiveDepth if any corner lands behind the camera.
inline Box2D project_to_image(const Box3D& b, const CameraMatrix& P) {
    const auto corners = corners_3d(b);
    double umin = std::numeric_limits<double>::infinity(), umax = -umin;
    double vmin = umin, vmax = -umin;
    for (const Vec3& c : corners) {
        const double w = P(2, 0) * c.x + P(2, 1) * c.y + P(2, 2) * c.z + P(2, 3);
        if (w <= 0.0) throw NonPositiveDepth{};
        const double u = (P(0, 0) * c.x + P(0, 1) * c.y + P(0, 2) * c.z + P(0, 3)) / w;
        const double v = (P(1, 0) * c.x + P(1, 1) * c.y + P(1, 2) * c.z + P(1, 3)) / w;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    return Box2D{0.5 * (umin + umax), 0.5 * (vmin + vmax), umax - umin, vmax - vmin};
}

}  // namespace motkit
