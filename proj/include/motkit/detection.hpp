#pragma once

#include <optional>
#include <vector>

#include "motkit/geometry.hpp"

namespace motkit {

// Detector output for one frame: an oriented box plus the raw confidence
// score. Scores are logit-like unbounded reals, never probabilities.
struct Detection {
    Box3D box;
    double score = 0.0;
    int frame = 0;
    std::optional<Box2D> image_box;
};

using Frame = std::vector<Detection>;

}  // namespace motkit
