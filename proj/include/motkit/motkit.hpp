#pragma once

#include "motkit/assignment.hpp"
#include "motkit/config.hpp"
#include "motkit/detection.hpp"
#include "motkit/geometry.hpp"
#include "motkit/kitti.hpp"
#include "motkit/metrics.hpp"
#include "motkit/model_io.hpp"
#include "motkit/neural.hpp"
#include "motkit/selection.hpp"
#include "motkit/simulator.hpp"
#include "motkit/tracker.hpp"
#include "motkit/training.hpp"
