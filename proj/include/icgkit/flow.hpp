#pragma once

#include <optional>
#include <vector>

#include "icgkit/image.hpp"

namespace icgkit {

// Image pyramid with per-level central-difference gradients.
struct Pyramid {
    std::vector<Image> levels;
    std::vector<Image> gx;
    std::vector<Image> gy;
};

Pyramid build_pyramid(const Image& img, int n_levels);

struct LkConfig {
    int levels = 3;
    int window = 15;  // side length, odd
    int max_iterations = 20;
    double epsilon = 0.01;  // px, stop when the update is smaller
    // Per-pixel mean of the structure-tensor minimum eigenvalue below which
    // the window is considered textureless.
    double min_eigen = 1e-6;
};

// Pyramidal Lucas-Kanade: position of `p` (in `from`) inside `to`, starting
// from the initial displacement `guess`. Empty when the window is
// textureless or the result leaves the image.
std::optional<Point2> lk_track(const Pyramid& from, const Pyramid& to, Point2 p,
                               Point2 guess = {}, const LkConfig& config = {});

}  // namespace icgkit
