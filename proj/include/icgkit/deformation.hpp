#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "icgkit/flow.hpp"
#include "icgkit/image.hpp"
#include "icgkit/json_util.hpp"
#include "icgkit/tracking.hpp"

namespace icgkit {

struct Keypoint {
    Point2 pos;
    float response = 0.0f;
    std::vector<float> descriptor;  // zero-mean, unit-norm patch
};

struct KeypointConfig {
    int max_keypoints = 400;
    int nms_radius = 7;
    int patch = 11;
    double quality = 0.01;
    double min_response = 1e-6;
};

// Minimum-eigenvalue corners after disk non-maximum suppression, strongest
// first. Points whose patch would leave the frame are skipped.
std::vector<Keypoint> detect_keypoints(const Image& frame, const KeypointConfig& config = {});

struct Correspondences {
    std::vector<Point2> points0;
    std::vector<Point2> pointsT;
    std::vector<double> scores;  // descriptor correlation in [-1, 1]

    std::size_t size() const { return points0.size(); }
};

struct MatchConfig {
    double ratio = 0.8;
    double max_disp_fraction = 0.25;  // of the frame diagonal
};

// Mutual nearest neighbours on descriptor distance with a ratio test.
// Throws DomainError("insufficient matches") below 3 matches.
Correspondences match_keypoints(const std::vector<Keypoint>& kp0, const std::vector<Keypoint>& kpT,
                                int frame_width, int frame_height, const MatchConfig& config = {});

// Sub-pixel refinement of pointsT with Lucas-Kanade seeded by each match.
// Matches whose refinement fails or moves more than max_shift are dropped.
Correspondences refine_matches(const Pyramid& frame0, const Pyramid& frameT,
                               const Correspondences& corr, double max_shift = 2.0,
                               const LkConfig& lk = {});

// Thin-plate spline for the displacement U = pT - p0 as a function of
// frame-0 position. `affine` is the affine part of the mapping p -> p + U:
// [[a11, a12, tx], [a21, a22, ty]], identity when U vanishes.
struct TpsModel {
    std::vector<Point2> control_points;
    std::array<std::array<double, 3>, 2> affine{{{1.0, 0.0, 0.0}, {0.0, 1.0, 0.0}}};
    std::vector<std::array<double, 2>> weights;
    double lambda = 0.0;
    bool affine_only = false;

    Point2 displacement(Point2 p) const;
    static TpsModel identity() { return {}; }
};

// Drops matches whose displacement differs by more than max_residual from the
// least-squares affine displacement of their nearest neighbours.
Correspondences reject_inconsistent(const Correspondences& corr, int neighbours = 8,
                                    double max_residual = 1.5);

double tps_kernel(double r);  // r^2 log r, 0 at r = 0

// Default regularization: 1e-3 * (mean pairwise control-point distance)^2.
double default_lambda(const std::vector<Point2>& points);

TpsModel fit_tps(const Correspondences& corr, double lambda);

// Largest |sum w|, |sum w x|, |sum w y| over both components.
double side_condition_residual(const TpsModel& model);

struct DenseField {
    int width = 0;
    int height = 0;
    std::vector<double> u1;
    std::vector<double> u2;

    DenseField() = default;
    DenseField(int w, int h)
        : width(w), height(h), u1(static_cast<std::size_t>(w) * h), u2(u1.size()) {}
};

DenseField evaluate_field(const TpsModel& model, int width, int height);

struct StabilizedFrame {
    Image visible;
    Image nir;
    std::vector<std::uint8_t> valid_mask;
};

// output(x, y) = bilinear(input, x + U1, y + U2); outside -> 0 and mask false.
StabilizedFrame stabilize_frame(const DualFrame& frame, const DenseField& field);

struct StabilizeConfig {
    KeypointConfig keypoints;
    MatchConfig matching;
    bool refine = true;
    int outlier_neighbours = 8;  // 0 disables the consistency check
    double outlier_residual_px = 1.5;
    std::optional<double> lambda;  // default_lambda when unset
    LkConfig lk;
};

struct StabilizeInfo {
    std::size_t frame_index = 0;
    TpsModel model;
    std::size_t n_matches = 0;
    bool insufficient_matches = false;
};

using StabilizedSink =
    std::function<void(const DualFrame& input, const StabilizedFrame&, const StabilizeInfo&)>;

// Matches every frame against frame 0 on the visible panel and hands each
// stabilized frame to `sink` in order.
void stabilize_video(const FrameSource& video, const StabilizeConfig& config,
                     const StabilizedSink& sink);

// Writes visible/, nir/ (16-bit) and mask/ frames, stabilize_log.csv and
// stabilized.json under out_dir; TPS models go to tps_dir when given.
void stabilize_to_directory(const FrameSource& video, const StabilizeConfig& config,
                            const std::filesystem::path& out_dir,
                            const std::optional<std::filesystem::path>& tps_dir = std::nullopt);

Json tps_to_json(const TpsModel& model);
TpsModel tps_from_json(const Json& j);

}  // namespace icgkit
