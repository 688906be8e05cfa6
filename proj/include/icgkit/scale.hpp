#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "icgkit/json_util.hpp"
#include "icgkit/series.hpp"

namespace icgkit {

struct ScaleConfig {
    double s_min = 0.2;
    double s_max = 5.0;
    int grid_points = 200;  // log-uniform scan
    // Step of the linear scan around the best grid node, relative to its
    // scale; golden section then refines the best step.
    double scan_resolution = 1e-5;
    double min_overlap_s = 10.0;
    double onset_fraction = 0.1;  // alignment origin, as a fraction of the rise
    LandmarkConfig landmarks;
};

Json scale_config_to_json(const ScaleConfig& c);
ScaleConfig scale_config_from_json(const Json& j);

// Onset-aligned, baseline-subtracted, peak-normalized curve.
struct AlignedCurve {
    double start_s = 0.0;  // time of the first sample relative to the onset
    double period_s = 1.0;
    std::vector<double> value;
    std::vector<std::uint8_t> valid;
};

// The baseline comes from onset detection on the smoothed curve. Time 0 is
// where the raw curve last rises through baseline + onset_fraction * (peak -
// baseline) before its peak, interpolated linearly; unlike a noise threshold
// on a fixed smoothing window, this point moves with a time stretch.
AlignedCurve align_curve(const TimeSeries& series, const ScaleConfig& config);

// RMS of test(t) - reference(s * t) over post-onset test samples whose scaled
// time falls inside the reference; nullopt when that span is shorter than
// min_overlap_s.
std::optional<double> scale_residual(const AlignedCurve& test, const AlignedCurve& reference, double s,
                                     double min_overlap_s = 10.0);

struct ScaleEstimate {
    std::string roi_id;
    double scale = 1.0;
    double residual_rms = 0.0;
    bool flagged = false;
};

// s < 1 means the test curve is slower than the reference.
ScaleEstimate estimate_scale(const TimeSeries& test, const TimeSeries& reference,
                             const ScaleConfig& config = {});

struct ScaleRecord {
    CurveKey key;
    std::optional<ScaleEstimate> estimate;
    std::string error;  // set when estimate is empty
};

// Estimates every curve against the one whose roi_id is reference_roi; the
// reference itself is reported with scale 1. Ordered by roi_id.
std::vector<ScaleRecord> recommend(const CurveSet& curves, const std::string& reference_roi,
                                   double flag_threshold = 0.7, const ScaleConfig& config = {});

Json recommendation_to_json(const std::vector<ScaleRecord>& records);

}  // namespace icgkit
