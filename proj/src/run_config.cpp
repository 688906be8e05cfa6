#include "icgkit/run_config.hpp"

#include "icgkit/error.hpp"

namespace icgkit {

namespace {

void require(bool ok, const std::string& what) {
    if (!ok) throw ConfigError("config: " + what);
}

Json lk_to_json(const LkConfig& c) {
    return {{"levels", c.levels},
            {"window", c.window},
            {"max_iterations", c.max_iterations},
            {"epsilon", json_number(c.epsilon)},
            {"min_eigen", json_number(c.min_eigen)}};
}

LkConfig lk_from_json(const Json& j, LkConfig c, const std::string& ctx) {
    reject_unknown_keys(j, {"levels", "window", "max_iterations", "epsilon", "min_eigen"}, ctx);
    read_key(j, "levels", c.levels);
    read_key(j, "window", c.window);
    read_key(j, "max_iterations", c.max_iterations);
    read_key(j, "epsilon", c.epsilon);
    read_key(j, "min_eigen", c.min_eigen);
    require(c.levels >= 1, ctx + ".levels must be at least 1");
    require(c.window >= 3 && c.window % 2 == 1, ctx + ".window must be odd and at least 3");
    require(c.max_iterations >= 1, ctx + ".max_iterations must be at least 1");
    require(c.epsilon > 0, ctx + ".epsilon must be positive");
    return c;
}

Json landmarks_to_json(const LandmarkConfig& c) {
    return {{"smooth_window_s", json_number(c.smooth_window_s)},
            {"baseline_window_s", json_number(c.baseline_window_s)},
            {"k_sigma", json_number(c.k_sigma)},
            {"min_above_s", json_number(c.min_above_s)}};
}

LandmarkConfig landmarks_from_json(const Json& j) {
    reject_unknown_keys(j, {"smooth_window_s", "baseline_window_s", "k_sigma", "min_above_s"}, "landmarks");
    LandmarkConfig c;
    read_key(j, "smooth_window_s", c.smooth_window_s);
    read_key(j, "baseline_window_s", c.baseline_window_s);
    read_key(j, "k_sigma", c.k_sigma);
    read_key(j, "min_above_s", c.min_above_s);
    require(c.smooth_window_s >= 0, "landmarks.smooth_window_s must be non-negative");
    require(c.baseline_window_s > 0, "landmarks.baseline_window_s must be positive");
    require(c.k_sigma > 0, "landmarks.k_sigma must be positive");
    require(c.min_above_s >= 0, "landmarks.min_above_s must be non-negative");
    return c;
}

Json track_to_json(const TrackConfig& c) {
    return {{"lk", lk_to_json(c.lk)},
            {"fb_threshold", json_number(c.fb_threshold)},
            {"min_features", c.min_features},
            {"min_inliers", c.min_inliers},
            {"max_corners", c.corners.max_corners},
            {"corner_quality", json_number(c.corners.quality)},
            {"corner_min_distance", json_number(c.corners.min_distance)},
            {"min_scale", json_number(c.min_scale)},
            {"max_scale", json_number(c.max_scale)}};
}

TrackConfig track_from_json(const Json& j) {
    reject_unknown_keys(j, {"lk", "fb_threshold", "min_features", "min_inliers", "max_corners",
                            "corner_quality", "corner_min_distance", "min_scale", "max_scale"},
                        "track");
    TrackConfig c;
    if (j.contains("lk")) c.lk = lk_from_json(j.at("lk"), c.lk, "track.lk");
    read_key(j, "fb_threshold", c.fb_threshold);
    read_key(j, "min_features", c.min_features);
    read_key(j, "min_inliers", c.min_inliers);
    read_key(j, "max_corners", c.corners.max_corners);
    read_key(j, "corner_quality", c.corners.quality);
    read_key(j, "corner_min_distance", c.corners.min_distance);
    read_key(j, "min_scale", c.min_scale);
    read_key(j, "max_scale", c.max_scale);
    require(c.fb_threshold > 0, "track.fb_threshold must be positive");
    require(c.min_features >= 1 && c.min_inliers >= 1, "track.min_features and min_inliers must be at least 1");
    require(c.corners.max_corners >= 1, "track.max_corners must be at least 1");
    require(c.min_scale > 0 && c.min_scale <= 1 && c.max_scale >= 1, "track needs 0 < min_scale <= 1 <= max_scale");
    return c;
}

Json stabilize_to_json(const StabilizeConfig& c) {
    return {{"max_keypoints", c.keypoints.max_keypoints},
            {"nms_radius", c.keypoints.nms_radius},
            {"patch", c.keypoints.patch},
            {"keypoint_quality", json_number(c.keypoints.quality)},
            {"ratio", json_number(c.matching.ratio)},
            {"max_disp_fraction", json_number(c.matching.max_disp_fraction)},
            {"refine", c.refine},
            {"outlier_neighbours", c.outlier_neighbours},
            {"outlier_residual_px", json_number(c.outlier_residual_px)},
            {"lambda", c.lambda ? json_number(*c.lambda) : Json(nullptr)},
            {"lk", lk_to_json(c.lk)}};
}

StabilizeConfig stabilize_from_json(const Json& j) {
    reject_unknown_keys(j, {"max_keypoints", "nms_radius", "patch", "keypoint_quality", "ratio",
                            "max_disp_fraction", "refine", "outlier_neighbours", "outlier_residual_px",
                            "lambda", "lk"},
                        "stabilize");
    StabilizeConfig c;
    read_key(j, "max_keypoints", c.keypoints.max_keypoints);
    read_key(j, "nms_radius", c.keypoints.nms_radius);
    read_key(j, "patch", c.keypoints.patch);
    read_key(j, "keypoint_quality", c.keypoints.quality);
    read_key(j, "ratio", c.matching.ratio);
    read_key(j, "max_disp_fraction", c.matching.max_disp_fraction);
    read_key(j, "refine", c.refine);
    read_key(j, "outlier_neighbours", c.outlier_neighbours);
    read_key(j, "outlier_residual_px", c.outlier_residual_px);
    if (auto it = j.find("lambda"); it != j.end() && !it->is_null()) c.lambda = it->get<double>();
    if (j.contains("lk")) c.lk = lk_from_json(j.at("lk"), c.lk, "stabilize.lk");
    require(c.keypoints.max_keypoints >= 3, "stabilize.max_keypoints must be at least 3");
    require(c.keypoints.patch >= 3 && c.keypoints.patch % 2 == 1, "stabilize.patch must be odd and at least 3");
    require(c.matching.ratio > 0 && c.matching.ratio <= 1, "stabilize.ratio must lie in (0, 1]");
    require(c.matching.max_disp_fraction > 0, "stabilize.max_disp_fraction must be positive");
    require(c.outlier_neighbours >= 0, "stabilize.outlier_neighbours must be non-negative");
    require(!c.lambda || *c.lambda >= 0, "stabilize.lambda must be non-negative");
    return c;
}

Json fit_to_json(const FitConfig& c) {
    return {{"max_iterations", c.max_iterations},
            {"ftol", json_number(c.ftol)},
            {"xtol", json_number(c.xtol)},
            {"n_restarts", c.n_restarts},
            {"perturbation", json_number(c.perturbation)}};
}

FitConfig fit_from_json(const Json& j) {
    reject_unknown_keys(j, {"max_iterations", "ftol", "xtol", "n_restarts", "perturbation"}, "fit");
    FitConfig c;
    read_key(j, "max_iterations", c.max_iterations);
    read_key(j, "ftol", c.ftol);
    read_key(j, "xtol", c.xtol);
    read_key(j, "n_restarts", c.n_restarts);
    read_key(j, "perturbation", c.perturbation);
    require(c.max_iterations >= 1, "fit.max_iterations must be at least 1");
    require(c.ftol > 0 && c.xtol > 0, "fit.ftol and fit.xtol must be positive");
    require(c.n_restarts >= 0, "fit.n_restarts must be non-negative");
    require(c.perturbation >= 0, "fit.perturbation must be non-negative");
    return c;
}

Json features_to_json(const FeatureConfig& c) {
    return {{"peak_search_s", json_number(c.peak_search_s)},
            {"downslope_window_s", json_number(c.downslope_window_s)},
            {"min_downslope_window_s", json_number(c.min_downslope_window_s)},
            {"horizon_after_peak_s", json_number(c.horizon_after_peak_s)}};
}

FeatureConfig features_from_json(const Json& j) {
    reject_unknown_keys(j, {"peak_search_s", "downslope_window_s", "min_downslope_window_s", "horizon_after_peak_s"},
                        "features");
    FeatureConfig c;
    read_key(j, "peak_search_s", c.peak_search_s);
    read_key(j, "downslope_window_s", c.downslope_window_s);
    read_key(j, "min_downslope_window_s", c.min_downslope_window_s);
    read_key(j, "horizon_after_peak_s", c.horizon_after_peak_s);
    require(c.peak_search_s > 0, "features.peak_search_s must be positive");
    require(c.min_downslope_window_s > 0 && c.min_downslope_window_s <= c.downslope_window_s,
            "features needs 0 < min_downslope_window_s <= downslope_window_s");
    require(c.horizon_after_peak_s >= c.downslope_window_s,
            "features.horizon_after_peak_s must cover the downslope window");
    return c;
}

Json heatmap_to_json(const HeatmapConfig& c) {
    return {{"min_valid_fraction", json_number(c.min_valid_fraction)},
            {"lo_percentile", json_number(c.lo_percentile)},
            {"hi_percentile", json_number(c.hi_percentile)}};
}

HeatmapConfig heatmap_from_json(const Json& j) {
    reject_unknown_keys(j, {"min_valid_fraction", "lo_percentile", "hi_percentile"}, "heatmap");
    HeatmapConfig c;
    read_key(j, "min_valid_fraction", c.min_valid_fraction);
    read_key(j, "lo_percentile", c.lo_percentile);
    read_key(j, "hi_percentile", c.hi_percentile);
    require(c.min_valid_fraction >= 0 && c.min_valid_fraction <= 1, "heatmap.min_valid_fraction must lie in [0, 1]");
    require(c.lo_percentile >= 0 && c.lo_percentile < c.hi_percentile && c.hi_percentile <= 100,
            "heatmap needs 0 <= lo_percentile < hi_percentile <= 100");
    return c;
}

}  // namespace

const char* to_string(LogLevel level) {
    switch (level) {
        case LogLevel::error: return "error";
        case LogLevel::warn: return "warn";
        case LogLevel::info: return "info";
        case LogLevel::debug: return "debug";
    }
    return "warn";
}

LogLevel parse_log_level(std::string_view s) {
    for (LogLevel l : {LogLevel::error, LogLevel::warn, LogLevel::info, LogLevel::debug}) {
        if (s == to_string(l)) return l;
    }
    throw ConfigError("unknown log level '" + std::string(s) + "' (error, warn, info, debug)");
}

Json run_config_to_json(const RunConfig& c) {
    Json recommend = scale_config_to_json(c.recommend);
    recommend["flag_threshold"] = json_number(c.flag_threshold);
    return {{"seed", c.seed},
            {"log_level", to_string(c.log_level)},
            {"landmarks", landmarks_to_json(c.features.landmarks)},
            {"track", track_to_json(c.track)},
            {"stabilize", stabilize_to_json(c.stabilize)},
            {"fit", fit_to_json(c.fit)},
            {"features", features_to_json(c.features)},
            {"heatmap", heatmap_to_json(c.heatmap)},
            {"classify", hyperparams_to_json(c.classify)},
            {"recommend", recommend}};
}

RunConfig run_config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    reject_unknown_keys(j, {"seed", "log_level", "landmarks", "track", "stabilize", "fit", "features", "heatmap",
                            "classify", "recommend"},
                        "config");
    RunConfig c;
    try {
        read_key(j, "seed", c.seed);
        if (j.contains("log_level")) c.log_level = parse_log_level(j.at("log_level").get<std::string>());
        LandmarkConfig lm;
        if (j.contains("landmarks")) lm = landmarks_from_json(j.at("landmarks"));
        if (j.contains("track")) c.track = track_from_json(j.at("track"));
        if (j.contains("stabilize")) c.stabilize = stabilize_from_json(j.at("stabilize"));
        if (j.contains("fit")) c.fit = fit_from_json(j.at("fit"));
        if (j.contains("features")) c.features = features_from_json(j.at("features"));
        if (j.contains("heatmap")) c.heatmap = heatmap_from_json(j.at("heatmap"));
        if (j.contains("classify")) c.classify = hyperparams_from_json(j.at("classify"));
        if (j.contains("recommend")) {
            Json r = j.at("recommend");
            if (r.contains("flag_threshold")) {
                c.flag_threshold = r.at("flag_threshold").get<double>();
                r.erase("flag_threshold");
            }
            c.recommend = scale_config_from_json(r);
        }
        c.features.landmarks = lm;
        c.fit.landmarks = lm;
        c.recommend.landmarks = lm;
        c.heatmap.features = c.features;
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    try {
        return run_config_from_json(read_json_file(path));
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

}  // namespace icgkit
