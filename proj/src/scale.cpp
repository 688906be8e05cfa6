#include "icgkit/scale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "icgkit/common.hpp"
#include "icgkit/error.hpp"

namespace icgkit {

Json scale_config_to_json(const ScaleConfig& c) {
    return Json{{"s_min", json_number(c.s_min)},
                {"s_max", json_number(c.s_max)},
                {"grid_points", c.grid_points},
                {"min_overlap_s", json_number(c.min_overlap_s)},
                {"onset_fraction", json_number(c.onset_fraction)},
                {"scan_resolution", json_number(c.scan_resolution)}};
}

ScaleConfig scale_config_from_json(const Json& j) {
    reject_unknown_keys(j, {"s_min", "s_max", "grid_points", "min_overlap_s", "onset_fraction", "scan_resolution"},
                        "scale config");
    ScaleConfig c;
    try {
        read_key(j, "s_min", c.s_min);
        read_key(j, "s_max", c.s_max);
        read_key(j, "grid_points", c.grid_points);
        read_key(j, "min_overlap_s", c.min_overlap_s);
        read_key(j, "onset_fraction", c.onset_fraction);
        read_key(j, "scan_resolution", c.scan_resolution);
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("scale config: ") + e.what());
    }
    if (!(c.s_min > 0 && c.s_min < c.s_max)) throw ConfigError("scale config needs 0 < s_min < s_max");
    if (c.grid_points < 3) throw ConfigError("scale config needs at least 3 grid points");
    if (!(c.min_overlap_s >= 0)) throw ConfigError("min_overlap_s must be non-negative");
    if (!(c.scan_resolution > 0 && c.scan_resolution <= 0.1)) throw ConfigError("scan_resolution must lie in (0, 0.1]");
    if (!(c.onset_fraction > 0 && c.onset_fraction < 1)) throw ConfigError("onset_fraction must lie in (0, 1)");
    return c;
}

AlignedCurve align_curve(const TimeSeries& series, const ScaleConfig& config) {
    series.validate();
    const LandmarkConfig& lc = config.landmarks;
    const TimeSeries sm = smooth(series, lc.smooth_window_s);
    const Onset onset = detect_onset(sm, lc.baseline_window_s, lc.k_sigma, lc.min_above_s);
    const double base = onset.baseline_value;
    std::size_t peak_k = onset.index;
    for (std::size_t k = 0; k < series.size(); ++k) {
        if (series.valid[k] && series.values[k] > series.values[peak_k]) peak_k = k;
    }
    const double amp = series.values[peak_k] - base;
    if (!(amp > 0)) throw DomainError("curve has no rise above its baseline");

    // Origin: the last upward crossing of the onset level before the peak.
    const double level = base + config.onset_fraction * amp;
    std::optional<double> origin;
    std::size_t prev = peak_k;
    for (std::size_t k = peak_k; k-- > 0;) {
        if (!series.valid[k]) continue;
        if (series.values[k] <= level) {
            const double a = series.values[k];
            const double b = series.values[prev];
            origin = series.time_at(k) + (series.time_at(prev) - series.time_at(k)) * (level - a) / (b - a);
            break;
        }
        prev = k;
    }
    if (!origin) throw DomainError("curve starts above its onset level");

    AlignedCurve c;
    c.start_s = series.start_time_s - *origin;
    c.period_s = series.sample_period_s;
    c.value.resize(series.size());
    c.valid = series.valid;
    for (std::size_t k = 0; k < series.size(); ++k) {
        c.value[k] = series.valid[k] ? (series.values[k] - base) / amp : 0.0;
    }
    return c;
}

std::optional<double> scale_residual(const AlignedCurve& test, const AlignedCurve& reference, double s,
                                     double min_overlap_s) {
    const std::size_t nr = reference.value.size();
    if (nr < 2) return std::nullopt;
    double sum = 0.0;
    std::size_t count = 0;
    double t_lo = std::numeric_limits<double>::infinity();
    double t_hi = -t_lo;
    for (std::size_t k = 0; k < test.value.size(); ++k) {
        if (!test.valid[k]) continue;
        const double t = test.start_s + static_cast<double>(k) * test.period_s;
        if (t < 0.0) continue;
        const double u = (s * t - reference.start_s) / reference.period_s;
        if (u < 0.0 || u > static_cast<double>(nr - 1)) continue;
        auto j = static_cast<std::size_t>(std::floor(u));
        if (j == nr - 1) --j;
        if (!reference.valid[j] || !reference.valid[j + 1]) continue;
        const double f = u - static_cast<double>(j);
        const double r = (1.0 - f) * reference.value[j] + f * reference.value[j + 1];
        const double d = test.value[k] - r;
        sum += d * d;
        ++count;
        t_lo = std::min(t_lo, t);
        t_hi = std::max(t_hi, t);
    }
    if (count == 0 || t_hi - t_lo < min_overlap_s) return std::nullopt;
    return std::sqrt(sum / static_cast<double>(count));
}

ScaleEstimate estimate_scale(const TimeSeries& test, const TimeSeries& reference, const ScaleConfig& config) {
    if (!(config.s_min > 0 && config.s_min < config.s_max)) throw ConfigError("scale search needs 0 < s_min < s_max");
    if (config.grid_points < 3) throw ConfigError("scale search needs at least 3 grid points");
    if (!(config.scan_resolution > 0)) throw ConfigError("scale search needs a positive scan resolution");
    const AlignedCurve a = align_curve(test, config);
    const AlignedCurve b = align_curve(reference, config);
    auto objective = [&](double s) {
        return scale_residual(a, b, s, config.min_overlap_s).value_or(std::numeric_limits<double>::infinity());
    };

    const int n = config.grid_points;
    const double l0 = std::log(config.s_min);
    const double l1 = std::log(config.s_max);
    std::vector<double> grid(n);
    for (int i = 0; i < n; ++i) grid[i] = std::exp(l0 + (l1 - l0) * i / (n - 1));
    grid.front() = config.s_min;
    grid.back() = config.s_max;
    int best = -1;
    double best_r = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double r = objective(grid[i]);
        if (r < best_r) {
            best_r = r;
            best = i;
        }
    }
    if (best < 0) {
        throw DomainError("no candidate scale in [" + std::to_string(config.s_min) + ", " +
                          std::to_string(config.s_max) + "] overlaps the reference for " +
                          std::to_string(config.min_overlap_s) + " s");
    }

    // The residual jumps as samples enter or leave the overlap, so the
    // bracket around the best node is scanned linearly before golden section.
    double lo = grid[std::max(best - 2, 0)];
    double hi = grid[std::min(best + 2, n - 1)];
    const int n_scan = static_cast<int>(std::ceil((hi - lo) / (config.scan_resolution * grid[best]))) + 1;
    const double step = (hi - lo) / (n_scan - 1);
    double best_s = grid[best];
    for (int i = 0; i < n_scan; ++i) {
        const double c = lo + step * i;
        const double r = objective(c);
        if (r < best_r) {
            best_r = r;
            best_s = c;
        }
    }
    lo = std::max(lo, best_s - step);
    hi = std::min(hi, best_s + step);
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = hi - gr * (hi - lo);
    double x2 = lo + gr * (hi - lo);
    double f1 = objective(x1);
    double f2 = objective(x2);
    while (hi - lo > 1e-10 * hi) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = objective(x2);
        }
    }
    ScaleEstimate e;
    const double mid = 0.5 * (lo + hi);
    const double fm = objective(mid);
    if (fm <= best_r) {
        e.scale = mid;
        e.residual_rms = fm;
    } else {
        e.scale = best_s;
        e.residual_rms = best_r;
    }
    return e;
}

std::vector<ScaleRecord> recommend(const CurveSet& curves, const std::string& reference_roi, double flag_threshold,
                                   const ScaleConfig& config) {
    std::vector<CurveKey> keys;
    const TimeSeries* ref = nullptr;
    CurveKey ref_key;
    for (const auto& [k, s] : curves) {
        keys.push_back(k);
        if (k.roi_id != reference_roi) continue;
        if (ref) throw ConfigError("reference ROI '" + reference_roi + "' appears for more than one patient");
        ref = &s;
        ref_key = k;
    }
    if (!ref) throw ConfigError("reference ROI '" + reference_roi + "' not found in the curves");
    try {
        align_curve(*ref, config);
    } catch (const DomainError& ex) {
        throw DomainError("reference ROI " + to_string(ref_key) + ": " + ex.what());
    }
    std::stable_sort(keys.begin(), keys.end(), [](const CurveKey& x, const CurveKey& y) { return x.roi_id < y.roi_id; });

    std::vector<ScaleRecord> out(keys.size());
    parallel_for(keys.size(), [&](std::size_t i) {
        ScaleRecord& r = out[i];
        r.key = keys[i];
        if (keys[i] == ref_key) {
            r.estimate = ScaleEstimate{keys[i].roi_id, 1.0, 0.0, false};
            return;
        }
        try {
            ScaleEstimate e = estimate_scale(curves.at(keys[i]), *ref, config);
            e.roi_id = keys[i].roi_id;
            e.flagged = e.scale < flag_threshold;
            r.estimate = e;
        } catch (const Error& ex) {
            r.error = "ROI " + to_string(keys[i]) + ": " + ex.what();
        }
    });
    return out;
}

Json recommendation_to_json(const std::vector<ScaleRecord>& records) {
    Json arr = Json::array();
    for (const auto& r : records) {
        if (r.estimate) {
            arr.push_back({{"roi_id", r.key.roi_id},
                           {"scale", json_number(r.estimate->scale)},
                           {"residual_rms", json_number(r.estimate->residual_rms)},
                           {"flagged", r.estimate->flagged}});
        } else {
            arr.push_back({{"roi_id", r.key.roi_id},
                           {"scale", nullptr},
                           {"residual_rms", nullptr},
                           {"flagged", false},
                           {"error", r.error}});
        }
    }
    return arr;
}

}  // namespace icgkit
