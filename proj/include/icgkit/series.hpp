#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace icgkit {

// Uniformly sampled fluorescence intensity. Sample k sits at
// start_time_s + k * sample_period_s. Samples with valid[k] == 0 carry no
// measurement; their value is preserved but never used.
struct TimeSeries {
    double sample_period_s = 1.0;
    double start_time_s = 0.0;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    static TimeSeries from_values(std::vector<double> values, double sample_period_s,
                                  double start_time_s = 0.0);

    std::size_t size() const { return values.size(); }
    bool is_valid(std::size_t k) const { return valid[k] != 0; }
    double time_at(std::size_t k) const {
        return start_time_s + static_cast<double>(k) * sample_period_s;
    }
    std::size_t valid_count() const;

    // Throws DomainError if an invariant does not hold.
    void validate() const;

    friend bool operator==(const TimeSeries&, const TimeSeries&) = default;
};

struct CurveKey {
    std::string patient_id;
    std::string roi_id;

    friend auto operator<=>(const CurveKey&, const CurveKey&) = default;
};

std::string to_string(const CurveKey& key);

using CurveSet = std::map<CurveKey, TimeSeries>;

// curve-CSV: patient_id,roi_id,frame_index,time_s,value,valid
CurveSet read_curves(std::istream& in, std::string_view source = "<stream>");
CurveSet load_curves(const std::filesystem::path& path);
void write_curves(std::ostream& out, const CurveSet& curves);
void save_curves(const std::filesystem::path& path, const CurveSet& curves);

// Centered moving average over valid samples within +-window_s/2.
TimeSeries smooth(const TimeSeries& series, double window_s);

// Keeps samples with time <= end_time_s.
TimeSeries truncate(const TimeSeries& series, double end_time_s);

// Linear interpolation onto a grid with the new period, starting at the
// same start time and ending at or before the last input sample.
TimeSeries resample(const TimeSeries& series, double new_period_s);

struct Onset {
    std::size_t index = 0;
    double time_s = 0.0;
    double baseline_value = 0.0;
    double threshold = 0.0;
};

struct Peak {
    std::size_t index = 0;
    double time_s = 0.0;
    double value = 0.0;
};

struct Landmarks {
    std::size_t onset_index = 0;
    double onset_time_s = 0.0;
    std::size_t peak_index = 0;
    double peak_time_s = 0.0;
    double peak_value = 0.0;
    double baseline_value = 0.0;
};

struct LandmarkConfig {
    double smooth_window_s = 2.0;
    double baseline_window_s = 5.0;
    double k_sigma = 3.0;
    double min_above_s = 1.0;
};

// Onset over the series as given (callers pass the smoothed curve).
// The baseline is the median of the valid samples in the first
// baseline_window_s; the onset is the first sample that exceeds
// baseline + k_sigma * 1.4826 * MAD and stays above for min_above_s.
Onset detect_onset(const TimeSeries& series, double baseline_window_s = 5.0,
                   double k_sigma = 3.0, double min_above_s = 1.0);

// Argmax over valid samples, earliest index on ties.
Peak detect_peak(const TimeSeries& series);

// Smooths `raw` with config.smooth_window_s, then finds onset and peak on
// the smoothed curve. Throws DomainError if the peak precedes the onset.
Landmarks find_landmarks(const TimeSeries& raw, const LandmarkConfig& config = {});

// Same, on a series that is already smoothed.
Landmarks landmarks_of_smoothed(const TimeSeries& smoothed, const LandmarkConfig& config = {});

}  // namespace icgkit
