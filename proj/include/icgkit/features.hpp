#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "icgkit/kinetics.hpp"
#include "icgkit/series.hpp"

namespace icgkit {

struct FeatureConfig {
    LandmarkConfig landmarks;
    // The peak is searched within this span after the onset, so a curve that
    // keeps accumulating has its peak at the end of the span.
    double peak_search_s = 60.0;
    double downslope_window_s = 20.0;
    double min_downslope_window_s = 5.0;
    // Nothing after peak + horizon is read, which makes the features
    // invariant to truncation beyond that point.
    double horizon_after_peak_s = 25.0;
};

struct SimpleFeatures {
    double ttp_s = 0.0;
    double upslope = 0.0;
    std::optional<double> downslope;   // unset when less than the minimum window remains
    std::optional<double> time_ratio;  // ttp / fall-half time
    bool time_ratio_censored = false;  // fall-half time not reached; ratio is a lower-side bound
    double center_of_mass_s = 0.0;
    Landmarks landmarks;
};

// delta_t * sum(k * y[k]) / sum(y[k]) over valid samples, k counted from the
// first sample of the series.
double center_of_mass(const TimeSeries& series);

SimpleFeatures simple_features(const TimeSeries& series, const FeatureConfig& config = {});

const std::vector<std::string>& simple_feature_names();   // ttp_s upslope downslope time_ratio mu_s
const std::vector<std::string>& kinetic_feature_names();  // D tau_s tau_i_s K b t0_s
bool is_kinetic_feature(const std::string& name);

struct FeatureRow {
    CurveKey key;
    std::vector<double> values;
    std::optional<std::string> label;
};

struct FeatureTable {
    std::vector<std::string> columns;
    std::vector<FeatureRow> rows;

    bool has_labels() const;
    std::size_t column_index(const std::string& name) const;  // throws ConfigError
    FeatureTable select(std::span<const std::string> names) const;
};

struct DroppedRow {
    CurveKey key;
    std::string reason;
};

struct FeatureMatrix {
    FeatureTable table;
    std::vector<DroppedRow> dropped;
};

using FitTable = std::map<CurveKey, FitResult>;
using LabelMap = std::map<CurveKey, std::string>;

// Rows in key order; rows whose features cannot be computed are dropped and
// reported. Kinetic columns require `fits`.
FeatureMatrix feature_matrix(const CurveSet& curves, std::span<const std::string> selection,
                             const FitTable* fits = nullptr, const LabelMap* labels = nullptr,
                             const FeatureConfig& config = {});

void save_feature_csv(const std::filesystem::path& path, const FeatureTable& table);
FeatureTable load_feature_csv(const std::filesystem::path& path);

// patient_id,roi_id,label
LabelMap load_labels_csv(const std::filesystem::path& path);
void save_labels_csv(const std::filesystem::path& path, const LabelMap& labels);

}  // namespace icgkit
