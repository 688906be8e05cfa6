#include "icgkit/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "icgkit/error.hpp"
#include "text_util.hpp"

namespace icgkit {

double center_of_mass(const TimeSeries& series) {
    // Weights are taken relative to the largest sample so that a constant
    // series sums integers exactly and lands on delta_t * N / 2.
    double top = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        if (series.valid[k]) top = std::max(top, series.values[k]);
    }
    if (!(top > 0.0)) {
        throw DomainError("center of mass undefined: no positive valid intensity");
    }
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t k = 0; k < series.size(); ++k) {
        if (!series.valid[k]) continue;
        const double w = series.values[k] / top;
        weighted += static_cast<double>(k) * w;
        total += w;
    }
    return series.sample_period_s * (weighted / total);
}

SimpleFeatures simple_features(const TimeSeries& series, const FeatureConfig& config) {
    series.validate();
    const LandmarkConfig& lc = config.landmarks;

    // First pass locates the peak; the second works only on samples up to
    // the horizon after it.
    const TimeSeries full_smooth = smooth(series, lc.smooth_window_s);
    const Onset first_onset =
        detect_onset(full_smooth, lc.baseline_window_s, lc.k_sigma, lc.min_above_s);
    const double search_end = first_onset.time_s + config.peak_search_s;
    const Peak first_peak = detect_peak(truncate(full_smooth, search_end));

    const TimeSeries raw = truncate(series, first_peak.time_s + config.horizon_after_peak_s);
    const TimeSeries sm = smooth(raw, lc.smooth_window_s);
    const Onset onset = detect_onset(sm, lc.baseline_window_s, lc.k_sigma, lc.min_above_s);
    const Peak peak = detect_peak(truncate(sm, onset.time_s + config.peak_search_s));
    if (peak.index < onset.index) throw DomainError("peak precedes onset");

    SimpleFeatures f;
    f.landmarks = {onset.index, onset.time_s, peak.index, peak.time_s, peak.value,
                   onset.baseline_value};
    const double dt = series.sample_period_s;
    f.ttp_s = static_cast<double>(peak.index - onset.index) * dt;
    if (!(f.ttp_s > 0.0)) throw DomainError("time to peak is zero; upslope undefined");
    f.upslope = (peak.value - onset.baseline_value) / f.ttp_s;

    const std::size_t n = sm.size();
    const auto window = static_cast<std::size_t>(std::llround(config.downslope_window_s / dt));
    std::size_t end = std::min(n - 1, peak.index + window);
    while (end > peak.index && !sm.valid[end]) --end;
    const double span = static_cast<double>(end - peak.index) * dt;
    if (span >= config.min_downslope_window_s - 1e-9) {
        f.downslope = (sm.values[end] - peak.value) / span;
    }

    const double half = onset.baseline_value + 0.5 * (peak.value - onset.baseline_value);
    std::size_t last_valid = peak.index;
    std::optional<std::size_t> fall;
    for (std::size_t k = peak.index + 1; k < n; ++k) {
        if (!sm.valid[k]) continue;
        last_valid = k;
        if (sm.values[k] < half) {
            fall = k;
            break;
        }
    }
    if (fall) {
        f.time_ratio = f.ttp_s / (static_cast<double>(*fall - peak.index) * dt);
    } else if (last_valid > peak.index) {
        f.time_ratio = f.ttp_s / (static_cast<double>(last_valid - peak.index) * dt);
        f.time_ratio_censored = true;
    }

    f.center_of_mass_s = center_of_mass(raw);
    return f;
}

const std::vector<std::string>& simple_feature_names() {
    static const std::vector<std::string> names{"ttp_s", "upslope", "downslope", "time_ratio",
                                                "mu_s"};
    return names;
}

const std::vector<std::string>& kinetic_feature_names() {
    static const std::vector<std::string> names{"D", "tau_s", "tau_i_s", "K", "b", "t0_s"};
    return names;
}

bool is_kinetic_feature(const std::string& name) {
    const auto& k = kinetic_feature_names();
    return std::find(k.begin(), k.end(), name) != k.end();
}

bool FeatureTable::has_labels() const {
    return !rows.empty() && std::all_of(rows.begin(), rows.end(),
                                        [](const FeatureRow& r) { return r.label.has_value(); });
}

std::size_t FeatureTable::column_index(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw ConfigError("feature table has no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

FeatureTable FeatureTable::select(std::span<const std::string> names) const {
    std::vector<std::size_t> idx;
    for (const auto& n : names) idx.push_back(column_index(n));
    FeatureTable out;
    out.columns.assign(names.begin(), names.end());
    for (const auto& r : rows) {
        FeatureRow nr{r.key, {}, r.label};
        for (auto i : idx) nr.values.push_back(r.values[i]);
        out.rows.push_back(std::move(nr));
    }
    return out;
}

namespace {

double kinetic_value(const FitResult& fr, const std::string& name) {
    const KineticParams& p = fr.params;
    if (name == "D") return p.damping;
    if (name == "tau_s") return p.tau_s;
    if (name == "tau_i_s") return p.tau_i_s;
    if (name == "K") return p.gain;
    if (name == "b") return p.background;
    return p.delay_s;
}

std::optional<double> simple_value(const SimpleFeatures& f, const std::string& name) {
    if (name == "ttp_s") return f.ttp_s;
    if (name == "upslope") return f.upslope;
    if (name == "downslope") return f.downslope;
    if (name == "time_ratio") return f.time_ratio;
    return f.center_of_mass_s;
}

}  // namespace

FeatureMatrix feature_matrix(const CurveSet& curves, std::span<const std::string> selection,
                             const FitTable* fits, const LabelMap* labels,
                             const FeatureConfig& config) {
    const auto& simple = simple_feature_names();
    bool needs_simple = false;
    std::set<std::string> seen;
    for (const auto& name : selection) {
        const bool is_simple = std::find(simple.begin(), simple.end(), name) != simple.end();
        if (!is_simple && !is_kinetic_feature(name)) {
            throw ConfigError("unknown feature '" + name + "'");
        }
        if (!seen.insert(name).second) throw ConfigError("feature '" + name + "' selected twice");
        if (is_kinetic_feature(name) && fits == nullptr) {
            throw ConfigError("feature '" + name + "' requires fit results");
        }
        needs_simple = needs_simple || is_simple;
    }
    if (selection.empty()) throw ConfigError("empty feature selection");

    FeatureMatrix out;
    out.table.columns.assign(selection.begin(), selection.end());
    for (const auto& [key, series] : curves) {
        FeatureRow row{key, {}, std::nullopt};
        if (labels) {
            auto it = labels->find(key);
            if (it == labels->end()) {
                out.dropped.push_back({key, "no label"});
                continue;
            }
            row.label = it->second;
        }
        try {
            std::optional<SimpleFeatures> sf;
            if (needs_simple) sf = simple_features(series, config);
            const FitResult* fr = nullptr;
            if (fits) {
                auto it = fits->find(key);
                if (it != fits->end()) fr = &it->second;
            }
            std::string missing;
            for (const auto& name : selection) {
                std::optional<double> v;
                if (is_kinetic_feature(name)) {
                    if (fr) v = kinetic_value(*fr, name);
                } else {
                    v = simple_value(*sf, name);
                }
                if (!v || !std::isfinite(*v)) {
                    missing = name;
                    break;
                }
                row.values.push_back(*v);
            }
            if (!missing.empty()) {
                out.dropped.push_back({key, "feature '" + missing + "' unavailable"});
                continue;
            }
        } catch (const Error& e) {
            out.dropped.push_back({key, e.what()});
            continue;
        }
        out.table.rows.push_back(std::move(row));
    }
    return out;
}

void save_feature_csv(const std::filesystem::path& path, const FeatureTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write feature file '" + path.string() + "'");
    const bool labeled = table.has_labels();
    out << "patient_id,roi_id";
    for (const auto& c : table.columns) out << ',' << c;
    if (labeled) out << ",label";
    out << '\n';
    for (const auto& r : table.rows) {
        out << r.key.patient_id << ',' << r.key.roi_id;
        for (double v : r.values) out << ',' << format_double(v);
        if (labeled) out << ',' << *r.label;
        out << '\n';
    }
}

FeatureTable load_feature_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open feature file '" + path.string() + "'");
    const std::string src = path.string();
    std::string line;
    if (!std::getline(in, line)) throw FormatError(src + ": empty feature file");
    strip_cr(line);
    auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "patient_id" || header[1] != "roi_id") {
        throw FormatError(src + ": header must start with 'patient_id,roi_id'");
    }
    const bool labeled = header.back() == "label";
    FeatureTable t;
    t.columns.assign(header.begin() + 2, header.end() - (labeled ? 1 : 0));
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        const std::string where = src + ":" + std::to_string(line_no);
        if (f.size() != header.size()) throw FormatError(where + ": wrong number of fields");
        FeatureRow r;
        r.key = {f[0], f[1]};
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const double v = parse_double(f[c + 2], where + " " + t.columns[c]);
            if (!std::isfinite(v)) throw FormatError(where + ": non-finite feature value");
            r.values.push_back(v);
        }
        if (labeled) r.label = f.back();
        t.rows.push_back(std::move(r));
    }
    return t;
}

LabelMap load_labels_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open label file '" + path.string() + "'");
    const std::string src = path.string();
    std::string line;
    if (!std::getline(in, line)) throw FormatError(src + ": empty label file");
    strip_cr(line);
    if (line != "patient_id,roi_id,label") {
        throw FormatError(src + ": header must be 'patient_id,roi_id,label'");
    }
    LabelMap labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != 3) {
            throw FormatError(src + ":" + std::to_string(line_no) + ": expected 3 fields");
        }
        if (!labels.emplace(CurveKey{f[0], f[1]}, f[2]).second) {
            throw FormatError(src + ":" + std::to_string(line_no) + ": duplicate key");
        }
    }
    return labels;
}

void save_labels_csv(const std::filesystem::path& path, const LabelMap& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write label file '" + path.string() + "'");
    out << "patient_id,roi_id,label\n";
    for (const auto& [k, l] : labels) out << k.patient_id << ',' << k.roi_id << ',' << l << '\n';
}

}  // namespace icgkit
