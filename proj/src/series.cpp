#include "icgkit/series.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "icgkit/common.hpp"
#include "icgkit/error.hpp"
#include "text_util.hpp"

namespace icgkit {

TimeSeries TimeSeries::from_values(std::vector<double> values, double sample_period_s,
                                   double start_time_s) {
    TimeSeries s;
    s.sample_period_s = sample_period_s;
    s.start_time_s = start_time_s;
    s.valid.assign(values.size(), 1);
    s.values = std::move(values);
    return s;
}

std::size_t TimeSeries::valid_count() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

void TimeSeries::validate() const {
    if (!(sample_period_s > 0.0) || !std::isfinite(sample_period_s)) {
        throw DomainError("time series: sample period must be positive");
    }
    if (values.empty()) throw DomainError("time series: empty");
    if (values.size() != valid.size()) {
        throw DomainError("time series: values and validity differ in length");
    }
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (valid[k] && !(std::isfinite(values[k]) && values[k] >= 0.0)) {
            throw DomainError("time series: sample " + std::to_string(k) +
                              " is valid but not a finite non-negative value");
        }
    }
}

std::string to_string(const CurveKey& key) { return key.patient_id + "/" + key.roi_id; }

namespace {

struct CsvRow {
    long frame;
    double time_s;
    double value;
    bool valid;
    std::size_t line;
};

// The span estimate can sit a few ulps away from the period that wrote the
// file; prefer a nearby candidate that regenerates every time stamp exactly.
double snap_period(const std::vector<CsvRow>& rs, long span) {
    const double raw = (rs.back().time_s - rs.front().time_s) / static_cast<double>(span);
    const double candidates[] = {raw, round_sig(raw, 12),
                                 round_sig(raw, 15),
                                 (rs[1].time_s - rs[0].time_s) /
                                     static_cast<double>(rs[1].frame - rs[0].frame)};
    for (double p : candidates) {
        const double start = rs.front().time_s - static_cast<double>(rs.front().frame) * p;
        bool exact = true;
        for (const auto& r : rs) {
            if (start + static_cast<double>(r.frame) * p != r.time_s) {
                exact = false;
                break;
            }
        }
        if (exact) return p;
    }
    return raw;
}

constexpr const char* kCurveColumns[] = {"patient_id", "roi_id", "frame_index",
                                         "time_s",     "value",  "valid"};

}  // namespace

CurveSet read_curves(std::istream& in, std::string_view source) {
    const std::string src(source);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(src + ": empty curve file");
    strip_cr(line);
    const auto header = split_csv_line(line);
    int col[6];
    for (int c = 0; c < 6; ++c) {
        auto it = std::find(header.begin(), header.end(), kCurveColumns[c]);
        if (it == header.end()) {
            throw FormatError(src + ": header is missing column '" + kCurveColumns[c] + "'");
        }
        col[c] = static_cast<int>(it - header.begin());
    }

    std::map<CurveKey, std::vector<CsvRow>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        strip_cr(line);
        if (line.empty()) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) {
            throw FormatError(src + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(header.size()) + " fields, got " +
                              std::to_string(f.size()));
        }
        const std::string where = src + ":" + std::to_string(line_no);
        CsvRow r{};
        r.line = line_no;
        r.frame = parse_long(f[col[2]], where + " frame_index");
        if (r.frame < 0) throw FormatError(where + ": negative frame_index");
        r.time_s = parse_double(f[col[3]], where + " time_s");
        const long v = parse_long(f[col[5]], where + " valid");
        if (v != 0 && v != 1) throw FormatError(where + ": valid must be 0 or 1");
        r.valid = v == 1;
        if (f[col[4]].empty() && !r.valid) {
            r.value = 0.0;
        } else {
            r.value = parse_double(f[col[4]], where + " value");
        }
        if (!std::isfinite(r.time_s)) throw FormatError(where + ": non-finite time_s");
        if (r.valid && !(std::isfinite(r.value) && r.value >= 0.0)) {
            throw FormatError(where + ": valid sample must be finite and non-negative");
        }
        rows[CurveKey{f[col[0]], f[col[1]]}].push_back(r);
    }

    struct Layout {
        double period = std::nan("");
        long span = 0;
    };
    std::map<std::string, Layout> patient_layout;

    for (auto& [key, rs] : rows) {
        std::sort(rs.begin(), rs.end(),
                  [](const CsvRow& a, const CsvRow& b) { return a.frame < b.frame; });
        for (std::size_t i = 1; i < rs.size(); ++i) {
            if (rs[i].frame == rs[i - 1].frame) {
                throw FormatError(src + ":" + std::to_string(rs[i].line) +
                                  ": duplicate frame " + std::to_string(rs[i].frame) +
                                  " for " + to_string(key));
            }
        }
        if (rs.size() < 2) continue;
        const long span = rs.back().frame - rs.front().frame;
        const double period = snap_period(rs, span);
        if (!(period > 0.0)) {
            throw FormatError(src + ": non-increasing time_s for " + to_string(key));
        }
        for (const auto& r : rs) {
            const double expected =
                rs.front().time_s + static_cast<double>(r.frame - rs.front().frame) * period;
            if (std::abs(r.time_s - expected) > 1e-6) {
                throw FormatError(src + ":" + std::to_string(r.line) +
                                  ": non-uniform time spacing for " + to_string(key));
            }
        }
        auto& lay = patient_layout[key.patient_id];
        if (std::isnan(lay.period)) {
            lay = {period, span};
        } else {
            const long longest = std::max(lay.span, span);
            if (std::abs(lay.period - period) * static_cast<double>(longest + 1) > 1e-6) {
                throw FormatError(src + ": series of patient '" + key.patient_id +
                                  "' do not share a sample period");
            }
            if (span > lay.span) lay = {period, span};
        }
    }

    CurveSet out;
    for (const auto& [key, rs] : rows) {
        double period = 1.0;
        if (auto it = patient_layout.find(key.patient_id); it != patient_layout.end()) {
            period = it->second.period;
        }
        TimeSeries s;
        s.sample_period_s = period;
        s.start_time_s = rs.front().time_s - static_cast<double>(rs.front().frame) * period;
        const auto n = static_cast<std::size_t>(rs.back().frame + 1);
        s.values.assign(n, 0.0);
        s.valid.assign(n, 0);
        for (const auto& r : rs) {
            s.values[static_cast<std::size_t>(r.frame)] = r.value;
            s.valid[static_cast<std::size_t>(r.frame)] = r.valid ? 1 : 0;
        }
        out.emplace(key, std::move(s));
    }
    return out;
}

CurveSet load_curves(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open curve file '" + path.string() + "'");
    return read_curves(in, path.string());
}

void write_curves(std::ostream& out, const CurveSet& curves) {
    out << "patient_id,roi_id,frame_index,time_s,value,valid\n";
    for (const auto& [key, s] : curves) {
        for (std::size_t k = 0; k < s.size(); ++k) {
            out << key.patient_id << ',' << key.roi_id << ',' << k << ','
                << format_double(s.time_at(k)) << ',' << format_double(s.values[k]) << ','
                << (s.valid[k] ? 1 : 0) << '\n';
        }
    }
}

void save_curves(const std::filesystem::path& path, const CurveSet& curves) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write curve file '" + path.string() + "'");
    write_curves(out, curves);
}

TimeSeries smooth(const TimeSeries& series, double window_s) {
    if (!(window_s >= 0.0)) throw DomainError("smooth: window must be non-negative");
    if (window_s == 0.0) return series;
    const std::size_t n = series.size();
    const auto half = static_cast<std::size_t>(
        std::floor(window_s / (2.0 * series.sample_period_s) + 1e-9));
    TimeSeries out = series;
    for (std::size_t i = 0; i < n; ++i) {
        if (!series.valid[i]) continue;
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n - 1, i + half);
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t j = lo; j <= hi; ++j) {
            if (series.valid[j]) {
                sum += series.values[j];
                ++count;
            }
        }
        out.values[i] = sum / static_cast<double>(count);
    }
    return out;
}

TimeSeries truncate(const TimeSeries& series, double end_time_s) {
    std::size_t n = 0;
    while (n < series.size() && series.time_at(n) <= end_time_s) ++n;
    if (n == 0) throw DomainError("truncate: no samples before the truncation time");
    TimeSeries out;
    out.sample_period_s = series.sample_period_s;
    out.start_time_s = series.start_time_s;
    out.values.assign(series.values.begin(), series.values.begin() + static_cast<long>(n));
    out.valid.assign(series.valid.begin(), series.valid.begin() + static_cast<long>(n));
    return out;
}

TimeSeries resample(const TimeSeries& series, double new_period_s) {
    if (!(new_period_s > 0.0)) throw DomainError("resample: period must be positive");
    const std::size_t n = series.size();
    const double ratio = new_period_s / series.sample_period_s;
    const double last = static_cast<double>(n - 1);
    const auto n_out = static_cast<std::size_t>(std::floor(last / ratio + 1e-9)) + 1;
    TimeSeries out;
    out.sample_period_s = new_period_s;
    out.start_time_s = series.start_time_s;
    out.values.assign(n_out, 0.0);
    out.valid.assign(n_out, 0);
    for (std::size_t k = 0; k < n_out; ++k) {
        double u = static_cast<double>(k) * ratio;
        // grid nodes that coincide with input samples up to rounding read them directly
        if (std::abs(u - std::round(u)) < 1e-9) u = std::round(u);
        if (u > last) continue;
        const auto i = static_cast<std::size_t>(std::floor(u));
        const double frac = u - static_cast<double>(i);
        if (frac == 0.0 || i + 1 >= n) {
            if (series.valid[i]) {
                out.values[k] = series.values[i];
                out.valid[k] = 1;
            }
            continue;
        }
        if (series.valid[i] && series.valid[i + 1]) {
            out.values[k] = series.values[i] + frac * (series.values[i + 1] - series.values[i]);
            out.valid[k] = 1;
        }
    }
    return out;
}

Onset detect_onset(const TimeSeries& series, double baseline_window_s, double k_sigma,
                   double min_above_s) {
    if (series.valid_count() < 10) {
        throw DomainError("detect_onset: fewer than 10 valid samples");
    }
    const std::size_t n = series.size();
    std::vector<double> base;
    for (std::size_t k = 0; k < n; ++k) {
        if (static_cast<double>(k) * series.sample_period_s >= baseline_window_s) break;
        if (series.valid[k]) base.push_back(series.values[k]);
    }
    if (base.size() < 3) {
        throw DomainError("detect_onset: baseline window covers fewer than 3 valid samples");
    }
    Onset o;
    o.baseline_value = median(base);
    std::vector<double> dev;
    dev.reserve(base.size());
    for (double v : base) dev.push_back(std::abs(v - o.baseline_value));
    const double mad = 1.4826 * median(dev);
    o.threshold = o.baseline_value + k_sigma * mad;

    const auto hold = static_cast<std::size_t>(
        std::ceil(min_above_s / series.sample_period_s - 1e-9));
    for (std::size_t i = 0; i + hold < n; ++i) {
        if (!series.valid[i] || !(series.values[i] > o.threshold)) continue;
        bool stays = true;
        for (std::size_t j = i + 1; j <= i + hold && stays; ++j) {
            stays = !series.valid[j] || series.values[j] > o.threshold;
        }
        if (stays) {
            o.index = i;
            o.time_s = series.time_at(i);
            return o;
        }
    }
    throw DomainError("no onset detected");
}

Peak detect_peak(const TimeSeries& series) {
    Peak p;
    bool found = false;
    for (std::size_t k = 0; k < series.size(); ++k) {
        if (!series.valid[k]) continue;
        if (!found || series.values[k] > p.value) {
            p.index = k;
            p.value = series.values[k];
            found = true;
        }
    }
    if (!found) throw DomainError("detect_peak: no valid samples");
    p.time_s = series.time_at(p.index);
    return p;
}

Landmarks landmarks_of_smoothed(const TimeSeries& smoothed, const LandmarkConfig& config) {
    const Onset o = detect_onset(smoothed, config.baseline_window_s, config.k_sigma,
                                 config.min_above_s);
    const Peak p = detect_peak(smoothed);
    if (p.index < o.index) throw DomainError("peak precedes onset");
    Landmarks lm;
    lm.onset_index = o.index;
    lm.onset_time_s = o.time_s;
    lm.baseline_value = o.baseline_value;
    lm.peak_index = p.index;
    lm.peak_time_s = p.time_s;
    lm.peak_value = p.value;
    return lm;
}

Landmarks find_landmarks(const TimeSeries& raw, const LandmarkConfig& config) {
    return landmarks_of_smoothed(smooth(raw, config.smooth_window_s), config);
}

}  // namespace icgkit
