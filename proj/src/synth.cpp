#include "icgkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "icgkit/error.hpp"

namespace icgkit {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

float quantize16(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<float>(static_cast<double>(std::lround(c * 65535.0)) / 65535.0);
}

double draw(const Range& r, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double x = u(rng);
    if (r.log_uniform) return std::exp(std::log(r.lo) + x * (std::log(r.hi) - std::log(r.lo)));
    return r.lo + x * (r.hi - r.lo);
}

Json range_to_json(const Range& r) {
    return Json{{"lo", json_number(r.lo)}, {"hi", json_number(r.hi)}, {"log_uniform", r.log_uniform}};
}

Range range_from_json(const Json& j) {
    reject_unknown_keys(j, {"lo", "hi", "log_uniform"}, "range");
    Range r{j.at("lo").get<double>(), j.at("hi").get<double>(), j.value("log_uniform", false)};
    if (!(r.lo <= r.hi) || (r.log_uniform && !(r.lo > 0))) {
        throw ConfigError("range needs lo <= hi (and lo > 0 when log-uniform)");
    }
    return r;
}

template <typename Fn>
auto parse_spec(const char* what, Fn&& fn) {
    try {
        return fn();
    } catch (const Json::exception& e) {
        throw ConfigError(std::string("bad ") + what + " spec: " + e.what());
    }
}

// Separable Gaussian blur with periodic wrap.
Image blur_periodic(const Image& in, double sigma) {
    const int r = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> k(2 * r + 1);
    double ks = 0.0;
    for (int i = -r; i <= r; ++i) ks += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (double& v : k) v /= ks;
    const int w = in.width;
    const int h = in.height;
    auto wrap = [](int i, int n) { return ((i % n) + n) % n; };
    Image tmp(w, h), out(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * in.at(wrap(x + i, w), y);
            tmp.at(x, y) = static_cast<float>(s);
        }
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int i = -r; i <= r; ++i) s += k[i + r] * tmp.at(x, wrap(y + i, h));
            out.at(x, y) = static_cast<float>(s);
        }
    }
    return out;
}

void normalize_unit_std(Image& img) {
    double mean = 0.0;
    for (float v : img.data) mean += v;
    mean /= static_cast<double>(img.data.size());
    double var = 0.0;
    for (float v : img.data) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(img.data.size()));
    for (float& v : img.data) v = static_cast<float>((v - mean) / sd);
}

double sample_periodic(const Image& img, double x, double y) {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const double ax = x - fx;
    const double ay = y - fy;
    const int w = img.width;
    const int h = img.height;
    const int x0 = static_cast<int>(((static_cast<long long>(fx) % w) + w) % w);
    const int y0 = static_cast<int>(((static_cast<long long>(fy) % h) + h) % h);
    const int x1 = (x0 + 1) % w;
    const int y1 = (y0 + 1) % h;
    const double top = (1.0 - ax) * img.at(x0, y0) + ax * img.at(x1, y0);
    const double bot = (1.0 - ax) * img.at(x0, y1) + ax * img.at(x1, y1);
    return (1.0 - ay) * top + ay * bot;
}

}  // namespace

TimeSeries gen_curve(const CurveSpec& spec, std::uint64_t seed) {
    spec.params.validate();
    if (!(spec.sample_period_s > 0) || !(spec.duration_s >= 0) || !(spec.noise_sigma >= 0)) {
        throw DomainError("curve spec needs a positive period and non-negative duration and noise");
    }
    std::mt19937_64 rng(mix(seed, 0));
    double end = spec.duration_s;
    if (spec.truncate_min_s) {
        std::uniform_real_distribution<double> u(std::min(*spec.truncate_min_s, end), end);
        end = u(rng);
    }
    const auto n = static_cast<std::size_t>(std::floor(end / spec.sample_period_s + 1e-9)) + 1;
    TimeSeries s = simulate(spec.params, uniform_grid(0.0, spec.sample_period_s, n));
    if (spec.noise_sigma > 0) {
        std::normal_distribution<double> noise(0.0, spec.noise_sigma);
        for (double& v : s.values) v = std::max(0.0, v + noise(rng));
    }
    return s;
}

Json curve_spec_to_json(const CurveSpec& spec) {
    Json j{{"params", params_to_json(spec.params)},
           {"duration_s", json_number(spec.duration_s)},
           {"sample_period_s", json_number(spec.sample_period_s)},
           {"noise_sigma", json_number(spec.noise_sigma)}};
    if (spec.truncate_min_s) j["truncate_min_s"] = json_number(*spec.truncate_min_s);
    return j;
}

CurveSpec curve_spec_from_json(const Json& j) {
    return parse_spec("curve", [&] {
        reject_unknown_keys(j, {"params", "duration_s", "sample_period_s", "noise_sigma", "truncate_min_s"},
                            "curve spec");
        CurveSpec s;
        s.params = params_from_json(j.at("params"));
        read_key(j, "duration_s", s.duration_s);
        read_key(j, "sample_period_s", s.sample_period_s);
        read_key(j, "noise_sigma", s.noise_sigma);
        if (j.contains("truncate_min_s")) s.truncate_min_s = j.at("truncate_min_s").get<double>();
        return s;
    });
}

CorpusSpec default_corpus_spec() {
    CorpusSpec s;
    ClassSpec benign;
    benign.label = "benign";
    benign.damping = {0.5, 1.5, true};
    benign.tau = {4.0, 13.0};
    benign.tau_i = {10.0, 50.0, true};
    ClassSpec cancer;
    cancer.label = "cancer";
    cancer.damping = {0.8, 2.5, true};
    cancer.tau = {7.0, 25.0};
    cancer.tau_i = {60.0, 600.0, true};
    for (ClassSpec* c : {&benign, &cancer}) {
        c->gain = {0.3, 0.8};
        c->background = {0.05, 0.15};
        c->delay = {5.0, 20.0};
    }
    s.classes = {benign, cancer};
    return s;
}

Json corpus_spec_to_json(const CorpusSpec& spec) {
    Json classes = Json::array();
    for (const auto& c : spec.classes) {
        classes.push_back({{"label", c.label},
                           {"D", range_to_json(c.damping)},
                           {"tau_s", range_to_json(c.tau)},
                           {"tau_i_s", range_to_json(c.tau_i)},
                           {"K", range_to_json(c.gain)},
                           {"b", range_to_json(c.background)},
                           {"t0_s", range_to_json(c.delay)}});
    }
    return Json{{"classes", classes},
                {"n_per_class", spec.n_per_class},
                {"n_patients", spec.n_patients},
                {"duration_s", json_number(spec.duration_s)},
                {"min_duration_s", json_number(spec.min_duration_s)},
                {"sample_period_s", json_number(spec.sample_period_s)},
                {"noise_sigma", json_number(spec.noise_sigma)}};
}

CorpusSpec corpus_spec_from_json(const Json& j) {
    return parse_spec("corpus", [&] {
        reject_unknown_keys(j, {"classes", "n_per_class", "n_patients", "duration_s",
                                "min_duration_s", "sample_period_s", "noise_sigma"},
                            "corpus spec");
        CorpusSpec s = default_corpus_spec();
        if (j.contains("classes")) {
            s.classes.clear();
            for (const auto& c : j.at("classes")) {
                reject_unknown_keys(c, {"label", "D", "tau_s", "tau_i_s", "K", "b", "t0_s"},
                                    "class spec");
                ClassSpec cs;
                cs.label = c.at("label").get<std::string>();
                cs.damping = range_from_json(c.at("D"));
                cs.tau = range_from_json(c.at("tau_s"));
                cs.tau_i = range_from_json(c.at("tau_i_s"));
                cs.gain = range_from_json(c.at("K"));
                cs.background = range_from_json(c.at("b"));
                cs.delay = range_from_json(c.at("t0_s"));
                s.classes.push_back(std::move(cs));
            }
        }
        read_key(j, "n_per_class", s.n_per_class);
        read_key(j, "n_patients", s.n_patients);
        read_key(j, "duration_s", s.duration_s);
        read_key(j, "min_duration_s", s.min_duration_s);
        read_key(j, "sample_period_s", s.sample_period_s);
        read_key(j, "noise_sigma", s.noise_sigma);
        return s;
    });
}

Corpus gen_corpus(const CorpusSpec& spec, std::uint64_t seed) {
    if (spec.classes.size() < 2) throw DomainError("corpus needs at least 2 classes");
    if (spec.n_per_class < 1 || spec.n_patients < 1) {
        throw DomainError("corpus needs at least one curve per class and one patient");
    }
    Corpus out;
    std::size_t g = 0;
    for (const auto& cls : spec.classes) {
        for (int i = 0; i < spec.n_per_class; ++i, ++g) {
            std::mt19937_64 rng(mix(seed, 2 * g));
            CorpusEntry e;
            char pid[16], rid[16];
            std::snprintf(pid, sizeof pid, "P%02d", static_cast<int>(g % spec.n_patients) + 1);
            std::snprintf(rid, sizeof rid, "R%03d", static_cast<int>(g) + 1);
            e.key = {pid, rid};
            e.label = cls.label;
            e.params.damping = draw(cls.damping, rng);
            e.params.tau_s = draw(cls.tau, rng);
            e.params.tau_i_s = draw(cls.tau_i, rng);
            e.params.gain = draw(cls.gain, rng);
            e.params.background = draw(cls.background, rng);
            e.params.delay_s = draw(cls.delay, rng);
            CurveSpec cs{e.params, spec.duration_s, spec.sample_period_s, spec.noise_sigma,
                         spec.min_duration_s};
            TimeSeries s = gen_curve(cs, mix(seed, 2 * g + 1));
            e.duration_s = s.time_at(s.size() - 1);
            out.curves.emplace(e.key, std::move(s));
            out.labels.emplace(e.key, e.label);
            out.truth.push_back(std::move(e));
        }
    }
    return out;
}

bool PerfusionRegion::contains(Point2 p) const {
    const double dx = (p.x - cx) / rx;
    const double dy = (p.y - cy) / ry;
    return dx * dx + dy * dy <= 1.0;
}

Json video_spec_to_json(const VideoSpec& s) {
    Json regions = Json::array();
    for (const auto& r : s.regions) {
        regions.push_back({{"label", r.label},
                           {"cx", json_number(r.cx)},
                           {"cy", json_number(r.cy)},
                           {"rx", json_number(r.rx)},
                           {"ry", json_number(r.ry)},
                           {"params", params_to_json(r.params)}});
    }
    Json occ = Json::array();
    for (const auto& [a, b] : s.occlusions) occ.push_back({a, b});
    return Json{{"width", s.width},
                {"height", s.height},
                {"n_frames", s.n_frames},
                {"fps", json_number(s.fps)},
                {"texture_size", s.texture_size},
                {"texture_sigma_px", json_number(s.texture_sigma_px)},
                {"texture_contrast", json_number(s.texture_contrast)},
                {"translate_px_per_frame",
                 {json_number(s.translate_px_per_frame.x), json_number(s.translate_px_per_frame.y)}},
                {"translate_reverse_frames", s.translate_reverse_frames},
                {"rotate_deg_per_frame", json_number(s.rotate_deg_per_frame)},
                {"n_bumps", s.n_bumps},
                {"bump_amplitude_px", json_number(s.bump_amplitude_px)},
                {"bump_sigma_px", json_number(s.bump_sigma_px)},
                {"warp_period_frames", json_number(s.warp_period_frames)},
                {"occlusions", occ},
                {"background", params_to_json(s.background)},
                {"regions", regions},
                {"nir_noise_sigma", json_number(s.nir_noise_sigma)},
                {"rois", rois_to_json(s.rois)}};
}

VideoSpec video_spec_from_json(const Json& j) {
    return parse_spec("video", [&] {
        reject_unknown_keys(j, {"width", "height", "n_frames", "fps", "texture_size",
                                "texture_sigma_px", "texture_contrast", "translate_px_per_frame",
                                "translate_reverse_frames", "rotate_deg_per_frame", "n_bumps", "bump_amplitude_px",
                                "bump_sigma_px", "warp_period_frames", "occlusions", "background",
                                "regions", "nir_noise_sigma", "rois"},
                            "video spec");
        VideoSpec s;
        read_key(j, "width", s.width);
        read_key(j, "height", s.height);
        read_key(j, "n_frames", s.n_frames);
        read_key(j, "fps", s.fps);
        read_key(j, "texture_size", s.texture_size);
        read_key(j, "texture_sigma_px", s.texture_sigma_px);
        read_key(j, "texture_contrast", s.texture_contrast);
        if (j.contains("translate_px_per_frame")) {
            const auto& t = j.at("translate_px_per_frame");
            s.translate_px_per_frame = {t.at(0).get<double>(), t.at(1).get<double>()};
        }
        read_key(j, "translate_reverse_frames", s.translate_reverse_frames);
        read_key(j, "rotate_deg_per_frame", s.rotate_deg_per_frame);
        read_key(j, "n_bumps", s.n_bumps);
        read_key(j, "bump_amplitude_px", s.bump_amplitude_px);
        read_key(j, "bump_sigma_px", s.bump_sigma_px);
        read_key(j, "warp_period_frames", s.warp_period_frames);
        if (j.contains("occlusions")) {
            for (const auto& o : j.at("occlusions")) {
                s.occlusions.emplace_back(o.at(0).get<int>(), o.at(1).get<int>());
            }
        }
        if (j.contains("background")) s.background = params_from_json(j.at("background"));
        if (j.contains("regions")) {
            for (const auto& r : j.at("regions")) {
                reject_unknown_keys(r, {"label", "cx", "cy", "rx", "ry", "params"}, "region");
                PerfusionRegion pr;
                pr.label = r.at("label").get<std::string>();
                pr.cx = r.at("cx").get<double>();
                pr.cy = r.at("cy").get<double>();
                pr.rx = r.at("rx").get<double>();
                pr.ry = r.at("ry").get<double>();
                pr.params = params_from_json(r.at("params"));
                s.regions.push_back(std::move(pr));
            }
        }
        read_key(j, "nir_noise_sigma", s.nir_noise_sigma);
        if (j.contains("rois")) {
            try {
                s.rois = rois_from_json(j.at("rois"), "video spec");
            } catch (const FormatError& e) {
                throw ConfigError(e.what());
            }
        }
        return s;
    });
}

SynthVideo::SynthVideo(VideoSpec spec, std::uint64_t seed) : spec_(std::move(spec)), seed_(seed) {
    const VideoSpec& s = spec_;
    if (s.width < 8 || s.height < 8 || s.n_frames < 1 || !(s.fps > 0) || s.texture_size < 16 ||
        !(s.texture_sigma_px > 0) || s.n_bumps < 0 || !(s.bump_sigma_px > 0) ||
        !(s.nir_noise_sigma >= 0)) {
        throw DomainError("video spec needs panels of at least 8x8, frames, positive fps and sizes");
    }
    for (const auto& r : s.regions) {
        if (!(r.rx > 0 && r.ry > 0)) throw DomainError("region '" + r.label + "' needs positive radii");
    }

    // two octaves of blurred white noise
    std::mt19937_64 rng(mix(seed, 100));
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Image white(s.texture_size, s.texture_size);
    for (float& v : white.data) v = static_cast<float>(u(rng));
    Image fine = blur_periodic(white, s.texture_sigma_px);
    Image coarse = blur_periodic(white, 4.0 * s.texture_sigma_px);
    normalize_unit_std(fine);
    normalize_unit_std(coarse);
    texture_ = Image(s.texture_size, s.texture_size);
    const double norm_c = 1.0 / std::sqrt(1.25);
    for (std::size_t i = 0; i < texture_.data.size(); ++i) {
        const double z = (fine.data[i] + 0.5 * coarse.data[i]) * norm_c;
        texture_.data[i] = static_cast<float>(std::clamp(0.5 + s.texture_contrast * z, 0.0, 1.0));
    }

    std::mt19937_64 brng(mix(seed, 101));
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int k = 0; k < s.n_bumps; ++k) {
        Bump b;
        b.center = {s.width * (0.15 + 0.7 * u01(brng)), s.height * (0.15 + 0.7 * u01(brng))};
        const double ang = 2.0 * std::numbers::pi * u01(brng);
        b.amplitude = {s.bump_amplitude_px * std::cos(ang), s.bump_amplitude_px * std::sin(ang)};
        bumps_.push_back(b);
    }

    const auto grid = uniform_grid(0.0, 1.0 / s.fps, static_cast<std::size_t>(s.n_frames));
    curves_.push_back(simulate(s.background, grid).values);
    for (const auto& r : s.regions) curves_.push_back(simulate(r.params, grid).values);
}

Point2 SynthVideo::displacement(std::size_t t, Point2 p) const {
    const VideoSpec& s = spec_;
    const double ft = static_cast<double>(t);
    double travel = ft;
    if (s.translate_reverse_frames > 0) {
        const long long period = s.translate_reverse_frames;
        const long long phase = static_cast<long long>(t) % (2 * period);
        travel = static_cast<double>(phase <= period ? phase : 2 * period - phase);
    }
    Point2 u = travel * s.translate_px_per_frame;
    if (s.rotate_deg_per_frame != 0.0) {
        const double th = ft * s.rotate_deg_per_frame * std::numbers::pi / 180.0;
        const Point2 c{0.5 * (s.width - 1), 0.5 * (s.height - 1)};
        const Point2 d = p - c;
        const Point2 r{std::cos(th) * d.x - std::sin(th) * d.y, std::sin(th) * d.x + std::cos(th) * d.y};
        u = u + (r - d);
    }
    if (!bumps_.empty()) {
        double f;
        if (s.warp_period_frames > 0) {
            f = std::sin(2.0 * std::numbers::pi * ft / s.warp_period_frames);
        } else {
            f = s.n_frames > 1 ? ft / (s.n_frames - 1) : 0.0;
        }
        const double inv = 1.0 / (2.0 * s.bump_sigma_px * s.bump_sigma_px);
        for (const auto& b : bumps_) {
            const Point2 d = p - b.center;
            const double g = f * std::exp(-(d.x * d.x + d.y * d.y) * inv);
            u = u + g * b.amplitude;
        }
    }
    return u;
}

Point2 SynthVideo::source_point(std::size_t t, Point2 q) const {
    Point2 p = q - displacement(t, q);
    if (spec_.rotate_deg_per_frame == 0.0 && bumps_.empty()) return p;
    for (int it = 0; it < 100; ++it) {
        const Point2 next = q - displacement(t, p);
        const double change = norm(next - p);
        p = next;
        if (change < 1e-12) break;
    }
    return p;
}

bool SynthVideo::occluded(std::size_t t) const {
    for (const auto& [a, b] : spec_.occlusions) {
        if (static_cast<int>(t) >= a && static_cast<int>(t) <= b) return true;
    }
    return false;
}

int SynthVideo::region_at(Point2 p) const {
    for (std::size_t r = 0; r < spec_.regions.size(); ++r) {
        if (spec_.regions[r].contains(p)) return static_cast<int>(r) + 1;
    }
    return 0;
}

std::vector<std::uint8_t> SynthVideo::region_mask() const {
    std::vector<std::uint8_t> m(static_cast<std::size_t>(spec_.width) * spec_.height);
    for (int y = 0; y < spec_.height; ++y) {
        for (int x = 0; x < spec_.width; ++x) {
            m[static_cast<std::size_t>(y) * spec_.width + x] =
                static_cast<std::uint8_t>(region_at({static_cast<double>(x), static_cast<double>(y)}));
        }
    }
    return m;
}

double SynthVideo::region_value(int r, std::size_t t) const { return curves_.at(r).at(t); }

RoiBox SynthVideo::roi_at(const RoiBox& roi0, std::size_t t) const {
    const Point2 c{roi0.x + 0.5 * roi0.w, roi0.y + 0.5 * roi0.h};
    const Point2 c1 = c + displacement(t, c);
    RoiBox b = roi0;
    b.x = c1.x - 0.5 * roi0.w;
    b.y = c1.y - 0.5 * roi0.h;
    return b;
}

DualFrame SynthVideo::frame(std::size_t t) const {
    if (t >= size()) throw DomainError("frame " + std::to_string(t) + " out of range");
    const int w = spec_.width;
    const int h = spec_.height;
    DualFrame f;
    f.visible = Image(w, h);
    f.nir = Image(w, h);
    f.frame_index = t;
    f.timestamp_s = static_cast<double>(t) / spec_.fps;
    const bool occ = occluded(t);
    std::mt19937_64 rng(mix(seed_, 1000 + t));
    std::normal_distribution<double> noise(0.0, spec_.nir_noise_sigma > 0 ? spec_.nir_noise_sigma : 1.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const Point2 p = source_point(t, {static_cast<double>(x), static_cast<double>(y)});
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            f.visible.data[i] = occ ? 0.0f : quantize16(sample_periodic(texture_, p.x, p.y));
            double v = curves_[region_at(p)][t];
            if (spec_.nir_noise_sigma > 0) v += noise(rng);
            f.nir.data[i] = quantize16(v);
        }
    }
    return f;
}

Json SynthVideo::truth_json() const {
    const VideoSpec& s = spec_;
    Json bumps = Json::array();
    for (const auto& b : bumps_) {
        bumps.push_back({{"center", {json_number(b.center.x), json_number(b.center.y)}},
                         {"amplitude", {json_number(b.amplitude.x), json_number(b.amplitude.y)}}});
    }
    Json frames = Json::array();
    for (std::size_t t = 0; t < size(); ++t) {
        std::vector<RoiBox> boxes;
        for (const auto& r : s.rois) boxes.push_back(roi_at(r, t));
        frames.push_back({{"frame_index", t}, {"occluded", occluded(t)}, {"rois", rois_to_json(boxes)}});
    }
    Json regions = Json::array();
    regions.push_back({{"index", 0}, {"label", "background"}, {"params", params_to_json(s.background)}});
    for (std::size_t r = 0; r < s.regions.size(); ++r) {
        regions.push_back({{"index", r + 1},
                           {"label", s.regions[r].label},
                           {"params", params_to_json(s.regions[r].params)}});
    }
    return Json{{"seed", seed_},
                {"spec", video_spec_to_json(s)},
                {"bumps", bumps},
                {"displacement_model",
                 "U_t(p) = travel(t)*translate + (R(t*rotate) - I)(p - c) + f(t) * sum_k a_k exp(-|p - c_k|^2 / (2 sigma^2))"},
                {"regions", regions},
                {"region_mask", "region_mask.png"},
                {"frames", frames}};
}

Image stack_panels(const DualFrame& frame) {
    const int w = frame.width();
    const int h = frame.height();
    Image out(w, 2 * h);
    std::copy(frame.visible.data.begin(), frame.visible.data.end(), out.data.begin());
    std::copy(frame.nir.data.begin(), frame.nir.data.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(frame.visible.data.size()));
    return out;
}

void write_video(const SynthVideo& video, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "frames");
    for (std::size_t t = 0; t < video.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.png", t);
        write_png_gray16(dir / "frames" / name, stack_panels(video.frame(t)));
    }
    save_layout(dir / "layout.json", {video.spec().height, video.spec().fps});
    save_rois(dir / "rois.json", video.spec().rois);
    // 8-bit gray, sample value = region index
    const auto mask = video.region_mask();
    Image m(video.spec().width, video.spec().height);
    for (std::size_t i = 0; i < mask.size(); ++i) m.data[i] = static_cast<float>(mask[i] / 255.0);
    write_png_gray8(dir / "region_mask.png", m);
    write_json_file(dir / "truth.json", video.truth_json());
}

}  // namespace icgkit
