#include "icgkit/pixfield.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include "icgkit/common.hpp"
#include "icgkit/error.hpp"
#include "icgkit/json_util.hpp"

namespace icgkit {

bool operator==(const PixelField& a, const PixelField& b) {
    if (a.width != b.width || a.height != b.height || a.n_frames != b.n_frames ||
        a.sample_period_s != b.sample_period_s || a.valid != b.valid || a.data.size() != b.data.size()) {
        return false;
    }
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        if (a.valid[i] && a.data[i] != b.data[i]) return false;
    }
    return true;
}

FieldBuilder::FieldBuilder(int width, int height, double sample_period_s) {
    if (width <= 0 || height <= 0) throw DomainError("pixel field needs positive dimensions");
    if (!(sample_period_s > 0)) throw DomainError("pixel field needs a positive sample period");
    field_.width = width;
    field_.height = height;
    field_.sample_period_s = sample_period_s;
}

void FieldBuilder::add(const Image& nir, const std::vector<std::uint8_t>& mask) {
    const std::size_t n = static_cast<std::size_t>(field_.width) * field_.height;
    if (nir.width != field_.width || nir.height != field_.height || mask.size() != n) {
        throw DomainError("frame " + std::to_string(field_.n_frames) + " is " +
                          std::to_string(nir.width) + "x" + std::to_string(nir.height) +
                          ", field expects " + std::to_string(field_.width) + "x" +
                          std::to_string(field_.height));
    }
    for (std::size_t i = 0; i < n; ++i) {
        const float v = nir.data[i];
        const bool ok = mask[i] && std::isfinite(v) && v >= 0.0f;
        field_.data.push_back(ok ? v : std::numeric_limits<float>::quiet_NaN());
        field_.valid.push_back(ok ? 1 : 0);
    }
    ++field_.n_frames;
}

PixelField FieldBuilder::finish() && { return std::move(field_); }

PixelField build_field(const std::vector<Image>& nir,
                       const std::vector<std::vector<std::uint8_t>>& masks, double sample_period_s) {
    if (nir.empty()) throw DomainError("pixel field needs at least one frame");
    if (masks.size() != nir.size()) throw DomainError("frame and mask counts differ");
    FieldBuilder b(nir[0].width, nir[0].height, sample_period_s);
    for (std::size_t t = 0; t < nir.size(); ++t) b.add(nir[t], masks[t]);
    return std::move(b).finish();
}

TimeSeries pixel_series(const PixelField& field, int x, int y) {
    if (x < 0 || y < 0 || x >= field.width || y >= field.height) {
        throw DomainError("pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                          ") outside the " + std::to_string(field.width) + "x" +
                          std::to_string(field.height) + " field");
    }
    TimeSeries s;
    s.sample_period_s = field.sample_period_s;
    s.values.resize(field.n_frames);
    s.valid.resize(field.n_frames);
    for (std::size_t t = 0; t < field.n_frames; ++t) {
        const std::size_t i = field.index(x, y, t);
        s.valid[t] = field.valid[i];
        s.values[t] = field.valid[i] ? static_cast<double>(field.data[i]) : 0.0;
    }
    return s;
}

namespace {

template <typename T>
void put_le(std::ofstream& out, T v) {
    auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(v);
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    out.write(bytes.data(), sizeof(T));
}

template <typename T>
T get_le(std::ifstream& in, const std::string& src) {
    std::array<char, sizeof(T)> bytes;
    if (!in.read(bytes.data(), sizeof(T))) throw FormatError(src + ": truncated PFLD file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
}

}  // namespace

void save_field(const std::filesystem::path& path, const PixelField& field) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write '" + path.string() + "'");
    out.write("PFLD", 4);
    out.put(1);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.width));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.height));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(field.n_frames));
    put_le<float>(out, static_cast<float>(field.sample_period_s));
    for (std::size_t i = 0; i < field.data.size(); ++i) {
        put_le<float>(out, field.valid[i] ? field.data[i] : std::numeric_limits<float>::quiet_NaN());
    }
    if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

PixelField load_field(const std::filesystem::path& path) {
    const std::string src = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + src + "'");
    char magic[5] = {};
    if (!in.read(magic, 5) || std::memcmp(magic, "PFLD", 4) != 0) {
        throw FormatError(src + ": not a PFLD file");
    }
    if (magic[4] != 1) throw FormatError(src + ": unsupported PFLD version " + std::to_string(magic[4]));
    PixelField f;
    f.width = static_cast<int>(get_le<std::uint32_t>(in, src));
    f.height = static_cast<int>(get_le<std::uint32_t>(in, src));
    f.n_frames = get_le<std::uint32_t>(in, src);
    f.sample_period_s = get_le<float>(in, src);
    if (f.width <= 0 || f.height <= 0 || !(f.sample_period_s > 0)) {
        throw FormatError(src + ": bad PFLD header");
    }
    const std::size_t n = static_cast<std::size_t>(f.width) * f.height * f.n_frames;
    f.data.resize(n);
    f.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const float v = get_le<float>(in, src);
        if (std::isnan(v)) {
            f.data[i] = std::numeric_limits<float>::quiet_NaN();
            continue;
        }
        if (!std::isfinite(v) || v < 0.0f) {
            throw FormatError(src + ": sample " + std::to_string(i) + " is not a finite non-negative value");
        }
        f.data[i] = v;
        f.valid[i] = 1;
    }
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError(src + ": trailing bytes after samples");
    return f;
}

PixelField load_stabilized_field(const std::filesystem::path& dir) {
    const Json meta = read_json_file(dir / "stabilized.json");
    std::size_t n_frames = 0;
    double fps = 0.0;
    try {
        n_frames = meta.at("n_frames").get<std::size_t>();
        fps = meta.at("fps").get<double>();
    } catch (const Json::exception& e) {
        throw FormatError((dir / "stabilized.json").string() + ": " + e.what());
    }
    if (n_frames == 0 || !(fps > 0)) throw FormatError((dir / "stabilized.json").string() + ": bad metadata");
    std::optional<FieldBuilder> builder;
    for (std::size_t t = 0; t < n_frames; ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu.png", t);
        try {
            const Image nir = read_png(dir / "nir" / name);
            int w = 0, h = 0;
            const auto mask = read_png_mask(dir / "mask" / name, w, h);
            if (!builder) builder.emplace(nir.width, nir.height, 1.0 / fps);
            builder->add(nir, mask);
        } catch (const Error& e) {
            throw FormatError("stabilized frame " + std::to_string(t) + ": " + e.what());
        }
    }
    return std::move(*builder).finish();
}

const std::vector<std::string>& heatmap_feature_ids() {
    static const std::vector<std::string> ids{"mu", "decay_slope", "ttp", "upslope", "time_ratio"};
    return ids;
}

double percentile(std::vector<double> values, double pct) {
    if (values.empty()) return std::nan("");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

Heatmap feature_map(const PixelField& field, const std::string& feature_id, const HeatmapConfig& config) {
    const auto& ids = heatmap_feature_ids();
    const auto which = std::find(ids.begin(), ids.end(), feature_id);
    if (which == ids.end()) {
        throw ConfigError("unknown heatmap feature '" + feature_id +
                          "' (expected mu, decay_slope, ttp, upslope or time_ratio)");
    }
    if (field.n_frames == 0) throw DomainError("pixel field has no frames");
    const auto kind = which - ids.begin();
    Heatmap map;
    map.width = field.width;
    map.height = field.height;
    map.feature_id = feature_id;
    const std::size_t n = static_cast<std::size_t>(field.width) * field.height;
    map.values.assign(n, 0.0);
    map.valid.assign(n, 0);
    parallel_for(static_cast<std::size_t>(field.height), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < field.width; ++x) {
            const TimeSeries s = pixel_series(field, x, y);
            const double frac = static_cast<double>(s.valid_count()) / static_cast<double>(s.size());
            if (frac < config.min_valid_fraction || s.valid_count() == 0) continue;
            std::optional<double> v;
            try {
                if (kind == 0) {
                    v = center_of_mass(s);
                } else {
                    const SimpleFeatures f = simple_features(s, config.features);
                    if (kind == 1) v = f.downslope;
                    if (kind == 2) v = f.ttp_s;
                    if (kind == 3) v = f.upslope;
                    if (kind == 4) v = f.time_ratio;
                }
            } catch (const DomainError&) {
                v.reset();
            }
            if (v && std::isfinite(*v)) {
                const std::size_t i = static_cast<std::size_t>(y) * field.width + x;
                map.values[i] = *v;
                map.valid[i] = 1;
            }
        }
    });
    if (config.value_range) {
        map.value_range = *config.value_range;
    } else {
        std::vector<double> vals;
        for (std::size_t i = 0; i < n; ++i) {
            if (map.valid[i]) vals.push_back(map.values[i]);
        }
        if (!vals.empty()) {
            map.value_range = {percentile(vals, config.lo_percentile), percentile(vals, config.hi_percentile)};
        }
    }
    return map;
}

int colormap_index(double v, double lo, double hi) {
    if (!(hi > lo)) return 128;
    const double u = std::floor((v - lo) / (hi - lo) * 256.0);
    return static_cast<int>(std::clamp(u, 0.0, 255.0));
}

RgbImage render(const Heatmap& map, const RgbImage* base, double alpha) {
    if (base && (base->width != map.width || base->height != map.height)) {
        throw DomainError("overlay frame is " + std::to_string(base->width) + "x" +
                          std::to_string(base->height) + ", heatmap is " + std::to_string(map.width) +
                          "x" + std::to_string(map.height));
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must lie in [0, 1]");
    const auto& table = colormap_table();
    RgbImage out(map.width, map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * map.width + x;
            std::uint8_t* px = out.px(x, y);
            if (!map.valid[i]) {
                if (base) {
                    std::copy_n(base->px(x, y), 3, px);
                } else {
                    px[0] = 0;
                    px[1] = 255;
                    px[2] = 0;
                }
                continue;
            }
            const auto& c = table[colormap_index(map.values[i], map.value_range.first, map.value_range.second)];
            for (int ch = 0; ch < 3; ++ch) {
                if (base) {
                    const double v = (1.0 - alpha) * base->px(x, y)[ch] + alpha * c[ch];
                    px[ch] = static_cast<std::uint8_t>(std::lround(v));
                } else {
                    px[ch] = c[ch];
                }
            }
        }
    }
    return out;
}

void save_heatmap(const std::filesystem::path& png_path, const Heatmap& map, const RgbImage& image) {
    write_png_rgb(png_path, image);
    std::size_t n_valid = 0;
    for (auto v : map.valid) n_valid += v;
    auto sidecar = png_path;
    sidecar.replace_extension(".json");
    write_json_file(sidecar, Json{{"feature_id", map.feature_id},
                                  {"value_range", {json_number(map.value_range.first),
                                                   json_number(map.value_range.second)}},
                                  {"width", map.width},
                                  {"height", map.height},
                                  {"n_valid", n_valid}});
}

}  // namespace icgkit
