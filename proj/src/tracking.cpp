#include "icgkit/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "icgkit/error.hpp"
#include "icgkit/json_util.hpp"
#include "text_util.hpp"

namespace icgkit {

DualFrame split_panels(const Image& stacked, int panel_split_row) {
    if (panel_split_row <= 0 || panel_split_row >= stacked.height) {
        throw FormatError("panel_split_row " + std::to_string(panel_split_row) +
                          " outside the frame height " + std::to_string(stacked.height));
    }
    if (stacked.height - panel_split_row != panel_split_row) {
        throw FormatError("visible and NIR panels differ in height (split row " +
                          std::to_string(panel_split_row) + ", frame height " +
                          std::to_string(stacked.height) + ")");
    }
    DualFrame f;
    f.visible = crop(stacked, 0, 0, stacked.width, panel_split_row);
    f.nir = crop(stacked, 0, panel_split_row, stacked.width, stacked.height - panel_split_row);
    return f;
}

std::vector<RoiBox> rois_from_json(const Json& rois_array, const std::string& src) {
    std::vector<RoiBox> rois;
    try {
        for (const auto& r : rois_array) {
            reject_unknown_keys(r, {"id", "x", "y", "w", "h"}, src + " roi");
            RoiBox b{r.at("id").get<std::string>(), r.at("x").get<double>(),
                     r.at("y").get<double>(), r.at("w").get<double>(), r.at("h").get<double>()};
            if (!(b.w > 0 && b.h > 0)) {
                throw FormatError(src + ": ROI '" + b.id + "' must have positive size");
            }
            for (const auto& o : rois) {
                if (o.id == b.id) throw FormatError(src + ": duplicate ROI id '" + b.id + "'");
            }
            rois.push_back(std::move(b));
        }
    } catch (const Json::exception& e) {
        throw FormatError(src + ": bad ROI list: " + e.what());
    }
    return rois;
}

Json rois_to_json(const std::vector<RoiBox>& rois) {
    Json arr = Json::array();
    for (const auto& r : rois) {
        arr.push_back({{"id", r.id},
                       {"x", json_number(r.x)},
                       {"y", json_number(r.y)},
                       {"w", json_number(r.w)},
                       {"h", json_number(r.h)}});
    }
    return arr;
}

std::vector<RoiBox> load_rois(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    const std::string src = path.string();
    try {
        reject_unknown_keys(j, {"frame", "rois"}, src);
        if (j.value("frame", 0) != 0) throw FormatError(src + ": ROIs must refer to frame 0");
        return rois_from_json(j.at("rois"), src);
    } catch (const Json::exception& e) {
        throw FormatError(src + ": bad ROI file: " + e.what());
    }
}

void save_rois(const std::filesystem::path& path, const std::vector<RoiBox>& rois) {
    write_json_file(path, Json{{"frame", 0}, {"rois", rois_to_json(rois)}});
}

VideoLayout load_layout(const std::filesystem::path& path) {
    const Json j = read_json_file(path);
    VideoLayout lay;
    try {
        reject_unknown_keys(j, {"panel_split_row", "fps"}, path.string());
        lay.panel_split_row = j.at("panel_split_row").get<int>();
        lay.fps = j.at("fps").get<double>();
    } catch (const Json::exception& e) {
        throw FormatError(path.string() + ": bad layout: " + e.what());
    }
    if (!(lay.fps > 0)) throw FormatError(path.string() + ": fps must be positive");
    return lay;
}

void save_layout(const std::filesystem::path& path, const VideoLayout& layout) {
    write_json_file(path, Json{{"panel_split_row", layout.panel_split_row},
                               {"fps", json_number(layout.fps)}});
}

DirectorySource::DirectorySource(const std::filesystem::path& dir, const VideoLayout& layout)
    : layout_(layout) {
    if (!std::filesystem::is_directory(dir)) {
        throw FormatError("video directory '" + dir.string() + "' does not exist");
    }
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".png") files_.push_back(e.path());
    }
    std::sort(files_.begin(), files_.end());
    if (files_.empty()) throw FormatError("no PNG frames in '" + dir.string() + "'");
}

DualFrame DirectorySource::frame(std::size_t index) const {
    try {
        DualFrame f = split_panels(read_png(files_.at(index)), layout_.panel_split_row);
        f.frame_index = index;
        f.timestamp_s = static_cast<double>(index) / layout_.fps;
        return f;
    } catch (const FormatError& e) {
        throw FormatError("frame " + std::to_string(index) + ": " + e.what());
    }
}

MemorySource::MemorySource(std::vector<DualFrame> frames, double fps)
    : frames_(std::move(frames)), fps_(fps) {}

const char* to_string(TrackStatus s) {
    switch (s) {
        case TrackStatus::tracking: return "tracking";
        case TrackStatus::lost: return "lost";
        case TrackStatus::reacquired: return "reacquired";
    }
    return "?";
}

namespace {

bool intersects(const RoiBox& b, int w, int h) {
    return b.x < w && b.y < h && b.x + b.w > 0 && b.y + b.h > 0;
}

std::vector<Point2> detect_in_box(const Image& response, const RoiBox& box,
                                  const TrackConfig& config) {
    std::vector<Point2> out;
    for (const Corner& c : good_features(response, box.rect(), config.corners)) {
        out.push_back(c.pos);
    }
    return out;
}

struct Motion {
    Point2 shift;
    double scale = 1.0;
};

// Median displacement and median pairwise distance ratio.
Motion estimate_motion(const std::vector<Point2>& from, const std::vector<Point2>& to,
                       const TrackConfig& config) {
    std::vector<double> dx, dy;
    for (std::size_t i = 0; i < from.size(); ++i) {
        dx.push_back(to[i].x - from[i].x);
        dy.push_back(to[i].y - from[i].y);
    }
    Motion m;
    m.shift = {median(dx), median(dy)};
    std::vector<double> ratios;
    for (std::size_t i = 0; i < from.size(); ++i) {
        for (std::size_t j = i + 1; j < from.size(); ++j) {
            const double d0 = norm(from[i] - from[j]);
            if (d0 < 1e-9) continue;
            ratios.push_back(norm(to[i] - to[j]) / d0);
        }
    }
    if (!ratios.empty()) m.scale = std::clamp(median(ratios), config.min_scale, config.max_scale);
    return m;
}

// Scales about the box center; exact identity for zero shift and unit scale.
RoiBox apply_motion(const RoiBox& b, const Motion& m) {
    RoiBox out = b;
    out.x = b.x + m.shift.x + (b.w - b.w * m.scale) / 2.0;
    out.y = b.y + m.shift.y + (b.h - b.h * m.scale) / 2.0;
    out.w = b.w * m.scale;
    out.h = b.h * m.scale;
    return out;
}

// Forward flow with forward-backward check; returns surviving index pairs.
void track_points(const Pyramid& from, const Pyramid& to, const std::vector<Point2>& pts,
                  const TrackConfig& config, std::vector<Point2>& kept_from,
                  std::vector<Point2>& kept_to, std::vector<std::size_t>& kept_index) {
    std::vector<std::optional<Point2>> fwd(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) {
        auto f = lk_track(from, to, pts[i], {}, config.lk);
        if (!f) return;
        auto b = lk_track(to, from, *f, {}, config.lk);
        if (!b || norm(*b - pts[i]) > config.fb_threshold) return;
        fwd[i] = f;
    });
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!fwd[i]) continue;
        kept_from.push_back(pts[i]);
        kept_to.push_back(*fwd[i]);
        kept_index.push_back(i);
    }
}

}  // namespace

TrackState init_tracker(const DualFrame& frame0, const std::vector<RoiBox>& rois,
                        const TrackConfig& config) {
    TrackState st;
    st.width = frame0.width();
    st.height = frame0.height();
    st.frames_seen = 1;
    st.previous = std::make_shared<const Pyramid>(build_pyramid(frame0.visible, config.lk.levels));
    const Image response = min_eigen_response(frame0.visible);
    for (const auto& box : rois) {
        if (!intersects(box, st.width, st.height)) {
            throw DomainError("ROI '" + box.id + "' does not intersect the frame");
        }
        RoiTrack t;
        t.box = box;
        t.points = detect_in_box(response, box, config);
        t.ages.assign(t.points.size(), 0);
        t.anchor_box = box;
        t.anchor_points = t.points;
        t.anchor_pyramid = st.previous;
        if (static_cast<int>(t.points.size()) < config.min_features) {
            st.warnings.push_back("ROI '" + box.id + "': only " + std::to_string(t.points.size()) +
                                  " trackable corners; starting as lost");
            t.status = TrackStatus::lost;
        }
        st.rois.push_back(std::move(t));
    }
    return st;
}

void step(TrackState& state, const DualFrame& frame, const TrackConfig& config) {
    if (frame.width() != state.width || frame.height() != state.height) {
        throw DomainError("frame " + std::to_string(frame.frame_index) + " is " +
                          std::to_string(frame.width()) + "x" + std::to_string(frame.height()) +
                          ", tracker expects " + std::to_string(state.width) + "x" +
                          std::to_string(state.height));
    }
    auto current = std::make_shared<const Pyramid>(build_pyramid(frame.visible, config.lk.levels));
    std::optional<Image> response;
    auto corner_response = [&]() -> const Image& {
        if (!response) response = min_eigen_response(frame.visible);
        return *response;
    };

    for (RoiTrack& t : state.rois) {
        std::vector<Point2> from, to;
        std::vector<std::size_t> idx;
        if (t.status == TrackStatus::lost) {
            if (static_cast<int>(t.anchor_points.size()) < config.min_inliers) continue;
            track_points(*t.anchor_pyramid, *current, t.anchor_points, config, from, to, idx);
            if (static_cast<int>(to.size()) < config.min_inliers) continue;
            t.box = apply_motion(t.anchor_box, estimate_motion(from, to, config));
            t.points = to;
            t.ages.assign(to.size(), 0);
            t.status = TrackStatus::reacquired;
            continue;
        }

        track_points(*state.previous, *current, t.points, config, from, to, idx);
        const RoiBox before = t.box;
        if (!to.empty()) t.box = apply_motion(t.box, estimate_motion(from, to, config));
        if (static_cast<int>(to.size()) >= config.min_inliers) {
            std::vector<int> ages;
            for (auto i : idx) ages.push_back(t.ages[i] + 1);
            t.points = std::move(to);
            t.ages = std::move(ages);
            t.status = TrackStatus::tracking;
            continue;
        }
        auto fresh = detect_in_box(corner_response(), t.box, config);
        if (static_cast<int>(fresh.size()) >= config.min_features) {
            t.points = std::move(fresh);
            t.ages.assign(t.points.size(), 0);
            t.status = TrackStatus::tracking;
            continue;
        }
        // Keep the last good box and remember where the points were.
        t.anchor_box = before;
        t.anchor_points = t.points;
        t.anchor_pyramid = state.previous;
        t.box = before;
        t.status = TrackStatus::lost;
    }
    state.previous = std::move(current);
    ++state.frames_seen;
}

std::optional<double> extract_intensity(const Image& nir, const RoiBox& box) {
    const int x0 = std::max(0, static_cast<int>(std::ceil(box.x)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(box.y)));
    const int x1 = std::min(nir.width - 1, static_cast<int>(std::ceil(box.x + box.w)) - 1);
    const int y1 = std::min(nir.height - 1, static_cast<int>(std::ceil(box.y + box.h)) - 1);
    if (x1 < x0 || y1 < y0) return std::nullopt;
    double sum = 0.0;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) sum += nir.at(x, y);
    }
    return sum / (static_cast<double>(x1 - x0 + 1) * (y1 - y0 + 1));
}

TrackRun run_tracker(const FrameSource& video, const std::vector<RoiBox>& rois,
                     const std::string& patient_id, const TrackConfig& config) {
    const std::size_t n = video.size();
    if (n == 0) throw DomainError("video has no frames");
    TrackRun out;
    std::vector<TimeSeries> series(rois.size());
    for (auto& s : series) {
        s.sample_period_s = 1.0 / video.fps();
        s.values.assign(n, 0.0);
        s.valid.assign(n, 0);
    }
    TrackState state;
    for (std::size_t k = 0; k < n; ++k) {
        DualFrame frame = video.frame(k);
        frame.frame_index = k;
        if (k == 0) {
            state = init_tracker(frame, rois, config);
        } else {
            step(state, frame, config);
        }
        for (std::size_t r = 0; r < rois.size(); ++r) {
            const RoiTrack& t = state.rois[r];
            out.log.push_back({k, t.box, t.status});
            if (t.status == TrackStatus::lost) continue;
            if (auto v = extract_intensity(frame.nir, t.box); v && std::isfinite(*v) && *v >= 0) {
                series[r].values[k] = *v;
                series[r].valid[k] = 1;
            }
        }
    }
    for (std::size_t r = 0; r < rois.size(); ++r) {
        out.curves.emplace(CurveKey{patient_id, rois[r].id}, std::move(series[r]));
    }
    return out;
}

void save_track_log(const std::filesystem::path& path, const std::vector<TrackLogEntry>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write track log '" + path.string() + "'");
    out << "frame_index,roi_id,x,y,w,h,status\n";
    for (const auto& e : log) {
        out << e.frame_index << ',' << e.box.id << ',' << format_sig9(e.box.x) << ','
            << format_sig9(e.box.y) << ',' << format_sig9(e.box.w) << ','
            << format_sig9(e.box.h) << ',' << to_string(e.status) << '\n';
    }
}

}  // namespace icgkit
