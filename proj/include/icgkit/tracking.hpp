#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "icgkit/flow.hpp"
#include "icgkit/image.hpp"
#include "icgkit/json_util.hpp"
#include "icgkit/series.hpp"

namespace icgkit {

struct DualFrame {
    Image visible;
    Image nir;
    std::size_t frame_index = 0;
    double timestamp_s = 0.0;

    int width() const { return visible.width; }
    int height() const { return visible.height; }
};

// Splits a stacked frame: rows [0, split) visible, [split, height) NIR.
DualFrame split_panels(const Image& stacked, int panel_split_row);

struct RoiBox {
    std::string id;
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    Rect rect() const { return {x, y, w, h}; }
    friend bool operator==(const RoiBox&, const RoiBox&) = default;
};

// ROI JSON: {"frame":0,"rois":[{"id":..,"x":..,"y":..,"w":..,"h":..}]}
std::vector<RoiBox> load_rois(const std::filesystem::path& path);
void save_rois(const std::filesystem::path& path, const std::vector<RoiBox>& rois);
Json rois_to_json(const std::vector<RoiBox>& rois);
std::vector<RoiBox> rois_from_json(const Json& rois_array, const std::string& source);

struct VideoLayout {
    int panel_split_row = 0;
    double fps = 30.0;
};
VideoLayout load_layout(const std::filesystem::path& path);
void save_layout(const std::filesystem::path& path, const VideoLayout& layout);

// Sequential access to dual-panel frames.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::size_t size() const = 0;
    virtual DualFrame frame(std::size_t index) const = 0;
    virtual double fps() const = 0;
};

// Directory of numbered PNG files (sorted by name) plus a layout.
class DirectorySource : public FrameSource {
public:
    DirectorySource(const std::filesystem::path& dir, const VideoLayout& layout);
    std::size_t size() const override { return files_.size(); }
    DualFrame frame(std::size_t index) const override;
    double fps() const override { return layout_.fps; }

    const std::vector<std::filesystem::path>& files() const { return files_; }

private:
    std::vector<std::filesystem::path> files_;
    VideoLayout layout_;
};

class MemorySource : public FrameSource {
public:
    MemorySource(std::vector<DualFrame> frames, double fps);
    std::size_t size() const override { return frames_.size(); }
    DualFrame frame(std::size_t index) const override { return frames_.at(index); }
    double fps() const override { return fps_; }

private:
    std::vector<DualFrame> frames_;
    double fps_;
};

enum class TrackStatus { tracking, lost, reacquired };
const char* to_string(TrackStatus s);

struct TrackConfig {
    LkConfig lk;
    double fb_threshold = 1.0;  // px, forward-backward round trip
    int min_features = 8;       // needed at init and re-detection
    int min_inliers = 8;        // re-detect below this many surviving points
    CornerConfig corners;       // max 64, 5 px spacing
    double min_scale = 0.9;
    double max_scale = 1.1;
};

struct RoiTrack {
    RoiBox box;
    std::vector<Point2> points;
    std::vector<int> ages;
    TrackStatus status = TrackStatus::tracking;
    // Last state while tracked, used to reacquire a lost ROI.
    RoiBox anchor_box;
    std::vector<Point2> anchor_points;
    std::shared_ptr<const Pyramid> anchor_pyramid;
};

struct TrackState {
    int width = 0;
    int height = 0;
    std::size_t frames_seen = 0;
    std::shared_ptr<const Pyramid> previous;
    std::vector<RoiTrack> rois;
    std::vector<std::string> warnings;
};

TrackState init_tracker(const DualFrame& frame0, const std::vector<RoiBox>& rois,
                        const TrackConfig& config = {});

// Advances every ROI to `frame` (visible panel only).
void step(TrackState& state, const DualFrame& frame, const TrackConfig& config = {});

// Mean NIR over pixels whose centers lie inside the box, clipped to the frame.
// Empty when no pixel center is covered.
std::optional<double> extract_intensity(const Image& nir, const RoiBox& box);

struct TrackLogEntry {
    std::size_t frame_index = 0;
    RoiBox box;
    TrackStatus status = TrackStatus::tracking;
};

struct TrackRun {
    CurveSet curves;
    std::vector<TrackLogEntry> log;
};

TrackRun run_tracker(const FrameSource& video, const std::vector<RoiBox>& rois,
                     const std::string& patient_id = "p1", const TrackConfig& config = {});

// frame_index,roi_id,x,y,w,h,status
void save_track_log(const std::filesystem::path& path, const std::vector<TrackLogEntry>& log);

}  // namespace icgkit
