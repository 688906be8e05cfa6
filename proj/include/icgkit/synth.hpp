#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "icgkit/features.hpp"
#include "icgkit/fit_io.hpp"
#include "icgkit/image.hpp"
#include "icgkit/json_util.hpp"
#include "icgkit/kinetics.hpp"
#include "icgkit/tracking.hpp"

namespace icgkit {

// simulate + additive Gaussian noise, clamped at zero. With truncate_min_s
// set, the series ends at a uniform random time in [truncate_min_s, duration_s].
struct CurveSpec {
    KineticParams params;
    double duration_s = 180.0;
    double sample_period_s = 0.25;
    double noise_sigma = 0.0;
    std::optional<double> truncate_min_s;
};

TimeSeries gen_curve(const CurveSpec& spec, std::uint64_t seed);

Json curve_spec_to_json(const CurveSpec& spec);
CurveSpec curve_spec_from_json(const Json& j);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    bool log_uniform = false;
};

struct ClassSpec {
    std::string label;
    Range damping, tau, tau_i, gain, background, delay;
};

struct CorpusSpec {
    std::vector<ClassSpec> classes;
    int n_per_class = 40;
    int n_patients = 20;
    double duration_s = 180.0;
    double min_duration_s = 120.0;  // lower end of the random truncation
    double sample_period_s = 0.25;
    double noise_sigma = 0.01;
};

// benign: washout (short input decay); cancer: accumulation (long input decay).
CorpusSpec default_corpus_spec();

Json corpus_spec_to_json(const CorpusSpec& spec);
CorpusSpec corpus_spec_from_json(const Json& j);

struct CorpusEntry {
    CurveKey key;
    std::string label;
    KineticParams params;
    double duration_s = 0.0;
};

struct Corpus {
    CurveSet curves;
    LabelMap labels;
    std::vector<CorpusEntry> truth;
};

// Rows are generated class by class and assigned to patients round-robin.
Corpus gen_corpus(const CorpusSpec& spec, std::uint64_t seed);

struct PerfusionRegion {
    std::string label;
    // ellipse in frame-0 coordinates
    double cx = 0.0, cy = 0.0, rx = 0.0, ry = 0.0;
    KineticParams params;

    bool contains(Point2 p) const;
};

struct VideoSpec {
    int width = 160;
    int height = 120;
    int n_frames = 60;
    double fps = 30.0;
    // Periodic band-limited noise texture.
    int texture_size = 1024;
    double texture_sigma_px = 2.5;
    double texture_contrast = 0.15;
    // Ground-truth motion. Frame t moves the frame-0 point p to p + U_t(p).
    Point2 translate_px_per_frame;
    // Reverses the translation direction every this many frames so long
    // sequences stay inside the panel; 0 keeps one direction.
    int translate_reverse_frames = 0;
    double rotate_deg_per_frame = 0.0;  // about the panel center
    int n_bumps = 0;                    // Gaussian displacement bumps
    double bump_amplitude_px = 0.0;
    double bump_sigma_px = 25.0;
    // Bump amplitudes follow sin(2 pi t / period); 0 ramps them linearly to
    // full amplitude at the last frame.
    double warp_period_frames = 0.0;
    std::vector<std::pair<int, int>> occlusions;  // [first, last] frames, visible panel blanked
    KineticParams background;
    std::vector<PerfusionRegion> regions;
    double nir_noise_sigma = 0.0;
    std::vector<RoiBox> rois;
};

Json video_spec_to_json(const VideoSpec& spec);
VideoSpec video_spec_from_json(const Json& j);

struct Bump {
    Point2 center;
    Point2 amplitude;  // full displacement at the center
};

// Renders frames lazily from the spec; frames are quantized to 16 bits so
// they equal what a DirectorySource reads back from the written PNGs.
class SynthVideo : public FrameSource {
public:
    SynthVideo(VideoSpec spec, std::uint64_t seed);

    std::size_t size() const override { return static_cast<std::size_t>(spec_.n_frames); }
    DualFrame frame(std::size_t index) const override;
    double fps() const override { return spec_.fps; }

    const VideoSpec& spec() const { return spec_; }
    const std::vector<Bump>& bumps() const { return bumps_; }
    const Image& texture() const { return texture_; }

    // U_t(p) for a frame-0 point p.
    Point2 displacement(std::size_t t, Point2 p) const;
    // Frame-0 point that frame t shows at pixel q (inverse warp).
    Point2 source_point(std::size_t t, Point2 q) const;
    bool occluded(std::size_t t) const;
    // 0 for background, otherwise 1 + the first region containing the point.
    int region_at(Point2 p) const;
    // Region label per pixel of frame 0.
    std::vector<std::uint8_t> region_mask() const;
    // ROI box whose center follows the ground-truth motion of its frame-0 center.
    RoiBox roi_at(const RoiBox& roi0, std::size_t t) const;
    // Noise-free NIR value of region r (0 = background) at frame t.
    double region_value(int r, std::size_t t) const;

    Json truth_json() const;

private:
    VideoSpec spec_;
    std::uint64_t seed_;
    Image texture_;
    std::vector<Bump> bumps_;
    std::vector<std::vector<double>> curves_;  // per region incl. background
};

// Writes frames/frame_NNNNN.png (stacked 16-bit gray, visible on top),
// layout.json, rois.json, region_mask.png and truth.json into dir.
void write_video(const SynthVideo& video, const std::filesystem::path& dir);

// Stacks the two panels into one image, visible rows first.
Image stack_panels(const DualFrame& frame);

}  // namespace icgkit
