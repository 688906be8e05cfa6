#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "icgkit/classify.hpp"
#include "icgkit/deformation.hpp"
#include "icgkit/error.hpp"
#include "icgkit/features.hpp"
#include "icgkit/fit_io.hpp"
#include "icgkit/pixfield.hpp"
#include "icgkit/run_config.hpp"
#include "icgkit/scale.hpp"
#include "icgkit/synth.hpp"
#include "icgkit/tracking.hpp"

using namespace icgkit;
namespace fs = std::filesystem;

namespace {

LogLevel g_level = LogLevel::warn;

void log(LogLevel level, const std::string& msg) {
    if (level <= g_level) std::cerr << "icgkit: " << to_string(level) << ": " << msg << "\n";
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void require_file(const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) throw FormatError(std::string(what) + " '" + p.string() + "' does not exist");
}

void require_dir(const fs::path& p, const char* what) {
    if (!fs::is_directory(p)) throw FormatError(std::string(what) + " '" + p.string() + "' is not a directory");
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= s.size()) {
        const std::size_t end = std::min(s.find(',', start), s.size());
        if (end > start) out.push_back(s.substr(start, end - start));
        start = end + 1;
    }
    return out;
}

// write_video puts frames under DIR/frames; a bare frame directory works too.
fs::path frame_dir(const fs::path& video) {
    require_dir(video, "video directory");
    return fs::is_directory(video / "frames") ? video / "frames" : video;
}

struct SynthArgs {
    std::string kind;
    fs::path spec, out;
};

void run_synth(const SynthArgs& a, const RunConfig& rc) {
    fs::create_directories(a.out);
    if (a.kind == "curve") {
        require_file(a.spec, "curve spec");
        const CurveSpec spec = curve_spec_from_json(read_json_file(a.spec));
        CurveSet curves;
        curves[{"P01", "R001"}] = gen_curve(spec, rc.seed);
        save_curves(a.out / "curves.csv", curves);
        write_json_file(a.out / "truth.json", Json{{"seed", rc.seed}, {"spec", curve_spec_to_json(spec)}});
    } else if (a.kind == "corpus") {
        CorpusSpec spec = default_corpus_spec();
        if (!a.spec.empty()) {
            require_file(a.spec, "corpus spec");
            spec = corpus_spec_from_json(read_json_file(a.spec));
        }
        const Corpus c = gen_corpus(spec, rc.seed);
        save_curves(a.out / "curves.csv", c.curves);
        save_labels_csv(a.out / "labels.csv", c.labels);
        Json entries = Json::array();
        for (const auto& e : c.truth) {
            entries.push_back({{"patient_id", e.key.patient_id},
                               {"roi_id", e.key.roi_id},
                               {"label", e.label},
                               {"params", params_to_json(e.params)},
                               {"duration_s", json_number(e.duration_s)}});
        }
        write_json_file(a.out / "truth.json",
                        Json{{"seed", rc.seed}, {"spec", corpus_spec_to_json(spec)}, {"curves", entries}});
    } else {
        require_file(a.spec, "video spec");
        const SynthVideo v(video_spec_from_json(read_json_file(a.spec)), rc.seed);
        write_video(v, a.out);
    }
    log(LogLevel::info, "wrote synthetic " + a.kind + " to " + a.out.string());
}

struct TrackArgs {
    fs::path video, layout, rois, out, log;
    std::string patient = "P01";
};

void run_track(const TrackArgs& a, const RunConfig& rc) {
    require_file(a.layout, "layout");
    require_file(a.rois, "ROI file");
    const DirectorySource src(frame_dir(a.video), load_layout(a.layout));
    if (src.size() == 0) throw FormatError("video '" + a.video.string() + "' has no frames");
    const TrackRun run = run_tracker(src, load_rois(a.rois), a.patient, rc.track);
    ensure_parent(a.out);
    save_curves(a.out, run.curves);
    if (!a.log.empty()) {
        ensure_parent(a.log);
        save_track_log(a.log, run.log);
    }
    std::set<std::string> reported;
    for (const auto& e : run.log) {
        if (e.status == TrackStatus::lost && reported.insert(e.box.id).second) {
            log(LogLevel::warn, "ROI " + e.box.id + " lost at frame " + std::to_string(e.frame_index));
        }
    }
    log(LogLevel::info, "tracked " + std::to_string(run.curves.size()) + " ROIs over " +
                            std::to_string(src.size()) + " frames");
}

struct StabilizeArgs {
    fs::path video, layout, out, fields;
};

void run_stabilize(const StabilizeArgs& a, const RunConfig& rc) {
    require_file(a.layout, "layout");
    const DirectorySource src(frame_dir(a.video), load_layout(a.layout));
    if (src.size() == 0) throw FormatError("video '" + a.video.string() + "' has no frames");
    std::optional<fs::path> tps;
    if (!a.fields.empty()) tps = a.fields;
    stabilize_to_directory(src, rc.stabilize, a.out, tps);
    log(LogLevel::info, "stabilized " + std::to_string(src.size()) + " frames into " + a.out.string());
}

struct FieldArgs {
    fs::path stabilized, in, overlay, out;
    std::string feature;
    double alpha = 0.6;
    std::vector<double> range;
};

void run_field_build(const FieldArgs& a) {
    require_dir(a.stabilized, "stabilized directory");
    const PixelField f = load_stabilized_field(a.stabilized);
    ensure_parent(a.out);
    save_field(a.out, f);
    log(LogLevel::info, "field " + std::to_string(f.width) + "x" + std::to_string(f.height) + "x" +
                            std::to_string(f.n_frames) + " written to " + a.out.string());
}

void run_field_heatmap(const FieldArgs& a, const RunConfig& rc) {
    require_file(a.in, "field");
    const PixelField f = load_field(a.in);
    HeatmapConfig hc = rc.heatmap;
    if (!a.range.empty()) hc.value_range = std::pair{a.range[0], a.range[1]};
    const Heatmap map = feature_map(f, a.feature, hc);
    std::optional<RgbImage> base;
    if (!a.overlay.empty()) {
        require_file(a.overlay, "overlay");
        base = read_png_rgb(a.overlay);
        if (base->width != map.width || base->height != map.height) {
            throw FormatError("overlay '" + a.overlay.string() + "' is " + std::to_string(base->width) + "x" +
                              std::to_string(base->height) + ", field is " + std::to_string(map.width) + "x" +
                              std::to_string(map.height));
        }
    }
    ensure_parent(a.out);
    save_heatmap(a.out, map, render(map, base ? &*base : nullptr, a.alpha));
}

struct FitArgs {
    fs::path curves, out, compare, report;
    std::optional<double> truncate_at;
};

void run_fit(const FitArgs& a, const RunConfig& rc) {
    require_file(a.curves, "curves");
    FitConfig fc = rc.fit;
    fc.seed = rc.seed;
    fc.truncate_at_s = a.truncate_at;
    const FitRun run = fit_curves(load_curves(a.curves), fc);
    for (const auto& f : run.failures) log(LogLevel::warn, "fit failed for " + to_string(f.key) + ": " + f.error);
    ensure_parent(a.out);
    save_fits(a.out, run);
    if (!a.compare.empty()) {
        require_file(a.compare, "comparison fits");
        const Json report = fit_diff_report(load_fits(a.compare).fits, run.fits);
        if (a.report.empty()) {
            std::cout << report.dump(2) << "\n";
        } else {
            ensure_parent(a.report);
            write_json_file(a.report, report);
        }
    }
}

struct FeaturesArgs {
    fs::path curves, fits, labels, out;
    std::string select;
};

void run_features(const FeaturesArgs& a, const RunConfig& rc) {
    require_file(a.curves, "curves");
    const std::vector<std::string> sel = a.select.empty() ? simple_feature_names() : split_list(a.select);
    std::optional<FitTable> fits;
    if (!a.fits.empty()) {
        require_file(a.fits, "fits");
        fits = load_fits(a.fits).fits;
    }
    std::optional<LabelMap> labels;
    if (!a.labels.empty()) {
        require_file(a.labels, "labels");
        labels = load_labels_csv(a.labels);
    }
    const FeatureMatrix m = feature_matrix(load_curves(a.curves), sel, fits ? &*fits : nullptr,
                                           labels ? &*labels : nullptr, rc.features);
    for (const auto& d : m.dropped) log(LogLevel::warn, "dropped " + to_string(d.key) + ": " + d.reason);
    ensure_parent(a.out);
    save_feature_csv(a.out, m.table);
}

struct ClassifyArgs {
    std::string action;
    fs::path features, out, model, png;
    std::string kind = "knn";
    std::string select;
    std::size_t target = 2;
    int grid = 100;
};

GridAxis axis_for(const FeatureTable& t, std::size_t col, int n) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& r : t.rows) {
        lo = std::min(lo, r.values[col]);
        hi = std::max(hi, r.values[col]);
    }
    if (!(lo <= hi)) throw DomainError("feature table has no rows");
    const double pad = hi > lo ? 0.05 * (hi - lo) : 1.0;
    return {lo - pad, hi + pad, n};
}

void run_classify(const ClassifyArgs& a, const RunConfig& rc) {
    require_file(a.features, "features");
    FeatureTable table = load_feature_csv(a.features);
    if (!a.select.empty()) {
        const auto sel = split_list(a.select);
        table = table.select(sel);
    }
    const ModelKind kind = parse_model_kind(a.kind);
    ensure_parent(a.out);
    if (a.action == "train") {
        write_json_file(a.out, model_to_json(train(table, kind, rc.classify)));
    } else if (a.action == "cv") {
        const CvResult r = cross_validate(table, kind, rc.classify);
        for (const auto& p : r.skipped_patients) log(LogLevel::warn, "fold for patient " + p + " skipped");
        write_json_file(a.out, cv_to_json(r));
    } else if (a.action == "eliminate") {
        write_json_file(a.out, elimination_to_json(eliminate_features(table, kind, rc.classify, a.target)));
    } else {
        ClassifierModel model;
        if (!a.model.empty()) {
            require_file(a.model, "model");
            model = model_from_json(read_json_file(a.model));
        } else {
            model = train(table, kind, rc.classify);
        }
        if (model.feature_names.size() != 2) {
            throw DomainError("boundary needs a two-feature model, got " + std::to_string(model.feature_names.size()) +
                              " features; pass --select f1,f2");
        }
        const FeatureTable pts = table.select(model.feature_names);
        const BoundaryGrid g = decision_boundary(model, axis_for(pts, 0, a.grid), axis_for(pts, 1, a.grid));
        save_boundary_csv(a.out, g);
        if (!a.png.empty()) {
            ensure_parent(a.png);
            write_png_rgb(a.png, render_boundary(g, model, &pts));
        }
    }
}

struct RecommendArgs {
    fs::path curves, out;
    std::string reference;
    std::optional<double> threshold;
};

void run_recommend(const RecommendArgs& a, const RunConfig& rc) {
    require_file(a.curves, "curves");
    const double threshold = a.threshold.value_or(rc.flag_threshold);
    const auto recs = recommend(load_curves(a.curves), a.reference, threshold, rc.recommend);
    for (const auto& r : recs) {
        if (!r.estimate) log(LogLevel::warn, r.error);
    }
    ensure_parent(a.out);
    write_json_file(a.out, recommendation_to_json(recs));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"icgkit: fluorescence perfusion toolkit"};
    app.require_subcommand(1);
    app.fallthrough();

    fs::path config_path;
    std::uint64_t seed = 0;
    std::string log_level = "warn";
    app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Seed for every random draw")->capture_default_str();
    auto* level_opt =
        app.add_option("--log-level", log_level, "error, warn, info or debug")->capture_default_str();

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic curves, corpora or videos");
    synth_cmd->require_subcommand(1);
    for (const char* kind : {"curve", "corpus", "video"}) {
        auto* sc = synth_cmd->add_subcommand(kind, std::string("Synthetic ") + kind);
        sc->add_option("--spec", synth.spec, std::string(kind) == "corpus" ? "Corpus spec JSON (default corpus when omitted)"
                                                                           : "Spec JSON")
            ->required(std::string(kind) != "corpus");
        sc->add_option("--out", synth.out, "Output directory")->required();
        sc->callback([&synth, kind] { synth.kind = kind; });
    }

    TrackArgs track;
    auto* track_cmd = app.add_subcommand("track", "Track ROIs and extract NIR intensity curves");
    track_cmd->add_option("--video", track.video, "Frame directory (or a synth video directory)")->required();
    track_cmd->add_option("--layout", track.layout, "layout.json")->required();
    track_cmd->add_option("--rois", track.rois, "ROI JSON for frame 0")->required();
    track_cmd->add_option("--out", track.out, "Output curves CSV")->required();
    track_cmd->add_option("--log", track.log, "Per-frame track log CSV");
    track_cmd->add_option("--patient-id", track.patient, "patient_id written to the curves")->capture_default_str();

    StabilizeArgs stab;
    auto* stab_cmd = app.add_subcommand("stabilize", "Motion-compensate a video against frame 0");
    stab_cmd->add_option("--video", stab.video, "Frame directory (or a synth video directory)")->required();
    stab_cmd->add_option("--layout", stab.layout, "layout.json")->required();
    stab_cmd->add_option("--out", stab.out, "Output directory")->required();
    stab_cmd->add_option("--fields", stab.fields, "Directory for per-frame TPS models");

    FieldArgs field;
    auto* field_cmd = app.add_subcommand("field", "Per-pixel fields and heatmaps");
    field_cmd->require_subcommand(1);
    auto* build_cmd = field_cmd->add_subcommand("build", "Pack stabilized NIR frames into a field file");
    build_cmd->add_option("--stabilized", field.stabilized, "Output directory of stabilize")->required();
    build_cmd->add_option("--out", field.out, "Output .pfld file")->required();
    auto* heat_cmd = field_cmd->add_subcommand("heatmap", "Render a per-pixel feature heatmap");
    heat_cmd->add_option("--in", field.in, "Field file")->required();
    heat_cmd->add_option("--feature", field.feature, "mu, decay_slope, ttp, upslope or time_ratio")
        ->required()
        ->check(CLI::IsMember(heatmap_feature_ids()));
    heat_cmd->add_option("--overlay", field.overlay, "Base frame PNG to blend onto");
    heat_cmd->add_option("--alpha", field.alpha, "Heatmap opacity over the overlay")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    heat_cmd->add_option("--range", field.range, "Fixed color range LO HI instead of percentiles")->expected(2);
    heat_cmd->add_option("--out", field.out, "Output PNG (a JSON sidecar is written next to it)")->required();

    FitArgs fitargs;
    auto* fit_cmd = app.add_subcommand("fit", "Fit the kinetic model to every curve");
    fit_cmd->add_option("--curves", fitargs.curves, "Curves CSV")->required();
    fit_cmd->add_option("--out", fitargs.out, "Output fits JSON")->required();
    fit_cmd->add_option("--truncate-at", fitargs.truncate_at, "Fit only samples up to this time (s)");
    fit_cmd->add_option("--compare", fitargs.compare, "Earlier fits JSON to diff the new fits against");
    fit_cmd->add_option("--report", fitargs.report, "Diff report path (stdout when omitted)");

    FeaturesArgs feat;
    auto* feat_cmd = app.add_subcommand("features", "Build a feature table");
    feat_cmd->add_option("--curves", feat.curves, "Curves CSV")->required();
    feat_cmd->add_option("--fits", feat.fits, "Fits JSON, needed for kinetic features");
    feat_cmd->add_option("--labels", feat.labels, "Labels CSV (patient_id,roi_id,label)");
    feat_cmd->add_option("--select", feat.select,
                         "Comma-separated features from ttp_s,upslope,downslope,time_ratio,mu_s,"
                         "D,tau_s,tau_i_s,K,b,t0_s (default: the five simple features)");
    feat_cmd->add_option("--out", feat.out, "Output features CSV")->required();

    ClassifyArgs cls;
    auto* cls_cmd = app.add_subcommand("classify", "Train, cross-validate and inspect classifiers");
    cls_cmd->require_subcommand(1);
    const std::vector<std::pair<const char*, const char*>> actions = {
        {"train", "Train on the whole table and write the model JSON"},
        {"cv", "Leave-one-patient-out cross-validation metrics JSON"},
        {"eliminate", "Backward feature elimination JSON"},
        {"boundary", "Decision boundary grid CSV (f1,f2,label,score)"}};
    for (const auto& [name, help] : actions) {
        auto* sc = cls_cmd->add_subcommand(name, help);
        sc->add_option("--features", cls.features, "Labeled features CSV")->required();
        sc->add_option("--model-kind", cls.kind, "knn, nb or tree")
            ->capture_default_str()
            ->check(CLI::IsMember({"knn", "nb", "tree"}));
        sc->add_option("--select", cls.select, "Restrict to these comma-separated features");
        sc->add_option("--out", cls.out, "Output path")->required();
        const std::string action = name;
        if (action == "eliminate") {
            sc->add_option("--target", cls.target, "Stop at this many features")->capture_default_str();
        }
        if (action == "boundary") {
            sc->add_option("--model", cls.model, "Model JSON (trained from --features when omitted)");
            sc->add_option("--grid", cls.grid, "Grid nodes per axis")->capture_default_str()->check(
                CLI::PositiveNumber);
            sc->add_option("--png", cls.png, "Also render the grid as a PNG");
        }
        sc->callback([&cls, action] { cls.action = action; });
    }

    RecommendArgs rec;
    auto* rec_cmd = app.add_subcommand("recommend", "Temporal scale of each ROI against a reference");
    rec_cmd->add_option("--curves", rec.curves, "Curves CSV")->required();
    rec_cmd->add_option("--reference", rec.reference, "roi_id of the reference curve")->required();
    rec_cmd->add_option("--threshold", rec.threshold, "Flag ROIs whose scale is below this (default 0.7)");
    rec_cmd->add_option("--out", rec.out, "Output JSON")->required();

    // Set last so subcommands do not inherit it.
    app.footer("Config file defaults (every key optional, unknown keys rejected):\n" +
               run_config_to_json(RunConfig{}).dump(2));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        RunConfig rc;
        if (!config_path.empty()) rc = load_run_config(config_path);
        if (seed_opt->count()) rc.seed = seed;
        if (level_opt->count()) rc.log_level = parse_log_level(log_level);
        g_level = rc.log_level;

        if (*synth_cmd) run_synth(synth, rc);
        else if (*track_cmd) run_track(track, rc);
        else if (*stab_cmd) run_stabilize(stab, rc);
        else if (*build_cmd) run_field_build(field);
        else if (*heat_cmd) run_field_heatmap(field, rc);
        else if (*fit_cmd) run_fit(fitargs, rc);
        else if (*feat_cmd) run_features(feat, rc);
        else if (*cls_cmd) run_classify(cls, rc);
        else if (*rec_cmd) run_recommend(rec, rc);
    } catch (const DomainError& e) {
        log(LogLevel::error, e.what());
        return 3;
    } catch (const Error& e) {
        log(LogLevel::error, e.what());
        return 2;
    } catch (const fs::filesystem_error& e) {
        log(LogLevel::error, e.what());
        return 2;
    } catch (const Json::exception& e) {
        log(LogLevel::error, e.what());
        return 2;
    }
    return 0;
}
