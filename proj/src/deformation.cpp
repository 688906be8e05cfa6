#include "icgkit/deformation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "icgkit/error.hpp"
#include "icgkit/json_util.hpp"

namespace icgkit {

std::vector<Keypoint> detect_keypoints(const Image& frame, const KeypointConfig& config) {
    const Image r = min_eigen_response(frame);
    const int half = config.patch / 2;
    const int w = frame.width;
    const int h = frame.height;
    float strongest = 0.0f;
    for (float v : r.data) strongest = std::max(strongest, v);
    const double threshold = std::max(config.quality * strongest, config.min_response);
    const int rad = config.nms_radius;

    std::vector<Keypoint> cand;
    for (int y = half; y < h - half; ++y) {
        for (int x = half; x < w - half; ++x) {
            const float v = r.at(x, y);
            if (v < threshold) continue;
            bool keep = true;
            for (int dy = -rad; dy <= rad && keep; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= h) continue;
                for (int dx = -rad; dx <= rad; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= w || dx * dx + dy * dy > rad * rad) continue;
                    const float o = r.at(xx, yy);
                    // equal responses: the earlier pixel in raster order wins
                    if (o > v || (o == v && (dy < 0 || (dy == 0 && dx < 0)))) {
                        keep = false;
                        break;
                    }
                }
            }
            if (keep) cand.push_back({{static_cast<double>(x), static_cast<double>(y)}, v, {}});
        }
    }
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });

    std::vector<Keypoint> out;
    const std::size_t n = static_cast<std::size_t>(config.patch) * config.patch;
    for (auto& k : cand) {
        if (static_cast<int>(out.size()) >= config.max_keypoints) break;
        const int cx = static_cast<int>(k.pos.x);
        const int cy = static_cast<int>(k.pos.y);
        std::vector<double> patch;
        patch.reserve(n);
        double mean = 0.0;
        for (int dy = -half; dy <= half; ++dy) {
            for (int dx = -half; dx <= half; ++dx) {
                patch.push_back(frame.at(cx + dx, cy + dy));
                mean += patch.back();
            }
        }
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (double& v : patch) {
            v -= mean;
            ss += v * v;
        }
        if (ss < 1e-24) continue;
        const double inv = 1.0 / std::sqrt(ss);
        k.descriptor.resize(n);
        for (std::size_t i = 0; i < n; ++i) k.descriptor[i] = static_cast<float>(patch[i] * inv);
        out.push_back(std::move(k));
    }
    return out;
}

namespace {

double dot(const std::vector<float>& a, const std::vector<float>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

}  // namespace

Correspondences match_keypoints(const std::vector<Keypoint>& kp0, const std::vector<Keypoint>& kpT,
                                int frame_width, int frame_height, const MatchConfig& config) {
    const std::size_t n0 = kp0.size();
    const std::size_t n1 = kpT.size();
    Correspondences out;
    if (n0 > 0 && n1 > 0) {
        // squared distance between unit vectors: 2 - 2 <a, b>
        std::vector<double> d2(n0 * n1);
        for (std::size_t i = 0; i < n0; ++i) {
            for (std::size_t j = 0; j < n1; ++j) {
                d2[i * n1 + j] = std::max(0.0, 2.0 - 2.0 * dot(kp0[i].descriptor, kpT[j].descriptor));
            }
        }
        std::vector<std::size_t> best1(n1);
        for (std::size_t j = 0; j < n1; ++j) {
            std::size_t b = 0;
            for (std::size_t i = 1; i < n0; ++i) {
                if (d2[i * n1 + j] < d2[b * n1 + j]) b = i;
            }
            best1[j] = b;
        }
        const double max_disp = config.max_disp_fraction * std::hypot(frame_width, frame_height);
        for (std::size_t i = 0; i < n0; ++i) {
            std::size_t b = 0;
            double first = std::numeric_limits<double>::infinity();
            double second = first;
            for (std::size_t j = 0; j < n1; ++j) {
                const double d = d2[i * n1 + j];
                if (d < first) {
                    second = first;
                    first = d;
                    b = j;
                } else if (d < second) {
                    second = d;
                }
            }
            if (best1[b] != i) continue;
            if (!(std::sqrt(first) < config.ratio * std::sqrt(second))) continue;
            if (norm(kpT[b].pos - kp0[i].pos) > max_disp) continue;
            out.points0.push_back(kp0[i].pos);
            out.pointsT.push_back(kpT[b].pos);
            out.scores.push_back(1.0 - 0.5 * first);
        }
    }
    if (out.size() < 3) throw DomainError("insufficient matches");
    return out;
}

Correspondences refine_matches(const Pyramid& frame0, const Pyramid& frameT,
                               const Correspondences& corr, double max_shift, const LkConfig& lk) {
    std::vector<std::optional<Point2>> refined(corr.size());
    parallel_for(corr.size(), [&](std::size_t i) {
        auto q = lk_track(frame0, frameT, corr.points0[i], corr.pointsT[i] - corr.points0[i], lk);
        if (q && norm(*q - corr.pointsT[i]) <= max_shift) refined[i] = q;
    });
    Correspondences out;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        if (!refined[i]) continue;
        out.points0.push_back(corr.points0[i]);
        out.pointsT.push_back(*refined[i]);
        out.scores.push_back(corr.scores[i]);
    }
    return out;
}

namespace {

// Distance between each match's displacement and the least-squares affine
// displacement of its nearest active neighbours.
std::vector<double> local_residuals(const Correspondences& corr, const std::vector<std::uint8_t>& active,
                                    int neighbours) {
    const std::size_t n = corr.size();
    std::vector<double> res(n, 0.0);
    parallel_for(n, [&](std::size_t i) {
        if (!active[i]) return;
        std::vector<std::pair<double, std::size_t>> d;
        d.reserve(n);
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i && active[j]) d.emplace_back(norm(corr.points0[j] - corr.points0[i]), j);
        }
        const int k_used = std::min<int>(neighbours, static_cast<int>(d.size()));
        std::partial_sort(d.begin(), d.begin() + k_used, d.end());
        Eigen::MatrixXd P(k_used, 3);
        Eigen::MatrixXd V(k_used, 2);
        for (int k = 0; k < k_used; ++k) {
            const std::size_t j = d[k].second;
            const Point2 q = corr.points0[j] - corr.points0[i];
            const Point2 u = corr.pointsT[j] - corr.points0[j];
            P.row(k) << 1.0, q.x, q.y;
            V.row(k) << u.x, u.y;
        }
        const Eigen::MatrixXd c = P.completeOrthogonalDecomposition().solve(V);
        const Point2 u = corr.pointsT[i] - corr.points0[i];
        res[i] = std::hypot(u.x - c(0, 0), u.y - c(0, 1));
    });
    return res;
}

}  // namespace

Correspondences reject_inconsistent(const Correspondences& corr, int neighbours, double max_residual) {
    const std::size_t n = corr.size();
    if (n <= static_cast<std::size_t>(neighbours)) return corr;
    std::vector<std::uint8_t> active(n, 1);
    std::size_t n_active = n;
    // drop the worst offender and re-evaluate, so one gross outlier cannot
    // condemn its neighbours
    while (n_active > static_cast<std::size_t>(neighbours)) {
        const auto res = local_residuals(corr, active, neighbours);
        const auto worst = std::max_element(res.begin(), res.end());
        if (*worst <= max_residual) break;
        active[static_cast<std::size_t>(worst - res.begin())] = 0;
        --n_active;
    }
    Correspondences out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!active[i]) continue;
        out.points0.push_back(corr.points0[i]);
        out.pointsT.push_back(corr.pointsT[i]);
        out.scores.push_back(corr.scores[i]);
    }
    return out;
}

double tps_kernel(double r) { return r > 0.0 ? r * r * std::log(r) : 0.0; }

double default_lambda(const std::vector<Point2>& points) {
    const std::size_t n = points.size();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) sum += norm(points[i] - points[j]);
    }
    const double mean = sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
    return 1e-3 * mean * mean;
}

Point2 TpsModel::displacement(Point2 p) const {
    double u = (affine[0][0] - 1.0) * p.x + affine[0][1] * p.y + affine[0][2];
    double v = affine[1][0] * p.x + (affine[1][1] - 1.0) * p.y + affine[1][2];
    for (std::size_t j = 0; j < control_points.size(); ++j) {
        const double k = tps_kernel(norm(p - control_points[j]));
        u += weights[j][0] * k;
        v += weights[j][1] * k;
    }
    return {u, v};
}

namespace {

// Displacement-affine coefficients (c0 + c1 x + c2 y per component) into the
// mapping form stored in the model.
void set_affine(TpsModel& m, const Eigen::Matrix<double, 3, 2>& c) {
    for (int comp = 0; comp < 2; ++comp) {
        m.affine[comp][0] = c(1, comp) + (comp == 0 ? 1.0 : 0.0);
        m.affine[comp][1] = c(2, comp) + (comp == 1 ? 1.0 : 0.0);
        m.affine[comp][2] = c(0, comp);
    }
}

TpsModel fit_affine_only(const std::vector<Point2>& p0, const std::vector<Point2>& disp,
                         double lambda) {
    const Eigen::Index n = static_cast<Eigen::Index>(p0.size());
    Eigen::MatrixXd P(n, 3);
    Eigen::MatrixXd V(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        P.row(i) << 1.0, p0[i].x, p0[i].y;
        V.row(i) << disp[i].x, disp[i].y;
    }
    const Eigen::Matrix<double, 3, 2> c = P.completeOrthogonalDecomposition().solve(V);
    TpsModel m;
    m.lambda = lambda;
    m.affine_only = true;
    set_affine(m, c);
    return m;
}

}  // namespace

TpsModel fit_tps(const Correspondences& corr, double lambda) {
    if (corr.points0.size() != corr.pointsT.size()) {
        throw DomainError("correspondence lists differ in length");
    }
    if (!(lambda >= 0.0)) throw DomainError("TPS regularization must be non-negative");
    // repeated control points would make the kernel matrix singular; keep the first
    std::vector<Point2> p0, disp;
    for (std::size_t i = 0; i < corr.size(); ++i) {
        const Point2 p = corr.points0[i];
        if (std::find(p0.begin(), p0.end(), p) != p0.end()) continue;
        p0.push_back(p);
        disp.push_back(corr.pointsT[i] - p);
    }
    if (p0.size() < 3) throw DomainError("TPS needs at least 3 distinct control points");

    const std::size_t n = p0.size();
    // collinearity check on the centered second moments
    Point2 c{0.0, 0.0};
    for (const auto& p : p0) c = c + p;
    c = (1.0 / static_cast<double>(n)) * c;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& p : p0) {
        sxx += (p.x - c.x) * (p.x - c.x);
        sxy += (p.x - c.x) * (p.y - c.y);
        syy += (p.y - c.y) * (p.y - c.y);
    }
    const double hd = 0.5 * (sxx - syy);
    const double root = std::sqrt(hd * hd + sxy * sxy);
    const double lo = 0.5 * (sxx + syy) - root;
    const double hi = 0.5 * (sxx + syy) + root;
    if (!(lo > 1e-10 * hi)) return fit_affine_only(p0, disp, lambda);

    const Eigen::Index m = static_cast<Eigen::Index>(n) + 3;
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(m, m);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(m, 2);
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            L(ii, jj) = L(jj, ii) = tps_kernel(norm(p0[i] - p0[j]));
        }
        L(ii, ii) = lambda;
        // affine columns in centered coordinates for conditioning
        const Eigen::Index base = static_cast<Eigen::Index>(n);
        L(ii, base) = L(base, ii) = 1.0;
        L(ii, base + 1) = L(base + 1, ii) = p0[i].x - c.x;
        L(ii, base + 2) = L(base + 2, ii) = p0[i].y - c.y;
        rhs(ii, 0) = disp[i].x;
        rhs(ii, 1) = disp[i].y;
    }
    const Eigen::PartialPivLU<Eigen::MatrixXd> lu(L);
    const Eigen::MatrixXd sol = lu.solve(rhs);
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    if (!sol.allFinite() || (L * sol - rhs).cwiseAbs().maxCoeff() > 1e-9 * scale) {
        return fit_affine_only(p0, disp, lambda);
    }

    TpsModel model;
    model.control_points = p0;
    model.lambda = lambda;
    model.weights.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        model.weights[i] = {sol(static_cast<Eigen::Index>(i), 0),
                            sol(static_cast<Eigen::Index>(i), 1)};
    }
    // undo the centering: a0 + a1 (x - cx) + a2 (y - cy)
    Eigen::Matrix<double, 3, 2> coef;
    const Eigen::Index base = static_cast<Eigen::Index>(n);
    for (int comp = 0; comp < 2; ++comp) {
        const double a1 = sol(base + 1, comp);
        const double a2 = sol(base + 2, comp);
        coef(0, comp) = sol(base, comp) - a1 * c.x - a2 * c.y;
        coef(1, comp) = a1;
        coef(2, comp) = a2;
    }
    set_affine(model, coef);
    return model;
}

double side_condition_residual(const TpsModel& model) {
    double worst = 0.0;
    for (int comp = 0; comp < 2; ++comp) {
        double s = 0.0, sx = 0.0, sy = 0.0;
        for (std::size_t j = 0; j < model.weights.size(); ++j) {
            s += model.weights[j][comp];
            sx += model.weights[j][comp] * model.control_points[j].x;
            sy += model.weights[j][comp] * model.control_points[j].y;
        }
        worst = std::max({worst, std::abs(s), std::abs(sx), std::abs(sy)});
    }
    return worst;
}

DenseField evaluate_field(const TpsModel& model, int width, int height) {
    DenseField f(width, height);
    parallel_for(static_cast<std::size_t>(height), [&](std::size_t row) {
        const int y = static_cast<int>(row);
        for (int x = 0; x < width; ++x) {
            const Point2 u = model.displacement({static_cast<double>(x), static_cast<double>(y)});
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            f.u1[i] = u.x;
            f.u2[i] = u.y;
        }
    });
    return f;
}

StabilizedFrame stabilize_frame(const DualFrame& frame, const DenseField& field) {
    const int w = frame.width();
    const int h = frame.height();
    if (field.width != w || field.height != h || frame.nir.width != w || frame.nir.height != h) {
        throw DomainError("deformation field and frame dimensions differ");
    }
    StabilizedFrame out;
    out.visible = Image(w, h);
    out.nir = Image(w, h);
    out.valid_mask.assign(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            const double sx = x + field.u1[i];
            const double sy = y + field.u2[i];
            if (!frame.visible.contains(sx, sy)) continue;
            out.visible.data[i] = bilinear(frame.visible, sx, sy);
            out.nir.data[i] = bilinear(frame.nir, sx, sy);
            out.valid_mask[i] = 1;
        }
    }
    return out;
}

void stabilize_video(const FrameSource& video, const StabilizeConfig& config,
                     const StabilizedSink& sink) {
    if (video.size() == 0) throw DomainError("video has no frames");
    const DualFrame frame0 = video.frame(0);
    const auto kp0 = detect_keypoints(frame0.visible, config.keypoints);
    const Pyramid pyr0 = build_pyramid(frame0.visible, config.lk.levels);
    const int w = frame0.width();
    const int h = frame0.height();
    for (std::size_t t = 0; t < video.size(); ++t) {
        DualFrame frame = t == 0 ? frame0 : video.frame(t);
        frame.frame_index = t;
        if (frame.width() != w || frame.height() != h) {
            throw DomainError("frame " + std::to_string(t) + " differs in size from frame 0");
        }
        StabilizeInfo info;
        info.frame_index = t;
        if (t == 0) {
            StabilizedFrame s{frame.visible, frame.nir,
                              std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 1)};
            sink(frame, s, info);
            continue;
        }
        std::optional<Correspondences> corr;
        try {
            corr = match_keypoints(kp0, detect_keypoints(frame.visible, config.keypoints), w, h,
                                   config.matching);
            if (config.refine) {
                corr = refine_matches(pyr0, build_pyramid(frame.visible, config.lk.levels), *corr,
                                      2.0, config.lk);
            }
            if (config.outlier_neighbours > 0) {
                corr = reject_inconsistent(*corr, config.outlier_neighbours, config.outlier_residual_px);
            }
            if (corr->size() < 3) throw DomainError("insufficient matches");
        } catch (const DomainError&) {
            corr.reset();
        }
        if (!corr) {
            info.insufficient_matches = true;
            StabilizedFrame s{Image(w, h), Image(w, h),
                              std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, 0)};
            sink(frame, s, info);
            continue;
        }
        info.n_matches = corr->size();
        const double lambda = config.lambda ? *config.lambda : default_lambda(corr->points0);
        info.model = fit_tps(*corr, lambda);
        sink(frame, stabilize_frame(frame, evaluate_field(info.model, w, h)), info);
    }
}

void stabilize_to_directory(const FrameSource& video, const StabilizeConfig& config,
                            const std::filesystem::path& out_dir,
                            const std::optional<std::filesystem::path>& tps_dir) {
    namespace fs = std::filesystem;
    for (const char* sub : {"visible", "nir", "mask"}) fs::create_directories(out_dir / sub);
    if (tps_dir) fs::create_directories(*tps_dir);
    std::ofstream log(out_dir / "stabilize_log.csv");
    if (!log) throw FormatError("cannot write '" + (out_dir / "stabilize_log.csv").string() + "'");
    log << "frame_index,n_matches,insufficient_matches\n";
    int width = 0;
    int height = 0;
    stabilize_video(video, config, [&](const DualFrame&, const StabilizedFrame& s, const StabilizeInfo& info) {
        char name[32];
        std::snprintf(name, sizeof name, "frame_%05zu", info.frame_index);
        const std::string png = std::string(name) + ".png";
        width = s.nir.width;
        height = s.nir.height;
        write_png_gray16(out_dir / "visible" / png, s.visible);
        write_png_gray16(out_dir / "nir" / png, s.nir);
        write_png_mask(out_dir / "mask" / png, s.valid_mask, s.nir.width, s.nir.height);
        log << info.frame_index << ',' << info.n_matches << ',' << (info.insufficient_matches ? 1 : 0)
            << '\n';
        if (tps_dir) {
            Json j = tps_to_json(info.model);
            j["frame_index"] = info.frame_index;
            j["insufficient_matches"] = info.insufficient_matches;
            write_json_file(*tps_dir / (std::string(name) + ".json"), j);
        }
    });
    write_json_file(out_dir / "stabilized.json", Json{{"fps", json_number(video.fps())},
                                                      {"width", width},
                                                      {"height", height},
                                                      {"n_frames", video.size()}});
}

Json tps_to_json(const TpsModel& model) {
    Json cps = Json::array();
    Json ws = Json::array();
    for (std::size_t i = 0; i < model.control_points.size(); ++i) {
        cps.push_back({json_number(model.control_points[i].x),
                       json_number(model.control_points[i].y)});
        ws.push_back({json_number(model.weights[i][0]), json_number(model.weights[i][1])});
    }
    Json aff = Json::array();
    for (const auto& row : model.affine) {
        aff.push_back({json_number(row[0]), json_number(row[1]), json_number(row[2])});
    }
    return Json{{"control_points", cps},
                {"affine", aff},
                {"weights", ws},
                {"lambda", json_number(model.lambda)},
                {"affine_only", model.affine_only}};
}

TpsModel tps_from_json(const Json& j) {
    TpsModel m;
    try {
        reject_unknown_keys(j, {"control_points", "affine", "weights", "lambda", "affine_only",
                                "frame_index", "insufficient_matches"},
                            "TPS model");
        for (const auto& p : j.at("control_points")) {
            m.control_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        }
        for (const auto& w : j.at("weights")) {
            m.weights.push_back({w.at(0).get<double>(), w.at(1).get<double>()});
        }
        for (int r = 0; r < 2; ++r) {
            for (int c = 0; c < 3; ++c) m.affine[r][c] = j.at("affine").at(r).at(c).get<double>();
        }
        m.lambda = j.at("lambda").get<double>();
        m.affine_only = j.value("affine_only", false);
    } catch (const Json::exception& e) {
        throw FormatError(std::string("bad TPS model: ") + e.what());
    }
    if (m.weights.size() != m.control_points.size()) {
        throw FormatError("TPS model: weights and control points differ in length");
    }
    return m;
}

}  // namespace icgkit
