#include "icgkit/flow.hpp"

#include <cmath>

#include "icgkit/error.hpp"

namespace icgkit {

Pyramid build_pyramid(const Image& img, int n_levels) {
    if (n_levels < 1) throw DomainError("pyramid needs at least one level");
    Pyramid p;
    p.levels.push_back(img);
    for (int l = 1; l < n_levels; ++l) p.levels.push_back(pyr_down(p.levels.back()));
    p.gx.resize(p.levels.size());
    p.gy.resize(p.levels.size());
    for (std::size_t l = 0; l < p.levels.size(); ++l) gradients(p.levels[l], p.gx[l], p.gy[l]);
    return p;
}

std::optional<Point2> lk_track(const Pyramid& from, const Pyramid& to, Point2 p, Point2 guess,
                               const LkConfig& config) {
    const int n_levels = std::min<int>({config.levels, static_cast<int>(from.levels.size()),
                                        static_cast<int>(to.levels.size())});
    const int half = config.window / 2;
    const std::size_t n = static_cast<std::size_t>(config.window) * config.window;
    std::vector<float> tmpl(n), ix(n), iy(n);

    const double top = std::ldexp(1.0, n_levels - 1);
    Point2 g{guess.x / top, guess.y / top};
    for (int level = n_levels - 1; level >= 0; --level) {
        const double scale = std::ldexp(1.0, -level);
        const Image& a = from.levels[level];
        const Image& b = to.levels[level];
        const Point2 c{p.x * scale, p.y * scale};

        double gxx = 0.0, gxy = 0.0, gyy = 0.0;
        std::size_t i = 0;
        for (int dy = -half; dy <= half; ++dy) {
            for (int dx = -half; dx <= half; ++dx, ++i) {
                const double x = c.x + dx;
                const double y = c.y + dy;
                tmpl[i] = bilinear_clamped(a, x, y);
                ix[i] = bilinear_clamped(from.gx[level], x, y);
                iy[i] = bilinear_clamped(from.gy[level], x, y);
                gxx += static_cast<double>(ix[i]) * ix[i];
                gxy += static_cast<double>(ix[i]) * iy[i];
                gyy += static_cast<double>(iy[i]) * iy[i];
            }
        }
        const double hd = 0.5 * (gxx - gyy);
        const double min_eig = 0.5 * (gxx + gyy) - std::sqrt(hd * hd + gxy * gxy);
        if (!(min_eig / static_cast<double>(n) >= config.min_eigen)) return std::nullopt;
        const double det = gxx * gyy - gxy * gxy;

        Point2 nu{0.0, 0.0};
        for (int it = 0; it < config.max_iterations; ++it) {
            const double ox = c.x + g.x + nu.x;
            const double oy = c.y + g.y + nu.y;
            if (ox < -half || oy < -half || ox > b.width - 1 + half || oy > b.height - 1 + half) {
                return std::nullopt;
            }
            double bx = 0.0, by = 0.0;
            i = 0;
            for (int dy = -half; dy <= half; ++dy) {
                for (int dx = -half; dx <= half; ++dx, ++i) {
                    const double diff = static_cast<double>(tmpl[i]) -
                                        bilinear_clamped(b, ox + dx, oy + dy);
                    bx += diff * ix[i];
                    by += diff * iy[i];
                }
            }
            const Point2 eta{(gyy * bx - gxy * by) / det, (gxx * by - gxy * bx) / det};
            nu = nu + eta;
            if (std::hypot(eta.x, eta.y) < config.epsilon) break;
        }
        g = g + nu;
        if (level > 0) g = 2.0 * g;
    }
    const Point2 out = p + g;
    if (!std::isfinite(out.x) || !std::isfinite(out.y)) return std::nullopt;
    const Image& base = to.levels[0];
    if (out.x < 0 || out.y < 0 || out.x > base.width - 1 || out.y > base.height - 1) {
        return std::nullopt;
    }
    return out;
}

}  // namespace icgkit
