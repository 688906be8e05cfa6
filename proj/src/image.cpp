#include "icgkit/image.hpp"

#include <algorithm>
#include <cmath>

#include "icgkit/error.hpp"

namespace icgkit {

Image::Image(int w, int h, float fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {
    if (w < 0 || h < 0) throw DomainError("image dimensions must be non-negative");
}

float bilinear(const Image& img, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x));
    const int y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0;
    const double fy = y - y0;
    const int x1 = std::min(x0 + 1, img.width - 1);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double a = img.at(x0, y0);
    const double b = img.at(x1, y0);
    const double c = img.at(x0, y1);
    const double d = img.at(x1, y1);
    return static_cast<float>((1.0 - fy) * ((1.0 - fx) * a + fx * b) +
                              fy * ((1.0 - fx) * c + fx * d));
}

float bilinear_clamped(const Image& img, double x, double y) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
    return bilinear(img, x, y);
}

Image crop(const Image& img, int x0, int y0, int w, int h) {
    if (x0 < 0 || y0 < 0 || w < 0 || h < 0 || x0 + w > img.width || y0 + h > img.height) {
        throw DomainError("crop rectangle outside the image");
    }
    Image out(w, h);
    for (int y = 0; y < h; ++y) {
        std::copy_n(&img.data[static_cast<std::size_t>(y0 + y) * img.width + x0], w,
                    &out.data[static_cast<std::size_t>(y) * w]);
    }
    return out;
}

namespace {

int reflect(int i, int n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

}  // namespace

Image pyr_down(const Image& img) {
    static constexpr float k[5] = {1.0f / 16, 4.0f / 16, 6.0f / 16, 4.0f / 16, 1.0f / 16};
    const int ow = (img.width + 1) / 2;
    const int oh = (img.height + 1) / 2;
    // horizontal pass at even columns only
    Image tmp(ow, img.height);
    for (int y = 0; y < img.height; ++y) {
        const float* row = &img.data[static_cast<std::size_t>(y) * img.width];
        for (int x = 0; x < ow; ++x) {
            const int cx = 2 * x;
            float s = 0.0f;
            if (cx >= 2 && cx + 2 < img.width) {
                for (int i = 0; i < 5; ++i) s += k[i] * row[cx + i - 2];
            } else {
                for (int i = 0; i < 5; ++i) s += k[i] * row[reflect(cx + i - 2, img.width)];
            }
            tmp.at(x, y) = s;
        }
    }
    Image out(ow, oh);
    for (int y = 0; y < oh; ++y) {
        const int cy = 2 * y;
        int rows[5];
        for (int i = 0; i < 5; ++i) rows[i] = reflect(cy + i - 2, img.height);
        for (int x = 0; x < ow; ++x) {
            float s = 0.0f;
            for (int i = 0; i < 5; ++i) s += k[i] * tmp.at(x, rows[i]);
            out.at(x, y) = s;
        }
    }
    return out;
}

void gradients(const Image& img, Image& gx, Image& gy) {
    const int w = img.width;
    const int h = img.height;
    gx = Image(w, h);
    gy = Image(w, h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (w > 1) {
                if (x == 0) {
                    gx.at(x, y) = img.at(1, y) - img.at(0, y);
                } else if (x == w - 1) {
                    gx.at(x, y) = img.at(w - 1, y) - img.at(w - 2, y);
                } else {
                    gx.at(x, y) = 0.5f * (img.at(x + 1, y) - img.at(x - 1, y));
                }
            }
            if (h > 1) {
                if (y == 0) {
                    gy.at(x, y) = img.at(x, 1) - img.at(x, 0);
                } else if (y == h - 1) {
                    gy.at(x, y) = img.at(x, h - 1) - img.at(x, h - 2);
                } else {
                    gy.at(x, y) = 0.5f * (img.at(x, y + 1) - img.at(x, y - 1));
                }
            }
        }
    }
}

Image min_eigen_response(const Image& img) {
    const int w = img.width;
    const int h = img.height;
    Image out(w, h);
    if (w < 5 || h < 5) return out;
    Image gx, gy;
    gradients(img, gx, gy);
    const std::size_t n = static_cast<std::size_t>(w) * h;
    std::vector<double> xx(n), xy(n), yy(n);
    for (std::size_t i = 0; i < n; ++i) {
        xx[i] = static_cast<double>(gx.data[i]) * gx.data[i];
        xy[i] = static_cast<double>(gx.data[i]) * gy.data[i];
        yy[i] = static_cast<double>(gy.data[i]) * gy.data[i];
    }
    for (int y = 2; y < h - 2; ++y) {
        for (int x = 2; x < w - 2; ++x) {
            double a = 0.0, b = 0.0, c = 0.0;
            for (int dy = -1; dy <= 1; ++dy) {
                const std::size_t base = static_cast<std::size_t>(y + dy) * w + x;
                for (int dx = -1; dx <= 1; ++dx) {
                    a += xx[base + dx];
                    b += xy[base + dx];
                    c += yy[base + dx];
                }
            }
            const double half_diff = 0.5 * (a - c);
            const double lambda = 0.5 * (a + c) - std::sqrt(half_diff * half_diff + b * b);
            out.at(x, y) = static_cast<float>(std::max(0.0, lambda));
        }
    }
    return out;
}

std::vector<Corner> good_features(const Image& response, const Rect& region,
                                  const CornerConfig& config) {
    const int x_lo = std::max(1, static_cast<int>(std::ceil(region.x)));
    const int y_lo = std::max(1, static_cast<int>(std::ceil(region.y)));
    const int x_hi = std::min(response.width - 2,
                              static_cast<int>(std::ceil(region.x + region.w)) - 1);
    const int y_hi = std::min(response.height - 2,
                              static_cast<int>(std::ceil(region.y + region.h)) - 1);
    std::vector<Corner> cand;
    float strongest = 0.0f;
    for (int y = y_lo; y <= y_hi; ++y) {
        for (int x = x_lo; x <= x_hi; ++x) {
            const float r = response.at(x, y);
            if (!(r > 0.0f)) continue;
            strongest = std::max(strongest, r);
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    if (response.at(x + dx, y + dy) > r) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) cand.push_back({{static_cast<double>(x), static_cast<double>(y)}, r});
        }
    }
    const double threshold = std::max(config.quality * strongest, config.min_response);
    std::erase_if(cand, [&](const Corner& c) { return c.response < threshold; });
    std::stable_sort(cand.begin(), cand.end(),
                     [](const Corner& a, const Corner& b) { return a.response > b.response; });
    std::vector<Corner> out;
    const double min_d2 = config.min_distance * config.min_distance;
    for (const Corner& c : cand) {
        if (static_cast<int>(out.size()) >= config.max_corners) break;
        bool far = true;
        for (const Corner& o : out) {
            const double dx = o.pos.x - c.pos.x;
            const double dy = o.pos.y - c.pos.y;
            if (dx * dx + dy * dy < min_d2) {
                far = false;
                break;
            }
        }
        if (far) out.push_back(c);
    }
    return out;
}

}  // namespace icgkit
