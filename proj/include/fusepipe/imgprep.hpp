#pragma once

// MRI slice preprocessing: threshold + closing, largest-component extreme
// points, crop, Catmull-Rom resize and the quarter-turn/flip augmentation
// orbit.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <queue>
#include <string>
#include <vector>

#include "fusepipe/error.hpp"

namespace fusepipe::imgprep {

class GrayImage {
public:
    GrayImage() = default;
    GrayImage(int width, int height, std::uint8_t fill = 0)
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(checked(width, height)), fill) {}
    GrayImage(int width, int height, std::vector<std::uint8_t> data)
        : width_(width), height_(height), data_(std::move(data)) {
        require(data_.size() == static_cast<std::size_t>(checked(width, height)),
                ErrorCode::ShapeMismatch, "pixel buffer length must equal width*height");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool empty() const noexcept { return data_.empty(); }

    std::uint8_t at(int x, int y) const { return data_[index(x, y)]; }
    std::uint8_t& at(int x, int y) { return data_[index(x, y)]; }

    const std::vector<std::uint8_t>& data() const noexcept { return data_; }

    friend bool operator==(const GrayImage&, const GrayImage&) = default;

private:
    static long checked(int width, int height) {
        require(width >= 1 && height >= 1, ErrorCode::ShapeMismatch, "image dimensions must be >= 1");
        return static_cast<long>(width) * height;
    }
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int width, int height, bool fill = false)
        : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill) {}

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    bool inside(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool value) { bits_[static_cast<std::size_t>(y) * width_ + x] = value ? 1 : 0; }

    std::size_t count() const {
        return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
    }

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct Point {
    int x = 0;
    int y = 0;
    friend bool operator==(const Point&, const Point&) = default;
};

struct ExtremePoints {
    Point top;
    Point bottom;
    Point left;
    Point right;
    friend bool operator==(const ExtremePoints&, const ExtremePoints&) = default;
};

struct CleanParams {
    int threshold = 45;
    int blur_radius = 2; // Gaussian sigma is radius / 2
    int morph_iters = 2;
};

namespace detail {

inline std::vector<double> gaussian_kernel(int radius) {
    const double sigma = radius / 2.0;
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        const double w = std::exp(-(i * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + radius)] = w;
        total += w;
    }
    for (double& w : k) w /= total;
    return k;
}

inline std::vector<double> blur(const GrayImage& img, int radius) {
    const int w = img.width();
    const int h = img.height();
    std::vector<double> out(static_cast<std::size_t>(w) * h);
    if (radius <= 0) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out[static_cast<std::size_t>(y) * w + x] = img.at(x, y);
        return out;
    }
    const auto kernel = gaussian_kernel(radius);
    std::vector<double> tmp(out.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int sx = std::clamp(x + k, 0, w - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] * img.at(sx, y);
            }
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int sy = std::clamp(y + k, 0, h - 1);
                acc += kernel[static_cast<std::size_t>(k + radius)] * tmp[static_cast<std::size_t>(sy) * w + x];
            }
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    return out;
}

// Out-of-image neighbours count as clear for dilation and as set for erosion,
// so neither operation invents or removes foreground at the border.
inline BinaryMask morph(const BinaryMask& in, bool dilate) {
    BinaryMask out(in.width(), in.height());
    for (int y = 0; y < in.height(); ++y)
        for (int x = 0; x < in.width(); ++x) {
            bool value = !dilate;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const int nx = x + dx;
                    const int ny = y + dy;
                    if (!in.inside(nx, ny)) continue;
                    if (dilate) value = value || in.at(nx, ny);
                    else value = value && in.at(nx, ny);
                }
            out.set(x, y, value);
        }
    return out;
}

inline double catmull_rom(double d) {
    constexpr double a = -0.5;
    d = std::abs(d);
    if (d < 1.0) return ((a + 2.0) * d - (a + 3.0)) * d * d + 1.0;
    if (d < 2.0) return ((a * d - 5.0 * a) * d + 8.0 * a) * d - 4.0 * a;
    return 0.0;
}

} // namespace detail

inline BinaryMask dilate(const BinaryMask& mask) { return detail::morph(mask, true); }
inline BinaryMask erode(const BinaryMask& mask) { return detail::morph(mask, false); }

inline BinaryMask binarize_and_clean(const GrayImage& img, int threshold, int blur_radius, int morph_iters) {
    require(!img.empty(), ErrorCode::Empty, "binarize_and_clean needs a non-empty image");
    require(threshold >= 0 && threshold <= 255, ErrorCode::ParamOutOfRange, "threshold must be in [0,255]");
    const auto blurred = detail::blur(img, std::max(0, blur_radius));
    BinaryMask mask(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x)
            mask.set(x, y, blurred[static_cast<std::size_t>(y) * img.width() + x] > threshold);
    for (int i = 0; i < morph_iters; ++i) mask = dilate(mask);
    for (int i = 0; i < morph_iters; ++i) mask = erode(mask);
    return mask;
}

inline BinaryMask binarize_and_clean(const GrayImage& img, const CleanParams& params = {}) {
    return binarize_and_clean(img, params.threshold, params.blur_radius, params.morph_iters);
}

/// Extreme points of the largest 8-connected foreground component. Equal-size
/// components resolve to the one met first in row-major scan order.
inline ExtremePoints find_extreme_points(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
    std::vector<std::size_t> sizes;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y) || label[static_cast<std::size_t>(y) * w + x] >= 0) continue;
            const int id = static_cast<int>(sizes.size());
            std::size_t size = 0;
            std::queue<Point> frontier;
            frontier.push({x, y});
            label[static_cast<std::size_t>(y) * w + x] = id;
            while (!frontier.empty()) {
                const Point p = frontier.front();
                frontier.pop();
                ++size;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = p.x + dx;
                        const int ny = p.y + dy;
                        if (!mask.inside(nx, ny) || !mask.at(nx, ny)) continue;
                        int& l = label[static_cast<std::size_t>(ny) * w + nx];
                        if (l >= 0) continue;
                        l = id;
                        frontier.push({nx, ny});
                    }
            }
            sizes.push_back(size);
        }
    require(!sizes.empty(), ErrorCode::EmptyMask, "no foreground pixels; segmentation failed");
    const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());

    // Pixel ties prefer smaller x, then smaller y.
    auto before = [](Point a, Point b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
    ExtremePoints ep;
    bool first = true;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (label[static_cast<std::size_t>(y) * w + x] != best) continue;
            const Point p{x, y};
            if (first) {
                ep = {p, p, p, p};
                first = false;
                continue;
            }
            if (p.y < ep.top.y || (p.y == ep.top.y && before(p, ep.top))) ep.top = p;
            if (p.y > ep.bottom.y || (p.y == ep.bottom.y && before(p, ep.bottom))) ep.bottom = p;
            if (p.x < ep.left.x || (p.x == ep.left.x && before(p, ep.left))) ep.left = p;
            if (p.x > ep.right.x || (p.x == ep.right.x && before(p, ep.right))) ep.right = p;
        }
    return ep;
}

inline GrayImage crop_to_extremes(const GrayImage& img, const ExtremePoints& ep) {
    const int x0 = ep.left.x;
    const int x1 = ep.right.x;
    const int y0 = ep.top.y;
    const int y1 = ep.bottom.y;
    require(x0 >= 0 && y0 >= 0 && x1 < img.width() && y1 < img.height() && x0 <= x1 && y0 <= y1,
            ErrorCode::ShapeMismatch, "extreme points outside the image");
    GrayImage out(x1 - x0 + 1, y1 - y0 + 1);
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) out.at(x - x0, y - y0) = img.at(x, y);
    return out;
}

/// Separable Catmull-Rom (a = -0.5) resampling with pixel-centre alignment and
/// replicated edges.
inline GrayImage resize_bicubic(const GrayImage& img, int target_w, int target_h) {
    require(target_w >= 1 && target_h >= 1, ErrorCode::ParamOutOfRange, "resize target must be >= 1");
    const int w = img.width();
    const int h = img.height();

    struct Tap {
        int base;
        double weight[4];
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> t(static_cast<std::size_t>(out));
        const double scale = static_cast<double>(in) / out;
        for (int i = 0; i < out; ++i) {
            const double src = (i + 0.5) * scale - 0.5;
            const int base = static_cast<int>(std::floor(src));
            const double frac = src - base;
            t[static_cast<std::size_t>(i)].base = base;
            for (int k = 0; k < 4; ++k) t[static_cast<std::size_t>(i)].weight[k] = detail::catmull_rom(frac - (k - 1));
        }
        return t;
    };
    const auto xt = taps(w, target_w);
    const auto yt = taps(h, target_h);

    std::vector<double> rows(static_cast<std::size_t>(h) * target_w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < target_w; ++x) {
            const Tap& t = xt[static_cast<std::size_t>(x)];
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += t.weight[k] * img.at(std::clamp(t.base + k - 1, 0, w - 1), y);
            rows[static_cast<std::size_t>(y) * target_w + x] = acc;
        }
    GrayImage out(target_w, target_h);
    for (int y = 0; y < target_h; ++y) {
        const Tap& t = yt[static_cast<std::size_t>(y)];
        for (int x = 0; x < target_w; ++x) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k)
                acc += t.weight[k] * rows[static_cast<std::size_t>(std::clamp(t.base + k - 1, 0, h - 1)) * target_w + x];
            out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::lround(acc), 0L, 255L));
        }
    }
    return out;
}

/// Counter-clockwise quarter turn.
inline GrayImage rotate90(const GrayImage& img) {
    const int w = img.width();
    const int h = img.height();
    GrayImage out(h, w);
    for (int y = 0; y < w; ++y)
        for (int x = 0; x < h; ++x) out.at(x, y) = img.at(w - 1 - y, x);
    return out;
}

inline GrayImage hflip(const GrayImage& img) {
    GrayImage out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(x, y) = img.at(img.width() - 1 - x, y);
    return out;
}

struct AugmentPolicy {
    std::vector<int> rotations{0, 90, 180, 270}; // degrees, multiples of 90
    bool hflip = true;
};

struct AugmentedImage {
    GrayImage image;
    std::size_t source = 0;
    int rotation = 0;
    bool flipped = false;

    /// "r0" is the untouched original; flipped variants get an "f" suffix.
    std::string label() const { return "r" + std::to_string(rotation) + (flipped ? "f" : ""); }
};

/// Deterministic orbit: input order, then rotation ascending, then unflipped
/// before flipped.
inline std::vector<AugmentedImage> augment(const std::vector<GrayImage>& images, const AugmentPolicy& policy = {}) {
    require(!policy.rotations.empty(), ErrorCode::ParamOutOfRange, "augment policy needs at least one rotation");
    std::vector<int> rotations = policy.rotations;
    for (int r : rotations)
        require(r == 0 || r == 90 || r == 180 || r == 270, ErrorCode::ParamOutOfRange,
                "rotation must be one of 0, 90, 180, 270");
    std::sort(rotations.begin(), rotations.end());
    rotations.erase(std::unique(rotations.begin(), rotations.end()), rotations.end());

    std::vector<AugmentedImage> out;
    out.reserve(images.size() * rotations.size() * (policy.hflip ? 2 : 1));
    for (std::size_t i = 0; i < images.size(); ++i) {
        GrayImage turned = images[i];
        int current = 0;
        for (int r : rotations) {
            while (current < r) {
                turned = rotate90(turned);
                current += 90;
            }
            out.push_back({turned, i, r, false});
            if (policy.hflip) out.push_back({hflip(turned), i, r, true});
        }
    }
    return out;
}

/// Full crop recipe: clean mask, extremes, crop, resize to a square input.
inline GrayImage crop_and_resize(const GrayImage& img, int target, const CleanParams& params = {}) {
    const auto mask = binarize_and_clean(img, params);
    const auto ep = find_extreme_points(mask);
    return resize_bicubic(crop_to_extremes(img, ep), target, target);
}

} // namespace fusepipe::imgprep
