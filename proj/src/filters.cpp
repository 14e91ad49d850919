#include "anteriseg/filters.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

#include "anteriseg/error.hpp"

namespace anteriseg {

BitMask::BitMask(int width, int height, bool fill) : width_(width), height_(height) {
    require(width > 0 && height > 0, "mask dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
}

std::size_t BitMask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

bool BitMask::subset_of(const BitMask& other) const {
    if (width_ != other.width_ || height_ != other.height_) return false;
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] && !other.bits_[i]) return false;
    return true;
}

namespace filters {

namespace {

using Plane = std::vector<double>;

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

Plane blur_plane(const Plane& src, int w, int h, double sigma) {
    const auto kernel = gaussian_kernel(sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    Plane tmp(src.size()), out(src.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * src[static_cast<std::size_t>(y) * w + std::clamp(x + k, 0, w - 1)];
            tmp[static_cast<std::size_t>(y) * w + x] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0;
            for (int k = -radius; k <= radius; ++k)
                acc += kernel[k + radius] * tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
            out[static_cast<std::size_t>(y) * w + x] = acc;
        }
    return out;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
    require(sigma > 0 && std::isfinite(sigma), "gaussian sigma must be positive");
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double sum = 0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
        sum += k[i + radius];
    }
    for (double& v : k) v /= sum;
    return k;
}

ImageGray8 gaussian_blur(const ImageGray8& img, double sigma) {
    const auto src = img.bytes();
    Plane plane(src.begin(), src.end());
    const Plane out = blur_plane(plane, img.width(), img.height(), sigma);
    ImageGray8 result(img.width(), img.height());
    auto dst = result.bytes();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = to_u8(out[i]);
    return result;
}

ImageRGB8 gaussian_blur(const ImageRGB8& img, double sigma) {
    const std::size_t n = img.pixel_count();
    const auto src = img.bytes();
    ImageRGB8 result = img;
    auto dst = result.bytes();
    for (int c = 0; c < 3; ++c) {
        Plane plane(n);
        for (std::size_t i = 0; i < n; ++i) plane[i] = src[3 * i + c];
        const Plane out = blur_plane(plane, img.width(), img.height(), sigma);
        for (std::size_t i = 0; i < n; ++i) dst[3 * i + c] = to_u8(out[i]);
    }
    return result;
}

// ---------------------------------------------------------------------------
// CLAHE

std::vector<std::uint8_t> clahe_tile_lut(std::span<const std::uint32_t, 256> histogram,
                                         std::uint32_t tile_pixels, double clip_limit) {
    std::vector<std::uint8_t> lut(256);
    const auto occupied = std::count_if(histogram.begin(), histogram.end(), [](auto c) { return c > 0; });
    if (occupied <= 1) {
        // No contrast to redistribute: a single-level tile keeps its level.
        for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i);
        return lut;
    }
    const double raw_limit = clip_limit * tile_pixels / 256.0;
    const std::uint32_t limit =
        raw_limit >= tile_pixels ? tile_pixels : std::max<std::uint32_t>(1, static_cast<std::uint32_t>(raw_limit));
    std::array<std::uint32_t, 256> hist{};
    std::uint32_t excess = 0;
    for (int i = 0; i < 256; ++i) {
        if (histogram[i] > limit) {
            excess += histogram[i] - limit;
            hist[i] = limit;
        } else {
            hist[i] = histogram[i];
        }
    }
    // Even share per bin, then the residual one count at a time at a fixed
    // stride from bin 0.
    const std::uint32_t batch = excess / 256;
    std::uint32_t residual = excess - batch * 256;
    for (auto& c : hist) c += batch;
    if (residual > 0) {
        const std::uint32_t step = std::max<std::uint32_t>(256 / residual, 1);
        for (std::uint32_t i = 0; i < 256 && residual > 0; i += step, --residual) ++hist[i];
    }
    std::uint64_t cdf = 0;
    const double scale = 255.0 / tile_pixels;
    for (int i = 0; i < 256; ++i) {
        cdf += hist[i];
        lut[i] = to_u8(static_cast<double>(cdf) * scale);
    }
    return lut;
}

namespace {

/// Tile LUTs over an 8-bit plane plus bilinear blending between tile centres.
class ClaheMapper {
public:
    ClaheMapper(std::span<const std::uint8_t> plane, int w, int h, const ClaheParams& p)
        : w_(w), h_(h), tx_(p.tiles_x), ty_(p.tiles_y) {
        require(p.clip_limit >= 1.0, "CLAHE clip_limit must be >= 1");
        require(p.tiles_x >= 1 && p.tiles_y >= 1, "CLAHE tile counts must be >= 1");
        require(w >= p.tiles_x && h >= p.tiles_y, "image smaller than CLAHE tile grid");
        for (int t = 0; t <= tx_; ++t) xb_.push_back(static_cast<int>(static_cast<long>(t) * w / tx_));
        for (int t = 0; t <= ty_; ++t) yb_.push_back(static_cast<int>(static_cast<long>(t) * h / ty_));
        luts_.resize(static_cast<std::size_t>(tx_) * ty_);
        for (int ty = 0; ty < ty_; ++ty)
            for (int tx = 0; tx < tx_; ++tx) {
                std::array<std::uint32_t, 256> hist{};
                for (int y = yb_[ty]; y < yb_[ty + 1]; ++y)
                    for (int x = xb_[tx]; x < xb_[tx + 1]; ++x) ++hist[plane[static_cast<std::size_t>(y) * w + x]];
                const auto area = static_cast<std::uint32_t>((xb_[tx + 1] - xb_[tx]) * (yb_[ty + 1] - yb_[ty]));
                luts_[static_cast<std::size_t>(ty) * tx_ + tx] =
                    clahe_tile_lut(std::span<const std::uint32_t, 256>(hist), area, p.clip_limit);
            }
    }

    /// Blended transfer value (0..255, fractional) for level v at (x, y).
    double map(int x, int y, std::uint8_t v) const {
        const auto [t0x, t1x, fx] = locate(x, xb_, tx_);
        const auto [t0y, t1y, fy] = locate(y, yb_, ty_);
        auto lut = [&](int tx, int ty) { return static_cast<double>(luts_[static_cast<std::size_t>(ty) * tx_ + tx][v]); };
        const double top = (1 - fx) * lut(t0x, t0y) + fx * lut(t1x, t0y);
        const double bot = (1 - fx) * lut(t0x, t1y) + fx * lut(t1x, t1y);
        return (1 - fy) * top + fy * bot;
    }

private:
    static std::tuple<int, int, double> locate(int pos, const std::vector<int>& bounds, int tiles) {
        auto centre = [&](int t) { return 0.5 * (bounds[t] + bounds[t + 1]) - 0.5; };
        if (pos <= centre(0)) return {0, 0, 0.0};
        if (pos >= centre(tiles - 1)) return {tiles - 1, tiles - 1, 0.0};
        int t = 0;
        while (t + 1 < tiles && centre(t + 1) <= pos) ++t;
        const double f = (pos - centre(t)) / (centre(t + 1) - centre(t));
        return {t, t + 1, f};
    }

    int w_, h_, tx_, ty_;
    std::vector<int> xb_, yb_;
    std::vector<std::vector<std::uint8_t>> luts_;
};

}  // namespace

ImageGray8 clahe_gray(const ImageGray8& img, const ClaheParams& p) {
    const ClaheMapper mapper(img.bytes(), img.width(), img.height(), p);
    ImageGray8 out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.at(x, y) = to_u8(mapper.map(x, y, img.at(x, y)));
    return out;
}

ImageRGB8 clahe_l_channel(const ImageRGB8& img, const ClaheParams& p) {
    const int w = img.width(), h = img.height();
    std::vector<Lab> lab(img.pixel_count());
    std::vector<std::uint8_t> levels(img.pixel_count());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            lab[i] = img::rgb_to_lab(img.at(x, y));
            levels[i] = to_u8(lab[i].l * 2.55);
        }
    const ClaheMapper mapper(levels, w, h, p);
    ImageRGB8 out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            // Shift L by the transfer offset so an identity mapping leaves L exact.
            const double shift = (mapper.map(x, y, levels[i]) - levels[i]) / 2.55;
            Lab v = lab[i];
            v.l = std::clamp(v.l + shift, 0.0, 100.0);
            out.set(x, y, shift == 0.0 ? img.at(x, y) : img::lab_to_rgb(v));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Canny
//
// The smoothing and Sobel stages run in exact integer arithmetic (kernel
// weights scaled to sum to 2^16), so adding a constant to the input shifts
// the smoothed plane exactly and leaves every gradient bit-identical.

namespace {

std::vector<std::int64_t> integer_kernel(double sigma) {
    const auto k = gaussian_kernel(sigma);
    constexpr std::int64_t kOne = 1 << 16;
    std::vector<std::int64_t> out(k.size());
    const std::size_t mid = k.size() / 2;
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        if (i == mid) continue;
        out[i] = std::llround(k[i] * kOne);
        sum += out[i];
    }
    out[mid] = kOne - sum;
    return out;
}

}  // namespace

BitMask canny(const ImageGray8& img, const CannyParams& p) {
    require(p.low_threshold > 0 && p.low_threshold <= p.high_threshold,
            "Canny thresholds must satisfy 0 < low <= high");
    const int w = img.width(), h = img.height();
    const auto kernel = integer_kernel(p.gaussian_sigma);
    const int radius = static_cast<int>(kernel.size() / 2);
    auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };

    std::vector<std::int64_t> tmp(img.pixel_count()), smooth(img.pixel_count());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::int64_t acc = 0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * img.at_clamped(x + k, y);
            tmp[idx(x, y)] = acc;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::int64_t acc = 0;
            for (int k = -radius; k <= radius; ++k) acc += kernel[k + radius] * tmp[idx(x, std::clamp(y + k, 0, h - 1))];
            smooth[idx(x, y)] = acc;
        }
    auto s = [&](int x, int y) { return smooth[idx(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1))]; };

    using Wide = __int128;
    std::vector<std::int64_t> gx(img.pixel_count()), gy(img.pixel_count());
    std::vector<Wide> mag2(img.pixel_count());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::int64_t dx = (s(x + 1, y - 1) + 2 * s(x + 1, y) + s(x + 1, y + 1)) -
                                    (s(x - 1, y - 1) + 2 * s(x - 1, y) + s(x - 1, y + 1));
            const std::int64_t dy = (s(x - 1, y + 1) + 2 * s(x, y + 1) + s(x + 1, y + 1)) -
                                    (s(x - 1, y - 1) + 2 * s(x, y - 1) + s(x + 1, y - 1));
            gx[idx(x, y)] = dx;
            gy[idx(x, y)] = dy;
            mag2[idx(x, y)] = Wide(dx) * dx + Wide(dy) * dy;
        }
    auto m = [&](int x, int y) -> Wide {
        if (x < 0 || y < 0 || x >= w || y >= h) return 0;
        return mag2[idx(x, y)];
    };

    // Thresholds are in raw Sobel units of the 8-bit image; the smoothed
    // plane carries a 2^32 scale.
    constexpr long double kScale = 4294967296.0L;
    const long double low2 = std::pow(static_cast<long double>(p.low_threshold) * kScale, 2.0L);
    const long double high2 = std::pow(static_cast<long double>(p.high_threshold) * kScale, 2.0L);

    // 0 = suppressed, 1 = weak, 2 = strong
    std::vector<std::uint8_t> cls(img.pixel_count(), 0);
    constexpr std::int64_t kTan22 = 41421356;   // tan(22.5 deg) * 1e8
    constexpr std::int64_t kTan67 = 241421356;  // tan(67.5 deg) * 1e8
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const Wide here = mag2[idx(x, y)];
            if (here == 0 || static_cast<long double>(here) < low2) continue;
            const std::int64_t dx = gx[idx(x, y)], dy = gy[idx(x, y)];
            const Wide ax = dx < 0 ? -Wide(dx) : Wide(dx);
            const Wide ay = dy < 0 ? -Wide(dy) : Wide(dy);
            Wide before, after;
            if (ay * 100000000 <= ax * kTan22) {
                before = m(x - 1, y);
                after = m(x + 1, y);
            } else if (ay * 100000000 >= ax * kTan67) {
                before = m(x, y - 1);
                after = m(x, y + 1);
            } else if ((dx > 0) == (dy > 0)) {
                before = m(x - 1, y - 1);
                after = m(x + 1, y + 1);
            } else {
                before = m(x + 1, y - 1);
                after = m(x - 1, y + 1);
            }
            // Strict on one side so a two-pixel plateau keeps a single pixel.
            if (here > before && here >= after)
                cls[idx(x, y)] = static_cast<long double>(here) >= high2 ? 2 : 1;
        }

    BitMask edges(w, h);
    std::deque<std::pair<int, int>> queue;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (cls[idx(x, y)] == 2) {
                edges.set(x, y);
                queue.emplace_back(x, y);
            }
    while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        for (int oy = -1; oy <= 1; ++oy)
            for (int ox = -1; ox <= 1; ++ox) {
                const int nx = x + ox, ny = y + oy;
                if (nx < 0 || ny < 0 || nx >= w || ny >= h || edges.test(nx, ny)) continue;
                if (cls[idx(nx, ny)] == 1) {
                    edges.set(nx, ny);
                    queue.emplace_back(nx, ny);
                }
            }
    }
    return edges;
}

// ---------------------------------------------------------------------------
// Morphology

BitMask dilate(const BitMask& mask, int k) {
    require(k >= 1 && k % 2 == 1, "dilation kernel size must be odd and >= 1");
    const int w = mask.width(), h = mask.height(), r = k / 2;
    BitMask rows(w, h), out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int d = -r; d <= r; ++d) {
                const int nx = x + d;
                if (nx >= 0 && nx < w && mask.test(nx, y)) {
                    rows.set(x, y);
                    break;
                }
            }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int d = -r; d <= r; ++d) {
                const int ny = y + d;
                if (ny >= 0 && ny < h && rows.test(x, ny)) {
                    out.set(x, y);
                    break;
                }
            }
    return out;
}

// ---------------------------------------------------------------------------
// Telea inpainting

namespace {

enum class Flag : std::uint8_t { Known, Band, Inside };

constexpr double kFar = 1.0e6;

struct HeapEntry {
    double t;
    std::uint64_t seq;
    std::size_t index;
    bool operator>(const HeapEntry& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
};
using MinHeap = std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>>;

constexpr std::array<std::pair<int, int>, 4> kNeighbours{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

/// Eikonal update from two orthogonal neighbours (first-order upwind).
double solve_pair(const std::vector<Flag>& flags, const std::vector<double>& t, int w, int h,
                  int x1, int y1, int x2, int y2) {
    auto avail = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && flags[static_cast<std::size_t>(y) * w + x] != Flag::Inside;
    };
    auto tv = [&](int x, int y) { return t[static_cast<std::size_t>(y) * w + x]; };
    const bool a1 = avail(x1, y1), a2 = avail(x2, y2);
    if (a1 && a2) {
        const double t1 = tv(x1, y1), t2 = tv(x2, y2);
        const double diff = t1 - t2;
        if (std::fabs(diff) >= 1.0) return 1.0 + std::min(t1, t2);
        return 0.5 * (t1 + t2 + std::sqrt(2.0 - diff * diff));
    }
    if (a1) return 1.0 + tv(x1, y1);
    if (a2) return 1.0 + tv(x2, y2);
    return kFar;
}

double solve_eikonal(const std::vector<Flag>& flags, const std::vector<double>& t, int w, int h, int x, int y) {
    return std::min({solve_pair(flags, t, w, h, x - 1, y, x, y - 1), solve_pair(flags, t, w, h, x + 1, y, x, y - 1),
                     solve_pair(flags, t, w, h, x - 1, y, x, y + 1), solve_pair(flags, t, w, h, x + 1, y, x, y + 1)});
}

/// Marches from the band into every Inside pixel, calling visit(index) on
/// each newly reached pixel after its arrival time is set. Stops expanding
/// once arrival exceeds max_t.
template <class Visit>
void march(std::vector<Flag>& flags, std::vector<double>& t, int w, int h, double max_t, Visit&& visit) {
    MinHeap heap;
    std::uint64_t seq = 0;
    for (std::size_t i = 0; i < flags.size(); ++i)
        if (flags[i] == Flag::Band) heap.push({t[i], seq++, i});
    while (!heap.empty()) {
        const HeapEntry top = heap.top();
        heap.pop();
        if (flags[top.index] != Flag::Band) continue;
        flags[top.index] = Flag::Known;
        const int x = static_cast<int>(top.index % w), y = static_cast<int>(top.index / w);
        for (const auto& [ox, oy] : kNeighbours) {
            const int nx = x + ox, ny = y + oy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const std::size_t ni = static_cast<std::size_t>(ny) * w + nx;
            if (flags[ni] != Flag::Inside) continue;
            const double arrival = solve_eikonal(flags, t, w, h, nx, ny);
            if (arrival > max_t) continue;
            t[ni] = arrival;
            visit(ni);
            flags[ni] = Flag::Band;
            heap.push({arrival, seq++, ni});
        }
    }
}

}  // namespace

ImageRGB8 inpaint_telea(const ImageRGB8& img, const BitMask& mask, int radius) {
    require(mask.width() == img.width() && mask.height() == img.height(), "mask dimensions must match image");
    require(radius >= 1, "inpaint radius must be >= 1");
    if (mask.none()) return img;
    require(!mask.all(), "mask covers entire image");

    const int w = img.width(), h = img.height();
    const std::size_t n = img.pixel_count();
    auto in_hole = [&](int x, int y) { return mask.test(x, y); };
    auto touches_hole = [&](int x, int y) {
        for (const auto& [ox, oy] : kNeighbours) {
            const int nx = x + ox, ny = y + oy;
            if (nx >= 0 && ny >= 0 && nx < w && ny < h && in_hole(nx, ny)) return true;
        }
        return false;
    };

    // Signed distance outside the hole (negative), within a ring around it.
    std::vector<double> t(n, 0.0);
    {
        std::vector<Flag> out_flags(n, Flag::Inside);
        std::vector<double> out_t(n, kFar);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                if (in_hole(x, y)) {
                    out_flags[i] = Flag::Known;
                    out_t[i] = 0.0;
                } else if (touches_hole(x, y)) {
                    out_flags[i] = Flag::Band;
                    out_t[i] = 0.0;
                }
            }
        march(out_flags, out_t, w, h, 2.0 * radius + 2.0, [](std::size_t) {});
        for (std::size_t i = 0; i < n; ++i)
            if (!mask.test(i)) t[i] = out_t[i] >= kFar ? -(2.0 * radius + 2.0) : -out_t[i];
    }

    std::vector<Flag> flags(n, Flag::Known);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (in_hole(x, y)) {
                flags[i] = Flag::Inside;
                t[i] = kFar;
            } else if (touches_hole(x, y)) {
                flags[i] = Flag::Band;
                t[i] = 0.0;
            }
        }

    ImageRGB8 out = img;
    auto bytes = out.bytes();
    auto avail = [&](int x, int y) {
        return x >= 0 && y >= 0 && x < w && y < h && flags[static_cast<std::size_t>(y) * w + x] != Flag::Inside;
    };
    auto value = [&](int x, int y, int c) { return static_cast<double>(bytes[(static_cast<std::size_t>(y) * w + x) * 3 + c]); };
    auto tval = [&](int x, int y) { return t[static_cast<std::size_t>(y) * w + x]; };

    // Central difference where both sides are available, one-sided otherwise.
    auto diff = [&](int x, int y, int ox, int oy, auto&& f) {
        const bool fwd = avail(x + ox, y + oy), back = avail(x - ox, y - oy);
        if (fwd && back) return 0.5 * (f(x + ox, y + oy) - f(x - ox, y - oy));
        if (fwd) return f(x + ox, y + oy) - f(x, y);
        if (back) return f(x, y) - f(x - ox, y - oy);
        return 0.0;
    };

    const int r2 = radius * radius;
    auto fill = [&](std::size_t index) {
        const int px = static_cast<int>(index % w), py = static_cast<int>(index / w);
        const double tp = t[index];
        const double ntx = diff(px, py, 1, 0, tval);
        const double nty = diff(px, py, 0, 1, tval);
        const double nlen = std::hypot(ntx, nty);
        double acc[3] = {0, 0, 0};
        double sum_w = 0;
        for (int qy = std::max(0, py - radius); qy <= std::min(h - 1, py + radius); ++qy)
            for (int qx = std::max(0, px - radius); qx <= std::min(w - 1, px + radius); ++qx) {
                const int rx = px - qx, ry = py - qy;
                const int len2 = rx * rx + ry * ry;
                if (len2 == 0 || len2 > r2 || !avail(qx, qy)) continue;
                const double len = std::sqrt(static_cast<double>(len2));
                double dir = nlen > 0 ? (rx * ntx + ry * nty) / (len * nlen) : 1.0;
                if (std::fabs(dir) <= 0.01) dir = 1e-6;
                const double dst = 1.0 / len2;
                const double lev = 1.0 / (1.0 + std::fabs(tval(qx, qy) - tp));
                const double weight = std::fabs(dir * dst * lev);
                for (int c = 0; c < 3; ++c) {
                    auto channel = [&](int x, int y) { return value(x, y, c); };
                    const double gxv = diff(qx, qy, 1, 0, channel);
                    const double gyv = diff(qx, qy, 0, 1, channel);
                    acc[c] += weight * (value(qx, qy, c) + gxv * rx + gyv * ry);
                }
                sum_w += weight;
            }
        if (sum_w <= 0) return;
        for (int c = 0; c < 3; ++c) bytes[index * 3 + c] = to_u8(acc[c] / sum_w);
    };

    march(flags, t, w, h, kFar, fill);
    return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

struct Tap {
    std::size_t i0, i1;
    double f;
};

std::vector<Tap> bilinear_taps(std::size_t in, std::size_t out) {
    std::vector<Tap> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (o + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto i0 = static_cast<std::size_t>(std::floor(src));
        const std::size_t i1 = std::min(i0 + 1, in - 1);
        taps[o] = {i0, i1, src - static_cast<double>(i0)};
    }
    return taps;
}

}  // namespace

Tensor32 resize_bilinear(const Tensor32& t, std::size_t new_h, std::size_t new_w) {
    require(t.rank() == 2, "resize_bilinear expects a rank-2 tensor");
    require(new_h >= 1 && new_w >= 1, "resize target must be at least 1x1");
    const auto ty = bilinear_taps(t.dim(0), new_h);
    const auto tx = bilinear_taps(t.dim(1), new_w);
    Tensor32 out({new_h, new_w});
    for (std::size_t y = 0; y < new_h; ++y)
        for (std::size_t x = 0; x < new_w; ++x) {
            const double top = (1 - tx[x].f) * t.at(ty[y].i0, tx[x].i0) + tx[x].f * t.at(ty[y].i0, tx[x].i1);
            const double bot = (1 - tx[x].f) * t.at(ty[y].i1, tx[x].i0) + tx[x].f * t.at(ty[y].i1, tx[x].i1);
            out.at(y, x) = static_cast<float>((1 - ty[y].f) * top + ty[y].f * bot);
        }
    return out;
}

ImageGray8 resize_bilinear(const ImageGray8& img, int new_h, int new_w) {
    require(new_h >= 1 && new_w >= 1, "resize target must be at least 1x1");
    const auto ty = bilinear_taps(static_cast<std::size_t>(img.height()), static_cast<std::size_t>(new_h));
    const auto tx = bilinear_taps(static_cast<std::size_t>(img.width()), static_cast<std::size_t>(new_w));
    ImageGray8 out(new_w, new_h);
    for (int y = 0; y < new_h; ++y)
        for (int x = 0; x < new_w; ++x) {
            auto v = [&](std::size_t yy, std::size_t xx) { return static_cast<double>(img.at(static_cast<int>(xx), static_cast<int>(yy))); };
            const double top = (1 - tx[x].f) * v(ty[y].i0, tx[x].i0) + tx[x].f * v(ty[y].i0, tx[x].i1);
            const double bot = (1 - tx[x].f) * v(ty[y].i1, tx[x].i0) + tx[x].f * v(ty[y].i1, tx[x].i1);
            out.at(x, y) = to_u8((1 - ty[y].f) * top + ty[y].f * bot);
        }
    return out;
}

ImageRGB8 resize_bilinear(const ImageRGB8& img, int new_h, int new_w) {
    require(new_h >= 1 && new_w >= 1, "resize target must be at least 1x1");
    const auto ty = bilinear_taps(static_cast<std::size_t>(img.height()), static_cast<std::size_t>(new_h));
    const auto tx = bilinear_taps(static_cast<std::size_t>(img.width()), static_cast<std::size_t>(new_w));
    const auto src = img.bytes();
    const auto w = static_cast<std::size_t>(img.width());
    ImageRGB8 out(new_w, new_h);
    auto dst = out.bytes();
    for (int y = 0; y < new_h; ++y)
        for (int x = 0; x < new_w; ++x)
            for (int c = 0; c < 3; ++c) {
                auto v = [&](std::size_t yy, std::size_t xx) { return static_cast<double>(src[(yy * w + xx) * 3 + c]); };
                const double top = (1 - tx[x].f) * v(ty[y].i0, tx[x].i0) + tx[x].f * v(ty[y].i0, tx[x].i1);
                const double bot = (1 - tx[x].f) * v(ty[y].i1, tx[x].i0) + tx[x].f * v(ty[y].i1, tx[x].i1);
                dst[(static_cast<std::size_t>(y) * new_w + x) * 3 + c] = to_u8((1 - ty[y].f) * top + ty[y].f * bot);
            }
    return out;
}

void sample_bilinear(const ImageRGB8& img, double x, double y, double out[3]) {
    x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
    y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const int x1 = std::min(x0 + 1, img.width() - 1), y1 = std::min(y0 + 1, img.height() - 1);
    const double fx = x - x0, fy = y - y0;
    const Rgb p00 = img.at(x0, y0), p10 = img.at(x1, y0), p01 = img.at(x0, y1), p11 = img.at(x1, y1);
    auto blend = [&](double a, double b, double c, double d) {
        return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * c + fx * d);
    };
    out[0] = blend(p00.r, p10.r, p01.r, p11.r);
    out[1] = blend(p00.g, p10.g, p01.g, p11.g);
    out[2] = blend(p00.b, p10.b, p01.b, p11.b);
}

}  // namespace filters
}  // namespace anteriseg
