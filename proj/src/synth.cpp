#include "anteriseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "anteriseg/error.hpp"

namespace anteriseg::synth {

FeatureCohort feature_cohort(std::size_t n, double noise_rate, std::uint64_t seed, const FeatureCohortSpec& spec) {
    require(noise_rate >= 0 && noise_rate <= 1, "noise rate must lie in [0, 1]");
    Rng rng(seed);
    FeatureCohort c;
    for (std::size_t i = 0; i < n; ++i) {
        const Label truth = label_from_index(i % kLabelCount);
        const std::size_t k = label_index(truth);
        const double s = rng.normal(spec.i_score[k].mean, spec.i_score[k].sd);
        const double d = std::clamp(rng.normal(spec.d_vessel[k].mean, spec.d_vessel[k].sd), 0.0, 100.0);
        const double w = std::clamp(rng.normal(spec.w_sclera[k].mean, spec.w_sclera[k].sd), 0.0, 255.0);
        const double r = std::clamp((s - 0.3 * d - 0.2 * (1.0 - w / 255.0)) / 0.5, 0.0, 100.0);
        quality::QualityFeatures f{r, d, w, quality::inflammation_score(r, d, w)};

        Label seen = truth;
        if (rng.bernoulli(noise_rate)) {
            seen = label_from_index((k + 1 + rng.index(kLabelCount - 1)) % kLabelCount);
            ++c.flipped;
        }
        c.features.push_back(f);
        c.truth.push_back(truth);
        c.observed.push_back(seen);
    }
    return c;
}

namespace {

std::uint8_t clamp8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

struct Canvas {
    int w, h;
    std::vector<double> px;  // rgb

    Canvas(int width, int height) : w(width), h(height), px(static_cast<std::size_t>(width) * height * 3) {}
    void put(int x, int y, const std::array<double, 3>& c, double a = 1.0) {
        if (x < 0 || y < 0 || x >= w || y >= h) return;
        double* p = &px[(static_cast<std::size_t>(y) * w + x) * 3];
        for (int i = 0; i < 3; ++i) p[i] = (1 - a) * p[i] + a * c[i];
    }
};

}  // namespace

ImageRGB8 eye_image(Label cls, int width, int height, Rng& rng) {
    require(width >= 16 && height >= 16, "synthetic eye images need at least 16x16 pixels");
    const std::size_t k = label_index(cls);
    Canvas cv(width, height);
    const double cx = width / 2.0, cy = height / 2.0;
    const double sa = 0.44 * width, sb = 0.34 * height;
    const double iris_r = 0.2 * std::min<double>(width, height * 1.3);

    constexpr std::array<std::array<double, 3>, 3> kSclera{{{238, 234, 228}, {228, 198, 190}, {222, 160, 150}}};
    constexpr std::array<int, 3> kVessels{3, 10, 18};
    const double tone = rng.normal(0, 5);
    const std::array<double, 3> skin{196.0 + tone, 158.0 + tone, 116.0 + tone};  // hue near 30 deg

    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const bool in_eye = (dx / sa) * (dx / sa) + (dy / sb) * (dy / sb) <= 1.0;
            cv.put(x, y, in_eye ? kSclera[k] : skin);
        }

    // Vessels: quadratic Bezier strokes from the eye corners toward the iris.
    const int strokes = kVessels[k] + static_cast<int>(rng.index(3));
    for (int s = 0; s < strokes; ++s) {
        const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
        const double t0 = rng.uniform(-0.7, 0.7);
        const double x0 = cx + side * sa * rng.uniform(0.8, 0.95), y0 = cy + sb * t0 * 0.6;
        const double x2 = cx + side * iris_r * rng.uniform(1.05, 1.3), y2 = cy + sb * rng.uniform(-0.5, 0.5);
        const double x1 = (x0 + x2) / 2 + rng.normal(0, 0.05 * width), y1 = (y0 + y2) / 2 + rng.normal(0, 0.08 * height);
        const std::array<double, 3> col{160.0 + rng.normal(0, 10), 30.0 + rng.normal(0, 6), 35.0 + rng.normal(0, 6)};
        const int steps = 4 * width;
        for (int i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / steps;
            const double bx = (1 - t) * (1 - t) * x0 + 2 * (1 - t) * t * x1 + t * t * x2;
            const double by = (1 - t) * (1 - t) * y0 + 2 * (1 - t) * t * y1 + t * t * y2;
            const double dx = bx - cx, dy = by - cy;
            if ((dx / sa) * (dx / sa) + (dy / sb) * (dy / sb) > 1.0) continue;
            cv.put(static_cast<int>(bx), static_cast<int>(by), col, 0.85);
        }
    }

    const double shade = rng.normal(0, 8);
    const std::array<double, 3> iris_col{96.0 + shade, 84.0 + shade, 52.0 + shade};
    const double hx = cx - 0.35 * iris_r, hy = cy - 0.35 * iris_r, hr = std::max(1.5, 0.12 * iris_r);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            const double r = std::hypot(dx, dy);
            if (r <= 0.4 * iris_r)
                cv.put(x, y, {18, 16, 16});
            else if (r <= iris_r)
                cv.put(x, y, iris_col);
            if (std::hypot(x + 0.5 - hx, y + 0.5 - hy) <= hr) cv.put(x, y, {255, 255, 255});
        }

    ImageRGB8 img(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double* p = &cv.px[(static_cast<std::size_t>(y) * width + x) * 3];
            if (p[0] >= 255 && p[1] >= 255 && p[2] >= 255) {
                img.set(x, y, {255, 255, 255});
                continue;
            }
            const double n = rng.normal(0, 2.0);
            img.set(x, y, {clamp8(std::min(p[0] + n, 235.0)), clamp8(std::min(p[1] + n, 235.0)),
                           clamp8(std::min(p[2] + n, 235.0))});
        }
    return img;
}

xai::AttentionMap attention_map(Label cls, int height, int width, Rng& rng, const AttentionCohortSpec& spec) {
    const std::size_t k = label_index(cls);
    const xai::RegionMasks masks(height, width);
    const std::array<double, xai::kRegionCount> level{
        std::clamp(rng.normal(spec.iris[k], spec.image_sd), 0.0, 1.0),
        std::clamp(rng.normal(spec.sclera[k], spec.image_sd), 0.0, 1.0),
        std::clamp(rng.normal(spec.peripheral, spec.image_sd), 0.0, 1.0)};
    Tensor32 t({static_cast<std::size_t>(height), static_cast<std::size_t>(width)});
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            const double v = level[static_cast<std::size_t>(masks.at(x, y))] + rng.uniform(-1, 1) * spec.pixel_noise;
            t.at(y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    t.at(0, 0) = 1.0f;  // a corner is always peripheral
    return {std::move(t)};
}

AttentionCohort attention_cohort(std::size_t per_class, int height, int width, std::uint64_t seed,
                                 const AttentionCohortSpec& spec) {
    AttentionCohort c;
    const xai::RegionMasks masks(height, width);
    for (std::size_t i = 0; i < per_class * kLabelCount; ++i) {
        const Label cls = label_from_index(i % kLabelCount);
        Rng rng(derive_seed(seed, "attention", i));
        c.maps.push_back(attention_map(cls, height, width, rng, spec));
        auto ra = xai::regional_attention(c.maps.back(), masks);
        ra.label = cls;
        c.attention.push_back(ra);
    }
    return c;
}

DatasetManifest synthetic_manifest(std::size_t n, const std::vector<Label>& labels) {
    require(labels.empty() || labels.size() == n, "one label per record required");
    constexpr std::array<Gaze, 5> kGaze{Gaze::Straight, Gaze::Up, Gaze::Down, Gaze::Left, Gaze::Right};
    DatasetManifest m;
    for (std::size_t i = 0; i < n; ++i) {
        ManifestRecord r;
        r.path = fmt::format("img/{:05d}.png", i);
        r.patient_id = fmt::format("P{:04d}", i / 2);
        r.gaze = kGaze[i % kGaze.size()];
        r.label = labels.empty() ? label_from_index((i / 2) % kLabelCount) : labels[i];
        m.records.push_back(std::move(r));
    }
    return m;
}

}  // namespace anteriseg::synth
