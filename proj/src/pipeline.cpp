#include "anteriseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <unordered_map>

#include "anteriseg/error.hpp"

namespace anteriseg::pipeline {

namespace {

std::uint8_t to_u8(double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

template <class Fn>
ImageRGB8 map_pixels(const ImageRGB8& img, Fn&& fn) {
    ImageRGB8 out = img;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.set(x, y, fn(img.at(x, y)));
    return out;
}

/// Inverse-maps every output pixel through `to_source` and samples bilinearly.
template <class Fn>
ImageRGB8 warp(const ImageRGB8& img, Fn&& to_source) {
    ImageRGB8 out(img.width(), img.height());
    double px[3];
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const auto [sx, sy] = to_source(static_cast<double>(x), static_cast<double>(y));
            filters::sample_bilinear(img, sx, sy, px);
            out.set(x, y, {to_u8(px[0]), to_u8(px[1]), to_u8(px[2])});
        }
    return out;
}

ImageRGB8 hflip(const ImageRGB8& img) {
    ImageRGB8 out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) out.set(img.width() - 1 - x, y, img.at(x, y));
    return out;
}

ImageRGB8 scale_brightness(const ImageRGB8& img, double factor) {
    return map_pixels(img, [&](Rgb p) {
        return Rgb{to_u8(p.r * factor), to_u8(p.g * factor), to_u8(p.b * factor)};
    });
}

ImageRGB8 scale_contrast(const ImageRGB8& img, double factor) {
    double mean = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) mean += img::luma(img.at(x, y));
    mean /= static_cast<double>(img.pixel_count());
    return map_pixels(img, [&](Rgb p) {
        auto f = [&](double v) { return to_u8((v - mean) * factor + mean); };
        return Rgb{f(p.r), f(p.g), f(p.b)};
    });
}

ImageRGB8 jitter_hsv(const ImageRGB8& img, double hue_shift, double saturation) {
    return map_pixels(img, [&](Rgb p) {
        Hsv hsv = img::rgb_to_hsv(p);
        hsv.h += hue_shift;
        hsv.s = std::clamp(hsv.s * saturation, 0.0, 1.0);
        return img::hsv_to_rgb(hsv);
    });
}

ImageRGB8 to_gray_rgb(const ImageRGB8& img) {
    return map_pixels(img, [](Rgb p) {
        const auto v = img::luma(p);
        return Rgb{v, v, v};
    });
}

}  // namespace

// ---------------------------------------------------------------------------

BitMask specular_mask(const ImageRGB8& img, int threshold, int dilate_k) {
    BitMask raw(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const Rgb p = img.at(x, y);
            if (std::max({p.r, p.g, p.b}) > threshold) raw.set(x, y);
        }
    return filters::dilate(raw, dilate_k);
}

PreprocessResult preprocess(const ImageRGB8& img, const PreprocessParams& p) {
    BitMask mask = specular_mask(img, p.specular_threshold, p.dilate_k);
    ImageRGB8 cleaned = mask.none() ? img : filters::inpaint_telea(img, mask, p.inpaint_radius);
    return {filters::clahe_l_channel(cleaned, p.clahe), std::move(mask)};
}

// ---------------------------------------------------------------------------

std::string_view to_string(AugmentKind k) {
    static constexpr std::array<std::string_view, kAugmentKindCount> names{
        "hflip", "rotate", "brightness", "contrast", "gauss_noise", "zoom", "color_jitter"};
    return names[static_cast<std::size_t>(k)];
}

AugmentParams sample_augment(AugmentKind kind, Rng& rng, const AugmentRanges& r) {
    switch (kind) {
        case AugmentKind::HFlip: return HFlip{rng.bernoulli(r.flip_p)};
        case AugmentKind::Rotate: return Rotate{rng.uniform(-r.rotate_max_deg, r.rotate_max_deg)};
        case AugmentKind::Brightness: return Brightness{rng.uniform(r.brightness_lo, r.brightness_hi)};
        case AugmentKind::Contrast: return Contrast{rng.uniform(r.contrast_lo, r.contrast_hi)};
        case AugmentKind::GaussNoise: {
            const double sigma = rng.uniform(r.noise_sigma_lo, r.noise_sigma_hi);
            return GaussNoise{sigma, rng.next()};
        }
        case AugmentKind::Zoom: return Zoom{rng.uniform(r.zoom_lo, r.zoom_hi)};
        case AugmentKind::ColorJitter: {
            const double hue = rng.uniform(-r.hue_max_deg, r.hue_max_deg);
            return ColorJitter{hue, rng.uniform(r.saturation_lo, r.saturation_hi)};
        }
    }
    throw ValidationError("unknown augmentation kind");
}

bool params_in_range(const AugmentParams& p, const AugmentRanges& r) {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    return std::visit(
        [&](const auto& a) -> bool {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, HFlip>) return true;
            else if constexpr (std::is_same_v<T, Rotate>) return in(a.degrees, -r.rotate_max_deg, r.rotate_max_deg);
            else if constexpr (std::is_same_v<T, Brightness>) return in(a.factor, r.brightness_lo, r.brightness_hi);
            else if constexpr (std::is_same_v<T, Contrast>) return in(a.factor, r.contrast_lo, r.contrast_hi);
            else if constexpr (std::is_same_v<T, GaussNoise>) return in(a.sigma, r.noise_sigma_lo, r.noise_sigma_hi);
            else if constexpr (std::is_same_v<T, Zoom>) return in(a.factor, r.zoom_lo, r.zoom_hi);
            else
                return in(a.hue_shift_deg, -r.hue_max_deg, r.hue_max_deg) &&
                       in(a.saturation, r.saturation_lo, r.saturation_hi);
        },
        p);
}

ImageRGB8 apply_augment(const ImageRGB8& img, const AugmentParams& p) {
    const double cx = 0.5 * (img.width() - 1), cy = 0.5 * (img.height() - 1);
    return std::visit(
        [&](const auto& a) -> ImageRGB8 {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, HFlip>) {
                return a.flip ? hflip(img) : img;
            } else if constexpr (std::is_same_v<T, Rotate>) {
                const double rad = a.degrees * std::numbers::pi / 180.0;
                const double c = std::cos(rad), s = std::sin(rad);
                return warp(img, [&](double x, double y) {
                    const double dx = x - cx, dy = y - cy;
                    return std::pair{cx + c * dx + s * dy, cy - s * dx + c * dy};
                });
            } else if constexpr (std::is_same_v<T, Brightness>) {
                return scale_brightness(img, a.factor);
            } else if constexpr (std::is_same_v<T, Contrast>) {
                return scale_contrast(img, a.factor);
            } else if constexpr (std::is_same_v<T, GaussNoise>) {
                Rng noise(a.noise_seed);
                ImageRGB8 out = img;
                for (auto& v : out.bytes()) v = to_u8(v + noise.normal(0.0, a.sigma));
                return out;
            } else if constexpr (std::is_same_v<T, Zoom>) {
                return warp(img, [&](double x, double y) {
                    return std::pair{cx + (x - cx) / a.factor, cy + (y - cy) / a.factor};
                });
            } else {
                return jitter_hsv(img, a.hue_shift_deg, a.saturation);
            }
        },
        p);
}

ImageRGB8 augment_one(const ImageRGB8& img, AugmentKind kind, Rng& rng, const AugmentRanges& ranges) {
    return apply_augment(img, sample_augment(kind, rng, ranges));
}

std::vector<AugmentKind> sample_transform_subset(Rng& rng) {
    std::vector<AugmentKind> kinds;
    while (kinds.empty()) {
        for (std::size_t k = 0; k < kAugmentKindCount; ++k)
            if (rng.bernoulli(0.5)) kinds.push_back(static_cast<AugmentKind>(k));
    }
    return kinds;
}

namespace {

std::string augmented_name(const std::string& output_dir, const std::string& source, std::size_t variant) {
    std::string stem = source;
    while (stem.rfind("../", 0) == 0 || stem.rfind("./", 0) == 0) stem.erase(0, stem.find('/') + 1);
    if (const auto dot = stem.find_last_of('.'); dot != std::string::npos && stem.find('/', dot) == std::string::npos)
        stem.erase(dot);
    std::replace(stem.begin(), stem.end(), '/', '_');
    std::replace(stem.begin(), stem.end(), '\\', '_');
    std::string out = output_dir.empty() ? std::string() : output_dir + "/";
    return out + stem + "_aug" + std::to_string(variant) + ".png";
}

}  // namespace

std::vector<AugmentJob> plan_augmentation(const DatasetManifest& m, const AugmentRequest& req) {
    validate_manifest(m);
    std::vector<const ManifestRecord*> sources;
    if (req.sources) {
        std::unordered_map<std::string, const ManifestRecord*> by_path;
        for (const auto& r : m.records) by_path.emplace(r.path, &r);
        for (const auto& path : *req.sources) {
            const auto it = by_path.find(path);
            require(it != by_path.end(), "augmentation source '" + path + "' is not in the manifest");
            const ManifestRecord& r = *it->second;
            require(r.split != Split::Val,
                    "leakage guard: refusing to augment validation image '" + path + "'");
            require(r.split == Split::Train, "augmentation source '" + path + "' has no split assigned");
            require(r.provenance == Provenance::Original,
                    "augmentation source '" + path + "' is itself augmented");
            sources.push_back(&r);
        }
    } else {
        for (const auto& r : m.records) {
            if (r.provenance != Provenance::Original) continue;
            require(r.split != Split::Unassigned,
                    "record '" + r.path + "' has no split assigned; run split before augment");
            if (r.split == Split::Train) sources.push_back(&r);
        }
    }
    std::sort(sources.begin(), sources.end(), [](auto* a, auto* b) { return a->path < b->path; });
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());

    std::vector<AugmentJob> jobs;
    jobs.reserve(sources.size() * req.variants_per_image);
    for (const auto* r : sources)
        for (std::size_t v = 0; v < req.variants_per_image; ++v)
            jobs.push_back({r->path, augmented_name(req.output_dir, r->path, v), v,
                            derive_seed(req.master_seed, r->path, v)});
    return jobs;
}

DatasetManifest augment_dataset(const DatasetManifest& m, const AugmentRequest& req) {
    const auto jobs = plan_augmentation(m, req);
    std::unordered_map<std::string, const ManifestRecord*> by_path;
    for (const auto& r : m.records) by_path.emplace(r.path, &r);
    DatasetManifest out = m;
    out.records.reserve(m.size() + jobs.size());
    for (const auto& job : jobs) {
        const ManifestRecord& src = *by_path.at(job.source_path);
        out.records.push_back({job.output_path, src.patient_id, src.gaze, src.label, Split::Train,
                               Provenance::Augmented, job.source_path});
    }
    validate_manifest(out);
    return out;
}

ImageRGB8 render_augmentation(const ImageRGB8& source, const AugmentJob& job, const AugmentRanges& ranges) {
    Rng rng(job.stream_seed);
    ImageRGB8 img = source;
    for (AugmentKind kind : sample_transform_subset(rng)) img = augment_one(img, kind, rng, ranges);
    return img;
}

// ---------------------------------------------------------------------------

ImageRGB8 ssl_view(const ImageRGB8& img, const SslViewSpec& spec, Rng& rng) {
    const int w = img.width(), h = img.height();
    // All draws happen unconditionally so the stream layout is fixed.
    const double scale = rng.uniform(spec.crop_scale_lo, spec.crop_scale_hi);
    const double side = std::sqrt(scale);
    const int cw = std::clamp(static_cast<int>(std::lround(w * side)), 1, w);
    const int ch = std::clamp(static_cast<int>(std::lround(h * side)), 1, h);
    const int x0 = static_cast<int>(rng.index(static_cast<std::size_t>(w - cw + 1)));
    const int y0 = static_cast<int>(rng.index(static_cast<std::size_t>(h - ch + 1)));
    const bool flip = rng.bernoulli(spec.flip_p);
    const bool jitter = rng.bernoulli(spec.jitter_p);
    const double bright = rng.uniform(1 - spec.jitter_brightness, 1 + spec.jitter_brightness);
    const double contrast = rng.uniform(1 - spec.jitter_contrast, 1 + spec.jitter_contrast);
    const double sat = rng.uniform(1 - spec.jitter_saturation, 1 + spec.jitter_saturation);
    const double hue = rng.uniform(-spec.jitter_hue_deg, spec.jitter_hue_deg);
    const bool gray = rng.bernoulli(spec.gray_p);
    const bool blur = rng.bernoulli(spec.blur_p);
    const double sigma = rng.uniform(spec.blur_sigma_lo, spec.blur_sigma_hi);

    ImageRGB8 view(cw, ch);
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) view.set(x, y, img.at(x0 + x, y0 + y));
    view = filters::resize_bilinear(view, h, w);
    if (flip) view = hflip(view);
    if (jitter) {
        view = scale_brightness(view, bright);
        view = scale_contrast(view, contrast);
        view = jitter_hsv(view, hue, sat);
    }
    if (gray) view = to_gray_rgb(view);
    if (blur) view = filters::gaussian_blur(view, sigma);
    return view;
}

std::pair<ImageRGB8, ImageRGB8> ssl_views(const ImageRGB8& img, const SslViewSpec& spec, Rng& rng) {
    ImageRGB8 first = ssl_view(img, spec, rng);
    ImageRGB8 second = ssl_view(img, spec, rng);
    return {std::move(first), std::move(second)};
}

// ---------------------------------------------------------------------------

std::array<std::size_t, kLabelCount> validation_quota(const std::array<std::size_t, kLabelCount>& counts,
                                                      double train_frac) {
    require(train_frac >= 0.0 && train_frac <= 1.0, "train fraction must lie in [0, 1]");
    const double val_frac = 1.0 - train_frac;
    const std::size_t n = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    const auto total = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_frac));
    std::array<std::size_t, kLabelCount> quota{};
    std::array<double, kLabelCount> remainder{};
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < kLabelCount; ++c) {
        const double target = static_cast<double>(counts[c]) * val_frac;
        quota[c] = std::min(counts[c], static_cast<std::size_t>(std::floor(target + 1e-9)));
        remainder[c] = target - static_cast<double>(quota[c]);
        assigned += quota[c];
    }
    std::array<std::size_t, kLabelCount> order{};
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < total && i < kLabelCount; ++i) {
        const std::size_t c = order[i];
        if (quota[c] < counts[c] && remainder[c] > 0) {
            ++quota[c];
            ++assigned;
        }
    }
    return quota;
}

DatasetManifest stratified_split(const DatasetManifest& m, const SplitParams& p) {
    for (const auto& r : m.records) {
        require(r.provenance == Provenance::Original, "split expects original records only ('" + r.path + "')");
        require(r.split == Split::Unassigned, "split expects unassigned records ('" + r.path + "')");
    }

    // Units are single records, or whole patients when grouping.
    std::vector<std::vector<std::size_t>> units;
    std::vector<Label> unit_label;
    if (p.group_by_patient) {
        std::map<std::string, std::size_t> unit_of;
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto [it, fresh] = unit_of.try_emplace(m.records[i].patient_id, units.size());
            if (fresh) units.emplace_back();
            units[it->second].push_back(i);
        }
        for (const auto& members : units) {
            std::array<std::size_t, kLabelCount> votes{};
            for (auto i : members) ++votes[label_index(m.records[i].label)];
            unit_label.push_back(label_from_index(static_cast<std::size_t>(
                std::max_element(votes.begin(), votes.end()) - votes.begin())));
        }
    } else {
        for (std::size_t i = 0; i < m.size(); ++i) {
            units.push_back({i});
            unit_label.push_back(m.records[i].label);
        }
    }

    std::array<std::vector<std::size_t>, kLabelCount> by_label;
    for (std::size_t u = 0; u < units.size(); ++u) by_label[label_index(unit_label[u])].push_back(u);
    std::array<std::size_t, kLabelCount> counts{};
    for (std::size_t c = 0; c < kLabelCount; ++c) {
        counts[c] = by_label[c].size();
        require(counts[c] != 1, "label " + std::string(to_string(label_from_index(c))) +
                                    " has fewer than 2 items and cannot be stratified");
    }
    const auto quota = validation_quota(counts, p.train_frac);

    DatasetManifest out = m;
    Rng rng(p.seed);
    for (std::size_t c = 0; c < kLabelCount; ++c) {
        auto& pool = by_label[c];
        for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.index(i)]);
        for (std::size_t k = 0; k < pool.size(); ++k)
            for (auto rec : units[pool[k]]) out.records[rec].split = k < quota[c] ? Split::Val : Split::Train;
    }
    return out;
}

}  // namespace anteriseg::pipeline
