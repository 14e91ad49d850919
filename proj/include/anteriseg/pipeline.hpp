#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "anteriseg/filters.hpp"
#include "anteriseg/imgcore.hpp"
#include "anteriseg/manifest.hpp"
#include "anteriseg/rng.hpp"

namespace anteriseg::pipeline {

// ---------------------------------------------------------------------------
// Two-stage preprocessing

struct PreprocessParams {
    int specular_threshold = 240;  // max(R,G,B) strictly above this is specular
    int dilate_k = 5;
    int inpaint_radius = 3;
    ClaheParams clahe{2.0, 8, 8};
};

struct PreprocessResult {
    ImageRGB8 image;
    BitMask mask;
};

/// Pixels with max channel above the threshold, dilated by a k x k square.
BitMask specular_mask(const ImageRGB8& img, int threshold, int dilate_k);

/// Specular removal (mask + Telea inpaint), then CLAHE on L.
PreprocessResult preprocess(const ImageRGB8& img, const PreprocessParams& p = {});

// ---------------------------------------------------------------------------
// Clinical augmentations. Each transform has a parameter struct; `sample_*`
// draws parameters from the closed ranges below and `apply` renders them.

struct HFlip { bool flip = false; };
struct Rotate { double degrees = 0; };
struct Brightness { double factor = 1; };
struct Contrast { double factor = 1; };
struct GaussNoise { double sigma = 5; std::uint64_t noise_seed = 0; };
struct Zoom { double factor = 1.1; };
struct ColorJitter { double hue_shift_deg = 0; double saturation = 1; };

using AugmentParams = std::variant<HFlip, Rotate, Brightness, Contrast, GaussNoise, Zoom, ColorJitter>;

enum class AugmentKind { HFlip, Rotate, Brightness, Contrast, GaussNoise, Zoom, ColorJitter };
inline constexpr std::size_t kAugmentKindCount = 7;

struct AugmentRanges {
    double flip_p = 0.5;
    double rotate_max_deg = 20.0;
    double brightness_lo = 0.7, brightness_hi = 1.3;
    double contrast_lo = 0.8, contrast_hi = 1.2;
    double noise_sigma_lo = 5.0, noise_sigma_hi = 15.0;
    double zoom_lo = 1.1, zoom_hi = 1.3;
    double hue_max_deg = 10.0;
    double saturation_lo = 0.8, saturation_hi = 1.2;
};

std::string_view to_string(AugmentKind k);
AugmentParams sample_augment(AugmentKind kind, Rng& rng, const AugmentRanges& ranges = {});
/// True if every sampled parameter lies in its closed range.
bool params_in_range(const AugmentParams& p, const AugmentRanges& ranges = {});
ImageRGB8 apply_augment(const ImageRGB8& img, const AugmentParams& p);
ImageRGB8 augment_one(const ImageRGB8& img, AugmentKind kind, Rng& rng, const AugmentRanges& ranges = {});

/// Enabled transforms for one variant: each kind independently with
/// probability 0.5, redrawn until at least one is enabled.
std::vector<AugmentKind> sample_transform_subset(Rng& rng);

struct AugmentJob {
    std::string source_path;  // manifest path of the train original
    std::string output_path;  // manifest path of the new record
    std::size_t variant = 0;
    std::uint64_t stream_seed = 0;
};

struct AugmentRequest {
    std::size_t variants_per_image = 3;
    std::uint64_t master_seed = 0;
    /// Directory (manifest-relative) for generated images.
    std::string output_dir = "augmented";
    /// Restrict to these sources; each must be a train original.
    std::optional<std::vector<std::string>> sources;
};

/// Planned jobs, sorted by (source path, variant). Throws on any
/// validation-split or unassigned source.
std::vector<AugmentJob> plan_augmentation(const DatasetManifest& m, const AugmentRequest& req);

/// Manifest with one augmented record per job appended (train split,
/// provenance=augmented). Record order does not depend on input order.
DatasetManifest augment_dataset(const DatasetManifest& m, const AugmentRequest& req);

/// Renders one planned job deterministically from its stream seed.
ImageRGB8 render_augmentation(const ImageRGB8& source, const AugmentJob& job, const AugmentRanges& ranges = {});

// ---------------------------------------------------------------------------
// Self-supervised view generation

struct SslViewSpec {
    double crop_scale_lo = 0.6, crop_scale_hi = 1.0;  // fraction of image area
    double flip_p = 0.5;
    double jitter_p = 0.8;
    double jitter_brightness = 0.4, jitter_contrast = 0.4, jitter_saturation = 0.4;
    double jitter_hue_deg = 36.0;
    double gray_p = 0.2;
    double blur_p = 0.5;
    double blur_sigma_lo = 0.1, blur_sigma_hi = 2.0;
};

std::pair<ImageRGB8, ImageRGB8> ssl_views(const ImageRGB8& img, const SslViewSpec& spec, Rng& rng);
ImageRGB8 ssl_view(const ImageRGB8& img, const SslViewSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Stratified split

struct SplitParams {
    double train_frac = 0.85;
    std::uint64_t seed = 0;
    bool group_by_patient = false;
};

/// Validation quota per label by largest-remainder apportionment of
/// round(n * (1 - train_frac)), so totals are exact and each class deviates
/// from its proportional target by less than 1.
std::array<std::size_t, kLabelCount> validation_quota(const std::array<std::size_t, kLabelCount>& counts,
                                                      double train_frac);

DatasetManifest stratified_split(const DatasetManifest& m, const SplitParams& p);

}  // namespace anteriseg::pipeline
