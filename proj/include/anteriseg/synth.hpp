#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "anteriseg/imgcore.hpp"
#include "anteriseg/manifest.hpp"
#include "anteriseg/quality.hpp"
#include "anteriseg/rng.hpp"
#include "anteriseg/xai.hpp"

// Synthetic cohorts with known ground truth, for tests, acceptance runs and
// the `synth` subcommand.
namespace anteriseg::synth {

struct Gaussian {
    double mean = 0, sd = 0;
};

/// Per-class generator parameters, indexed by label_index().
struct FeatureCohortSpec {
    std::array<Gaussian, kLabelCount> i_score{{{26.5, 4.2}, {37.2, 7.3}, {39.9, 5.3}}};
    std::array<Gaussian, kLabelCount> d_vessel{{{5.0, 1.0}, {50.0, 2.0}, {95.0, 2.0}}};
    std::array<Gaussian, kLabelCount> w_sclera{{{220.0, 5.0}, {160.0, 5.0}, {100.0, 5.0}}};
};

struct FeatureCohort {
    std::vector<quality::QualityFeatures> features;
    std::vector<Label> truth;
    std::vector<Label> observed;  // truth with injected noise
    std::size_t flipped = 0;
};

/// Balanced cohort (label i % 3). i_score is drawn from the class Gaussian,
/// d_vessel and w_sclera from theirs, and r_red is solved from the score
/// equation, clamped to [0, 100]; i_score is then recomputed so the
/// features are always consistent. A `noise_rate` fraction of items get a
/// different label chosen uniformly.
FeatureCohort feature_cohort(std::size_t n, double noise_rate, std::uint64_t seed,
                             const FeatureCohortSpec& spec = {});

/// Stylised anterior-segment photograph: skin, tinted sclera, red vessel
/// strokes, iris, pupil and one specular highlight. Redness and vessel count
/// grow with the class.
ImageRGB8 eye_image(Label cls, int width, int height, Rng& rng);

/// Per-class regional attention targets (fractions), indexed by label_index().
struct AttentionCohortSpec {
    std::array<double, kLabelCount> sclera{0.152, 0.327, 0.476};
    std::array<double, kLabelCount> iris{0.284, 0.241, 0.198};
    double peripheral = 0.10;
    double image_sd = 0.03;  // between-image spread of each regional level
    double pixel_noise = 0.02;
};

/// Heatmap with piecewise-constant regional levels plus pixel noise. One
/// peripheral pixel is set to 1 so the map keeps a unit maximum.
xai::AttentionMap attention_map(Label cls, int height, int width, Rng& rng, const AttentionCohortSpec& spec = {});

struct AttentionCohort {
    std::vector<xai::AttentionMap> maps;
    std::vector<xai::RegionalAttention> attention;
};

AttentionCohort attention_cohort(std::size_t per_class, int height, int width, std::uint64_t seed,
                                 const AttentionCohortSpec& spec = {});

/// Manifest of n unassigned originals named img/NNNNN.png, balanced labels,
/// two records per patient.
DatasetManifest synthetic_manifest(std::size_t n, const std::vector<Label>& labels);

}  // namespace anteriseg::synth
