#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "anteriseg/evalstat.hpp"
#include "anteriseg/filters.hpp"
#include "anteriseg/imgcore.hpp"
#include "anteriseg/manifest.hpp"
#include "json.hpp"

namespace anteriseg::xai {

/// Feature maps A^k and class-score gradients, both [K, h, w].
struct GradCamInput {
    Tensor32 feature_maps;
    Tensor32 gradients;
};

/// Heatmap [H, W] in [0, 1]; max is 1 unless the map is all zero.
struct AttentionMap {
    Tensor32 heatmap;

    std::size_t height() const { return heatmap.dim(0); }
    std::size_t width() const { return heatmap.dim(1); }
};

/// Channel weights: spatial mean of each gradient channel.
std::vector<double> channel_weights(const Tensor32& gradients);

/// ReLU of the weighted channel sum at feature resolution, before any
/// resampling or normalization.
Tensor32 grad_cam_raw(const GradCamInput& in);

/// Raw map, bilinearly upsampled to (out_h, out_w) and min-max normalized.
AttentionMap grad_cam(const GradCamInput& in, std::size_t out_h, std::size_t out_w);

/// Min-max normalization; an all-zero map stays zero and a constant
/// positive map becomes all ones.
Tensor32 normalize_heatmap(const Tensor32& t);

enum class Region : std::uint8_t { Iris = 0, Sclera = 1, Peripheral = 2 };
inline constexpr std::size_t kRegionCount = 3;
std::string_view to_string(Region r);

/// Anatomical partition of a frame. Geometry is defined on a 224 x 224
/// reference frame, centred, and scaled per axis:
///   iris       ellipse with semi-axes 55 x 45
///   sclera     inside ellipse 100 x 80, outside circle r = 60, not iris
///   peripheral everything else
class RegionMasks {
public:
    static constexpr double kReference = 224.0;
    static constexpr double kIrisA = 55.0, kIrisB = 45.0;
    static constexpr double kScleraA = 100.0, kScleraB = 80.0;
    static constexpr double kInnerRadius = 60.0;

    RegionMasks(int height, int width);

    int height() const { return height_; }
    int width() const { return width_; }
    Region at(int x, int y) const { return labels_[static_cast<std::size_t>(y) * width_ + x]; }
    BitMask mask(Region r) const;
    std::size_t count(Region r) const;

private:
    int height_, width_;
    std::vector<Region> labels_;
};

RegionMasks region_masks(int height, int width);

struct RegionalAttention {
    std::array<double, kRegionCount> mean{};  // fraction in [0, 1], indexed by Region
    std::optional<Label> label;

    double iris() const { return mean[0]; }
    double sclera() const { return mean[1]; }
    double peripheral() const { return mean[2]; }
};

RegionalAttention regional_attention(const AttentionMap& map, const RegionMasks& masks);

/// Jet colormap, components in [0, 1].
std::array<double, 3> jet(double v);

/// out = (1 - alpha) * img + alpha * jet(map); the map is resampled to the
/// image size first if needed.
ImageRGB8 overlay(const ImageRGB8& img, const AttentionMap& map, double alpha = 0.4);

struct RegionClassSummary {
    Label label;
    eval::Summary stats;
};

struct RegionReport {
    Region region;
    std::vector<RegionClassSummary> per_class;
    eval::StatResult kruskal_wallis;
    std::vector<eval::StatResult> dunn;
};

struct CohortReport {
    std::vector<RegionReport> regions;
    std::vector<Label> classes;
    /// Scleral attention strictly increases Normal < Controlled < Uncontrolled.
    bool sclera_ordering = false;

    nlohmann::json to_json() const;
};

/// Per-region class summaries, Kruskal-Wallis across classes and Dunn's
/// pairwise comparisons with Bonferroni correction.
CohortReport attention_cohort_report(const std::vector<RegionalAttention>& items);

}  // namespace anteriseg::xai
