#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "anteriseg/evalstat.hpp"
#include "anteriseg/filters.hpp"
#include "anteriseg/imgcore.hpp"
#include "anteriseg/manifest.hpp"
#include "json.hpp"

namespace anteriseg::quality {

/// Pixel predicate for the redness biomarker.
struct RednessParams {
    double hue_low_max = 20.0;    // hue in [0, hue_low_max] ...
    double hue_high_min = 340.0;  // ... or [hue_high_min, 360)
    double min_saturation = 0.3;
    double min_value = 0.2;
};

struct QualityConfig {
    RednessParams redness;
    ClaheParams clahe{2.0, 8, 8};
    CannyParams canny;
    int specular_threshold = 240;
    int dilate_k = 5;
};

struct QualityFeatures {
    double r_red = 0;     // percent
    double d_vessel = 0;  // percent
    double w_sclera = 0;  // mean L on a 0..255 scale
    double i_score = 0;

    /// Clustering vector [i_score, r_red, d_vessel, w_sclera].
    std::array<double, 4> vector() const { return {i_score, r_red, d_vessel, w_sclera}; }
};

double redness_score(const ImageRGB8& img, const RednessParams& p = {});
double vessel_density(const ImageRGB8& img, const ClaheParams& clahe, const CannyParams& canny);
double scleral_whiteness(const ImageRGB8& img, const BitMask& specular_mask);
double inflammation_score(double r_red, double d_vessel, double w_sclera);

/// All three biomarkers plus the aggregate score for one image.
QualityFeatures extract_features(const ImageRGB8& img, const QualityConfig& cfg = {});

// ---------------------------------------------------------------------------
// Clustering

using FeatureVector = std::array<double, 4>;

struct KMeansOptions {
    std::size_t max_iterations = 300;
    double tolerance = 1e-6;  // max centroid shift, standardized units
};

struct ClusterModel {
    std::size_t k = 0;
    std::vector<FeatureVector> centroids;  // standardized space, ascending mean i_score
    FeatureVector feature_means{};
    FeatureVector feature_stds{};
    /// Index = cluster; filled when k == 3.
    std::vector<Label> cluster_to_label;
    /// Within-cluster sum of squares after each assignment step.
    std::vector<double> inertia_trace;
    std::size_t iterations = 0;

    FeatureVector standardize(const FeatureVector& raw) const;
    std::size_t assign(const FeatureVector& raw) const;
    Label label_for(const FeatureVector& raw) const;
    /// Mean i_score of a cluster in raw units.
    double cluster_i_score(std::size_t cluster) const;
    double final_inertia() const { return inertia_trace.empty() ? 0.0 : inertia_trace.back(); }

    nlohmann::json to_json() const;
    static ClusterModel from_json(const nlohmann::json& j);
};

/// z-score standardization, k-means++ seeding, Lloyd iterations. Clusters
/// are reordered by ascending mean i_score; with k == 3 they map to
/// Normal, Controlled, Uncontrolled.
ClusterModel kmeans_fit(std::span<const FeatureVector> features, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& opts = {});

// ---------------------------------------------------------------------------
// Relabeling

struct RelabelEntry {
    std::string path;
    Label old_label;
    Label new_label;
    QualityFeatures features;
};

struct ClassScoreSummary {
    Label label;
    eval::Summary i_score;
};

struct RelabelReport {
    std::vector<RelabelEntry> entries;
    std::size_t changes = 0;
    std::vector<ClassScoreSummary> per_class;
    std::optional<eval::StatResult> anova;  // absent if a class has < 2 members

    double change_fraction() const {
        return entries.empty() ? 0.0 : static_cast<double>(changes) / static_cast<double>(entries.size());
    }
    nlohmann::json to_json() const;
};

using FeatureTable = std::map<std::string, QualityFeatures>;

/// Assigns each record its nearest-centroid label. Returns the corrected
/// manifest and the report.
std::pair<DatasetManifest, RelabelReport> relabel(const DatasetManifest& m, const ClusterModel& model,
                                                  const FeatureTable& features);

// ---------------------------------------------------------------------------
// Score CSV: path,r_red,d_vessel,w_sclera,i_score

inline constexpr std::string_view kScoresHeader = "path,r_red,d_vessel,w_sclera,i_score";

void write_scores_csv(const std::vector<std::pair<std::string, QualityFeatures>>& rows, std::ostream& out);
FeatureTable read_scores_csv(std::istream& in);
FeatureTable read_scores(const std::filesystem::path& path);

}  // namespace anteriseg::quality
