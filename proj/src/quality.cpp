#include "anteriseg/quality.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "anteriseg/error.hpp"
#include "anteriseg/pipeline.hpp"
#include "anteriseg/rng.hpp"

namespace anteriseg::quality {

double redness_score(const ImageRGB8& img, const RednessParams& p) {
    std::size_t hits = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            const Hsv hsv = img::rgb_to_hsv(img.at(x, y));
            const bool red_hue = hsv.h <= p.hue_low_max || hsv.h >= p.hue_high_min;
            if (red_hue && hsv.s >= p.min_saturation && hsv.v >= p.min_value) ++hits;
        }
    return 100.0 * static_cast<double>(hits) / static_cast<double>(img.pixel_count());
}

double vessel_density(const ImageRGB8& img, const ClaheParams& clahe, const CannyParams& canny) {
    const ImageGray8 enhanced = filters::clahe_gray(img::to_grayscale(img), clahe);
    const BitMask edges = filters::canny(enhanced, canny);
    return 100.0 * static_cast<double>(edges.count()) / static_cast<double>(img.pixel_count());
}

double scleral_whiteness(const ImageRGB8& img, const BitMask& specular_mask) {
    require(specular_mask.width() == img.width() && specular_mask.height() == img.height(),
            "specular mask dimensions must match image");
    double sum = 0;
    std::size_t n = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (specular_mask.test(x, y)) continue;
            sum += img::rgb_to_lab(img.at(x, y)).l * 2.55;
            ++n;
        }
    require(n > 0, "no valid pixels");
    return sum / static_cast<double>(n);
}

double inflammation_score(double r_red, double d_vessel, double w_sclera) {
    return 0.5 * r_red + 0.3 * d_vessel + 0.2 * (1.0 - w_sclera / 255.0);
}

QualityFeatures extract_features(const ImageRGB8& img, const QualityConfig& cfg) {
    QualityFeatures f;
    f.r_red = redness_score(img, cfg.redness);
    f.d_vessel = vessel_density(img, cfg.clahe, cfg.canny);
    f.w_sclera = scleral_whiteness(img, pipeline::specular_mask(img, cfg.specular_threshold, cfg.dilate_k));
    f.i_score = inflammation_score(f.r_red, f.d_vessel, f.w_sclera);
    return f;
}

// ---------------------------------------------------------------------------

namespace {

double sq_dist(const FeatureVector& a, const FeatureVector& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

std::size_t nearest(const std::vector<FeatureVector>& centroids, const FeatureVector& p) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.size(); ++c) {
        const double d = sq_dist(centroids[c], p);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

}  // namespace

FeatureVector ClusterModel::standardize(const FeatureVector& raw) const {
    FeatureVector z{};
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = (raw[i] - feature_means[i]) / feature_stds[i];
    return z;
}

std::size_t ClusterModel::assign(const FeatureVector& raw) const { return nearest(centroids, standardize(raw)); }

Label ClusterModel::label_for(const FeatureVector& raw) const {
    require(cluster_to_label.size() == k, "cluster model has no label mapping (k must be 3)");
    return cluster_to_label[assign(raw)];
}

double ClusterModel::cluster_i_score(std::size_t cluster) const {
    return centroids.at(cluster)[0] * feature_stds[0] + feature_means[0];
}

ClusterModel kmeans_fit(std::span<const FeatureVector> features, std::size_t k, std::uint64_t seed,
                        const KMeansOptions& opts) {
    require(k >= 1, "k must be at least 1");
    std::vector<FeatureVector> distinct(features.begin(), features.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    require(distinct.size() >= k, "fewer than k distinct points");
    for (const auto& f : features)
        for (double v : f) require(std::isfinite(v), "feature vectors must be finite");

    ClusterModel model;
    model.k = k;
    const std::size_t n = features.size();
    const std::size_t dims = model.feature_means.size();
    for (std::size_t d = 0; d < dims; ++d) {
        double mean = 0;
        for (const auto& f : features) mean += f[d];
        mean /= static_cast<double>(n);
        double var = 0;
        for (const auto& f : features) var += (f[d] - mean) * (f[d] - mean);
        const double sd = std::sqrt(var / static_cast<double>(n));
        model.feature_means[d] = mean;
        model.feature_stds[d] = sd > 0 ? sd : 1.0;
    }
    std::vector<FeatureVector> pts(n);
    for (std::size_t i = 0; i < n; ++i) pts[i] = model.standardize(features[i]);

    // k-means++ seeding
    Rng rng(seed);
    std::vector<FeatureVector> centroids;
    centroids.push_back(pts[rng.index(n)]);
    std::vector<double> d2(n);
    while (centroids.size() < k) {
        double total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = sq_dist(pts[i], centroids[nearest(centroids, pts[i])]);
            total += d2[i];
        }
        const double target = rng.uniform() * total;
        double acc = 0;
        std::size_t pick = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] <= 0) continue;
            acc += d2[i];
            pick = i;
            if (acc >= target) break;
        }
        centroids.push_back(pts[pick]);
    }

    // Lloyd iterations
    std::vector<std::size_t> assignment(n, 0);
    for (std::size_t iter = 0; iter < opts.max_iterations; ++iter) {
        double inertia = 0;
        for (std::size_t i = 0; i < n; ++i) {
            assignment[i] = nearest(centroids, pts[i]);
            inertia += sq_dist(pts[i], centroids[assignment[i]]);
        }
        model.inertia_trace.push_back(inertia);
        model.iterations = iter + 1;

        std::vector<FeatureVector> sums(k, FeatureVector{});
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assignment[i]];
            for (std::size_t d = 0; d < dims; ++d) sums[assignment[i]][d] += pts[i][d];
        }
        double shift = 0;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;  // an empty cluster keeps its centroid
            FeatureVector next{};
            for (std::size_t d = 0; d < dims; ++d) next[d] = sums[c][d] / static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(sq_dist(next, centroids[c])));
            centroids[c] = next;
        }
        if (shift < opts.tolerance) break;
    }

    // Final inertia against the converged centroids.
    double inertia = 0;
    for (std::size_t i = 0; i < n; ++i) inertia += sq_dist(pts[i], centroids[nearest(centroids, pts[i])]);
    if (inertia < model.inertia_trace.back()) model.inertia_trace.push_back(inertia);

    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return centroids[a][0] < centroids[b][0]; });
    for (auto c : order) model.centroids.push_back(centroids[c]);
    if (k == kLabelCount)
        for (std::size_t c = 0; c < k; ++c) model.cluster_to_label.push_back(label_from_index(c));
    return model;
}

nlohmann::json ClusterModel::to_json() const {
    nlohmann::json j;
    j["k"] = k;
    j["centroids"] = centroids;
    j["feature_means"] = feature_means;
    j["feature_stds"] = feature_stds;
    auto labels = nlohmann::json::array();
    for (Label l : cluster_to_label) labels.push_back(std::string(to_string(l)));
    j["cluster_to_label"] = labels;
    auto means = nlohmann::json::array();
    for (std::size_t c = 0; c < k; ++c) means.push_back(cluster_i_score(c));
    j["cluster_mean_i_score"] = means;
    j["inertia_trace"] = inertia_trace;
    j["iterations"] = iterations;
    return j;
}

ClusterModel ClusterModel::from_json(const nlohmann::json& j) {
    try {
        ClusterModel m;
        m.k = j.at("k").get<std::size_t>();
        m.centroids = j.at("centroids").get<std::vector<FeatureVector>>();
        m.feature_means = j.at("feature_means").get<FeatureVector>();
        m.feature_stds = j.at("feature_stds").get<FeatureVector>();
        for (const auto& l : j.at("cluster_to_label")) m.cluster_to_label.push_back(parse_label(l.get<std::string>()));
        m.inertia_trace = j.value("inertia_trace", std::vector<double>{});
        m.iterations = j.value("iterations", std::size_t{0});
        require(m.centroids.size() == m.k, "cluster model centroid count differs from k");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed cluster model: ") + e.what());
    }
}

// ---------------------------------------------------------------------------

std::pair<DatasetManifest, RelabelReport> relabel(const DatasetManifest& m, const ClusterModel& model,
                                                  const FeatureTable& features) {
    require(model.cluster_to_label.size() == kLabelCount && model.k == kLabelCount,
            "relabel needs a k=3 model with a label mapping");
    DatasetManifest out = m;
    RelabelReport report;
    std::array<std::vector<double>, kLabelCount> scores;
    for (auto& r : out.records) {
        const auto it = features.find(r.path);
        require(it != features.end(), "missing features for '" + r.path + "'");
        const Label next = model.label_for(it->second.vector());
        report.entries.push_back({r.path, r.label, next, it->second});
        if (next != r.label) ++report.changes;
        r.label = next;
        scores[label_index(next)].push_back(it->second.i_score);
    }
    bool anova_ok = true;
    for (std::size_t c = 0; c < kLabelCount; ++c) {
        report.per_class.push_back({label_from_index(c), eval::summarize(scores[c])});
        anova_ok = anova_ok && scores[c].size() >= 2;
    }
    if (anova_ok) report.anova = eval::anova_oneway({scores.begin(), scores.end()});
    return {std::move(out), std::move(report)};
}

nlohmann::json RelabelReport::to_json() const {
    nlohmann::json j;
    j["total"] = entries.size();
    j["changes"] = changes;
    j["change_fraction"] = change_fraction();
    auto per = nlohmann::json::array();
    for (const auto& c : per_class)
        per.push_back({{"label", std::string(to_string(c.label))},
                       {"n", c.i_score.n},
                       {"mean_i_score", c.i_score.mean},
                       {"sd_i_score", c.i_score.sd}});
    j["per_class"] = per;
    j["anova"] = anova ? anova->to_json() : nlohmann::json(nullptr);
    auto rows = nlohmann::json::array();
    for (const auto& e : entries)
        rows.push_back({{"path", e.path},
                        {"old_label", std::string(to_string(e.old_label))},
                        {"new_label", std::string(to_string(e.new_label))},
                        {"r_red", e.features.r_red},
                        {"d_vessel", e.features.d_vessel},
                        {"w_sclera", e.features.w_sclera},
                        {"i_score", e.features.i_score}});
    j["entries"] = rows;
    return j;
}

// ---------------------------------------------------------------------------

void write_scores_csv(const std::vector<std::pair<std::string, QualityFeatures>>& rows, std::ostream& out) {
    out << kScoresHeader << '\n';
    for (const auto& [path, f] : rows)
        out << fmt::format("{},{},{},{},{}\n", csv::escape(path), f.r_red, f.d_vessel, f.w_sclera, f.i_score);
}

namespace {

double parse_double(const std::string& s, std::size_t line) {
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
        throw ValidationError("scores line " + std::to_string(line) + ": invalid number '" + s + "'");
    return v;
}

}  // namespace

FeatureTable read_scores_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw ValidationError("scores file is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kScoresHeader) throw ValidationError("scores header must be '" + std::string(kScoresHeader) + "'");
    FeatureTable table;
    std::size_t n = 1;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = csv::split_line(line);
        if (f.size() != 5) throw ValidationError("scores line " + std::to_string(n) + ": expected 5 fields");
        table[f[0]] = {parse_double(f[1], n), parse_double(f[2], n), parse_double(f[3], n), parse_double(f[4], n)};
    }
    return table;
}

FeatureTable read_scores(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scores file " + path.string());
    return read_scores_csv(in);
}

}  // namespace anteriseg::quality
