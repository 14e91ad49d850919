#include "anteriseg/xai.hpp"

#include <algorithm>
#include <cmath>

#include "anteriseg/error.hpp"

namespace anteriseg::xai {

namespace {

void check_chw(const Tensor32& t, const char* what) {
    require(t.rank() == 3, std::string(what) + " must be a rank-3 tensor [K,h,w]");
    require(t.dim(0) >= 1 && t.dim(1) >= 1 && t.dim(2) >= 1, std::string(what) + " has an empty dimension");
    require(t.count_non_finite() == 0, std::string(what) + " contains non-finite values");
}

// Bilinear resample with half-pixel centres, computed in double.
std::vector<double> upsample(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t oh,
                             std::size_t ow) {
    if (oh == h && ow == w) return src;
    std::vector<double> out(oh * ow);
    const double sy = static_cast<double>(h) / static_cast<double>(oh);
    const double sx = static_cast<double>(w) / static_cast<double>(ow);
    for (std::size_t y = 0; y < oh; ++y) {
        const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
        const std::size_t y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, h - 1);
        const double ty = fy - static_cast<double>(y0);
        for (std::size_t x = 0; x < ow; ++x) {
            const double fx =
                std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(w - 1));
            const std::size_t x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, w - 1);
            const double tx = fx - static_cast<double>(x0);
            const double top = src[y0 * w + x0] * (1 - tx) + src[y0 * w + x1] * tx;
            const double bot = src[y1 * w + x0] * (1 - tx) + src[y1 * w + x1] * tx;
            out[y * ow + x] = top * (1 - ty) + bot * ty;
        }
    }
    return out;
}

std::vector<double> normalize(std::vector<double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double mn = *lo, mx = *hi;
    if (mx <= 0) {
        std::fill(v.begin(), v.end(), 0.0);
    } else if (mx == mn) {
        std::fill(v.begin(), v.end(), 1.0);
    } else {
        for (double& x : v) x = (x - mn) / (mx - mn);
    }
    return v;
}

Tensor32 to_tensor(const std::vector<double>& v, std::size_t h, std::size_t w) {
    std::vector<float> f(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) f[i] = static_cast<float>(v[i]);
    return Tensor32({h, w}, std::move(f));
}

std::vector<double> weighted_sum(const GradCamInput& in) {
    check_chw(in.feature_maps, "feature maps");
    check_chw(in.gradients, "gradients");
    require(in.feature_maps.shape() == in.gradients.shape(), "feature map and gradient shapes differ");
    const std::vector<double> alpha = channel_weights(in.gradients);
    const std::size_t plane = in.feature_maps.dim(1) * in.feature_maps.dim(2);
    std::vector<double> sum(plane, 0.0);
    for (std::size_t k = 0; k < alpha.size(); ++k)
        for (std::size_t i = 0; i < plane; ++i)
            sum[i] += alpha[k] * static_cast<double>(in.feature_maps[k * plane + i]);
    for (double& v : sum) v = std::max(v, 0.0);
    return sum;
}

}  // namespace

std::vector<double> channel_weights(const Tensor32& gradients) {
    check_chw(gradients, "gradients");
    const std::size_t k = gradients.dim(0), plane = gradients.dim(1) * gradients.dim(2);
    std::vector<double> alpha(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        double s = 0;
        for (std::size_t i = 0; i < plane; ++i) s += static_cast<double>(gradients[c * plane + i]);
        alpha[c] = s / static_cast<double>(plane);
    }
    return alpha;
}

Tensor32 grad_cam_raw(const GradCamInput& in) {
    return to_tensor(weighted_sum(in), in.feature_maps.dim(1), in.feature_maps.dim(2));
}

AttentionMap grad_cam(const GradCamInput& in, std::size_t out_h, std::size_t out_w) {
    require(out_h >= 1 && out_w >= 1, "output size must be positive");
    const std::size_t h = in.feature_maps.rank() == 3 ? in.feature_maps.dim(1) : 0;
    const std::size_t w = in.feature_maps.rank() == 3 ? in.feature_maps.dim(2) : 0;
    const std::vector<double> raw = weighted_sum(in);
    return {to_tensor(normalize(upsample(raw, h, w, out_h, out_w)), out_h, out_w)};
}

Tensor32 normalize_heatmap(const Tensor32& t) {
    require(t.rank() == 2, "heatmap must be rank 2");
    require(t.count_non_finite() == 0, "heatmap contains non-finite values");
    std::vector<double> v(t.values().begin(), t.values().end());
    return to_tensor(normalize(std::move(v)), t.dim(0), t.dim(1));
}

std::string_view to_string(Region r) {
    switch (r) {
        case Region::Iris: return "iris";
        case Region::Sclera: return "sclera";
        case Region::Peripheral: return "peripheral";
    }
    return "?";
}

RegionMasks::RegionMasks(int height, int width) : height_(height), width_(width) {
    require(height >= 8 && width >= 8, "region masks need a frame of at least 8x8");
    labels_.resize(static_cast<std::size_t>(height) * width);
    const double sx = width / kReference, sy = height / kReference;
    const double cx = width / 2.0, cy = height / 2.0;
    for (int y = 0; y < height; ++y) {
        const double dy = (y + 0.5 - cy) / sy;
        for (int x = 0; x < width; ++x) {
            const double dx = (x + 0.5 - cx) / sx;
            const double iris = (dx / kIrisA) * (dx / kIrisA) + (dy / kIrisB) * (dy / kIrisB);
            const double outer = (dx / kScleraA) * (dx / kScleraA) + (dy / kScleraB) * (dy / kScleraB);
            Region r = Region::Peripheral;
            if (iris <= 1.0)
                r = Region::Iris;
            else if (outer <= 1.0 && dx * dx + dy * dy > kInnerRadius * kInnerRadius)
                r = Region::Sclera;
            labels_[static_cast<std::size_t>(y) * width + x] = r;
        }
    }
}

BitMask RegionMasks::mask(Region r) const {
    BitMask m(width_, height_);
    for (int y = 0; y < height_; ++y)
        for (int x = 0; x < width_; ++x)
            if (at(x, y) == r) m.set(x, y);
    return m;
}

std::size_t RegionMasks::count(Region r) const {
    return static_cast<std::size_t>(std::count(labels_.begin(), labels_.end(), r));
}

RegionMasks region_masks(int height, int width) { return RegionMasks(height, width); }

RegionalAttention regional_attention(const AttentionMap& map, const RegionMasks& masks) {
    require(map.heatmap.rank() == 2, "heatmap must be rank 2");
    require(map.height() == static_cast<std::size_t>(masks.height()) &&
                map.width() == static_cast<std::size_t>(masks.width()),
            "heatmap and region mask dimensions differ");
    std::array<double, kRegionCount> sum{};
    std::array<std::size_t, kRegionCount> n{};
    for (int y = 0; y < masks.height(); ++y)
        for (int x = 0; x < masks.width(); ++x) {
            const auto r = static_cast<std::size_t>(masks.at(x, y));
            sum[r] += map.heatmap.at(y, x);
            ++n[r];
        }
    RegionalAttention out;
    for (std::size_t r = 0; r < kRegionCount; ++r) out.mean[r] = n[r] ? sum[r] / static_cast<double>(n[r]) : 0.0;
    return out;
}

std::array<double, 3> jet(double v) {
    v = std::clamp(v, 0.0, 1.0);
    auto ramp = [&](double c) { return std::clamp(1.5 - std::fabs(4.0 * v - c), 0.0, 1.0); };
    return {ramp(3.0), ramp(2.0), ramp(1.0)};
}

ImageRGB8 overlay(const ImageRGB8& img, const AttentionMap& map, double alpha) {
    require(alpha >= 0 && alpha <= 1, "alpha must lie in [0, 1]");
    require(map.heatmap.rank() == 2, "heatmap must be rank 2");
    const auto h = static_cast<std::size_t>(img.height()), w = static_cast<std::size_t>(img.width());
    std::vector<double> heat(map.heatmap.values().begin(), map.heatmap.values().end());
    heat = upsample(heat, map.height(), map.width(), h, w);
    ImageRGB8 out = img;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
            const auto c = jet(heat[y * w + x]);
            const Rgb p = img.at(static_cast<int>(x), static_cast<int>(y));
            auto mix = [&](std::uint8_t v, double col) {
                return static_cast<std::uint8_t>(std::lround((1 - alpha) * v + alpha * 255.0 * col));
            };
            out.set(static_cast<int>(x), static_cast<int>(y), {mix(p.r, c[0]), mix(p.g, c[1]), mix(p.b, c[2])});
        }
    return out;
}

nlohmann::json CohortReport::to_json() const {
    nlohmann::json j;
    j["classes"] = nlohmann::json::array();
    for (Label l : classes) j["classes"].push_back(std::string(anteriseg::to_string(l)));
    j["regions"] = nlohmann::json::array();
    for (const auto& r : regions) {
        nlohmann::json jr;
        jr["region"] = std::string(to_string(r.region));
        jr["per_class"] = nlohmann::json::array();
        for (const auto& c : r.per_class)
            jr["per_class"].push_back(
                {{"label", std::string(anteriseg::to_string(c.label))}, {"n", c.stats.n}, {"mean", c.stats.mean},
                 {"sd", c.stats.sd}});
        jr["kruskal_wallis"] = r.kruskal_wallis.to_json();
        jr["dunn"] = nlohmann::json::array();
        for (const auto& d : r.dunn) jr["dunn"].push_back(d.to_json());
        j["regions"].push_back(std::move(jr));
    }
    j["sclera_ordering"] = sclera_ordering;
    return j;
}

CohortReport attention_cohort_report(const std::vector<RegionalAttention>& items) {
    constexpr std::array<Label, 3> kOrder{Label::Normal, Label::Controlled, Label::Uncontrolled};
    std::array<std::vector<const RegionalAttention*>, 3> by_class;
    for (const auto& it : items) {
        require(it.label.has_value(), "attention record without a class label");
        by_class[static_cast<std::size_t>(std::find(kOrder.begin(), kOrder.end(), *it.label) - kOrder.begin())]
            .push_back(&it);
    }
    CohortReport rep;
    for (std::size_t c = 0; c < 3; ++c)
        if (!by_class[c].empty()) rep.classes.push_back(kOrder[c]);
    require(rep.classes.size() >= 2, "attention cohort needs at least two classes");
    for (std::size_t c = 0; c < 3; ++c)
        require(by_class[c].empty() || by_class[c].size() >= 2,
                "insufficient samples: class " + std::string(anteriseg::to_string(kOrder[c])) +
                    " has fewer than 2 images");

    std::vector<std::string> names;
    for (Label l : rep.classes) names.emplace_back(anteriseg::to_string(l));
    for (std::size_t r = 0; r < kRegionCount; ++r) {
        RegionReport rr{static_cast<Region>(r), {}, {}, {}};
        eval::Groups groups;
        for (std::size_t c = 0; c < 3; ++c) {
            if (by_class[c].empty()) continue;
            std::vector<double> v;
            for (const auto* it : by_class[c]) v.push_back(it->mean[r]);
            rr.per_class.push_back({kOrder[c], eval::summarize(v)});
            groups.push_back(std::move(v));
        }
        rr.kruskal_wallis = eval::kruskal_wallis(groups);
        rr.kruskal_wallis.label = std::string(to_string(rr.region));
        rr.dunn = eval::dunn_posthoc(groups, names);
        rep.regions.push_back(std::move(rr));
    }
    if (rep.classes.size() == 3) {
        const auto& s = rep.regions[static_cast<std::size_t>(Region::Sclera)].per_class;
        rep.sclera_ordering = s[0].stats.mean < s[1].stats.mean && s[1].stats.mean < s[2].stats.mean;
    }
    return rep;
}

}  // namespace anteriseg::xai
