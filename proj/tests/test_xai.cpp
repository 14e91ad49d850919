#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "anteriseg/error.hpp"
#include "anteriseg/synth.hpp"
#include "anteriseg/xai.hpp"
#include "oracles.hpp"

using namespace anteriseg;
using namespace anteriseg::xai;

namespace {

Tensor32 random_chw(Rng& rng, std::size_t k, std::size_t h, std::size_t w, double lo, double hi) {
    Tensor32 t({k, h, w});
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform(lo, hi));
    return t;
}

AttentionMap constant_map(std::size_t h, std::size_t w, float v) {
    return {Tensor32({h, w}, v)};
}

}  // namespace

TEST(GradCam, ZeroGradientGivesZeroMap) {
    Rng rng(1);
    const GradCamInput in{random_chw(rng, 4, 7, 7, 0, 2), Tensor32({4, 7, 7})};
    const auto m = grad_cam(in, 28, 28);
    for (float v : m.heatmap.values()) EXPECT_EQ(v, 0.0f);
}

TEST(GradCam, SingleChannelUnitGradient) {
    Rng rng(2);
    const Tensor32 a = random_chw(rng, 1, 5, 6, 0, 3);
    const GradCamInput in{a, Tensor32({1, 5, 6}, 1.0f)};
    const auto m = grad_cam(in, 20, 24);

    std::vector<double> fm(a.values().begin(), a.values().end());
    const auto want = oracle::minmax_oracle(oracle::bilinear_oracle(fm, 5, 6, 20, 24));
    for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(m.heatmap[i], want[i], 1e-6);
}

TEST(GradCam, TwoChannelHandFixture) {
    // A1 = [[1,2],[3,4]], A2 = [[4,3],[2,1]], alpha = (0.5, -0.25)
    // raw = 0.5*A1 - 0.25*A2 = [[-0.5, 0.25],[1, 1.75]] -> ReLU -> [[0, 0.25],[1, 1.75]]
    const Tensor32 a({2, 2, 2}, std::vector<float>{1, 2, 3, 4, 4, 3, 2, 1});
    const Tensor32 g({2, 2, 2}, std::vector<float>{0.5f, 0.5f, 0.5f, 0.5f, -0.5f, 0, 0, -0.5f});
    const GradCamInput in{a, g};
    const auto w = channel_weights(g);
    EXPECT_DOUBLE_EQ(w[0], 0.5);
    EXPECT_DOUBLE_EQ(w[1], -0.25);
    const auto raw = grad_cam_raw(in);
    EXPECT_EQ(raw.values()[0], 0.0f);
    EXPECT_EQ(raw.values()[1], 0.25f);
    EXPECT_EQ(raw.values()[2], 1.0f);
    EXPECT_EQ(raw.values()[3], 1.75f);
    const auto m = grad_cam(in, 2, 2);
    EXPECT_EQ(m.heatmap[0], 0.0f);
    EXPECT_EQ(m.heatmap[1], static_cast<float>(0.25 / 1.75));
    EXPECT_EQ(m.heatmap[2], static_cast<float>(1.0 / 1.75));
    EXPECT_EQ(m.heatmap[3], 1.0f);
}

TEST(GradCam, JointPositiveScalingInvariance) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor32 a = random_chw(rng, 3, 4, 4, -1, 2), g = random_chw(rng, 3, 4, 4, -1, 1);
        Tensor32 a2 = a, g2 = g;
        const float s = static_cast<float>(rng.uniform(0.5, 4.0)), t = static_cast<float>(rng.uniform(0.5, 4.0));
        for (auto& v : a2.values()) v *= s;
        for (auto& v : g2.values()) v *= t;
        const auto m1 = grad_cam({a, g}, 16, 16), m2 = grad_cam({a2, g2}, 16, 16);
        for (std::size_t i = 0; i < m1.heatmap.size(); ++i) ASSERT_NEAR(m1.heatmap[i], m2.heatmap[i], 1e-6);
    }
}

TEST(GradCam, ReluZerosNonPositiveEvidence) {
    Rng rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor32 a = random_chw(rng, 3, 6, 6, -1, 1), g = random_chw(rng, 3, 6, 6, -1, 1);
        const auto w = channel_weights(g);
        const auto raw = grad_cam_raw({a, g});
        const auto m = grad_cam({a, g}, 6, 6);
        for (std::size_t p = 0; p < 36; ++p) {
            double s = 0;
            for (std::size_t k = 0; k < 3; ++k) s += w[k] * a[k * 36 + p];
            if (s <= 0) {
                ASSERT_EQ(raw[p], 0.0f);
                ASSERT_EQ(m.heatmap[p], 0.0f);
            }
            ASSERT_GE(m.heatmap[p], 0.0f);
            ASSERT_LE(m.heatmap[p], 1.0f);
        }
    }
}

TEST(GradCam, ShapeErrors) {
    EXPECT_THROW(grad_cam({Tensor32({2, 3, 3}), Tensor32({2, 3, 4})}, 8, 8), ValidationError);
    EXPECT_THROW(grad_cam({Tensor32({3, 3}), Tensor32({3, 3})}, 8, 8), ValidationError);
}

TEST(Normalize, ConstantMaps) {
    const auto z = normalize_heatmap(Tensor32({3, 3}, 0.0f));
    for (float v : z.values()) EXPECT_EQ(v, 0.0f);
    const auto c = normalize_heatmap(Tensor32({3, 3}, 0.4f));
    for (float v : c.values()) EXPECT_EQ(v, 1.0f);
}

TEST(Regions, IrisAreaMatchesEllipse) {
    const RegionMasks m(224, 224);
    const double area = std::numbers::pi * 55 * 45;
    EXPECT_NEAR(static_cast<double>(m.count(Region::Iris)), area, 0.02 * area);
}

TEST(Regions, PartitionEveryFrame) {
    for (auto [h, w] : std::vector<std::pair<int, int>>{{8, 8}, {224, 224}, {96, 128}, {301, 157}, {448, 448}}) {
        const RegionMasks m(h, w);
        const auto iris = m.mask(Region::Iris), sclera = m.mask(Region::Sclera), per = m.mask(Region::Peripheral);
        std::size_t total = 0;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const int n = iris.test(x, y) + sclera.test(x, y) + per.test(x, y);
                ASSERT_EQ(n, 1);
                ++total;
            }
        EXPECT_EQ(m.count(Region::Iris) + m.count(Region::Sclera) + m.count(Region::Peripheral), total);
    }
    EXPECT_THROW(RegionMasks(7, 100), ValidationError);
}

TEST(Regions, ScaleWithFrame) {
    const RegionMasks small(224, 224), big(448, 448);
    for (Region r : {Region::Iris, Region::Sclera, Region::Peripheral}) {
        const double s = static_cast<double>(small.count(r)), b = static_cast<double>(big.count(r));
        EXPECT_NEAR(b, 4 * s, 0.02 * 4 * s) << to_string(r);
    }
}

TEST(Regions, GeometryAtReference) {
    const RegionMasks m(224, 224);
    EXPECT_EQ(m.at(112, 112), Region::Iris);
    // dx = 58.5: outside the iris but inside the r = 60 inner circle
    EXPECT_EQ(m.at(112 + 58, 112), Region::Peripheral);
    EXPECT_EQ(m.at(112 + 70, 112), Region::Sclera);
    EXPECT_EQ(m.at(112 + 105, 112), Region::Peripheral);
    EXPECT_EQ(m.at(0, 0), Region::Peripheral);
}

TEST(RegionalAttention, Examples) {
    const RegionMasks masks(64, 80);
    const auto u = regional_attention(constant_map(64, 80, 0.5f), masks);
    for (double v : u.mean) EXPECT_DOUBLE_EQ(v, 0.5);

    Tensor32 t({64, 80});
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 80; ++x) t.at(y, x) = masks.at(x, y) == Region::Sclera ? 1.0f : 0.0f;
    const auto s = regional_attention({t}, masks);
    EXPECT_DOUBLE_EQ(s.sclera(), 1.0);
    EXPECT_DOUBLE_EQ(s.iris(), 0.0);
    EXPECT_DOUBLE_EQ(s.peripheral(), 0.0);

    EXPECT_THROW(regional_attention(constant_map(64, 81, 0.5f), masks), ValidationError);
}

TEST(RegionalAttention, LinearInHeatmap) {
    Rng rng(6);
    const RegionMasks masks(32, 32);
    Tensor32 t({32, 32});
    for (auto& v : t.values()) v = static_cast<float>(rng.uniform());
    const auto base = regional_attention({t}, masks);
    for (double a : {0.0, 0.25, 0.5, 1.0}) {
        Tensor32 s = t;
        for (auto& v : s.values()) v = static_cast<float>(v * a);
        const auto r = regional_attention({s}, masks);
        for (std::size_t i = 0; i < kRegionCount; ++i) EXPECT_NEAR(r.mean[i], a * base.mean[i], 1e-6);
    }
}

TEST(Overlay, BlendRule) {
    const ImageRGB8 img(6, 4, Rgb{100, 150, 200});
    Tensor32 t({4, 6}, 0.0f);
    t.at(1, 2) = 0.75f;
    const AttentionMap map{t};
    EXPECT_EQ(overlay(img, map, 0.0), img);

    const auto cold = overlay(img, constant_map(4, 6, 0.0f), 1.0);
    const auto j0 = jet(0.0);
    EXPECT_EQ(cold.at(0, 0), (Rgb{static_cast<std::uint8_t>(std::lround(255 * j0[0])),
                                  static_cast<std::uint8_t>(std::lround(255 * j0[1])),
                                  static_cast<std::uint8_t>(std::lround(255 * j0[2]))}));
    EXPECT_EQ(cold.at(0, 0), (Rgb{0, 0, 128}));

    const auto out = overlay(img, map, 0.4);
    const auto c = jet(0.75);
    EXPECT_EQ(out.at(2, 1).r, std::lround(0.6 * 100 + 0.4 * 255 * c[0]));
    EXPECT_EQ(out.at(2, 1).g, std::lround(0.6 * 150 + 0.4 * 255 * c[1]));
    EXPECT_EQ(out.at(2, 1).b, std::lround(0.6 * 200 + 0.4 * 255 * c[2]));
    EXPECT_THROW(overlay(img, map, 1.5), ValidationError);
}

TEST(Overlay, UpsamplesSmallMaps) {
    const ImageRGB8 img(16, 16, Rgb{10, 10, 10});
    const auto out = overlay(img, constant_map(4, 4, 1.0f), 1.0);
    EXPECT_EQ(out.width(), 16);
    const auto hot = jet(1.0);
    EXPECT_EQ(out.at(15, 15).r, std::lround(255 * hot[0]));
}

TEST(Jet, Endpoints) {
    const auto lo = jet(0.0), mid = jet(0.5), hi = jet(1.0);
    EXPECT_DOUBLE_EQ(lo[0], 0.0);
    EXPECT_DOUBLE_EQ(lo[2], 0.5);
    EXPECT_DOUBLE_EQ(mid[1], 1.0);
    EXPECT_DOUBLE_EQ(hi[0], 0.5);
    EXPECT_DOUBLE_EQ(hi[2], 0.0);
}

TEST(Cohort, ReferenceMeansGiveSignificantOrderedReport) {
    const auto cohort = synth::attention_cohort(40, 112, 112, 9);
    const auto rep = attention_cohort_report(cohort.attention);
    EXPECT_TRUE(rep.sclera_ordering);
    ASSERT_EQ(rep.regions.size(), 3u);
    const auto& sclera = rep.regions[static_cast<std::size_t>(Region::Sclera)];
    EXPECT_EQ(sclera.region, Region::Sclera);
    EXPECT_LT(sclera.kruskal_wallis.p_value, 1e-3);
    EXPECT_EQ(sclera.dunn.size(), 3u);
    EXPECT_NEAR(sclera.per_class[0].stats.mean, 0.152, 0.02);
    EXPECT_NEAR(sclera.per_class[2].stats.mean, 0.476, 0.02);
    EXPECT_TRUE(rep.to_json().contains("sclera_ordering"));
}

TEST(Cohort, IdenticalImagesGiveNullStatistics) {
    std::vector<RegionalAttention> items;
    for (int i = 0; i < 9; ++i) {
        RegionalAttention r;
        r.mean = {0.3, 0.2, 0.1};
        r.label = label_from_index(i % 3);
        items.push_back(r);
    }
    const auto rep = attention_cohort_report(items);
    for (const auto& reg : rep.regions) {
        EXPECT_DOUBLE_EQ(reg.kruskal_wallis.statistic, 0.0);
        EXPECT_DOUBLE_EQ(reg.kruskal_wallis.p_value, 1.0);
    }
    EXPECT_FALSE(rep.sclera_ordering);
}

TEST(Cohort, Errors) {
    std::vector<RegionalAttention> one_each;
    for (int i = 0; i < 3; ++i) {
        RegionalAttention r;
        r.label = label_from_index(i);
        one_each.push_back(r);
    }
    try {
        attention_cohort_report(one_each);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("insufficient samples"), std::string::npos);
    }
    std::vector<RegionalAttention> single(4);
    for (auto& r : single) r.label = Label::Normal;
    EXPECT_THROW(attention_cohort_report(single), ValidationError);
}
