#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "anteriseg/error.hpp"
#include "anteriseg/filters.hpp"
#include "anteriseg/rng.hpp"
#include "oracles.hpp"

using namespace anteriseg;

namespace {

ImageGray8 step_image(int w, int h, int split, std::uint8_t lo, std::uint8_t hi) {
    ImageGray8 img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = x < split ? lo : hi;
    return img;
}

ImageGray8 checkerboard(int w, int h, int period) {
    ImageGray8 img(w, h);
    const int half = period / 2;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = ((x / half + y / half) % 2) ? 200 : 40;
    return img;
}

double stddev(std::span<const double> v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / v.size());
}

BitMask random_mask(Rng& rng, int w, int h, double p) {
    BitMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (rng.bernoulli(p)) m.set(x, y);
    return m;
}

}  // namespace

// --- Gaussian -------------------------------------------------------------

TEST(Gaussian, KernelIsNormalizedAndSymmetric) {
    const auto k = filters::gaussian_kernel(1.0);
    ASSERT_EQ(k.size(), 7u);
    EXPECT_NEAR(std::accumulate(k.begin(), k.end(), 0.0), 1.0, 1e-12);
    for (std::size_t i = 0; i < k.size(); ++i) EXPECT_DOUBLE_EQ(k[i], k[k.size() - 1 - i]);
    EXPECT_EQ(filters::gaussian_kernel(1.4).size(), 11u);  // radius ceil(4.2) = 5
}

TEST(Gaussian, ConstantStaysConstant) {
    const ImageGray8 img(20, 15, 77);
    for (double s : {0.3, 1.0, 4.0}) EXPECT_EQ(filters::gaussian_blur(img, s), img);
}

TEST(Gaussian, SinglePixelMatchesOuterProduct) {
    ImageGray8 img(21, 21, 0);
    img.at(10, 10) = 255;
    const auto out = filters::gaussian_blur(img, 1.0);
    const auto k = filters::gaussian_kernel(1.0);
    EXPECT_NEAR(out.at(10, 10), 255 * k[3] * k[3], 0.5 + 1e-9);
    EXPECT_EQ(out.at(9, 10), out.at(11, 10));
    EXPECT_EQ(out.at(10, 9), out.at(10, 11));
    EXPECT_EQ(out.at(9, 10), out.at(10, 9));
    EXPECT_NEAR(out.at(11, 10), 255 * k[3] * k[4], 0.5 + 1e-9);
}

TEST(Gaussian, TinySigmaIsNearIdentity) {
    Rng rng(3);
    ImageGray8 img(16, 16);
    for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(rng.index(256));
    const auto out = filters::gaussian_blur(img, 0.01);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) EXPECT_LE(std::abs(out.bytes()[i] - img.bytes()[i]), 1);
}

TEST(Gaussian, RejectsNonPositiveSigma) {
    EXPECT_THROW(filters::gaussian_blur(ImageGray8(4, 4), 0.0), ValidationError);
    EXPECT_THROW(filters::gaussian_blur(ImageGray8(4, 4), -1.0), ValidationError);
}

// --- CLAHE ----------------------------------------------------------------

TEST(Clahe, ConstantImageIsUnchanged) {
    const ImageRGB8 img(64, 48, Rgb{140, 90, 60});
    EXPECT_EQ(filters::clahe_l_channel(img, {2.0, 8, 8}), img);
    const ImageGray8 g(64, 48, 33);
    EXPECT_EQ(filters::clahe_gray(g, {2.0, 8, 8}), g);
}

TEST(Clahe, UnclippedSingleTileIsGlobalEqualization) {
    Rng rng(11);
    ImageGray8 img(50, 40);
    for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(std::clamp(std::lround(rng.normal(110, 25)), 0L, 255L));
    const auto ours = filters::clahe_gray(img, {1e9, 1, 1});
    const auto ref = oracle::equalize_oracle(img);
    for (std::size_t i = 0; i < img.pixel_count(); ++i) ASSERT_LE(std::abs(ours.bytes()[i] - ref.bytes()[i]), 1);

    const auto clip255 = filters::clahe_gray(img, {255.0, 1, 1});
    for (std::size_t i = 0; i < img.pixel_count(); ++i) ASSERT_LE(std::abs(clip255.bytes()[i] - ref.bytes()[i]), 1);
}

TEST(Clahe, LChannelSingleTileEqualizesLightness) {
    // Gray pixels have a = b = 0, so the output lightness level is the
    // equalized input level up to 8-bit RGB quantization.
    Rng rng(12);
    ImageRGB8 img(40, 40);
    ImageGray8 levels(40, 40);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) {
            const auto v = static_cast<std::uint8_t>(60 + rng.index(80));
            img.set(x, y, {v, v, v});
            levels.at(x, y) = static_cast<std::uint8_t>(std::lround(img::rgb_to_lab({v, v, v}).l * 2.55));
        }
    const auto out = filters::clahe_l_channel(img, {255.0, 1, 1});
    const auto ref = oracle::equalize_oracle(levels);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 40; ++x) {
            const Lab lab = img::rgb_to_lab(out.at(x, y));
            ASSERT_NEAR(lab.l * 2.55, ref.at(x, y), 1.5);
            ASSERT_NEAR(lab.a, 0.0, 0.5);
            ASSERT_NEAR(lab.b, 0.0, 0.5);
        }
}

TEST(Clahe, LowContrastGradientGainsContrast) {
    ImageRGB8 img(128, 128);
    std::vector<double> before, after;
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
            const auto v = static_cast<std::uint8_t>(100 + (x + y) / 16);
            img.set(x, y, {v, static_cast<std::uint8_t>(v - 10), static_cast<std::uint8_t>(v - 20)});
        }
    const auto out = filters::clahe_l_channel(img, {2.0, 8, 8});
    for (int y = 0; y < 128; ++y)
        for (int x = 0; x < 128; ++x) {
            before.push_back(img::rgb_to_lab(img.at(x, y)).l);
            after.push_back(img::rgb_to_lab(out.at(x, y)).l);
        }
    EXPECT_GT(stddev(after), stddev(before));
}

TEST(Clahe, TileLutsAreMonotone) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        std::array<std::uint32_t, 256> hist{};
        const std::uint32_t n = 16 + static_cast<std::uint32_t>(rng.index(4000));
        const int spread = 1 + static_cast<int>(rng.index(256));
        const int base = static_cast<int>(rng.index(257 - spread));
        for (std::uint32_t i = 0; i < n; ++i) ++hist[base + rng.index(spread)];
        const double clip = 1.0 + rng.uniform() * 10;
        const auto lut = filters::clahe_tile_lut(std::span<const std::uint32_t, 256>(hist), n, clip);
        ASSERT_TRUE(std::is_sorted(lut.begin(), lut.end())) << "trial " << trial;
    }
}

TEST(Clahe, Errors) {
    EXPECT_THROW(filters::clahe_gray(ImageGray8(4, 4), {2.0, 8, 8}), ValidationError);
    EXPECT_THROW(filters::clahe_gray(ImageGray8(16, 16), {0.5, 2, 2}), ValidationError);
    EXPECT_THROW(filters::clahe_gray(ImageGray8(16, 16), {2.0, 0, 2}), ValidationError);
}

// --- Canny ----------------------------------------------------------------

TEST(Canny, BlankImageHasNoEdges) {
    EXPECT_EQ(filters::canny(ImageGray8(64, 64, 0), {}).count(), 0u);
    EXPECT_EQ(filters::canny(ImageGray8(64, 64, 200), {}).count(), 0u);
}

TEST(Canny, StepEdgeGivesOneThinLine) {
    const auto edges = filters::canny(step_image(256, 256, 128, 40, 200), {});
    EXPECT_EQ(edges.count(), 256u);
    for (int y = 0; y < 256; ++y) {
        int row = 0;
        for (int x = 0; x < 256; ++x) {
            if (!edges.test(x, y)) continue;
            ++row;
            EXPECT_TRUE(x == 127 || x == 128) << x;
        }
        EXPECT_EQ(row, 1) << "row " << y;
    }
}

TEST(Canny, InvariantUnderConstantOffset) {
    Rng rng(8);
    ImageGray8 img(64, 64);
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            img.at(x, y) = static_cast<std::uint8_t>(30 + (x / 8 % 2) * 90 + rng.index(20));
    ImageGray8 shifted = img;
    for (auto& v : shifted.bytes()) v += 50;
    EXPECT_EQ(filters::canny(img, {}), filters::canny(shifted, {}));
}

TEST(Canny, CheckerboardBeatsBlurredCheckerboard) {
    const auto board = checkerboard(128, 128, 16);
    const auto blurred = filters::gaussian_blur(board, 4.0);
    EXPECT_GT(filters::canny(board, {}).count(), filters::canny(blurred, {}).count());
}

TEST(Canny, RejectsBadThresholds) {
    EXPECT_THROW(filters::canny(ImageGray8(8, 8), {1.4, 0.0, 10.0}), ValidationError);
    EXPECT_THROW(filters::canny(ImageGray8(8, 8), {1.4, 20.0, 10.0}), ValidationError);
}

// --- Dilation -------------------------------------------------------------

TEST(Dilate, Examples) {
    EXPECT_TRUE(filters::dilate(BitMask(10, 10), 5).none());
    EXPECT_TRUE(filters::dilate(BitMask(10, 10, true), 5).all());

    BitMask one(10, 10);
    one.set(5, 5);
    const auto block = filters::dilate(one, 5);
    EXPECT_EQ(block.count(), 25u);
    for (int y = 3; y <= 7; ++y)
        for (int x = 3; x <= 7; ++x) EXPECT_TRUE(block.test(x, y));

    BitMask corner(10, 10);
    corner.set(0, 0);
    EXPECT_EQ(filters::dilate(corner, 5).count(), 9u);
    EXPECT_EQ(filters::dilate(one, 1), one);
}

TEST(Dilate, ExtensiveAndMonotoneInK) {
    Rng rng(21);
    for (int i = 0; i < 1000; ++i) {
        const int w = 1 + static_cast<int>(rng.index(24)), h = 1 + static_cast<int>(rng.index(24));
        const BitMask m = random_mask(rng, w, h, rng.uniform(0, 0.2));
        const int k = 1 + 2 * static_cast<int>(rng.index(4));
        const auto d = filters::dilate(m, k);
        ASSERT_TRUE(m.subset_of(d));
        ASSERT_TRUE(d.subset_of(filters::dilate(m, k + 2)));
    }
}

TEST(Dilate, RejectsEvenKernel) {
    EXPECT_THROW(filters::dilate(BitMask(4, 4), 4), ValidationError);
    EXPECT_THROW(filters::dilate(BitMask(4, 4), 0), ValidationError);
}

// --- Telea ----------------------------------------------------------------

TEST(Telea, EmptyMaskIsIdentity) {
    Rng rng(31);
    ImageRGB8 img(20, 20);
    for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(rng.index(256));
    EXPECT_EQ(filters::inpaint_telea(img, BitMask(20, 20), 3), img);
}

TEST(Telea, ConstantImageHoleRefills) {
    const ImageRGB8 img(24, 24, Rgb{90, 120, 150});
    ImageRGB8 holed = img;
    BitMask mask(24, 24);
    for (int y = 9; y < 15; ++y)
        for (int x = 9; x < 15; ++x) {
            mask.set(x, y);
            holed.set(x, y, {255, 255, 255});
        }
    const auto out = filters::inpaint_telea(holed, mask, 3);
    for (std::size_t i = 0; i < out.bytes().size(); ++i) EXPECT_LE(std::abs(out.bytes()[i] - img.bytes()[i]), 1);
}

TEST(Telea, RampHoleWithinFive) {
    ImageRGB8 img(32, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 32; ++x) {
            const auto v = static_cast<std::uint8_t>(40 + 5 * x);
            img.set(x, y, {v, v, v});
        }
    ImageRGB8 holed = img;
    BitMask mask(32, 16);
    for (int y = 6; y < 10; ++y)
        for (int x = 14; x < 18; ++x) {
            mask.set(x, y);
            holed.set(x, y, {0, 0, 0});
        }
    const auto out = filters::inpaint_telea(holed, mask, 3);
    for (int y = 6; y < 10; ++y)
        for (int x = 14; x < 18; ++x) EXPECT_LE(std::abs(out.at(x, y).r - img.at(x, y).r), 5) << x << "," << y;
}

TEST(Telea, NeverTouchesUnmaskedPixels) {
    Rng rng(41);
    for (int trial = 0; trial < 20; ++trial) {
        ImageRGB8 img(30, 20);
        for (auto& v : img.bytes()) v = static_cast<std::uint8_t>(rng.index(256));
        const BitMask mask = random_mask(rng, 30, 20, 0.15);
        if (mask.all()) continue;
        const auto out = filters::inpaint_telea(img, mask, 1 + static_cast<int>(rng.index(5)));
        for (int y = 0; y < 20; ++y)
            for (int x = 0; x < 30; ++x)
                if (!mask.test(x, y)) ASSERT_EQ(out.at(x, y), img.at(x, y));
    }
}

TEST(Telea, Errors) {
    EXPECT_THROW(filters::inpaint_telea(ImageRGB8(4, 4), BitMask(4, 4, true), 3), ValidationError);
    EXPECT_THROW(filters::inpaint_telea(ImageRGB8(4, 4), BitMask(5, 4), 3), ValidationError);
    EXPECT_THROW(filters::inpaint_telea(ImageRGB8(4, 4), BitMask(4, 4), 0), ValidationError);
}

// --- Resize ---------------------------------------------------------------

TEST(Resize, HandFixture) {
    const Tensor32 t({2, 2}, std::vector<float>{0, 1, 0, 1});
    const auto r = filters::resize_bilinear(t, 2, 4);
    const std::vector<float> want{0, 0.25f, 0.75f, 1, 0, 0.25f, 0.75f, 1};
    ASSERT_EQ(r.shape(), (std::vector<std::size_t>{2, 4}));
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_FLOAT_EQ(r[i], want[i]);
}

TEST(Resize, IdentityAndConstant) {
    Rng rng(51);
    std::vector<float> v(35);
    for (auto& x : v) x = static_cast<float>(rng.uniform());
    const Tensor32 t({5, 7}, v);
    EXPECT_EQ(filters::resize_bilinear(t, 5, 7), t);

    const auto c = filters::resize_bilinear(Tensor32({1, 1}, std::vector<float>{0.3f}), 9, 4);
    for (float x : c.values()) EXPECT_FLOAT_EQ(x, 0.3f);
}

TEST(Resize, MatchesOracleOnRandomMaps) {
    Rng rng(52);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 1 + rng.index(8), w = 1 + rng.index(8);
        const std::size_t oh = 1 + rng.index(40), ow = 1 + rng.index(40);
        std::vector<float> v(h * w);
        std::vector<double> vd(h * w);
        for (std::size_t i = 0; i < v.size(); ++i) vd[i] = v[i] = static_cast<float>(rng.uniform());
        const auto ours = filters::resize_bilinear(Tensor32({h, w}, v), oh, ow);
        const auto ref = oracle::bilinear_oracle(vd, h, w, oh, ow);
        for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(ours[i], ref[i], 1e-6);
    }
}
