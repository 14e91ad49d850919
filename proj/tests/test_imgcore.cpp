#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "anteriseg/error.hpp"
#include "anteriseg/imgcore.hpp"
#include "anteriseg/rng.hpp"
#include "reference_values.hpp"

using namespace anteriseg;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("anteriseg_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST(Hsv, PrimaryAndGrayExamples) {
    const Hsv red = img::rgb_to_hsv({255, 0, 0});
    EXPECT_DOUBLE_EQ(red.h, 0.0);
    EXPECT_DOUBLE_EQ(red.s, 1.0);
    EXPECT_DOUBLE_EQ(red.v, 1.0);

    const Hsv gray = img::rgb_to_hsv({128, 128, 128});
    EXPECT_DOUBLE_EQ(gray.h, 0.0);
    EXPECT_DOUBLE_EQ(gray.s, 0.0);
    EXPECT_NEAR(gray.v, 0.50196, 1e-5);

    const Hsv orange = img::rgb_to_hsv({255, 128, 0});
    EXPECT_NEAR(orange.h, 30.12, 0.005);
    EXPECT_DOUBLE_EQ(orange.s, 1.0);
}

TEST(Colour, SixteenColourReferenceTable) {
    for (const auto& c : oracle::kColourTable) {
        const Rgb px{static_cast<std::uint8_t>(c.r), static_cast<std::uint8_t>(c.g), static_cast<std::uint8_t>(c.b)};
        const Hsv hsv = img::rgb_to_hsv(px);
        const Lab lab = img::rgb_to_lab(px);
        SCOPED_TRACE(::testing::Message() << c.r << "," << c.g << "," << c.b);
        EXPECT_NEAR(hsv.h, c.h, 0.01);
        EXPECT_NEAR(hsv.s, c.s, 0.01);
        EXPECT_NEAR(hsv.v, c.v, 0.01);
        EXPECT_NEAR(lab.l, c.l, 0.01);
        EXPECT_NEAR(lab.a, c.a, 0.01);
        EXPECT_NEAR(lab.b, c.bb, 0.01);
    }
}

TEST(Lab, WhiteBlackRed) {
    const Lab white = img::rgb_to_lab({255, 255, 255});
    EXPECT_NEAR(white.l, 100.0, 1e-4);
    EXPECT_NEAR(white.a, 0.0, 0.01);
    EXPECT_NEAR(white.b, 0.0, 0.01);
    const Lab black = img::rgb_to_lab({0, 0, 0});
    EXPECT_DOUBLE_EQ(black.l, 0.0);
    EXPECT_NEAR(black.a, 0.0, 1e-12);
    EXPECT_NEAR(black.b, 0.0, 1e-12);
    const Lab red = img::rgb_to_lab({255, 0, 0});
    EXPECT_NEAR(red.l, 53.24, 0.01);
    EXPECT_NEAR(red.a, 80.09, 0.01);
    EXPECT_NEAR(red.b, 67.20, 0.01);
}

TEST(Hsv, InverseWithinOneOnSubsampledCube) {
    for (int r = 0; r < 256; r += 17)
        for (int g = 0; g < 256; g += 17)
            for (int b = 0; b < 256; b += 17) {
                const Rgb px{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
                const Rgb back = img::hsv_to_rgb(img::rgb_to_hsv(px));
                ASSERT_LE(std::abs(back.r - r), 1);
                ASSERT_LE(std::abs(back.g - g), 1);
                ASSERT_LE(std::abs(back.b - b), 1);
            }
}

TEST(Lab, InverseRoundTrip) {
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
        const Rgb px{static_cast<std::uint8_t>(rng.index(256)), static_cast<std::uint8_t>(rng.index(256)),
                     static_cast<std::uint8_t>(rng.index(256))};
        const Rgb back = img::lab_to_rgb(img::rgb_to_lab(px));
        EXPECT_LE(std::abs(back.r - px.r), 1);
        EXPECT_LE(std::abs(back.g - px.g), 1);
        EXPECT_LE(std::abs(back.b - px.b), 1);
    }
}

TEST(Grayscale, LumaExamples) {
    EXPECT_EQ(img::luma({255, 0, 0}), 76);
    EXPECT_EQ(img::luma({0, 255, 0}), 150);
    const ImageGray8 g = img::to_grayscale(ImageRGB8(4, 3, Rgb{10, 10, 10}));
    for (auto v : g.bytes()) EXPECT_EQ(v, 10);
    for (int v = 0; v < 256; ++v) {
        const auto u = static_cast<std::uint8_t>(v);
        EXPECT_EQ(img::luma({u, u, u}), v);
    }
}

TEST(Tensor, RoundTripIsByteExact) {
    const Tensor32 t({2, 2}, std::vector<float>{1, 2, 3, 4});
    const auto bytes = img::encode_tensor(t);
    EXPECT_EQ(img::decode_tensor(bytes), t);
    EXPECT_EQ(img::encode_tensor(img::decode_tensor(bytes)), bytes);

    const fs::path dir = temp_dir("tensor");
    Rng rng(2);
    std::vector<float> v(3 * 5 * 7);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    const Tensor32 big({3, 5, 7}, v);
    img::write_tensor(big, dir / "t.atns");
    EXPECT_EQ(img::read_tensor(dir / "t.atns"), big);
}

TEST(Tensor, HeaderLayout) {
    const auto bytes = img::encode_tensor(Tensor32({1, 2}, std::vector<float>{1.0f, -2.0f}));
    const std::string head(bytes.begin(), bytes.begin() + 6);
    EXPECT_EQ(head, "ATNS1\n");
    const std::string text(bytes.begin(), bytes.end());
    EXPECT_NE(text.find("{\"dtype\":\"f32\",\"shape\":[1,2]}\n"), std::string::npos);
    EXPECT_EQ(bytes.size(), text.find("]}\n") + 3 + 8);
    // 1.0f little-endian
    const std::size_t payload = bytes.size() - 8;
    EXPECT_EQ(bytes[payload + 3], 0x3F);
    EXPECT_EQ(bytes[payload + 2], 0x80);
}

TEST(Tensor, Errors) {
    auto expect_error = [](std::vector<std::uint8_t> bytes, const std::string& what) {
        try {
            img::decode_tensor(bytes);
            FAIL() << "expected error containing " << what;
        } catch (const std::exception& e) {
            EXPECT_NE(std::string(e.what()).find(what), std::string::npos) << e.what();
        }
    };
    auto make = [](const std::string& header, std::size_t payload) {
        std::string s = "ATNS1\n" + header + "\n";
        std::vector<std::uint8_t> b(s.begin(), s.end());
        b.resize(b.size() + payload, 0);
        return b;
    };
    expect_error(make("{\"dtype\":\"f32\",\"shape\":[]}", 0), "rank 0 unsupported");
    expect_error(make("{\"dtype\":\"f32\",\"shape\":[2,2]}", 12), "truncated payload");
    expect_error(make("{\"dtype\":\"f32\",\"shape\":[2,2]}", 20), "longer");
    std::vector<std::uint8_t> bad = make("{\"dtype\":\"f32\",\"shape\":[1]}", 4);
    bad[0] = 'X';
    expect_error(bad, "bad magic");

    auto nan = make("{\"dtype\":\"f32\",\"shape\":[2]}", 8);
    const std::size_t p = nan.size() - 8;
    nan[p + 2] = 0xC0;  // 0x7FC00000 = quiet NaN
    nan[p + 3] = 0x7F;
    expect_error(nan, "1 non-finite");
}

TEST(Image, PngRoundTripAndErrors) {
    const fs::path dir = temp_dir("png");
    Rng rng(9);
    ImageRGB8 img(3, 3);
    for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(rng.index(256));
    img::save_image(img, dir / "a.png");
    EXPECT_EQ(img::load_image(dir / "a.png"), img);

    EXPECT_THROW(img::load_image(dir / "missing.png"), IoError);
    std::ofstream(dir / "empty.png").close();
    EXPECT_THROW(img::load_image(dir / "empty.png"), IoError);
    std::ofstream(dir / "junk.png") << "not an image";
    EXPECT_THROW(img::load_image(dir / "junk.png"), IoError);
}
