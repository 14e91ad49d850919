#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace anteriseg {

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// Hue in degrees [0,360), saturation and value in [0,1].
struct Hsv {
    double h = 0, s = 0, v = 0;
};

/// CIE L*a*b* (D65). L in [0,100].
struct Lab {
    double l = 0, a = 0, b = 0;
};

/// Row-major interleaved 8-bit RGB raster.
class ImageRGB8 {
public:
    ImageRGB8() = default;
    ImageRGB8(int width, int height, Rgb fill = {});
    ImageRGB8(int width, int height, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return data_.empty(); }

    Rgb at(int x, int y) const {
        const std::uint8_t* p = &data_[index(x, y)];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, Rgb c) {
        std::uint8_t* p = &data_[index(x, y)];
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    Rgb at_clamped(int x, int y) const;

    std::span<const std::uint8_t> bytes() const { return data_; }
    std::span<std::uint8_t> bytes() { return data_; }

    friend bool operator==(const ImageRGB8&, const ImageRGB8&) = default;

private:
    std::size_t index(int x, int y) const {
        return (static_cast<std::size_t>(y) * width_ + x) * 3;
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

class ImageGray8 {
public:
    ImageGray8() = default;
    ImageGray8(int width, int height, std::uint8_t fill = 0);
    ImageGray8(int width, int height, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return data_.size(); }

    std::uint8_t at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    std::uint8_t at_clamped(int x, int y) const;

    std::span<const std::uint8_t> bytes() const { return data_; }
    std::span<std::uint8_t> bytes() { return data_; }

    friend bool operator==(const ImageGray8&, const ImageGray8&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Shape-tagged row-major float32 array.
class Tensor32 {
public:
    Tensor32() = default;
    explicit Tensor32(std::vector<std::size_t> shape, float fill = 0.0f);
    Tensor32(std::vector<std::size_t> shape, std::vector<float> data);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_.at(i); }
    std::size_t size() const { return data_.size(); }

    std::span<const float> values() const { return data_; }
    std::span<float> values() { return data_; }
    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    /// Element access for rank-2 tensors.
    float at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }
    float& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }

    std::size_t count_non_finite() const;

    friend bool operator==(const Tensor32&, const Tensor32&) = default;

private:
    std::vector<std::size_t> shape_;
    std::vector<float> data_;
};

namespace img {

Hsv rgb_to_hsv(Rgb px);
/// Analytic hexcone inverse of rgb_to_hsv, rounded to nearest.
Rgb hsv_to_rgb(Hsv hsv);

Lab rgb_to_lab(Rgb px);
/// Inverse of rgb_to_lab with gamut clamping and rounding.
Rgb lab_to_rgb(Lab lab);

/// luma = round(0.299R + 0.587G + 0.114B)
std::uint8_t luma(Rgb px);
ImageGray8 to_grayscale(const ImageRGB8& img);
ImageRGB8 gray_to_rgb(const ImageGray8& img);

/// Tensor file: "ATNS1\n" + JSON header line + little-endian float32 payload.
std::vector<std::uint8_t> encode_tensor(const Tensor32& t);
Tensor32 decode_tensor(std::span<const std::uint8_t> bytes);
Tensor32 read_tensor(const std::filesystem::path& path);
void write_tensor(const Tensor32& t, const std::filesystem::path& path);

/// PNG or baseline JPEG, detected from the file signature.
ImageRGB8 load_image(const std::filesystem::path& path);
/// Always writes PNG. Output bytes depend only on pixel content.
void save_image(const ImageRGB8& img, const std::filesystem::path& path);

}  // namespace img
}  // namespace anteriseg
