#pragma once

#include <cstdint>
#include <vector>

#include "anteriseg/imgcore.hpp"

namespace anteriseg {

/// One bit per pixel, stored as bytes (0 or 1) for simple indexing.
class BitMask {
public:
    BitMask() = default;
    BitMask(int width, int height, bool fill = false);

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t pixel_count() const { return bits_.size(); }

    bool test(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
    void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
    bool test(std::size_t i) const { return bits_[i] != 0; }

    std::size_t count() const;
    bool none() const { return count() == 0; }
    bool all() const { return count() == bits_.size(); }
    /// True if every set bit of this mask is also set in `other`.
    bool subset_of(const BitMask& other) const;

    friend bool operator==(const BitMask&, const BitMask&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    std::vector<std::uint8_t> bits_;
};

struct ClaheParams {
    double clip_limit = 2.0;
    int tiles_x = 8;
    int tiles_y = 8;
};

/// Hysteresis thresholds are on the raw 3x3 Sobel magnitude of the smoothed
/// 8-bit plane.
struct CannyParams {
    double gaussian_sigma = 1.4;
    double low_threshold = 50.0;
    double high_threshold = 150.0;
};

namespace filters {

/// Normalized discrete Gaussian, radius ceil(3*sigma).
std::vector<double> gaussian_kernel(double sigma);

ImageGray8 gaussian_blur(const ImageGray8& img, double sigma);
ImageRGB8 gaussian_blur(const ImageRGB8& img, double sigma);

/// Contrast-limited adaptive equalization of an 8-bit plane.
ImageGray8 clahe_gray(const ImageGray8& img, const ClaheParams& p);
/// Same equalization applied to the L channel of Lab; a and b are preserved.
ImageRGB8 clahe_l_channel(const ImageRGB8& img, const ClaheParams& p);

/// Per-tile transfer function (256 entries) as used by clahe_gray; exposed
/// for inspection and tests.
std::vector<std::uint8_t> clahe_tile_lut(std::span<const std::uint32_t, 256> histogram,
                                         std::uint32_t tile_pixels, double clip_limit);

BitMask canny(const ImageGray8& img, const CannyParams& p);

/// Square k x k binary dilation, k odd.
BitMask dilate(const BitMask& mask, int k);

/// Fast-marching inpainting of the masked pixels.
ImageRGB8 inpaint_telea(const ImageRGB8& img, const BitMask& mask, int radius = 3);

/// Half-pixel-centre bilinear sampling with edge clamp. Rank-2 tensors only.
Tensor32 resize_bilinear(const Tensor32& t, std::size_t new_h, std::size_t new_w);
ImageGray8 resize_bilinear(const ImageGray8& img, int new_h, int new_w);
ImageRGB8 resize_bilinear(const ImageRGB8& img, int new_h, int new_w);

/// Bilinear sample of an RGB image at continuous pixel coordinates
/// (pixel centres at integer positions), edge clamped.
void sample_bilinear(const ImageRGB8& img, double x, double y, double out[3]);

}  // namespace filters
}  // namespace anteriseg
