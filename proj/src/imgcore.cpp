#include "anteriseg/imgcore.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <fstream>
#include <iterator>
#include <numeric>

#include "anteriseg/error.hpp"
#include "json.hpp"

namespace anteriseg {

namespace {

int clamp_index(int v, int n) { return std::clamp(v, 0, n - 1); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageRGB8::ImageRGB8(int width, int height, Rgb fill) : width_(width), height_(height) {
    require(width > 0 && height > 0, "image dimensions must be positive");
    data_.resize(pixel_count() * 3);
    for (std::size_t i = 0; i < data_.size(); i += 3) {
        data_[i] = fill.r;
        data_[i + 1] = fill.g;
        data_[i + 2] = fill.b;
    }
}

ImageRGB8::ImageRGB8(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    require(width > 0 && height > 0, "image dimensions must be positive");
    require(data_.size() == pixel_count() * 3, "RGB buffer length must be width*height*3");
}

Rgb ImageRGB8::at_clamped(int x, int y) const {
    return at(clamp_index(x, width_), clamp_index(y, height_));
}

ImageGray8::ImageGray8(int width, int height, std::uint8_t fill)
    : width_(width), height_(height) {
    require(width > 0 && height > 0, "image dimensions must be positive");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
}

ImageGray8::ImageGray8(int width, int height, std::vector<std::uint8_t> data)
    : width_(width), height_(height), data_(std::move(data)) {
    require(width > 0 && height > 0, "image dimensions must be positive");
    require(data_.size() == static_cast<std::size_t>(width) * height,
            "gray buffer length must be width*height");
}

std::uint8_t ImageGray8::at_clamped(int x, int y) const {
    return at(clamp_index(x, width_), clamp_index(y, height_));
}

namespace {
std::size_t shape_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}
}  // namespace

Tensor32::Tensor32(std::vector<std::size_t> shape, float fill) : shape_(std::move(shape)) {
    require(!shape_.empty(), "rank 0 unsupported");
    require(std::all_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d > 0; }),
            "tensor extents must be positive");
    data_.assign(shape_product(shape_), fill);
}

Tensor32::Tensor32(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    require(!shape_.empty(), "rank 0 unsupported");
    require(std::all_of(shape_.begin(), shape_.end(), [](std::size_t d) { return d > 0; }),
            "tensor extents must be positive");
    require(data_.size() == shape_product(shape_), "tensor data length must equal product(shape)");
}

std::size_t Tensor32::count_non_finite() const {
    return static_cast<std::size_t>(
        std::count_if(data_.begin(), data_.end(), [](float v) { return !std::isfinite(v); }));
}

namespace img {

Hsv rgb_to_hsv(Rgb px) {
    const double r = px.r / 255.0, g = px.g / 255.0, b = px.b / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;
    Hsv out{0.0, mx > 0 ? delta / mx : 0.0, mx};
    if (delta <= 0) return out;
    double h;
    if (mx == r)
        h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g)
        h = 60.0 * ((b - r) / delta + 2.0);
    else
        h = 60.0 * ((r - g) / delta + 4.0);
    if (h < 0) h += 360.0;
    out.h = h;
    return out;
}

Rgb hsv_to_rgb(Hsv hsv) {
    double h = std::fmod(hsv.h, 360.0);
    if (h < 0) h += 360.0;
    const double s = std::clamp(hsv.s, 0.0, 1.0);
    const double v = std::clamp(hsv.v, 0.0, 1.0);
    const double c = v * s;
    const double hp = h / 60.0;
    const double x = c * (1.0 - std::fabs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp) % 6) {
        case 0: r = c; g = x; break;
        case 1: r = x; g = c; break;
        case 2: g = c; b = x; break;
        case 3: g = x; b = c; break;
        case 4: r = x; b = c; break;
        default: r = c; b = x; break;
    }
    const double m = v - c;
    auto to8 = [](double u) {
        return static_cast<std::uint8_t>(std::clamp(std::lround(u * 255.0), 0L, 255L));
    };
    return {to8(r + m), to8(g + m), to8(b + m)};
}

namespace {

// sRGB primaries, D65 white.
constexpr std::array<std::array<double, 3>, 3> kRgbToXyz{{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};
constexpr double kWhiteX = 0.4124564 + 0.3575761 + 0.1804375;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 0.0193339 + 0.1191920 + 0.9503041;

std::array<std::array<double, 3>, 3> invert3(const std::array<std::array<double, 3>, 3>& m) {
    const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                       m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                       m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    std::array<std::array<double, 3>, 3> inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
    return inv;
}

const std::array<std::array<double, 3>, 3>& xyz_to_rgb_matrix() {
    static const auto inv = invert3(kRgbToXyz);
    return inv;
}

const std::array<double, 256>& linear_table() {
    static const auto table = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i) {
            const double c = i / 255.0;
            t[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
        }
        return t;
    }();
    return table;
}

double gamma_encode(double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

constexpr double kEps = 216.0 / 24389.0;  // (6/29)^3
constexpr double kKappa = 24389.0 / 27.0;

double lab_f(double t) { return t > kEps ? std::cbrt(t) : (kKappa * t + 16.0) / 116.0; }
double lab_finv(double f) {
    const double f3 = f * f * f;
    return f3 > kEps ? f3 : (116.0 * f - 16.0) / kKappa;
}

}  // namespace

Lab rgb_to_lab(Rgb px) {
    const auto& lin = linear_table();
    const double r = lin[px.r], g = lin[px.g], b = lin[px.b];
    const auto& m = kRgbToXyz;
    const double x = m[0][0] * r + m[0][1] * g + m[0][2] * b;
    const double y = m[1][0] * r + m[1][1] * g + m[1][2] * b;
    const double z = m[2][0] * r + m[2][1] * g + m[2][2] * b;
    const double fx = lab_f(x / kWhiteX), fy = lab_f(y / kWhiteY), fz = lab_f(z / kWhiteZ);
    return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

Rgb lab_to_rgb(Lab lab) {
    const double fy = (lab.l + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    const double x = lab_finv(fx) * kWhiteX;
    const double y = lab_finv(fy) * kWhiteY;
    const double z = lab_finv(fz) * kWhiteZ;
    const auto& m = xyz_to_rgb_matrix();
    auto to8 = [](double lin) {
        return static_cast<std::uint8_t>(
            std::clamp(std::lround(gamma_encode(lin) * 255.0), 0L, 255L));
    };
    return {to8(m[0][0] * x + m[0][1] * y + m[0][2] * z),
            to8(m[1][0] * x + m[1][1] * y + m[1][2] * z),
            to8(m[2][0] * x + m[2][1] * y + m[2][2] * z)};
}

std::uint8_t luma(Rgb px) {
    const double y = 0.299 * px.r + 0.587 * px.g + 0.114 * px.b;
    return static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
}

ImageGray8 to_grayscale(const ImageRGB8& img) {
    ImageGray8 out(img.width(), img.height());
    auto src = img.bytes();
    auto dst = out.bytes();
    for (std::size_t i = 0; i < dst.size(); ++i)
        dst[i] = luma({src[3 * i], src[3 * i + 1], src[3 * i + 2]});
    return out;
}

ImageRGB8 gray_to_rgb(const ImageGray8& img) {
    std::vector<std::uint8_t> data(img.pixel_count() * 3);
    auto src = img.bytes();
    for (std::size_t i = 0; i < src.size(); ++i) data[3 * i] = data[3 * i + 1] = data[3 * i + 2] = src[i];
    return ImageRGB8(img.width(), img.height(), std::move(data));
}

// ---------------------------------------------------------------------------
// Tensor files

namespace {
constexpr std::string_view kTensorMagic = "ATNS1\n";
}

std::vector<std::uint8_t> encode_tensor(const Tensor32& t) {
    require(t.rank() > 0, "rank 0 unsupported");
    nlohmann::json header = {{"dtype", "f32"}, {"shape", t.shape()}};
    const std::string line = header.dump() + "\n";
    std::vector<std::uint8_t> out;
    out.reserve(kTensorMagic.size() + line.size() + t.size() * 4);
    out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
    out.insert(out.end(), line.begin(), line.end());
    for (float v : t.values()) {
        const auto bits = std::bit_cast<std::uint32_t>(v);
        for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(bits >> s));
    }
    return out;
}

Tensor32 decode_tensor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kTensorMagic.size() ||
        !std::equal(kTensorMagic.begin(), kTensorMagic.end(), bytes.begin()))
        throw ValidationError("bad magic: not an ATNS1 tensor file");
    const auto header_begin = bytes.begin() + static_cast<std::ptrdiff_t>(kTensorMagic.size());
    const auto header_end = std::find(header_begin, bytes.end(), std::uint8_t{'\n'});
    if (header_end == bytes.end()) throw ValidationError("tensor header line not terminated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_begin, header_end);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed tensor header: ") + e.what());
    }
    if (!header.is_object() || header.value("dtype", "") != "f32")
        throw ValidationError("tensor dtype must be f32");
    if (!header.contains("shape") || !header["shape"].is_array())
        throw ValidationError("tensor header missing shape");
    std::vector<std::size_t> shape;
    for (const auto& d : header["shape"]) {
        if (!d.is_number_unsigned() || d.get<std::size_t>() == 0)
            throw ValidationError("tensor extents must be positive integers");
        shape.push_back(d.get<std::size_t>());
    }
    if (shape.empty()) throw ValidationError("rank 0 unsupported");

    const std::size_t count = shape_product(shape);
    const auto payload = std::span<const std::uint8_t>(bytes).subspan(
        static_cast<std::size_t>(header_end - bytes.begin()) + 1);
    if (payload.size() < count * 4) throw ValidationError("truncated payload");
    if (payload.size() > count * 4) throw ValidationError("payload longer than product(shape)");

    std::vector<float> data(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(payload[4 * i + b]) << (8 * b);
        data[i] = std::bit_cast<float>(bits);
    }
    Tensor32 t(std::move(shape), std::move(data));
    if (const auto bad = t.count_non_finite(); bad > 0)
        throw ValidationError("tensor contains " + std::to_string(bad) + " non-finite values");
    return t;
}

Tensor32 read_tensor(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    return decode_tensor(bytes);
}

void write_tensor(const Tensor32& t, const std::filesystem::path& path) {
    const auto bytes = encode_tensor(t);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

// ---------------------------------------------------------------------------
// Raster codecs

namespace {

ImageRGB8 decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw IoError("PNG decode failed for " + name + ": " + image.message);
    image.format = PNG_FORMAT_RGB;
    if (image.width == 0 || image.height == 0) {
        png_image_free(&image);
        throw IoError("PNG has zero extent: " + name);
    }
    std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr))
        throw IoError("PNG decode failed for " + name + ": " + image.message);
    return ImageRGB8(static_cast<int>(image.width), static_cast<int>(image.height), std::move(data));
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

ImageRGB8 decode_jpeg(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> data;
    int width = 0, height = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IoError("JPEG decode failed for " + name + ": " + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    data.resize(static_cast<std::size_t>(width) * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = data.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return ImageRGB8(width, height, std::move(data));
}

}  // namespace

ImageRGB8 load_image(const std::filesystem::path& path) {
    if (!std::filesystem::is_regular_file(path)) throw IoError("no such image file: " + path.string());
    const auto bytes = read_file_bytes(path);
    if (bytes.empty()) throw IoError("cannot decode empty file: " + path.string());
    static constexpr std::array<std::uint8_t, 8> kPngSig{0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (bytes.size() >= 8 && std::equal(kPngSig.begin(), kPngSig.end(), bytes.begin()))
        return decode_png(bytes, path.string());
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF)
        return decode_jpeg(bytes, path.string());
    throw IoError("unsupported codec (expected PNG or JPEG): " + path.string());
}

void save_image(const ImageRGB8& img, const std::filesystem::path& path) {
    require(!img.empty(), "cannot save an empty image");
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width());
    image.height = static_cast<png_uint_32>(img.height());
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.bytes().data(), 0, nullptr))
        throw IoError("PNG write failed for " + path.string() + ": " + image.message);
}

}  // namespace img
}  // namespace anteriseg
