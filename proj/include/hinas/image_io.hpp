#pragma once
// 8-bit RGB PNG <-> (1, 3, H, W) tensors in [0, 1].

#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "hinas/tensor.hpp"

namespace hinas {

class ImageIoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f != nullptr) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline std::uint8_t quantize(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace detail

template <typename T>
void save_png(const std::string& path, const Tensor<T>& img) {
    const Shape s = img.shape();
    if (s.n != 1 || s.c != 3) throw ShapeError("save_png expects (1, 3, H, W), got " + s.str());
    detail::FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw ImageIoError("cannot open '" + path + "' for writing");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("libpng initialisation failed");
    }
    std::vector<std::uint8_t> rows(static_cast<std::size_t>(s.h) * s.w * 3);
    for (int y = 0; y < s.h; ++y) {
        for (int x = 0; x < s.w; ++x) {
            for (int c = 0; c < 3; ++c) {
                rows[(static_cast<std::size_t>(y) * s.w + x) * 3 + c] = detail::quantize(img.at(0, c, y, x));
            }
        }
    }
    std::vector<png_bytep> ptrs(s.h);
    for (int y = 0; y < s.h; ++y) ptrs[y] = rows.data() + static_cast<std::size_t>(y) * s.w * 3;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("failed to encode '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(s.w), static_cast<png_uint_32>(s.h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Accepts any PNG libpng can expand to 8-bit RGB (gray, palette, alpha dropped).
template <typename T>
Tensor<T> load_png(const std::string& path) {
    detail::FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw ImageIoError("cannot open '" + path + "'");
    std::uint8_t sig[8];
    if (std::fread(sig, 1, 8, f.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        throw ImageIoError("'" + path + "' is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png != nullptr ? png_create_info_struct(png) : nullptr;
    if (png == nullptr || info == nullptr) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("libpng initialisation failed");
    }
    std::vector<std::uint8_t> rows;
    std::vector<png_bytep> ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("failed to decode '" + path + "'");
    }
    png_init_io(png, f.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_byte color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) {
        if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
        png_set_gray_to_rgb(png);
    }
    if ((color & PNG_COLOR_MASK_ALPHA) != 0) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    rows.resize(stride * h);
    ptrs.resize(h);
    for (int y = 0; y < h; ++y) ptrs[y] = rows.data() + stride * y;
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor<T> out = Tensor<T>::zeros(Shape{1, 3, h, w});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) out.at(0, c, y, x) = static_cast<T>(rows[stride * y + x * 3 + c] / 255.0);
        }
    }
    return out;
}

// CRC-32 of the quantized RGB bytes; stable fingerprint of an image's content.
template <typename T>
std::uint32_t image_checksum(const Tensor<T>& img) {
    const Shape s = img.shape();
    std::vector<std::uint8_t> bytes;
    bytes.reserve(s.numel());
    for (int b = 0; b < s.n; ++b) {
        for (int y = 0; y < s.h; ++y) {
            for (int x = 0; x < s.w; ++x) {
                for (int c = 0; c < s.c; ++c) bytes.push_back(detail::quantize(img.at(b, c, y, x)));
            }
        }
    }
    return static_cast<std::uint32_t>(crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace hinas
