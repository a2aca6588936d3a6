#include "skelbench/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <csetjmp>
#include <memory>
#include <vector>

namespace skelbench {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

BinaryMask load_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("load_png: cannot open " + path.string());

    png_byte header[8];
    if (std::fread(header, 1, 8, fp.get()) != 8 || png_sig_cmp(header, 0, 8) != 0) {
        throw DecodeError("load_png: not a PNG file: " + path.string());
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DecodeError("load_png: png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DecodeError("load_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("load_png: undecodable PNG: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);

    // Normalize everything to 8-bit RGB rows, then threshold on luminance.
    png_read_png(png, info,
                 PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_STRIP_ALPHA |
                     PNG_TRANSFORM_EXPAND | PNG_TRANSFORM_GRAY_TO_RGB,
                 nullptr);

    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    if (width == 0 || height == 0) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DecodeError("load_png: zero-area image: " + path.string());
    }

    png_bytepp rows = png_get_rows(png, info);
    BinaryMask mask(width, height);
    for (png_uint_32 r = 0; r < height; ++r) {
        const png_bytep row = rows[r];
        for (png_uint_32 c = 0; c < width; ++c) {
            // BT.601 luma >= 128, evaluated in thousandths so the boundary is exact
            const std::uint32_t y1000 =
                299u * row[3 * c] + 587u * row[3 * c + 1] + 114u * row[3 * c + 2];
            mask.set(r, c, y1000 >= 128000u);
        }
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return mask;
}

void save_png(const BinaryMask& mask, const std::filesystem::path& path) {
    if (mask.width == 0 || mask.height == 0) {
        throw IoError("save_png: zero-area mask");
    }
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("save_png: cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("save_png: png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("save_png: png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("save_png: write failed: " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, mask.width, mask.height, 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);

    std::vector<png_byte> buf(static_cast<std::size_t>(mask.width) * mask.height);
    std::vector<png_bytep> rows(mask.height);
    for (std::uint32_t r = 0; r < mask.height; ++r) {
        rows[r] = &buf[static_cast<std::size_t>(r) * mask.width];
        for (std::uint32_t c = 0; c < mask.width; ++c) {
            rows[r][c] = mask.at(r, c) ? 255 : 0;
        }
    }
    png_set_rows(png, info, rows.data());
    png_write_png(png, info, PNG_TRANSFORM_IDENTITY, nullptr);
    png_destroy_write_struct(&png, &info);
}

} // namespace skelbench
