#pragma once

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "pastiche/core/ops.hpp"
#include "pastiche/core/types.hpp"

namespace pastiche::io {

// ---------------------------------------------------------------------------
// 8-bit image files. Loading maps channel value v to v/255; saving
// quantizes with round(v*255) clamped to [0,255]. PNG round trips are
// lossless.

namespace detail {

inline ImageBatch interleaved_to_batch(const unsigned char* rgb, int64_t h, int64_t w) {
    Tensor t({1, 3, h, w});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x) {
            const unsigned char* px = rgb + (y * w + x) * 3;
            for (int64_t c = 0; c < 3; ++c)
                t(0, c, y, x) = static_cast<double>(px[c]) / 255.0;
        }
    return ImageBatch(std::move(t));
}

inline std::vector<unsigned char> batch_to_interleaved(const ImageBatch& img) {
    const int64_t h = img.h(), w = img.w();
    std::vector<unsigned char> rgb(static_cast<size_t>(h * w * 3));
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c) {
                const double v = std::round(img.data(0, c, y, x) * 255.0);
                rgb[static_cast<size_t>((y * w + x) * 3 + c)] =
                    static_cast<unsigned char>(std::clamp(v, 0.0, 255.0));
            }
    return rgb;
}

inline ImageBatch load_png(const std::string& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw IoError("PNG decode error: " + path + ": " + image.message);
    image.format = PNG_FORMAT_RGB; // grayscale/palette/alpha promoted to RGB
    std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw IoError("PNG decode error: " + path + ": " + msg);
    }
    return interleaved_to_batch(buffer.data(), image.height, image.width);
}

inline void save_png(const std::string& path, const ImageBatch& img) {
    const std::vector<unsigned char> rgb = batch_to_interleaved(img);
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.w());
    image.height = static_cast<png_uint_32>(img.h());
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr))
        throw IoError("PNG encode error: " + path + ": " + image.message);
}

struct JpegErrorTrap {
    jpeg_error_mgr mgr;
    jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_trap(j_common_ptr cinfo) {
    auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, trap->message);
    longjmp(trap->jump, 1);
}

struct FileHandle {
    FILE* fp = nullptr;
    explicit FileHandle(const std::string& path, const char* mode) : fp(std::fopen(path.c_str(), mode)) {}
    ~FileHandle() {
        if (fp) std::fclose(fp);
    }
    FileHandle(const FileHandle&) = delete;
    FileHandle& operator=(const FileHandle&) = delete;
};

inline ImageBatch load_jpeg(const std::string& path) {
    FileHandle file(path, "rb");
    if (!file.fp) throw IoError("cannot open image: " + path);

    jpeg_decompress_struct cinfo;
    JpegErrorTrap trap;
    cinfo.err = jpeg_std_error(&trap.mgr);
    trap.mgr.error_exit = jpeg_error_trap;
    std::vector<unsigned char> buffer;
    if (setjmp(trap.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw IoError("JPEG decode error: " + path + ": " + trap.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int64_t w = cinfo.output_width, h = cinfo.output_height;
    buffer.resize(static_cast<size_t>(h * w * 3));
    while (cinfo.output_scanline < cinfo.output_height) {
        unsigned char* row = buffer.data() + static_cast<size_t>(cinfo.output_scanline) * w * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return interleaved_to_batch(buffer.data(), h, w);
}

inline void save_jpeg(const std::string& path, const ImageBatch& img, int quality = 95) {
    const std::vector<unsigned char> rgb = batch_to_interleaved(img);
    FileHandle file(path, "wb");
    if (!file.fp) throw IoError("cannot write image: " + path);

    jpeg_compress_struct cinfo;
    JpegErrorTrap trap;
    cinfo.err = jpeg_std_error(&trap.mgr);
    trap.mgr.error_exit = jpeg_error_trap;
    if (setjmp(trap.jump)) {
        jpeg_destroy_compress(&cinfo);
        throw IoError("JPEG encode error: " + path + ": " + trap.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_stdio_dest(&cinfo, file.fp);
    cinfo.image_width = static_cast<JDIMENSION>(img.w());
    cinfo.image_height = static_cast<JDIMENSION>(img.h());
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    const int64_t w = img.w();
    while (cinfo.next_scanline < cinfo.image_height) {
        const unsigned char* row = rgb.data() + static_cast<size_t>(cinfo.next_scanline) * w * 3;
        unsigned char* rows[1] = {const_cast<unsigned char*>(row)};
        jpeg_write_scanlines(&cinfo, rows, 1);
    }
    jpeg_finish_compress(&cinfo);
    jpeg_destroy_compress(&cinfo);
}

} // namespace detail

enum class ImageFormat { Png, Jpeg };

// Sniffs the first bytes rather than trusting the extension.
inline ImageFormat detect_format(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open image: " + path);
    unsigned char sig[8] = {};
    f.read(reinterpret_cast<char*>(sig), 8);
    static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (f.gcount() >= 8 && std::memcmp(sig, png_sig, 8) == 0) return ImageFormat::Png;
    if (f.gcount() >= 3 && sig[0] == 0xff && sig[1] == 0xd8 && sig[2] == 0xff)
        return ImageFormat::Jpeg;
    throw IoError("unsupported image format: " + path + " (only PNG and JPEG are readable)");
}

inline ImageBatch load_image(const std::string& path) {
    switch (detect_format(path)) {
        case ImageFormat::Png: return detail::load_png(path);
        case ImageFormat::Jpeg: return detail::load_jpeg(path);
    }
    throw IoError("unreachable");
}

// Chooses the encoder from the file extension (.png by default).
inline void save_image(const std::string& path, const ImageBatch& img) {
    if (img.n() != 1) throw ValueError("save_image expects a single image");
    auto ends_with = [&](const char* suffix) {
        const size_t n = std::strlen(suffix);
        if (path.size() < n) return false;
        std::string tail = path.substr(path.size() - n);
        std::transform(tail.begin(), tail.end(), tail.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        return tail == suffix;
    };
    if (ends_with(".jpg") || ends_with(".jpeg"))
        detail::save_jpeg(path, img);
    else
        detail::save_png(path, img);
}

// ---------------------------------------------------------------------------
// Padding to the stylizer's or discriminator's stride factor. Mirror-pads
// the bottom/right edges only, so a crop record of the original extent
// restores the exact dims after the model has run.

struct CropRecord {
    int64_t h = 0, w = 0;
    bool empty() const { return h == 0 && w == 0; }
};

inline std::pair<ImageBatch, CropRecord> pad_for_model(const ImageBatch& x, int64_t factor) {
    if (factor != nn::kEncoderFactor && factor != nn::kDiscriminatorFactor)
        throw ValueError("pad_for_model: factor must be 16 or 128");
    const int64_t h = x.h(), w = x.w();
    const int64_t ph = (factor - h % factor) % factor;
    const int64_t pw = (factor - w % factor) % factor;
    if (ph == 0 && pw == 0) return {x, CropRecord{}};
    Tensor out({x.n(), 3, h + ph, w + pw});
    for (int64_t n = 0; n < x.n(); ++n)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < h + ph; ++i) {
                const int64_t si = ops::reflect_index(i, h);
                for (int64_t j = 0; j < w + pw; ++j)
                    out(n, c, i, j) = x.data(n, c, si, ops::reflect_index(j, w));
            }
    return {ImageBatch(std::move(out)), CropRecord{h, w}};
}

inline ImageBatch unpad(const ImageBatch& x, const CropRecord& crop) {
    if (crop.empty()) return x;
    if (crop.h > x.h() || crop.w > x.w()) throw ShapeError("unpad: crop larger than image");
    if (crop.h == x.h() && crop.w == x.w()) return x;
    Tensor out({x.n(), 3, crop.h, crop.w});
    for (int64_t n = 0; n < x.n(); ++n)
        for (int64_t c = 0; c < 3; ++c)
            for (int64_t i = 0; i < crop.h; ++i)
                for (int64_t j = 0; j < crop.w; ++j) out(n, c, i, j) = x.data(n, c, i, j);
    return ImageBatch(std::move(out));
}

} // namespace pastiche::io
