#include "qnerf/image.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <memory>

namespace qnerf::img {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

Image load_png_file(FILE* fp, const std::string& path) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DatasetError("png init failed: " + path);
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DatasetError("png init failed: " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DatasetError("corrupt png: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);

    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int w = int(png_get_image_width(png, info));
    const int h = int(png_get_image_height(png, info));
    Image out(w, h);
    std::vector<png_byte> row(std::size_t(png_get_rowbytes(png, info)));
    for (int y = 0; y < h; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = row[std::size_t(x) * 3 + std::size_t(c)] / 255.0;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

struct JpegErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    std::longjmp(mgr->jump, 1);
}

Image load_jpeg_file(FILE* fp, const std::string& path) {
    jpeg_decompress_struct cinfo;
    JpegErrorMgr err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DatasetError("corrupt jpeg: " + path);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, fp);
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    const int w = int(cinfo.output_width);
    const int h = int(cinfo.output_height);
    Image out(w, h);
    std::vector<JSAMPLE> row(std::size_t(w) * 3);
    JSAMPROW rows[1] = {row.data()};
    for (int y = 0; y < h; ++y) {
        jpeg_read_scanlines(&cinfo, rows, 1);
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                out.at(x, y, c) = row[std::size_t(x) * 3 + std::size_t(c)] / 255.0;
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return out;
}

}  // namespace

Image load_image(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DatasetError("cannot open image: " + path);
    unsigned char magic[4] = {0, 0, 0, 0};
    if (std::fread(magic, 1, 4, fp.get()) != 4) throw DatasetError("truncated image: " + path);
    std::rewind(fp.get());
    if (magic[0] == 0x89 && magic[1] == 'P') return load_png_file(fp.get(), path);
    if (magic[0] == 0xFF && magic[1] == 0xD8) return load_jpeg_file(fp.get(), path);
    throw DatasetError("unsupported image format: " + path);
}

void save_png(const std::string& path, const Image& image) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DatasetError("cannot write image: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        throw DatasetError("png init failed: " + path);
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DatasetError("png write failed: " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, png_uint_32(image.width), png_uint_32(image.height), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(std::size_t(image.width) * 3);
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(image.at(x, y, c), 0.0, 1.0);
                row[std::size_t(x) * 3 + std::size_t(c)] = png_byte(std::lround(v * 255.0));
            }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

namespace {
constexpr char kFloatMagic[8] = {'Q', 'N', 'R', 'F', 'I', 'M', 'G', 'F'};
}

void save_float_dump(const std::string& path, const Image& image) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DatasetError("cannot write float dump: " + path);
    std::fwrite(kFloatMagic, 1, 8, fp.get());
    const uint32_t w = uint32_t(image.width), h = uint32_t(image.height);
    std::fwrite(&w, 4, 1, fp.get());
    std::fwrite(&h, 4, 1, fp.get());
    std::vector<float> buf(image.rgb.size());
    for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = float(image.rgb[i]);
    std::fwrite(buf.data(), 4, buf.size(), fp.get());
}

Image load_float_dump(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DatasetError("cannot open float dump: " + path);
    char magic[8];
    uint32_t w = 0, h = 0;
    if (std::fread(magic, 1, 8, fp.get()) != 8 || std::memcmp(magic, kFloatMagic, 8) != 0)
        throw DatasetError("bad float dump magic: " + path);
    if (std::fread(&w, 4, 1, fp.get()) != 1 || std::fread(&h, 4, 1, fp.get()) != 1)
        throw DatasetError("truncated float dump: " + path);
    Image out{int(w), int(h)};
    std::vector<float> buf(out.rgb.size());
    if (std::fread(buf.data(), 4, buf.size(), fp.get()) != buf.size())
        throw DatasetError("truncated float dump: " + path);
    for (std::size_t i = 0; i < buf.size(); ++i) out.rgb[i] = double(buf[i]);
    return out;
}

Image downsample(const Image& image, int new_width, int new_height) {
    if (new_width <= 0 || new_height <= 0 || new_width > image.width ||
        new_height > image.height)
        throw DatasetError("downsample target must shrink the image");
    Image out(new_width, new_height);
    const double sx = double(image.width) / new_width;
    const double sy = double(image.height) / new_height;
    for (int y = 0; y < new_height; ++y) {
        const int y0 = int(std::floor(y * sy));
        const int y1 = std::min(image.height, int(std::ceil((y + 1) * sy)));
        for (int x = 0; x < new_width; ++x) {
            const int x0 = int(std::floor(x * sx));
            const int x1 = std::min(image.width, int(std::ceil((x + 1) * sx)));
            double acc[3] = {0, 0, 0};
            int count = 0;
            for (int yy = y0; yy < y1; ++yy)
                for (int xx = x0; xx < x1; ++xx) {
                    for (int c = 0; c < 3; ++c) acc[c] += image.at(xx, yy, c);
                    ++count;
                }
            for (int c = 0; c < 3; ++c) out.at(x, y, c) = acc[c] / std::max(1, count);
        }
    }
    return out;
}

double max_abs_diff(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height) throw ShapeError("image size mismatch");
    double m = 0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) m = std::max(m, std::abs(a.rgb[i] - b.rgb[i]));
    return m;
}

}  // namespace qnerf::img
