#include "stainbench/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include "stainbench/errors.hpp"

namespace stainbench {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail_io(const std::filesystem::path& path, const std::string& what) {
    throw IoError(what + ": " + path.string());
}

}  // namespace

Tensor load_image(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) fail_io(path, "cannot open image");

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
        fail_io(path, "not a PNG file");
    }

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail_io(path, "libpng init failed");
    }

    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail_io(path, "corrupt PNG");
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // normalize every variant to 8-bit RGB
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const auto width = static_cast<int>(png_get_image_width(png, info));
    const auto height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail_io(path, "unsupported PNG channel layout");
    }

    pixels.resize(static_cast<std::size_t>(width) * height * 3);
    rows.resize(height);
    for (int y = 0; y < height; ++y) {
        rows[y] = pixels.data() + static_cast<std::size_t>(y) * width * 3;
    }
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Tensor out(1, 3, height, width);
    for (int ch = 0; ch < 3; ++ch) {
        float* plane = out.plane(0, ch);
        for (int y = 0; y < height; ++y) {
            const unsigned char* src = pixels.data() + (static_cast<std::size_t>(y) * width) * 3;
            for (int x = 0; x < width; ++x) {
                plane[y * width + x] = static_cast<float>(src[x * 3 + ch]) / 255.0f;
            }
        }
    }
    return out;
}

void save_image(const Tensor& image, const std::filesystem::path& path) {
    if (image.n != 1 || image.c != 3) {
        throw ShapeError("save_image: expected (1,3,h,w) tensor, got " + image.shape());
    }

    std::vector<unsigned char> pixels(static_cast<std::size_t>(image.h) * image.w * 3);
    for (int ch = 0; ch < 3; ++ch) {
        const float* plane = image.plane(0, ch);
        for (int y = 0; y < image.h; ++y) {
            for (int x = 0; x < image.w; ++x) {
                const float v = std::min(1.0f, std::max(0.0f, plane[y * image.w + x]));
                pixels[(static_cast<std::size_t>(y) * image.w + x) * 3 + ch] =
                    static_cast<unsigned char>(std::lround(v * 255.0f));
            }
        }
    }

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) fail_io(path, "cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        fail_io(path, "libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail_io(path, "PNG encode failed");
    }

    png_init_io(png, fp.get());
    png_set_IHDR(png, info, image.w, image.h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < image.h; ++y) {
        png_write_row(png, pixels.data() + static_cast<std::size_t>(y) * image.w * 3);
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::filesystem::path> list_pngs(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".png") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<Tensor> load_image_dir(const std::filesystem::path& dir) {
    std::vector<Tensor> images;
    for (const auto& f : list_pngs(dir)) images.push_back(load_image(f));
    return images;
}

}  // namespace stainbench
