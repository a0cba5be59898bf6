#include "doicd/image.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>

namespace doicd {

Image::Image(int width, int height, Rgb fill) : extent_{width, height} {
    if (width < 0 || height < 0)
        throw std::invalid_argument("image dimensions must be non-negative");
    bytes_.resize(extent_.area() * 3);
    for (std::size_t i = 0; i < bytes_.size(); i += 3) {
        bytes_[i] = fill[0];
        bytes_[i + 1] = fill[1];
        bytes_[i + 2] = fill[2];
    }
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ImageIoError("cannot open file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ImageIoError("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw ImageIoError("write failed: " + path.string());
}

namespace {

// libpng reports errors through longjmp, so the functions that own a
// png_struct keep only trivially destructible locals; buffers live in the
// caller's frame and are passed by pointer.

constexpr std::size_t kErrLen = 256;

struct ReadCursor {
    const std::uint8_t* data;
    std::size_t size;
    std::size_t pos;
};

struct RawPixels {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> pixels;
    std::vector<png_bytep> rows;
};

void on_error(png_structp png, png_const_charp msg) {
    auto* err = static_cast<char*>(png_get_error_ptr(png));
    std::snprintf(err, kErrLen, "%s", msg);
    longjmp(png_jmpbuf(png), 1);
}

void on_warning(png_structp, png_const_charp) {}

void on_read(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + n > cur->size)
        png_error(png, "truncated PNG data");
    std::memcpy(out, cur->data + cur->pos, n);
    cur->pos += n;
}

void on_write(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + n);
}

void on_flush(png_structp) {}

enum class Want { Gray8, Rgb8 };

bool decode_raw(ReadCursor* cursor, Want want, RawPixels* out, char* err) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, err, on_error, on_warning);
    if (png == nullptr) {
        std::snprintf(err, kErrLen, "out of memory");
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_set_read_fn(png, cursor, on_read);
    png_read_info(png, info);

    const auto width = png_get_image_width(png, info);
    const auto height = png_get_image_height(png, info);
    const int bit_depth = png_get_bit_depth(png, info);
    const int color_type = png_get_color_type(png, info);
    if (width == 0 || height == 0)
        png_error(png, "zero-dimension image");

    if (want == Want::Gray8) {
        if (color_type != PNG_COLOR_TYPE_GRAY || bit_depth != 8) {
            std::snprintf(err, kErrLen,
                          "unsupported format: expected 8-bit single-channel PNG, got color type %d at %d bits",
                          color_type, bit_depth);
            png_destroy_read_struct(&png, &info, nullptr);
            return false;
        }
        out->channels = 1;
    } else {
        if (bit_depth == 16)
            png_set_strip_16(png);
        if (color_type == PNG_COLOR_TYPE_PALETTE)
            png_set_palette_to_rgb(png);
        if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
            png_set_expand_gray_1_2_4_to_8(png);
        if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
            png_set_gray_to_rgb(png);
        if (color_type & PNG_COLOR_MASK_ALPHA)
            png_set_strip_alpha(png);
        out->channels = 3;
    }
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    if (png_get_rowbytes(png, info) != static_cast<png_size_t>(width) * out->channels)
        png_error(png, "unexpected row layout after conversion");

    out->width = static_cast<int>(width);
    out->height = static_cast<int>(height);
    out->pixels.resize(static_cast<std::size_t>(width) * height * out->channels);
    out->rows.resize(height);
    for (png_uint_32 y = 0; y < height; ++y)
        out->rows[y] = out->pixels.data() + static_cast<std::size_t>(y) * width * out->channels;
    png_read_image(png, out->rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

bool encode_raw(RawPixels* in, std::vector<std::uint8_t>* out, char* err) {
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, err, on_error, on_warning);
    if (png == nullptr) {
        std::snprintf(err, kErrLen, "out of memory");
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_set_write_fn(png, out, on_write, on_flush);
    png_set_IHDR(png, info, static_cast<png_uint_32>(in->width), static_cast<png_uint_32>(in->height), 8,
                 in->channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, in->rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

RawPixels decode(std::span<const std::uint8_t> png, Want want, const std::string& origin) {
    if (png.size() < 8 || png_sig_cmp(png.data(), 0, 8) != 0)
        throw ImageIoError("unsupported format: not a PNG file: " + origin);
    ReadCursor cursor{png.data(), png.size(), 0};
    RawPixels raw;
    char err[kErrLen] = {0};
    if (!decode_raw(&cursor, want, &raw, err))
        throw ImageIoError(std::string(err) + ": " + origin);
    raw.rows.clear();
    return raw;
}

std::vector<std::uint8_t> encode(const std::uint8_t* pixels, Extent extent, int channels) {
    if (extent.area() == 0)
        throw ImageIoError("cannot encode a zero-dimension image");
    RawPixels raw;
    raw.width = extent.width;
    raw.height = extent.height;
    raw.channels = channels;
    raw.rows.resize(extent.height);
    for (int y = 0; y < extent.height; ++y)
        raw.rows[y] = const_cast<std::uint8_t*>(pixels) + static_cast<std::size_t>(y) * extent.width * channels;
    std::vector<std::uint8_t> out;
    char err[kErrLen] = {0};
    if (!encode_raw(&raw, &out, err))
        throw ImageIoError(std::string("PNG encoding failed: ") + err);
    return out;
}

}  // namespace

BinaryMask decode_mask_png(std::span<const std::uint8_t> png, const std::string& origin) {
    const auto raw = decode(png, Want::Gray8, origin);
    BinaryMask mask(raw.width, raw.height);
    auto dst = mask.data();
    for (std::size_t i = 0; i < raw.pixels.size(); ++i)
        dst[i] = raw.pixels[i] >= 128 ? 1 : 0;
    return mask;
}

BinaryMask load_mask(const std::filesystem::path& path) {
    return decode_mask_png(read_file_bytes(path), path.string());
}

std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask) {
    std::vector<std::uint8_t> gray(mask.data().size());
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = mask.data()[i] ? 255 : 0;
    return encode(gray.data(), mask.extent(), 1);
}

void save_mask(const BinaryMask& mask, const std::filesystem::path& path) {
    write_file_bytes(path, encode_mask_png(mask));
}

ProbabilityMask decode_probability_png(std::span<const std::uint8_t> png, const std::string& origin) {
    const auto raw = decode(png, Want::Gray8, origin);
    ProbabilityMask mask(raw.width, raw.height);
    for (int y = 0; y < raw.height; ++y)
        for (int x = 0; x < raw.width; ++x)
            mask.set(x, y, raw.pixels[static_cast<std::size_t>(y) * raw.width + x] / 255.0);
    return mask;
}

ProbabilityMask load_probability(const std::filesystem::path& path) {
    return decode_probability_png(read_file_bytes(path), path.string());
}

std::vector<std::uint8_t> encode_probability_png(const ProbabilityMask& mask) {
    std::vector<std::uint8_t> gray(mask.data().size());
    for (std::size_t i = 0; i < gray.size(); ++i)
        gray[i] = static_cast<std::uint8_t>(std::lround(mask.data()[i] * 255.0));
    return encode(gray.data(), mask.extent(), 1);
}

void save_probability(const ProbabilityMask& mask, const std::filesystem::path& path) {
    write_file_bytes(path, encode_probability_png(mask));
}

Image decode_image_png(std::span<const std::uint8_t> png, const std::string& origin) {
    auto raw = decode(png, Want::Rgb8, origin);
    Image image(raw.width, raw.height);
    std::copy(raw.pixels.begin(), raw.pixels.end(), image.bytes().begin());
    return image;
}

Image load_image(const std::filesystem::path& path) {
    return decode_image_png(read_file_bytes(path), path.string());
}

std::vector<std::uint8_t> encode_image_png(const Image& image) {
    return encode(image.bytes().data(), image.extent(), 3);
}

void save_image(const Image& image, const std::filesystem::path& path) {
    write_file_bytes(path, encode_image_png(image));
}

}  // namespace doicd
