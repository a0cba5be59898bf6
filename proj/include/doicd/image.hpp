#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "doicd/mask.hpp"

namespace doicd {

using Rgb = std::array<std::uint8_t, 3>;

/// Interleaved 8-bit RGB image, row-major.
class Image {
  public:
    Image() = default;
    Image(int width, int height, Rgb fill = {0, 0, 0});

    int width() const { return extent_.width; }
    int height() const { return extent_.height; }
    Extent extent() const { return extent_; }

    Rgb at(int x, int y) const {
        const auto i = offset(x, y);
        return {bytes_[i], bytes_[i + 1], bytes_[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        const auto i = offset(x, y);
        bytes_[i] = c[0];
        bytes_[i + 1] = c[1];
        bytes_[i + 2] = c[2];
    }

    std::span<const std::uint8_t> bytes() const { return bytes_; }
    std::span<std::uint8_t> bytes() { return bytes_; }

    bool operator==(const Image&) const = default;

  private:
    std::size_t offset(int x, int y) const {
        return (static_cast<std::size_t>(y) * static_cast<std::size_t>(extent_.width) + static_cast<std::size_t>(x)) * 3;
    }

    Extent extent_;
    std::vector<std::uint8_t> bytes_;
};

class ImageIoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// 8-bit PNG codec. Encoding is deterministic: identical pixels give identical bytes.

/// Single-channel 8-bit PNG; values >= 128 are foreground.
BinaryMask load_mask(const std::filesystem::path& path);
BinaryMask decode_mask_png(std::span<const std::uint8_t> png, const std::string& origin = "<memory>");
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mask_png(const BinaryMask& mask);

/// Single-channel 8-bit PNG holding round(p * 255).
ProbabilityMask load_probability(const std::filesystem::path& path);
ProbabilityMask decode_probability_png(std::span<const std::uint8_t> png, const std::string& origin = "<memory>");
void save_probability(const ProbabilityMask& mask, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_probability_png(const ProbabilityMask& mask);

/// Any 8-bit PNG colour type is accepted and converted to RGB (alpha dropped).
Image load_image(const std::filesystem::path& path);
Image decode_image_png(std::span<const std::uint8_t> png, const std::string& origin = "<memory>");
void save_image(const Image& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_image_png(const Image& image);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace doicd
