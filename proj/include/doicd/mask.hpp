#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace doicd {

/// Raised when two masks (or a mask and an image) that must agree in size do not.
class DimensionMismatch : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

struct Extent {
    int width = 0;
    int height = 0;

    std::size_t area() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool operator==(const Extent&) const = default;
};

std::string to_string(Extent e);

struct BoundingBox {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    bool operator==(const BoundingBox&) const = default;
};

/// Row-major foreground/background grid. Pixels are stored one byte each, 0 or 1.
class BinaryMask {
  public:
    BinaryMask() = default;
    BinaryMask(int width, int height);
    BinaryMask(Extent extent) : BinaryMask(extent.width, extent.height) {}

    static BinaryMask full(Extent extent);

    int width() const { return extent_.width; }
    int height() const { return extent_.height; }
    Extent extent() const { return extent_; }
    bool empty_extent() const { return extent_.area() == 0; }

    bool at(int x, int y) const { return pixels_[index(x, y)] != 0; }
    void set(int x, int y, bool on = true) { pixels_[index(x, y)] = on ? 1 : 0; }

    std::span<const std::uint8_t> data() const { return pixels_; }
    std::span<std::uint8_t> data() { return pixels_; }

    std::size_t count() const;
    bool none() const { return count() == 0; }

    bool operator==(const BinaryMask&) const = default;

  private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(extent_.width) + static_cast<std::size_t>(x);
    }

    Extent extent_;
    std::vector<std::uint8_t> pixels_;
};

/// Per-pixel change probability. Values are held unquantized in memory; the
/// 8-bit file format stores round(p * 255) and loads k / 255.
class ProbabilityMask {
  public:
    ProbabilityMask() = default;
    ProbabilityMask(int width, int height, double fill = 0.0);

    int width() const { return extent_.width; }
    int height() const { return extent_.height; }
    Extent extent() const { return extent_; }

    double at(int x, int y) const { return values_[index(x, y)]; }
    void set(int x, int y, double p);

    std::span<const double> data() const { return values_; }

    bool operator==(const ProbabilityMask&) const = default;

  private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(extent_.width) + static_cast<std::size_t>(x);
    }

    Extent extent_;
    std::vector<double> values_;
};

inline constexpr double kDefaultChangeThreshold = 0.5;
inline constexpr int kDefaultDilationKernel = 5;
inline constexpr int kDefaultDilationIterations = 3;

/// Foreground iff probability is strictly greater than `t`.
BinaryMask threshold(const ProbabilityMask& p, double t = kDefaultChangeThreshold);

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b);
std::size_t union_count(const BinaryMask& a, const BinaryMask& b);

/// |a ∩ b| / |a ∪ b|. Two empty masks agree perfectly and give 1.
double iou(const BinaryMask& a, const BinaryMask& b);

/// 1 when the masks share no foreground pixel (vacuously when either is empty).
int disjoint(const BinaryMask& a, const BinaryMask& b);

/// Square-element dilation, `iterations` times, clipped at the borders.
BinaryMask dilate(const BinaryMask& mask, int kernel = kDefaultDilationKernel, int iterations = 1);

BinaryMask mask_union(std::span<const BinaryMask> masks, Extent extent);
BinaryMask mask_union(std::span<const BinaryMask> masks);
BinaryMask complement(const BinaryMask& mask);
bool is_subset(const BinaryMask& a, const BinaryMask& b);

/// 8-connected components, each as a full-size mask, ordered by their first
/// foreground pixel in row-major order.
std::vector<BinaryMask> connected_components(const BinaryMask& mask);

/// Tight box around the foreground; zero-sized when the mask is empty.
BoundingBox bounding_box(const BinaryMask& mask);

/// Alternating run lengths in row-major order, starting with a background run
/// (which may be zero).
std::vector<std::uint32_t> run_lengths(const BinaryMask& mask);

void require_same_extent(Extent a, Extent b, const char* what);

}  // namespace doicd
