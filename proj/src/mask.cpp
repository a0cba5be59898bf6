#include "doicd/mask.hpp"

#include <algorithm>
#include <functional>
#include <numeric>

namespace doicd {

std::string to_string(Extent e) {
    return std::to_string(e.width) + "x" + std::to_string(e.height);
}

void require_same_extent(Extent a, Extent b, const char* what) {
    if (a != b)
        throw DimensionMismatch(std::string("dimension mismatch in ") + what + ": " + to_string(a) + " vs " +
                                to_string(b));
}

BinaryMask::BinaryMask(int width, int height) : extent_{width, height} {
    if (width < 0 || height < 0)
        throw std::invalid_argument("mask dimensions must be non-negative");
    pixels_.assign(extent_.area(), 0);
}

BinaryMask BinaryMask::full(Extent extent) {
    BinaryMask m(extent);
    std::fill(m.pixels_.begin(), m.pixels_.end(), std::uint8_t{1});
    return m;
}

std::size_t BinaryMask::count() const {
    return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), std::uint8_t{1}));
}

ProbabilityMask::ProbabilityMask(int width, int height, double fill) : extent_{width, height} {
    if (width < 0 || height < 0)
        throw std::invalid_argument("mask dimensions must be non-negative");
    if (!(fill >= 0.0 && fill <= 1.0))
        throw std::invalid_argument("probability out of [0,1]");
    values_.assign(extent_.area(), fill);
}

void ProbabilityMask::set(int x, int y, double p) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("probability out of [0,1]");
    values_[index(x, y)] = p;
}

BinaryMask threshold(const ProbabilityMask& p, double t) {
    if (!(t >= 0.0 && t <= 1.0))
        throw std::invalid_argument("threshold must lie in [0,1]");
    BinaryMask out(p.extent());
    auto src = p.data();
    auto dst = out.data();
    std::transform(src.begin(), src.end(), dst.begin(), [t](double v) { return std::uint8_t{v > t}; });
    return out;
}

std::size_t intersection_count(const BinaryMask& a, const BinaryMask& b) {
    require_same_extent(a.extent(), b.extent(), "intersection");
    return std::transform_reduce(a.data().begin(), a.data().end(), b.data().begin(), std::size_t{0},
                                 std::plus<>{}, [](std::uint8_t x, std::uint8_t y) -> std::size_t { return x & y; });
}

std::size_t union_count(const BinaryMask& a, const BinaryMask& b) {
    require_same_extent(a.extent(), b.extent(), "union");
    return std::transform_reduce(a.data().begin(), a.data().end(), b.data().begin(), std::size_t{0},
                                 std::plus<>{}, [](std::uint8_t x, std::uint8_t y) -> std::size_t { return x | y; });
}

double iou(const BinaryMask& a, const BinaryMask& b) {
    require_same_extent(a.extent(), b.extent(), "iou");
    const auto uni = union_count(a, b);
    if (uni == 0)
        return 1.0;
    return static_cast<double>(intersection_count(a, b)) / static_cast<double>(uni);
}

int disjoint(const BinaryMask& a, const BinaryMask& b) {
    require_same_extent(a.extent(), b.extent(), "disjoint");
    return intersection_count(a, b) == 0 ? 1 : 0;
}

namespace {

// One pass of a 1-D max filter of the given radius along rows (horizontal) or
// columns, using a running count of foreground pixels inside the window.
BinaryMask max_filter_1d(const BinaryMask& in, int radius, bool horizontal) {
    const int w = in.width();
    const int h = in.height();
    BinaryMask out(w, h);
    const int lines = horizontal ? h : w;
    const int len = horizontal ? w : h;
    auto get = [&](int line, int pos) { return horizontal ? in.at(pos, line) : in.at(line, pos); };

    for (int line = 0; line < lines; ++line) {
        int inside = 0;
        for (int pos = 0; pos < std::min(radius, len); ++pos)
            inside += get(line, pos);
        for (int pos = 0; pos < len; ++pos) {
            const int enter = pos + radius;
            const int leave = pos - radius - 1;
            if (enter < len)
                inside += get(line, enter);
            if (leave >= 0)
                inside -= get(line, leave);
            if (inside > 0) {
                if (horizontal)
                    out.set(pos, line);
                else
                    out.set(line, pos);
            }
        }
    }
    return out;
}

}  // namespace

BinaryMask dilate(const BinaryMask& mask, int kernel, int iterations) {
    if (kernel < 1 || kernel % 2 == 0)
        throw std::invalid_argument("dilation kernel must be odd and positive, got " + std::to_string(kernel));
    if (iterations < 0)
        throw std::invalid_argument("dilation iterations must be non-negative");
    const int radius = kernel / 2;
    BinaryMask out = mask;
    for (int i = 0; i < iterations && radius > 0; ++i)
        out = max_filter_1d(max_filter_1d(out, radius, true), radius, false);
    return out;
}

BinaryMask mask_union(std::span<const BinaryMask> masks, Extent extent) {
    BinaryMask out(extent);
    auto dst = out.data();
    for (const auto& m : masks) {
        require_same_extent(extent, m.extent(), "union");
        std::transform(dst.begin(), dst.end(), m.data().begin(), dst.begin(), std::bit_or<>{});
    }
    return out;
}

BinaryMask mask_union(std::span<const BinaryMask> masks) {
    if (masks.empty())
        throw std::invalid_argument("union of an empty mask list needs explicit dimensions");
    return mask_union(masks, masks.front().extent());
}

BinaryMask complement(const BinaryMask& mask) {
    BinaryMask out(mask.extent());
    std::transform(mask.data().begin(), mask.data().end(), out.data().begin(),
                   [](std::uint8_t v) { return std::uint8_t(v ^ 1U); });
    return out;
}

bool is_subset(const BinaryMask& a, const BinaryMask& b) {
    require_same_extent(a.extent(), b.extent(), "subset");
    return intersection_count(a, b) == a.count();
}

namespace {

struct DisjointSets {
    std::vector<std::uint32_t> parent;

    std::uint32_t make() {
        parent.push_back(static_cast<std::uint32_t>(parent.size()));
        return parent.back();
    }
    std::uint32_t find(std::uint32_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    }
    void unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a != b)
            parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<BinaryMask> connected_components(const BinaryMask& mask) {
    const int w = mask.width();
    const int h = mask.height();
    constexpr std::uint32_t kNone = 0xFFFFFFFFu;
    std::vector<std::uint32_t> labels(mask.extent().area(), kNone);
    DisjointSets sets;
    auto label_at = [&](int x, int y) { return labels[static_cast<std::size_t>(y) * w + x]; };

    // First pass: provisional labels from the already-visited 8-neighbours
    // (W, NW, N, NE).
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!mask.at(x, y))
                continue;
            std::uint32_t current = kNone;
            const int nbrs[4][2] = {{x - 1, y}, {x - 1, y - 1}, {x, y - 1}, {x + 1, y - 1}};
            for (const auto& n : nbrs) {
                if (n[0] < 0 || n[0] >= w || n[1] < 0)
                    continue;
                const auto l = label_at(n[0], n[1]);
                if (l == kNone)
                    continue;
                if (current == kNone)
                    current = l;
                else
                    sets.unite(current, l);
            }
            if (current == kNone)
                current = sets.make();
            labels[static_cast<std::size_t>(y) * w + x] = current;
        }
    }

    // Second pass: resolve roots and number components by first appearance.
    std::vector<std::uint32_t> order(sets.parent.size(), kNone);
    std::vector<BinaryMask> components;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto l = label_at(x, y);
            if (l == kNone)
                continue;
            const auto root = sets.find(l);
            if (order[root] == kNone) {
                order[root] = static_cast<std::uint32_t>(components.size());
                components.emplace_back(mask.extent());
            }
            components[order[root]].set(x, y);
        }
    }
    return components;
}

BoundingBox bounding_box(const BinaryMask& mask) {
    int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask.at(x, y)) {
                x0 = std::min(x0, x);
                y0 = std::min(y0, y);
                x1 = std::max(x1, x);
                y1 = std::max(y1, y);
            }
    if (x1 < 0)
        return {};
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

std::vector<std::uint32_t> run_lengths(const BinaryMask& mask) {
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t length = 0;
    for (auto v : mask.data()) {
        if (v != current) {
            runs.push_back(length);
            length = 0;
            current = v;
        }
        ++length;
    }
    runs.push_back(length);
    return runs;
}

}  // namespace doicd
