#include "doicd/coco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

namespace doicd {

BinaryMask rasterize_polygons(const std::vector<std::vector<double>>& polygons, Extent extent) {
    BinaryMask mask(extent);
    std::vector<double> crossings;
    for (int y = 0; y < extent.height; ++y) {
        const double yc = y + 0.5;
        // Parity across all rings; a pixel inside an odd number of rings is set.
        std::vector<int> parity(static_cast<std::size_t>(extent.width), 0);
        for (const auto& poly : polygons) {
            if (poly.size() < 6 || poly.size() % 2 != 0)
                throw std::invalid_argument("polygon needs at least three x,y pairs");
            crossings.clear();
            const std::size_t n = poly.size() / 2;
            for (std::size_t i = 0; i < n; ++i) {
                const double x0 = poly[2 * i], y0 = poly[2 * i + 1];
                const double x1 = poly[2 * ((i + 1) % n)], y1 = poly[2 * ((i + 1) % n) + 1];
                // Half-open rule on y so shared vertices count once.
                if ((y0 <= yc && yc < y1) || (y1 <= yc && yc < y0))
                    crossings.push_back(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
            }
            std::sort(crossings.begin(), crossings.end());
            for (std::size_t k = 0; k + 1 < crossings.size(); k += 2) {
                // Pixel centres x + 0.5 in [a, b).
                const int first = std::max(0, static_cast<int>(std::ceil(crossings[k] - 0.5)));
                const int last = std::min(extent.width, static_cast<int>(std::ceil(crossings[k + 1] - 0.5)));
                for (int x = first; x < last; ++x)
                    parity[static_cast<std::size_t>(x)] ^= 1;
            }
        }
        for (int x = 0; x < extent.width; ++x)
            if (parity[static_cast<std::size_t>(x)])
                mask.set(x, y);
    }
    return mask;
}

BinaryMask decode_rle_counts(const std::vector<std::uint64_t>& counts, Extent extent) {
    BinaryMask mask(extent);
    const auto total = static_cast<std::uint64_t>(extent.area());
    std::uint64_t pos = 0;
    bool on = false;
    for (auto run : counts) {
        if (pos + run > total)
            throw std::invalid_argument("RLE counts exceed mask size");
        if (on) {
            for (std::uint64_t i = pos; i < pos + run; ++i) {
                const auto x = static_cast<int>(i / static_cast<std::uint64_t>(extent.height));
                const auto y = static_cast<int>(i % static_cast<std::uint64_t>(extent.height));
                mask.set(x, y);
            }
        }
        pos += run;
        on = !on;
    }
    if (pos != total)
        throw std::invalid_argument("RLE counts do not cover the mask");
    return mask;
}

std::vector<std::uint64_t> decode_rle_string(std::string_view s) {
    std::vector<std::int64_t> counts;
    std::size_t p = 0;
    while (p < s.size()) {
        std::int64_t x = 0;
        int k = 0;
        bool more = true;
        while (more) {
            if (p >= s.size())
                throw std::invalid_argument("truncated RLE string");
            const std::int64_t c = static_cast<std::int64_t>(s[p]) - 48;
            if (c < 0 || c > 63)
                throw std::invalid_argument("invalid character in RLE string");
            x |= (c & 0x1f) << (5 * k);
            more = (c & 0x20) != 0;
            ++p;
            ++k;
            if (!more && (c & 0x10))
                x |= static_cast<std::int64_t>(-1) * (std::int64_t{1} << (5 * k));
        }
        if (counts.size() > 2)
            x += counts[counts.size() - 2];
        counts.push_back(x);
    }
    std::vector<std::uint64_t> out;
    out.reserve(counts.size());
    for (auto c : counts) {
        if (c < 0)
            throw std::invalid_argument("negative run in RLE string");
        out.push_back(static_cast<std::uint64_t>(c));
    }
    return out;
}

BinaryMask decode_segmentation(const nlohmann::json& seg, Extent extent) {
    if (seg.is_array())
        return rasterize_polygons(seg.get<std::vector<std::vector<double>>>(), extent);
    if (seg.is_object() && seg.contains("counts")) {
        if (seg.contains("size")) {
            const auto size = seg.at("size").get<std::vector<int>>();
            if (size.size() != 2 || size[0] != extent.height || size[1] != extent.width)
                throw std::invalid_argument("RLE size does not match image size");
        }
        const auto& counts = seg.at("counts");
        if (counts.is_string())
            return decode_rle_counts(decode_rle_string(counts.get<std::string>()), extent);
        return decode_rle_counts(counts.get<std::vector<std::uint64_t>>(), extent);
    }
    throw std::invalid_argument("unsupported segmentation encoding");
}

ObjectCutout make_cutout(std::string object_id, std::string category, const Image& image, const BinaryMask& mask) {
    require_same_extent(image.extent(), mask.extent(), "cutout");
    const auto box = bounding_box(mask);
    if (box.width == 0)
        throw std::invalid_argument("cutout mask is empty: " + object_id);
    ObjectCutout c{std::move(object_id), std::move(category), Image(box.width, box.height),
                   BinaryMask(box.width, box.height)};
    for (int y = 0; y < box.height; ++y)
        for (int x = 0; x < box.width; ++x) {
            c.image.set(x, y, image.at(box.x + x, box.y + y));
            c.mask.set(x, y, mask.at(box.x + x, box.y + y));
        }
    return c;
}

std::vector<ObjectCutout> load_object_bank(const std::filesystem::path& annotations,
                                           const std::filesystem::path& image_root, const BankOptions& options) {
    std::ifstream in(annotations);
    if (!in)
        throw std::runtime_error("cannot open object bank: " + annotations.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed object bank " + annotations.string() + ": " + e.what());
    }

    std::vector<ObjectCutout> bank;
    try {
        std::map<std::int64_t, std::string> categories;
        if (j.contains("categories"))
            for (const auto& c : j.at("categories"))
                categories[c.at("id").get<std::int64_t>()] = c.value("name", std::string{});

        std::map<std::int64_t, std::string> files;
        for (const auto& im : j.at("images"))
            files[im.at("id").get<std::int64_t>()] = im.at("file_name").get<std::string>();

        std::map<std::int64_t, Image> cache;
        for (const auto& ann : j.at("annotations")) {
            if (!options.include_crowd && ann.value("iscrowd", 0) != 0)
                continue;
            const auto image_id = ann.at("image_id").get<std::int64_t>();
            auto file = files.find(image_id);
            if (file == files.end())
                throw std::runtime_error("annotation refers to unknown image id " + std::to_string(image_id));
            auto cached = cache.find(image_id);
            if (cached == cache.end())
                cached = cache.emplace(image_id, load_image(image_root / file->second)).first;
            const Image& image = cached->second;

            const auto mask = decode_segmentation(ann.at("segmentation"), image.extent());
            if (mask.none())
                continue;
            const auto cat = categories.find(ann.value("category_id", std::int64_t{-1}));
            bank.push_back(make_cutout(std::to_string(ann.at("id").get<std::int64_t>()),
                                       cat == categories.end() ? std::string{} : cat->second, image, mask));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed object bank " + annotations.string() + ": " + e.what());
    }
    return bank;
}

}  // namespace doicd
