#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "doicd/image.hpp"
#include "doicd/mask.hpp"

namespace doicd {

/// A pasteable object: its pixels and support, cropped to the support's bounding box.
struct ObjectCutout {
    std::string object_id;
    std::string category;
    Image image;
    BinaryMask mask;
};

/// Even-odd fill of one or more polygons (flat x0,y0,x1,y1,... lists), sampling
/// each pixel at its centre.
BinaryMask rasterize_polygons(const std::vector<std::vector<double>>& polygons, Extent extent);

/// Column-major run lengths starting with a background run.
BinaryMask decode_rle_counts(const std::vector<std::uint64_t>& counts, Extent extent);

/// The compact LEB128-style string form of COCO run lengths.
std::vector<std::uint64_t> decode_rle_string(std::string_view s);

/// Mask of one COCO `segmentation` value (polygon list, RLE object with list
/// counts, or RLE object with compressed string counts).
BinaryMask decode_segmentation(const nlohmann::json& segmentation, Extent extent);

struct BankOptions {
    bool include_crowd = false;
};

/// Loads every usable annotation of a COCO-style JSON file as a cutout.
/// Image files are resolved against `image_root`. Annotations with an empty
/// mask are skipped.
std::vector<ObjectCutout> load_object_bank(const std::filesystem::path& annotations,
                                           const std::filesystem::path& image_root, const BankOptions& options = {});

ObjectCutout make_cutout(std::string object_id, std::string category, const Image& image, const BinaryMask& mask);

}  // namespace doicd
