#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "doicd/coco.hpp"
#include "doicd/image.hpp"
#include "doicd/mask.hpp"

namespace doicd {

class InfeasiblePlacement : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Target size of the pasted object: its longest side as a fraction of the
/// background's shorter side.
struct ScaleRange {
    double min = 0.02;
    double max = 0.20;
};

/// Where and how large a cutout is pasted. `scale` is the resize factor
/// applied to the cutout; (x, y) is the top-left of the scaled box.
struct Placement {
    int x = 0;
    int y = 0;
    double scale = 1.0;

    bool operator==(const Placement&) const = default;
};

/// Size of a cutout after resizing by `scale` (each side at least 1 px).
Extent scaled_extent(Extent cutout, double scale);

/// Resize factor that makes the cutout's longest side `relative_size` times the
/// background's shorter side.
double scale_for_relative_size(Extent background, Extent cutout, double relative_size);

using SynthRng = std::mt19937_64;

/// Size uniform in `range`, then top-left uniform over every anchor that keeps
/// the scaled box inside the background.
Placement sample_placement(SynthRng& rng, Extent background, Extent cutout, ScaleRange range);

struct PlacedBox {
    int x, y, width, height;
};

/// As sample_placement, but rejects boxes overlapping any of `occupied`.
Placement sample_placement_avoiding(SynthRng& rng, Extent background, Extent cutout, ScaleRange range,
                                    const std::vector<PlacedBox>& occupied, int max_attempts = 1000);

BinaryMask resize_nearest(const BinaryMask& mask, Extent size);
Image resize_bilinear(const Image& image, Extent size);

struct CompositeResult {
    Image live;
    BinaryMask gt;
};

/// Opaque paste: live equals bg except on the scaled mask support, where the
/// scaled cutout pixels replace it; gt is that support.
CompositeResult composite(const Image& bg, const ObjectCutout& cutout, const Placement& placement);

/// Pastes several cutouts in order onto the same background.
CompositeResult composite_all(const Image& bg, const std::vector<const ObjectCutout*>& cutouts,
                              const std::vector<Placement>& placements);

struct BackgroundEntry {
    std::string id;
    std::filesystem::path path;
};

/// JSON lines of {id, path}; relative paths resolve against the manifest's directory.
std::vector<BackgroundEntry> load_background_manifest(const std::filesystem::path& manifest);

struct PastedObject {
    std::string object_id;
    Placement placement;
};

struct SynthSample {
    std::string sample_id;
    std::string background_id;
    std::vector<PastedObject> objects;
    std::uint64_t seed = 0;
    std::filesystem::path ref_path;  // relative to the output directory
    std::filesystem::path live_path;
    std::filesystem::path gt_path;
};

struct SynthConfig {
    std::size_t count = 0;
    std::uint64_t seed = 0;
    ScaleRange scale_range;
    int objects_per_sample = 1;
    std::size_t workers = 1;
};

nlohmann::ordered_json to_json(const SynthSample& sample);

/// Writes `count` (ref, live, gt) PNG triplets under out_dir/{ref,live,gt}/ and
/// out_dir/manifest.jsonl. Draws are made single-threaded from `seed`, so the
/// output is identical for any worker count.
std::vector<SynthSample> generate_dataset(const std::vector<BackgroundEntry>& backgrounds,
                                          const std::vector<ObjectCutout>& bank, const SynthConfig& config,
                                          const std::filesystem::path& out_dir);

}  // namespace doicd
