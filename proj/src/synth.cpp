#include "doicd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "doicd/parallel.hpp"

namespace doicd {

namespace fs = std::filesystem;

Extent scaled_extent(Extent cutout, double scale) {
    if (!(scale > 0.0))
        throw InfeasiblePlacement("placement scale must be positive");
    auto side = [scale](int v) { return std::max(1, static_cast<int>(std::lround(v * scale))); };
    return {side(cutout.width), side(cutout.height)};
}

double scale_for_relative_size(Extent background, Extent cutout, double relative_size) {
    const int shorter = std::min(background.width, background.height);
    const int longest = std::max(cutout.width, cutout.height);
    if (longest <= 0)
        throw InfeasiblePlacement("cutout has zero size");
    return relative_size * shorter / longest;
}

namespace {

void validate_range(ScaleRange range) {
    if (!(range.min > 0.0 && range.min <= range.max && range.max <= 1.0))
        throw std::invalid_argument("scale range must satisfy 0 < min <= max <= 1");
}

bool fits(Extent background, Extent box) {
    return box.width <= background.width && box.height <= background.height;
}

double draw_relative_size(SynthRng& rng, ScaleRange range) {
    if (range.min == range.max)
        return range.min;
    return std::uniform_real_distribution<double>(range.min, range.max)(rng);
}

Placement anchor(SynthRng& rng, Extent background, Extent box, double scale) {
    Placement p;
    p.scale = scale;
    p.x = std::uniform_int_distribution<int>(0, background.width - box.width)(rng);
    p.y = std::uniform_int_distribution<int>(0, background.height - box.height)(rng);
    return p;
}

}  // namespace

Placement sample_placement(SynthRng& rng, Extent background, Extent cutout, ScaleRange range) {
    validate_range(range);
    const auto smallest = scaled_extent(cutout, scale_for_relative_size(background, cutout, range.min));
    if (!fits(background, smallest))
        throw InfeasiblePlacement("cutout " + to_string(cutout) + " cannot fit " + to_string(background) +
                                  " at the minimum scale");
    const double scale = scale_for_relative_size(background, cutout, draw_relative_size(rng, range));
    const auto box = scaled_extent(cutout, scale);
    if (!fits(background, box))
        throw InfeasiblePlacement("scaled cutout " + to_string(box) + " exceeds background " + to_string(background));
    return anchor(rng, background, box, scale);
}

Placement sample_placement_avoiding(SynthRng& rng, Extent background, Extent cutout, ScaleRange range,
                                    const std::vector<PlacedBox>& occupied, int max_attempts) {
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        const auto p = sample_placement(rng, background, cutout, range);
        const auto box = scaled_extent(cutout, p.scale);
        const bool clash = std::any_of(occupied.begin(), occupied.end(), [&](const PlacedBox& o) {
            return p.x < o.x + o.width && o.x < p.x + box.width && p.y < o.y + o.height && o.y < p.y + box.height;
        });
        if (!clash)
            return p;
    }
    throw InfeasiblePlacement("no non-overlapping placement found after " + std::to_string(max_attempts) +
                              " attempts");
}

BinaryMask resize_nearest(const BinaryMask& mask, Extent size) {
    BinaryMask out(size);
    const auto sw = static_cast<std::int64_t>(mask.width());
    const auto sh = static_cast<std::int64_t>(mask.height());
    for (int y = 0; y < size.height; ++y) {
        const auto sy = static_cast<int>(std::min(sh - 1, (2 * y + 1) * sh / (2 * size.height)));
        for (int x = 0; x < size.width; ++x) {
            const auto sx = static_cast<int>(std::min(sw - 1, (2 * x + 1) * sw / (2 * size.width)));
            if (mask.at(sx, sy))
                out.set(x, y);
        }
    }
    return out;
}

Image resize_bilinear(const Image& image, Extent size) {
    Image out(size.width, size.height);
    const double rx = static_cast<double>(image.width()) / size.width;
    const double ry = static_cast<double>(image.height()) / size.height;
    for (int y = 0; y < size.height; ++y) {
        const double sy = std::clamp((y + 0.5) * ry - 0.5, 0.0, static_cast<double>(image.height() - 1));
        const int y0 = static_cast<int>(sy);
        const int y1 = std::min(y0 + 1, image.height() - 1);
        const double fy = sy - y0;
        for (int x = 0; x < size.width; ++x) {
            const double sx = std::clamp((x + 0.5) * rx - 0.5, 0.0, static_cast<double>(image.width() - 1));
            const int x0 = static_cast<int>(sx);
            const int x1 = std::min(x0 + 1, image.width() - 1);
            const double fx = sx - x0;
            const auto a = image.at(x0, y0), b = image.at(x1, y0), c = image.at(x0, y1), d = image.at(x1, y1);
            Rgb px;
            for (int ch = 0; ch < 3; ++ch) {
                const double top = a[ch] * (1 - fx) + b[ch] * fx;
                const double bottom = c[ch] * (1 - fx) + d[ch] * fx;
                px[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(top * (1 - fy) + bottom * fy), 0L, 255L));
            }
            out.set(x, y, px);
        }
    }
    return out;
}

CompositeResult composite(const Image& bg, const ObjectCutout& cutout, const Placement& placement) {
    return composite_all(bg, {&cutout}, {placement});
}

CompositeResult composite_all(const Image& bg, const std::vector<const ObjectCutout*>& cutouts,
                              const std::vector<Placement>& placements) {
    if (cutouts.size() != placements.size())
        throw std::invalid_argument("composite needs one placement per cutout");
    CompositeResult r{bg, BinaryMask(bg.extent())};
    for (std::size_t i = 0; i < cutouts.size(); ++i) {
        const auto& cut = *cutouts[i];
        const auto& p = placements[i];
        require_same_extent(cut.image.extent(), cut.mask.extent(), "cutout");
        const auto box = scaled_extent(cut.mask.extent(), p.scale);
        if (p.x < 0 || p.y < 0 || p.x + box.width > bg.width() || p.y + box.height > bg.height())
            throw InfeasiblePlacement("placement at (" + std::to_string(p.x) + "," + std::to_string(p.y) + ") of " +
                                      to_string(box) + " leaves background " + to_string(bg.extent()));
        const auto mask = resize_nearest(cut.mask, box);
        const auto pixels = resize_bilinear(cut.image, box);
        for (int y = 0; y < box.height; ++y)
            for (int x = 0; x < box.width; ++x)
                if (mask.at(x, y)) {
                    r.live.set(p.x + x, p.y + y, pixels.at(x, y));
                    r.gt.set(p.x + x, p.y + y);
                }
    }
    return r;
}

std::vector<BackgroundEntry> load_background_manifest(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in)
        throw std::runtime_error("cannot open background manifest: " + manifest.string());
    std::vector<BackgroundEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        try {
            const auto j = nlohmann::json::parse(line);
            BackgroundEntry e{j.at("id").get<std::string>(), j.at("path").get<std::string>()};
            if (e.path.is_relative())
                e.path = manifest.parent_path() / e.path;
            out.push_back(std::move(e));
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(manifest.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

nlohmann::ordered_json to_json(const SynthSample& s) {
    nlohmann::ordered_json j;
    j["sample_id"] = s.sample_id;
    j["bg"] = s.background_id;
    const auto& first = s.objects.front();
    j["object_id"] = first.object_id;
    j["x"] = first.placement.x;
    j["y"] = first.placement.y;
    j["scale"] = first.placement.scale;
    if (s.objects.size() > 1) {
        auto objs = nlohmann::ordered_json::array();
        for (const auto& o : s.objects)
            objs.push_back({{"object_id", o.object_id},
                            {"x", o.placement.x},
                            {"y", o.placement.y},
                            {"scale", o.placement.scale}});
        j["objects"] = std::move(objs);
    }
    j["paths"] = {{"ref", s.ref_path.generic_string()},
                  {"live", s.live_path.generic_string()},
                  {"gt", s.gt_path.generic_string()}};
    j["seed"] = s.seed;
    return j;
}

std::vector<SynthSample> generate_dataset(const std::vector<BackgroundEntry>& backgrounds,
                                          const std::vector<ObjectCutout>& bank, const SynthConfig& config,
                                          const fs::path& out_dir) {
    if (backgrounds.empty())
        throw std::invalid_argument("no background images given");
    if (bank.empty())
        throw std::invalid_argument("object bank is empty");
    if (config.objects_per_sample < 1)
        throw std::invalid_argument("objects_per_sample must be at least 1");
    validate_range(config.scale_range);

    fs::create_directories(out_dir);
    std::ofstream manifest(out_dir / "manifest.jsonl", std::ios::trunc);
    if (!manifest)
        throw std::runtime_error("cannot write manifest under " + out_dir.string());
    if (config.count == 0)
        return {};

    std::vector<Image> bg_images;
    bg_images.reserve(backgrounds.size());
    for (const auto& b : backgrounds)
        bg_images.push_back(load_image(b.path));

    // Fix every draw up front so the parallel write stage cannot perturb them.
    struct Plan {
        std::size_t bg = 0;
        std::vector<std::size_t> objects;
        std::vector<Placement> placements;
    };
    SynthRng master(config.seed);
    std::vector<SynthSample> samples(config.count);
    std::vector<Plan> plans(config.count);
    for (std::size_t i = 0; i < config.count; ++i) {
        auto& s = samples[i];
        auto& plan = plans[i];
        s.seed = master();
        SynthRng rng(s.seed);
        plan.bg = std::uniform_int_distribution<std::size_t>(0, backgrounds.size() - 1)(rng);
        const auto bg_extent = bg_images[plan.bg].extent();
        std::vector<PlacedBox> occupied;
        for (int k = 0; k < config.objects_per_sample; ++k) {
            const auto obj = std::uniform_int_distribution<std::size_t>(0, bank.size() - 1)(rng);
            const auto cut_extent = bank[obj].mask.extent();
            const auto p = sample_placement_avoiding(rng, bg_extent, cut_extent, config.scale_range, occupied);
            const auto box = scaled_extent(cut_extent, p.scale);
            occupied.push_back({p.x, p.y, box.width, box.height});
            plan.objects.push_back(obj);
            plan.placements.push_back(p);
            s.objects.push_back({bank[obj].object_id, p});
        }

        char id[32];
        std::snprintf(id, sizeof id, "s%06zu", i);
        s.sample_id = id;
        s.background_id = backgrounds[plan.bg].id;
        s.ref_path = fs::path("ref") / (s.sample_id + ".png");
        s.live_path = fs::path("live") / (s.sample_id + ".png");
        s.gt_path = fs::path("gt") / (s.sample_id + ".png");
    }

    for (const char* sub : {"ref", "live", "gt"})
        fs::create_directories(out_dir / sub);
    parallel_map(config.count, config.workers, [&](std::size_t i) {
        const auto& plan = plans[i];
        const auto& s = samples[i];
        std::vector<const ObjectCutout*> cuts;
        for (auto o : plan.objects)
            cuts.push_back(&bank[o]);
        const auto& bg = bg_images[plan.bg];
        const auto result = composite_all(bg, cuts, plan.placements);
        save_image(bg, out_dir / s.ref_path);
        save_image(result.live, out_dir / s.live_path);
        save_mask(result.gt, out_dir / s.gt_path);
        return 0;
    });

    for (const auto& s : samples)
        manifest << to_json(s).dump() << '\n';
    if (!manifest)
        throw std::runtime_error("failed writing manifest under " + out_dir.string());
    return samples;
}

}  // namespace doicd
