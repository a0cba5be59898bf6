#include <doctest.h>

#include <atomic>
#include <random>

#include "doicd/fixture_backend.hpp"
#include "doicd/object_search.hpp"
#include "test_support.hpp"

using namespace doicd;
using doicd::testing::FixtureBuilder;
using doicd::testing::random_mask;
using doicd::testing::rect_mask;
using doicd::testing::TempDir;

namespace {

class CountingBackend final : public ModelBackend {
  public:
    explicit CountingBackend(ModelBackend& inner) : inner_(inner) {}

    ProbabilityMask detect_change(const ChangeRequest& req) override { return inner_.detect_change(req); }
    std::string describe(const DescribeRequest& req) override {
        ++describes;
        if (req.prompt != kDescribePrompt)
            ++bad_prompts;
        return inner_.describe(req);
    }
    std::vector<ObjectProposal> segment(const SegmentRequest& req) override {
        ++segments;
        return inner_.segment(req);
    }

    std::atomic<int> describes{0};
    std::atomic<int> segments{0};
    std::atomic<int> bad_prompts{0};

  private:
    ModelBackend& inner_;
};

/// Names each region after its index and never segments anything.
class EchoBackend final : public ModelBackend {
  public:
    ProbabilityMask detect_change(const ChangeRequest& req) override {
        return ProbabilityMask(req.live.width(), req.live.height());
    }
    std::string describe(const DescribeRequest& req) override {
        return "This object is object " + std::to_string(req.region_index) + ".";
    }
    std::vector<ObjectProposal> segment(const SegmentRequest&) override { return {}; }
};

}  // namespace

TEST_CASE("prompt") {
    CHECK(build_prompt() == "What is the class name of this object? Please answer like 'This object is ..");
    CHECK(build_prompt() == build_prompt());
    for (char c : build_prompt())
        CHECK(static_cast<unsigned char>(c) < 128);
}

TEST_CASE("label parsing") {
    CHECK(parse_label("This object is a smartphone.") == "smartphone");
    CHECK(parse_label("this object is the red notebook") == "red notebook");
    CHECK_FALSE(parse_label("I cannot tell.").has_value());
    CHECK(parse_label("THIS OBJECT IS AN   Apple!") == "apple");
    CHECK(parse_label("Sure. This object is a pen. It is blue.") == "pen");
    CHECK(parse_label("This object is this object is a mug") == "mug");
    CHECK(parse_label("  This object is \"cable\".") == "cable");
    CHECK_FALSE(parse_label("This object is").has_value());
    CHECK_FALSE(parse_label("This object is a.").has_value());
    CHECK_FALSE(parse_label("This object is ...").has_value());
    CHECK(parse_label("This object is a  coffee\tcup\nmaybe") == "coffee cup");
}

TEST_CASE("parsed labels never contain the pattern") {
    std::mt19937_64 rng(5);
    const std::vector<std::string> pieces{"this object is ", "This Object Is ", "a ", "the ", "pen", ". ", "red ",
                                          "!", "floor", "  ", "cup"};
    std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
    for (int i = 0; i < 2000; ++i) {
        std::string s;
        for (int k = 0; k < 6; ++k)
            s += pieces[pick(rng)];
        const auto label = parse_label(s);
        if (label) {
            CHECK(label->find("this object is") == std::string::npos);
            CHECK_FALSE(label->empty());
        }
    }
}

TEST_CASE("label filtering") {
    CHECK(filter_labels({"pen", "wooden floor"}) == std::vector<std::string>{"pen"});
    CHECK(filter_labels({"floorboard"}) == std::vector<std::string>{"floorboard"});
    CHECK(filter_labels({"pen", "pen"}) == std::vector<std::string>{"pen"});
    CHECK(filter_labels({"Floor", "floor-lamp", "cup", "pen", "cup"}) == std::vector<std::string>{"cup", "pen"});

    LabelFilterConfig substring{.banned_words = {"floor"}, .whole_word = false};
    CHECK(filter_labels({"floorboard", "pen"}, substring) == std::vector<std::string>{"pen"});

    LabelFilterConfig custom{.banned_words = {"wall", "floor"}, .whole_word = true};
    CHECK(filter_labels({"white wall", "floor", "wallet"}, custom) == std::vector<std::string>{"wallet"});
}

TEST_CASE("filtering is idempotent") {
    std::mt19937_64 rng(9);
    const std::vector<std::string> vocab{"pen", "floor", "wooden floor", "floorboard", "cup", "Floor mat", "cable"};
    std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
    for (int i = 0; i < 500; ++i) {
        std::vector<std::string> labels(i % 9);
        for (auto& l : labels)
            l = vocab[pick(rng)];
        const auto once = filter_labels(labels);
        CHECK(filter_labels(once) == once);
    }
}

TEST_CASE("query regions") {
    CHECK(prepare_query_regions(BinaryMask(20, 20), 3).empty());

    BinaryMask dot(20, 20);
    dot.set(10, 10);
    const auto one = prepare_query_regions(dot, 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == rect_mask({20, 20}, 8, 8, 5, 5));

    BinaryMask two(40, 20);
    two.set(3, 3);
    two.set(4, 3);
    two.set(30, 15);
    const auto regions = prepare_query_regions(two, 2);
    REQUIRE(regions.size() == 2);
    const auto dilated = testing::oracle_dilate_once(testing::oracle_dilate_once(two, 5), 5);
    const auto expected = testing::oracle_components(dilated);
    CHECK(regions == expected);
}

TEST_CASE("search with one labelled region") {
    TempDir tmp;
    const Extent e{16, 12};
    const Image live(e.width, e.height, {200, 0, 0});
    const Image ref(e.width, e.height, {0, 0, 200});
    const auto base = rect_mask(e, 4, 4, 3, 2);
    const auto pen = rect_mask(e, 4, 4, 4, 3);
    FixtureBuilder(tmp.path())
        .describe("p", 0, "This object is a pen.")
        .segment("p", ImageRole::Live, "pen", pen)
        .finish();
    FixtureBackend fixtures(FixtureIndex::load(tmp.path()));
    CountingBackend backend(fixtures);

    const auto r = search_objects("p", live, ref, base, backend, {.dilation_iterations = 1});
    CHECK(backend.describes == 1);
    CHECK(backend.segments == 2);
    CHECK(backend.bad_prompts == 0);
    CHECK(r.labels == std::vector<std::string>{"pen"});
    CHECK(r.per_component_labels == std::vector<ComponentLabel>{{0, "pen"}});
    CHECK(r.live_object_mask == pen);
    CHECK(r.ref_object_mask.none());
    CHECK(r.ref_object_mask.extent() == e);
}

TEST_CASE("floor-only responses leave nothing to segment") {
    TempDir tmp;
    const Extent e{16, 12};
    const Image img(e.width, e.height);
    FixtureBuilder(tmp.path()).describe("p", 0, "This object is the floor.").finish();
    FixtureBackend fixtures(FixtureIndex::load(tmp.path()));
    CountingBackend backend(fixtures);
    const auto r = search_objects("p", img, img, rect_mask(e, 5, 5, 2, 2), backend);
    CHECK(r.labels.empty());
    CHECK(r.per_component_labels.empty());
    CHECK(backend.segments == 0);
    CHECK(r.live_object_mask.none());
    CHECK(r.ref_object_mask.none());
}

TEST_CASE("empty base mask makes no backend calls") {
    EchoBackend echo;
    CountingBackend backend(echo);
    const Image img(8, 8);
    const auto r = search_objects("p", img, img, BinaryMask(8, 8), backend);
    CHECK(backend.describes == 0);
    CHECK(backend.segments == 0);
    CHECK(r.live_object_mask == BinaryMask(8, 8));
    CHECK(r.ref_object_mask == BinaryMask(8, 8));
}

TEST_CASE("one describe call per dilated component") {
    std::mt19937_64 rng(17);
    EchoBackend echo;
    const Image img(48, 48);
    for (int trial = 0; trial < 40; ++trial) {
        CountingBackend backend(echo);
        const auto base = random_mask(rng, {48, 48}, 0.002 + 0.001 * (trial % 5));
        const int iters = trial % 4;
        const auto r = search_objects("p", img, img, base, backend, {.dilation_iterations = iters});
        auto dilated = base;
        for (int i = 0; i < iters; ++i)
            dilated = testing::oracle_dilate_once(dilated, 5);
        const auto comps = testing::oracle_components(dilated);
        CHECK(backend.describes == static_cast<int>(comps.size()));
        CHECK(r.query_regions == comps);
        CHECK(r.labels.size() == comps.size());
    }
}

TEST_CASE("object masks are unions of proposals and respect the confidence floor") {
    TempDir tmp;
    const Extent e{12, 12};
    const Image img(e.width, e.height);
    const auto a = rect_mask(e, 0, 0, 3, 3);
    const auto b = rect_mask(e, 5, 5, 3, 3);
    const auto c = rect_mask(e, 9, 0, 3, 3);
    BinaryMask base(e);
    base.set(1, 1);
    base.set(10, 10);
    FixtureBuilder(tmp.path())
        .describe("p", 0, "This object is a cup.")
        .describe("p", 1, "This object is a pen.")
        .segment("p", ImageRole::Live, "cup", a, 0.9)
        .segment("p", ImageRole::Live, "cup", b, 0.2)
        .segment("p", ImageRole::Live, "pen", c)
        .segment("p", ImageRole::Ref, "pen", b, 0.5)
        .finish();
    FixtureBackend backend(FixtureIndex::load(tmp.path()));

    const auto all = search_objects("p", img, img, base, backend, {.dilation_iterations = 1});
    CHECK(all.live_proposals.size() == 3);
    CHECK(all.live_object_mask == mask_union(std::vector<BinaryMask>{a, b, c}));
    CHECK(all.ref_object_mask == b);

    SearchConfig floor_cfg{.dilation_iterations = 1, .confidence_floor = 0.3};
    const auto kept = search_objects("p", img, img, base, backend, floor_cfg);
    CHECK(kept.live_proposals.size() == 2);
    CHECK(kept.live_object_mask == mask_union(std::vector<BinaryMask>{a, c}));
    CHECK(kept.ref_object_mask == b);

    std::vector<BinaryMask> live_masks;
    for (const auto& p : kept.live_proposals)
        live_masks.push_back(p.mask);
    CHECK(mask_union(live_masks, e) == kept.live_object_mask);
}

TEST_CASE("search serialization is deterministic across worker counts") {
    TempDir tmp;
    const Extent e{40, 40};
    const Image img(e.width, e.height);
    std::mt19937_64 rng(23);
    const auto base = random_mask(rng, e, 0.004);
    const auto regions = prepare_query_regions(base, 1);
    REQUIRE(regions.size() > 2);
    FixtureBuilder builder(tmp.path());
    const std::vector<std::string> names{"cup", "pen", "wooden floor", "cable"};
    for (std::size_t i = 0; i < regions.size(); ++i) {
        const auto& name = names[i % names.size()];
        builder.describe("p", i, "This object is a " + name + ".");
        builder.segment("p", ImageRole::Live, name, regions[i]);
        builder.segment("p", ImageRole::Ref, name, random_mask(rng, e, 0.01));
    }
    builder.finish();
    FixtureBackend backend(FixtureIndex::load(tmp.path()));

    const auto first = to_json(search_objects("p", img, img, base, backend, {.dilation_iterations = 1})).dump();
    for (std::size_t workers : {1u, 4u, 16u}) {
        SearchConfig cfg{.dilation_iterations = 1, .max_parallel_requests = workers};
        CHECK(to_json(search_objects("p", img, img, base, backend, cfg)).dump() == first);
    }
}
