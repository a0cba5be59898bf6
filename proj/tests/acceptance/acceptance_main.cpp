// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doicd/cli.hpp"
#include "doicd/doi.hpp"
#include "doicd/eval.hpp"
#include "doicd/fixture_backend.hpp"
#include "doicd/image.hpp"
#include "doicd/pipeline.hpp"
#include "doicd/synth.hpp"
#include "test_support.hpp"

using namespace doicd;
using namespace doicd::testing;

namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;

    void fail(const std::string& why) {
        if (ok)
            detail = why;
        ok = false;
    }
};

// Per-pixel reference for the decision.
DoiRecord oracle_decision(const BinaryMask& o_l, const BinaryMask& o_r, const BinaryMask& m_o) {
    DoiRecord r;
    r.f_b = oracle_disjoint(o_l, o_r);
    r.iou_ol_mo = oracle_iou(o_l, m_o);
    r.doi = r.f_b * (1.0 - r.iou_ol_mo);
    r.decision = r.doi > 0.0 && r.doi < 0.9 ? FusionDecision::AdoptOvs : FusionDecision::AdoptBase;
    return r;
}

BinaryMask shift(const BinaryMask& m, int dx, int dy) {
    BinaryMask out(m.extent());
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x) {
            const int sx = x - dx, sy = y - dy;
            if (sx >= 0 && sy >= 0 && sx < m.width() && sy < m.height() && m.at(sx, sy))
                out.set(x, y);
        }
    return out;
}

BinaryMask oracle_regions(const BinaryMask& base, int iterations) {
    BinaryMask m = base;
    for (int i = 0; i < iterations; ++i)
        m = oracle_dilate_once(m, kDefaultDilationKernel);
    return m;
}

bool same_pixels(const fs::path& a, const fs::path& b) {
    return load_mask(a) == load_mask(b);
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& p : fs::recursive_directory_iterator(root))
        if (p.is_regular_file())
            out[fs::relative(p.path(), root).generic_string()] = read_text(p.path());
    return out;
}

// 1
Outcome mask_algebra() {
    Outcome o;
    std::mt19937_64 rng(1001);
    std::uniform_real_distribution<double> density(0.0, 1.0);
    const Extent e{32, 32};
    for (int i = 0; i < 1000 && o.ok; ++i) {
        const auto a = random_mask(rng, e, density(rng));
        const auto b = random_mask(rng, e, i % 10 == 0 ? 0.0 : density(rng));
        if (iou(a, b) != oracle_iou(a, b))
            o.fail("iou differs at case " + std::to_string(i));
        if (disjoint(a, b) != oracle_disjoint(a, b))
            o.fail("disjoint differs at case " + std::to_string(i));
        if (!(count_pixels(a, b) == oracle_counts(a, b)))
            o.fail("count_pixels differs at case " + std::to_string(i));
        const auto sparse = random_mask(rng, e, 0.05 + 0.5 * density(rng));
        if (connected_components(sparse) != oracle_components(sparse))
            o.fail("connected_components differs at case " + std::to_string(i));
    }
    if (o.ok)
        o.detail = "1000 cases";
    return o;
}

// 2
Outcome decision_table() {
    Outcome o;
    const Extent e{20, 20};
    const auto o_l = rect_mask(e, 0, 0, 10, 10);
    const BinaryMask empty(e);
    const std::vector<std::pair<std::string, BinaryMask>> bases{
        {"0", rect_mask(e, 12, 12, 5, 5)},
        {"(0,0.1]", rect_mask(e, 0, 0, 1, 1)},
        {"(0,0.1]", rect_mask(e, 0, 0, 10, 1)},
        {"(0.1,0.9)", rect_mask(e, 0, 0, 5, 10)},
        {"(0.1,0.9)", rect_mask(e, 0, 0, 2, 6)},
        {"[0.9,1]", rect_mask(e, 0, 0, 10, 9)},
        {"[0.9,1]", o_l},
    };
    const std::vector<std::pair<int, BinaryMask>> refs{
        {1, empty}, {1, rect_mask(e, 15, 15, 3, 3)}, {0, rect_mask(e, 5, 5, 10, 10)}, {0, o_l}};

    auto in_bin = [](const std::string& bin, double v) {
        if (bin == "0")
            return v == 0.0;
        if (bin == "(0,0.1]")
            return v > 0.0 && v <= 0.1;
        if (bin == "(0.1,0.9)")
            return v > 0.1 && v < 0.9;
        return v >= 0.9 && v <= 1.0;
    };
    auto check = [&](const std::string& name, const BinaryMask& l, const BinaryMask& r, const BinaryMask& m) {
        const auto want = oracle_decision(l, r, m);
        const auto got = compute_doi(l, r, m);
        if (got.f_b != want.f_b || got.iou_ol_mo != want.iou_ol_mo || got.doi != want.doi ||
            got.decision != want.decision)
            o.fail(name + ": record differs from oracle");
        const auto& fused = fuse(got, l, m);
        if (fused != (want.decision == FusionDecision::AdoptOvs ? l : m))
            o.fail(name + ": fused mask differs");
        return want;
    };

    std::set<std::pair<int, std::string>> covered;
    std::size_t cases = 0;
    for (const auto& [f_b, ref] : refs)
        for (const auto& [bin, base] : bases) {
            const auto want = check("f_b=" + std::to_string(f_b) + " bin " + bin, o_l, ref, base);
            if (want.f_b != f_b || !in_bin(bin, want.iou_ol_mo))
                o.fail("construction missed f_b=" + std::to_string(f_b) + " bin " + bin);
            const bool expect_ovs = f_b == 1 && want.iou_ol_mo > 0.1 && want.iou_ol_mo < 1.0;
            if ((want.decision == FusionDecision::AdoptOvs) != expect_ovs)
                o.fail("unexpected decision at f_b=" + std::to_string(f_b) + " bin " + bin);
            covered.insert({f_b, bin});
            ++cases;
        }
    if (covered.size() != 8)
        o.fail("bins not all covered");

    const auto full = BinaryMask::full(e);
    for (const auto& [name, l, r, m] : std::vector<std::tuple<std::string, BinaryMask, BinaryMask, BinaryMask>>{
             {"all empty", empty, empty, empty},
             {"empty O_l", empty, o_l, o_l},
             {"empty M_o", o_l, empty, empty},
             {"empty O_r, full M_o", o_l, empty, full},
             {"full everything", full, full, full},
         }) {
        check(name, l, r, m);
        ++cases;
    }

    std::mt19937_64 rng(2002);
    std::uniform_real_distribution<double> d(0.0, 0.6);
    for (int i = 0; i < 500; ++i, ++cases) {
        const auto l = random_mask(rng, {8, 8}, d(rng));
        check("random " + std::to_string(i), l, random_mask(rng, {8, 8}, d(rng) * 0.2), random_mask(rng, {8, 8}, d(rng)));
    }
    if (o.ok)
        o.detail = std::to_string(cases) + " cases, 8 bins";
    return o;
}

// 3
Outcome fscore_arithmetic() {
    Outcome o;
    std::mt19937_64 rng(3003);
    std::uniform_int_distribution<std::uint64_t> n(0, 100000);
    for (int i = 0; i < 1000 && o.ok; ++i) {
        EvalCounts c{.tp = n(rng), .fp = n(rng), .fn = n(rng), .tn = n(rng)};
        if (i % 50 == 0)
            c.tp = 0;
        const auto s = score(c);
        const double p = c.tp + c.fp == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fp);
        const double r = c.tp + c.fn == 0 ? 0.0 : double(c.tp) / double(c.tp + c.fn);
        const double f = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        if (std::abs(s.precision - p) > 1e-12 || std::abs(s.recall - r) > 1e-12 || std::abs(s.fscore - f) > 1e-12)
            o.fail("tuple " + std::to_string(i) + " off by more than 1e-12");
    }
    struct Corner {
        const char* name;
        EvalCounts c;
        Scores want;
    };
    for (const auto& k : std::vector<Corner>{
             {"both empty", {.tn = 9}, {1.0, 1.0, 1.0}},
             {"no prediction", {.fn = 4, .tn = 5}, {0.0, 0.0, 0.0}},
             {"no ground truth", {.fp = 4, .tn = 5}, {0.0, 0.0, 0.0}},
             {"disjoint", {.fp = 2, .fn = 3, .tn = 4}, {0.0, 0.0, 0.0}},
         }) {
        const auto s = score(k.c);
        if (s.precision != k.want.precision || s.recall != k.want.recall || s.fscore != k.want.fscore)
            o.fail(std::string("corner case '") + k.name + "'");
    }
    if (o.ok)
        o.detail = "1000 tuples, 4 corners";
    return o;
}

// 4
Outcome synth_invariants() {
    Outcome o;
    TempDir tmp("doicd-accept-synth");
    std::mt19937_64 rng(4004);
    const auto bgs = write_backgrounds(tmp / "bg", rng, 3);
    const auto bank = make_cutouts(rng, 5);
    SynthConfig cfg{.count = 50, .seed = 11, .workers = 4};
    const auto samples = generate_dataset(bgs, bank, cfg, tmp / "a");
    if (samples.size() != 50)
        o.fail("expected 50 samples");
    for (const auto& s : samples) {
        const auto ref = load_image(tmp / "a" / s.ref_path);
        const auto live = load_image(tmp / "a" / s.live_path);
        const auto gt = load_mask(tmp / "a" / s.gt_path);
        for (int y = 0; y < gt.height(); ++y)
            for (int x = 0; x < gt.width(); ++x)
                if (!gt.at(x, y) && live.at(x, y) != ref.at(x, y)) {
                    o.fail(s.sample_id + ": live differs from ref outside gt");
                    y = gt.height();
                    break;
                }
        std::size_t expected = 0;
        for (const auto& obj : s.objects) {
            const auto& cut = *std::find_if(bank.begin(), bank.end(),
                                            [&](const ObjectCutout& c) { return c.object_id == obj.object_id; });
            const Extent scaled{std::max(1, static_cast<int>(std::lround(cut.mask.width() * obj.placement.scale))),
                                std::max(1, static_cast<int>(std::lround(cut.mask.height() * obj.placement.scale)))};
            expected += oracle_resize_nearest(cut.mask, scaled).count();
        }
        if (gt.count() != expected)
            o.fail(s.sample_id + ": gt pixel count " + std::to_string(gt.count()) + " != " + std::to_string(expected));
    }
    cfg.workers = 1;
    generate_dataset(bgs, bank, cfg, tmp / "b");
    if (snapshot(tmp / "a") != snapshot(tmp / "b"))
        o.fail("same seed gave different bytes");
    if (o.ok)
        o.detail = "50 samples";
    return o;
}

// 5
Outcome perfect_ovs_dominance() {
    Outcome o;
    TempDir tmp("doicd-accept-dominance");
    std::mt19937_64 rng(5005);
    const auto bgs = write_backgrounds(tmp / "bg", rng, 3);
    const auto bank = make_cutouts(rng, 5);
    const auto samples =
        generate_dataset(bgs, bank, {.count = 50, .seed = 12, .scale_range = {0.1, 0.3}, .workers = 4}, tmp / "syn");

    FixtureBuilder fx(tmp / "fx");
    std::vector<PairEntry> pairs;
    std::map<std::string, BinaryMask> gts, bases;
    std::uniform_int_distribution<int> kind(0, 2), amount(1, 3), offset(-4, 4);
    for (const auto& s : samples) {
        const auto gt = load_mask(tmp / "syn" / s.gt_path);
        BinaryMask base = gt;
        switch (kind(rng)) {
            case 0: base = dilate(gt, 3, amount(rng)); break;
            case 1: base = complement(dilate(complement(gt), 3, amount(rng))); break;
            default: base = shift(gt, offset(rng), offset(rng)); break;
        }
        fx.change(s.sample_id, base);
        const auto regions = oracle_components(oracle_regions(base, kDefaultDilationIterations));
        for (std::size_t i = 0; i < regions.size(); ++i)
            fx.describe(s.sample_id, i, "This object is an object.");
        fx.segment(s.sample_id, ImageRole::Live, "object", gt);
        pairs.push_back({s.sample_id, tmp / "syn" / s.ref_path, tmp / "syn" / s.live_path, tmp / "syn" / s.gt_path,
                         "synthetic"});
        gts.emplace(s.sample_id, gt);
        bases.emplace(s.sample_id, base);
    }
    FixtureBackend backend(fx.finish());
    DetectConfig cfg;
    cfg.workers = 4;
    const auto summary = run_detect(pairs, backend, cfg, tmp / "run");
    if (summary.failures > 0)
        o.fail("detect failed on " + std::to_string(summary.failures) + " pairs");

    double sum_base = 0.0, sum_fused = 0.0;
    std::size_t eligible = 0, improved = 0;
    for (const auto& p : pairs) {
        const auto& gt = gts.at(p.pair_id);
        const auto stored_base = load_mask(tmp / "run" / p.pair_id / "base.png");
        const auto fused = load_mask(tmp / "run" / p.pair_id / "fused.png");
        if (stored_base != bases.at(p.pair_id))
            o.fail(p.pair_id + ": stored base differs from the corrupted detector output");
        const auto cb = oracle_counts(stored_base, gt);
        const auto cf = oracle_counts(fused, gt);
        const double fb = oracle_score(cb.tp, cb.fp, cb.fn).fscore;
        const double ff = oracle_score(cf.tp, cf.fp, cf.fn).fscore;
        sum_base += fb;
        sum_fused += ff;
        const double base_iou = oracle_iou(stored_base, gt);
        if (base_iou > 0.1 && base_iou < 1.0) {
            ++eligible;
            if (ff > fb)
                ++improved;
            else
                o.fail(p.pair_id + ": no strict improvement at base IoU " + std::to_string(base_iou));
        }
    }
    const double mb = sum_base / pairs.size(), mf = sum_fused / pairs.size();
    if (!(mf >= mb))
        o.fail("fused mean F below base mean F");
    std::ostringstream d;
    d << "base F " << mb << ", fused F " << mf << ", improved " << improved << "/" << eligible;
    if (o.ok)
        o.detail = d.str();
    else
        o.detail += " (" + d.str() + ")";
    return o;
}

// 6
Outcome golden_run() {
    Outcome o;
    const fs::path golden = fs::path(DOICD_TEST_DATA_DIR) / "golden";
    const auto expected = golden / "expected";
    TempDir tmp("doicd-accept-golden");
    const auto run_dir = tmp / "run";
    std::ostringstream out, err;
    const int code = cli::run({"doicd", "detect", "--pairs", (golden / "inputs" / "pairs.jsonl").string(), "--fixtures",
                               (golden / "inputs" / "fixtures").string(), "--out", run_dir.string(), "--dilate-iters",
                               "1", "--assume-aligned"},
                              out, err);
    if (code != cli::kExitOk)
        o.fail("detect exited " + std::to_string(code) + ": " + err.str());
    if (out.str() != read_text(expected / "stdout.txt"))
        o.fail("decision summary differs");
    if (read_text(run_dir / "run_index.jsonl") != read_text(expected / "run_index.jsonl"))
        o.fail("run index differs");
    for (const std::string pair : {"pairA", "pairB", "pairC"}) {
        if (read_text(run_dir / pair / "record.json") != read_text(expected / pair / "record.json"))
            o.fail(pair + ": record differs");
        for (const std::string mask : {"base.png", "ovs_live.png", "ovs_ref.png", "fused.png"})
            if (!same_pixels(run_dir / pair / mask, expected / pair / mask))
                o.fail(pair + "/" + mask + " differs");
    }
    std::ostringstream listing, lerr;
    if (cli::run({"doicd", "list-objects", "--run-dir", run_dir.string()}, listing, lerr) != cli::kExitOk)
        o.fail("list-objects failed: " + lerr.str());
    if (listing.str() != read_text(expected / "listing.tsv"))
        o.fail("listing differs");
    if (o.ok)
        o.detail = "3 pairs";
    return o;
}

// 7
Outcome empty_ovs_degradation() {
    Outcome o;
    TempDir tmp("doicd-accept-empty");
    std::mt19937_64 rng(7007);
    std::uniform_int_distribution<int> byte(0, 255);
    std::bernoulli_distribution hot(0.15);
    FixtureBuilder fx(tmp / "fx");
    std::vector<PairEntry> pairs;
    const Extent e{40, 30};
    for (int i = 0; i < 20; ++i) {
        const std::string id = "p" + std::to_string(i);
        write_solid_image(tmp / "img" / (id + "_ref.png"), e, {20, 20, 20});
        write_solid_image(tmp / "img" / (id + "_live.png"), e, {20, 20, 200});
        ProbabilityMask prob(e.width, e.height);
        for (int y = 0; y < e.height; ++y)
            for (int x = 0; x < e.width; ++x)
                prob.set(x, y, (hot(rng) ? byte(rng) : byte(rng) / 3) / 255.0);
        fx.change(id, prob);
        pairs.push_back({id, tmp / "img" / (id + "_ref.png"), tmp / "img" / (id + "_live.png"), std::nullopt, "d"});
    }
    // Describe every query region; segmentation has no fixtures so both object masks come back empty.
    std::map<std::string, BinaryMask> expected;
    for (const auto& p : pairs) {
        const auto png = load_image(tmp / "fx" / p.pair_id / "change.png");
        BinaryMask want(e);
        for (int y = 0; y < e.height; ++y)
            for (int x = 0; x < e.width; ++x)
                if (png.at(x, y)[0] >= 128)
                    want.set(x, y);
        const auto regions = oracle_components(oracle_regions(want, kDefaultDilationIterations));
        for (std::size_t i = 0; i < regions.size(); ++i)
            fx.describe(p.pair_id, i, i % 2 ? "This object is a lamp." : "This object is a chair.");
        expected.emplace(p.pair_id, std::move(want));
    }
    FixtureBackend backend(fx.finish());
    const auto summary = run_detect(pairs, backend, DetectConfig{.workers = 4}, tmp / "run");
    if (summary.failures > 0)
        o.fail("detect failed on " + std::to_string(summary.failures) + " pairs");
    for (const auto& p : pairs) {
        const auto fused = load_mask(tmp / "run" / p.pair_id / "fused.png");
        if (fused != expected.at(p.pair_id))
            o.fail(p.pair_id + ": fused differs from thresholded base");
        const auto& rec = summary.outcomes.at(&p - pairs.data()).record;
        if (!rec || !rec->doi || rec->doi->decision != FusionDecision::AdoptBase)
            o.fail(p.pair_id + ": decision is not AdoptBase");
    }
    if (o.ok)
        o.detail = "20 pairs";
    return o;
}

struct Criterion {
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {"mask-algebra-oracles", 5.0, mask_algebra},
        {"doi-decision-table", 1.0, decision_table},
        {"fscore-arithmetic", 1.0, fscore_arithmetic},
        {"synth-invariants", 30.0, synth_invariants},
        {"perfect-ovs-dominance", 60.0, perfect_ovs_dominance},
        {"golden-end-to-end", 10.0, golden_run},
        {"empty-ovs-degradation", 5.0, empty_ovs_degradation},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.fail(std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (secs >= c.limit_s)
            o.fail("took " + std::to_string(secs) + " s");
        std::printf("%s %-24s %8.3f s (limit %5.1f s)  %s\n", o.ok ? "PASS" : "FAIL", c.name, secs, c.limit_s,
                    o.detail.c_str());
        failed += o.ok ? 0 : 1;
    }
    std::fflush(stdout);
    return failed == 0 ? 0 : 1;
}
