#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "certbox/fixture.hpp"
#include "certbox/harness.hpp"

using namespace certbox;
using Catch::Matchers::WithinAbs;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::create_directories(dir);
    return dir;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Dataset of one 2x2 image with gt [0,0,10,10]; bounds come from an
/// external map, so the image content is irrelevant.
DatasetEntry dummy_entry(const std::string& id) {
    return DatasetEntry{id, ImageTensor::zeros(2, 2, 1), GroundTruth(0, 0, 10, 10)};
}

} // namespace

TEST_CASE("verdicts follow the tightest requested lower bound") {
    // point boxes with exact IoU 0.65 and 0.34 against gt [0,0,10,10]
    BoundsMap bounds;
    bounds.emplace("good", BoxBounds::point(BBox(0, 0, 10, 6.5)));
    bounds.emplace("bad", BoxBounds::point(BBox(0, 0, 10, 3.4)));

    VerificationConfig cfg;
    cfg.step1 = Step1Mode::ExternalBounds;
    const PerturbationSpec spec{PerturbationKind::WhiteNoise, 0.001};
    const Step1Source src = Step1Source::from_bounds(bounds);

    const VerificationRecord good = verify_image(src, dummy_entry("good"), spec, cfg);
    CHECK_THAT(good.optimal->lo, WithinAbs(0.65, 1e-12));
    CHECK(good.verdict == Verdict::Verified);

    const VerificationRecord bad = verify_image(src, dummy_entry("bad"), spec, cfg);
    CHECK_THAT(bad.optimal->lo, WithinAbs(0.34, 1e-12));
    CHECK(bad.verdict == Verdict::Unknown);

    CHECK_THROWS_AS(verify_image(src, dummy_entry("missing"), spec, cfg), MissingExternalBounds);
}

TEST_CASE("config validation") {
    VerificationConfig cfg;
    cfg.threshold = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.threshold = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.threshold = 0.5;
    cfg.methods = {false, false};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("zero perturbation on a correct detector verifies") {
    FixtureOptions opt;
    opt.images = 5;
    const Dataset ds = make_fixture_dataset(opt);
    const Network net = make_fixture_detector(opt);

    VerificationConfig cfg;
    const PerturbationSpec spec{PerturbationKind::WhiteNoise, 0.0};
    for (const DatasetEntry& e : ds.entries) {
        const VerificationRecord rec =
            verify_image(Step1Source::from_network(net), e, spec, cfg);
        CHECK(rec.verdict == Verdict::Verified);
        // degenerate bounds: both methods collapse onto the point IoU
        CHECK_THAT(rec.optimal->lo, WithinAbs(rec.optimal->hi, 1e-12));
        CHECK_THAT(rec.vanilla->lo, WithinAbs(rec.optimal->lo, 1e-9));
        CHECK(rec.step1_ms >= 0.0);
        CHECK(rec.step2_ms >= 0.0);
    }
}

TEST_CASE("compute_vba counts verified fractions") {
    std::vector<VerificationRecord> records(4);
    const PerturbationSpec spec{PerturbationKind::Brightness, 0.01};
    for (std::size_t i = 0; i < records.size(); ++i) {
        records[i].image_id = "r" + std::to_string(i);
        records[i].spec = spec;
        records[i].verdict = i < 3 ? Verdict::Verified : Verdict::Unknown;
    }
    CHECK_THAT(compute_vba(records, spec), WithinAbs(0.75, 1e-15));

    records[3].verdict = Verdict::Verified;
    CHECK(compute_vba(records, spec) == 1.0);

    CHECK_THROWS_AS(compute_vba(records, {PerturbationKind::Contrast, 0.5}), EmptySelection);
}

TEST_CASE("sweeps are independent of the worker count") {
    FixtureOptions opt;
    opt.images = 6;
    const Dataset ds = make_fixture_dataset(opt);
    const Network net = make_fixture_detector(opt);

    VerificationConfig cfg;
    for (double m : {0.0, 0.002, 0.004})
        cfg.sweep.emplace_back(PerturbationKind::WhiteNoise, m);

    cfg.workers = 1;
    const SweepResult serial = run_sweep(ds, Step1Source::from_network(net), cfg);
    cfg.workers = 4;
    const SweepResult parallel = run_sweep(ds, Step1Source::from_network(net), cfg);

    REQUIRE(serial.records.size() == parallel.records.size());
    for (std::size_t i = 0; i < serial.records.size(); ++i) {
        CHECK(serial.records[i].image_id == parallel.records[i].image_id);
        CHECK(*serial.records[i].box_bounds == *parallel.records[i].box_bounds);
        CHECK(serial.records[i].optimal->lo == parallel.records[i].optimal->lo);
        CHECK(serial.records[i].verdict == parallel.records[i].verdict);
    }

    const auto dir = temp_dir("certbox_sweep");
    write_report(serial.records, (dir / "a.csv").string(), ReportFormat::CSV, true);
    write_report(parallel.records, (dir / "b.csv").string(), ReportFormat::CSV, true);
    CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("sweep table aggregates per intensity") {
    FixtureOptions opt;
    opt.images = 8;
    const Dataset ds = make_fixture_dataset(opt);
    const Network net = make_fixture_detector(opt);

    VerificationConfig cfg;
    for (double m : {0.0, 0.003, 0.006, 0.009, 0.012})
        cfg.sweep.emplace_back(PerturbationKind::WhiteNoise, m);
    const SweepResult result = run_sweep(ds, Step1Source::from_network(net), cfg);

    REQUIRE(result.table.size() == cfg.sweep.size());
    CHECK(result.table.front().vba == 1.0);  // no perturbation, exact detector
    double prev_vba = 2.0;
    for (const SweepRow& row : result.table) {
        CHECK(row.count == ds.entries.size());
        CHECK(row.vba <= prev_vba);
        prev_vba = row.vba;
        CHECK(*row.vba_optimal >= *row.vba_vanilla);
        CHECK(*row.mean_optimal_lo >= *row.mean_vanilla_lo - 1e-12);
        CHECK(*row.mean_optimal_hi <= *row.mean_vanilla_hi + 1e-12);
    }

    // step 2 works on 4 intervals, step 1 on whole tensors
    double step1 = 0.0;
    double step2 = 0.0;
    for (const VerificationRecord& rec : result.records) {
        CHECK(rec.step1_ms >= 0.0);
        CHECK(rec.step2_ms >= 0.0);
        step1 += rec.step1_ms;
        step2 += rec.step2_ms;
    }
    CHECK(step2 < step1);
}

TEST_CASE("reports") {
    const auto dir = temp_dir("certbox_reports");

    SECTION("empty record list gives a header-only CSV") {
        const auto path = dir / "empty.csv";
        write_report({}, path.string(), ReportFormat::CSV);
        CHECK(slurp(path) ==
              "image_id,kind,magnitude,contrast_mode,z0_lo,z0_hi,z1_lo,z1_hi,z2_lo,z2_hi,"
              "z3_lo,z3_hi,vanilla_lo,vanilla_hi,optimal_lo,optimal_hi,verdict,step1_ms,"
              "step2_ms\n");
    }

    SECTION("JSON reports round-trip records exactly") {
        FixtureOptions opt;
        opt.images = 4;
        const Dataset ds = make_fixture_dataset(opt);
        const Network net = make_fixture_detector(opt);
        VerificationConfig cfg;
        cfg.sweep.emplace_back(PerturbationKind::Contrast, 0.05, ContrastMode::Relative);
        cfg.sweep.emplace_back(PerturbationKind::WhiteNoise, 0.002);
        const SweepResult result = run_sweep(ds, Step1Source::from_network(net), cfg);

        const auto path = dir / "report.json";
        write_report(result.records, path.string(), ReportFormat::JSON);
        const auto back = read_records_json(path.string());
        REQUIRE(back.size() == result.records.size());
        const auto ordered = [&] {
            auto copy = result.records;
            std::sort(copy.begin(), copy.end(), [](const auto& a, const auto& b) {
                return std::make_tuple(a.image_id, kind_name(a.spec.kind), a.spec.magnitude) <
                       std::make_tuple(b.image_id, kind_name(b.spec.kind), b.spec.magnitude);
            });
            return copy;
        }();
        for (std::size_t i = 0; i < back.size(); ++i) {
            CHECK(back[i].image_id == ordered[i].image_id);
            CHECK(back[i].spec.kind == ordered[i].spec.kind);
            CHECK(back[i].spec.magnitude == ordered[i].spec.magnitude);
            CHECK(*back[i].box_bounds == *ordered[i].box_bounds);
            CHECK(back[i].vanilla->lo == ordered[i].vanilla->lo);
            CHECK(back[i].vanilla->hi == ordered[i].vanilla->hi);
            CHECK(back[i].optimal->lo == ordered[i].optimal->lo);
            CHECK(back[i].optimal->hi == ordered[i].optimal->hi);
            CHECK(back[i].verdict == ordered[i].verdict);
            CHECK(back[i].step1_ms == ordered[i].step1_ms);
            CHECK(back[i].step2_ms == ordered[i].step2_ms);
        }
    }

    SECTION("method selection leaves the other columns empty") {
        BoundsMap bounds;
        bounds.emplace("only", BoxBounds::point(BBox(0, 0, 10, 6.5)));
        VerificationConfig cfg;
        cfg.step1 = Step1Mode::ExternalBounds;
        cfg.methods = {false, true};
        const VerificationRecord rec =
            verify_image(Step1Source::from_bounds(bounds), dummy_entry("only"),
                         {PerturbationKind::WhiteNoise, 0.001}, cfg);
        CHECK_FALSE(rec.vanilla.has_value());

        const auto path = dir / "partial.csv";
        write_report({rec}, path.string(), ReportFormat::CSV, true);
        const std::string text = slurp(path);
        CHECK(text.find(",,,0.65,") != std::string::npos);
    }

    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset save/load round-trip with y-flip") {
    const auto dir = temp_dir("certbox_dataset");
    FixtureOptions opt;
    opt.images = 3;
    const Dataset ds = make_fixture_dataset(opt);
    const std::string manifest = save_dataset(ds, dir.string());

    const Dataset loaded = load_dataset(manifest);
    REQUIRE(loaded.entries.size() == ds.entries.size());
    for (std::size_t i = 0; i < ds.entries.size(); ++i) {
        CHECK(loaded.entries[i].image_id == ds.entries[i].image_id);
        CHECK(loaded.entries[i].image.pixels == ds.entries[i].image.pixels);
        CHECK(loaded.entries[i].gt.box == ds.entries[i].gt.box);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset loader rejects malformed manifests") {
    const auto dir = temp_dir("certbox_bad_dataset");
    const auto manifest = dir / "manifest.json";

    std::ofstream(manifest) << R"({"entries":[{"image_id":"a"}]})";
    CHECK_THROWS_AS(load_dataset(manifest.string()), ParseError);

    std::ofstream(manifest) << R"({"entries":[
        {"image_id":"a","shape":[1,1,1],"pixels":[0.5],"gt":[0,0,1,1]},
        {"image_id":"a","shape":[1,1,1],"pixels":[0.5],"gt":[0,0,1,1]}]})";
    CHECK_THROWS_AS(load_dataset(manifest.string()), ParseError);

    std::ofstream(manifest) << R"({"entries":[
        {"image_id":"a","shape":[1,1,1],"pixels":[1.5],"gt":[0,0,1,1]}]})";
    CHECK_THROWS_AS(load_dataset(manifest.string()), ParseError);

    std::ofstream(manifest) << R"({"entries":[
        {"image_id":"a","shape":[1,1,1],"pixels":[0.5],"gt":[0,0,0,1]}]})";
    CHECK_THROWS_AS(load_dataset(manifest.string()), ParseError);

    std::filesystem::remove_all(dir);
}

TEST_CASE("inline pixel rows are bottom-origin") {
    const auto dir = temp_dir("certbox_origin");
    const auto manifest = dir / "manifest.json";
    // 2x1 image: bottom pixel dark, top pixel bright
    std::ofstream(manifest) << R"({"entries":[
        {"image_id":"a","shape":[2,1,1],"pixels":[0.0,1.0],"gt":[0,1,1,2]}]})";
    const Dataset ds = load_dataset(manifest.string());
    CHECK(ds.entries[0].image.at(0, 0, 0) == 0.0);
    CHECK(ds.entries[0].image.at(1, 0, 0) == 1.0);

    // the PGM writer stores rows top-down; loading must flip them back
    const std::string out = save_dataset(ds, (dir / "resaved").string());
    const Dataset back = load_dataset(out);
    CHECK(back.entries[0].image.at(0, 0, 0) == 0.0);
    CHECK(back.entries[0].image.at(1, 0, 0) == 1.0);
    std::filesystem::remove_all(dir);
}
