// certbox - interval certification of single-object detector IoU.
//
// Subcommands:
//   verify        run the two-step pipeline over a dataset and a sweep
//   iou-bounds    bound the IoU of one interval box set against a ground truth
//   oracle        randomized exactness/soundness campaign for the bound kernels
//   make-fixture  generate a synthetic dataset and matching detector
//
// Exit codes: 0 success, 1 oracle check failure, 2 configuration error,
// 3 data error.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "certbox/fixture.hpp"
#include "certbox/harness.hpp"
#include "certbox/oracle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

std::array<double, 4> parse_coords(const std::string& text, const std::string& flag) {
    std::array<double, 4> out{};
    std::stringstream ss(text);
    std::string item;
    std::size_t i = 0;
    while (std::getline(ss, item, ',')) {
        if (i >= 4)
            throw certbox::ValidationError(flag + " must carry exactly 4 coordinates");
        try {
            std::size_t used = 0;
            out[i] = std::stod(item, &used);
            if (used != item.size())
                throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw certbox::ValidationError(flag + " has a malformed coordinate: " + item);
        }
        ++i;
    }
    if (i != 4)
        throw certbox::ValidationError(flag + " must carry exactly 4 coordinates");
    return out;
}

certbox::PerturbationKind parse_kind(const std::string& name) {
    if (name == "whitenoise")
        return certbox::PerturbationKind::WhiteNoise;
    if (name == "brightness")
        return certbox::PerturbationKind::Brightness;
    if (name == "contrast")
        return certbox::PerturbationKind::Contrast;
    throw certbox::ValidationError("unknown perturbation kind: " + name);
}

nlohmann::json bounds_json(const certbox::IoUBounds& b) {
    return {{"lo", b.lo}, {"hi", b.hi}};
}

nlohmann::json box_json(const certbox::BBox& b) {
    return {b.z0, b.z1, b.z2, b.z3};
}

struct VerifyArgs {
    std::string model_path;
    std::string bounds_path;
    std::string dataset_path;
    std::string perturbation = "whitenoise";
    double min = 0.0;
    double max = 0.0;
    std::size_t steps = 11;
    double threshold = 0.5;
    std::string method = "both";
    std::string contrast_mode = "relative";
    bool clamp_input = false;
    std::uint64_t seed = 0;
    std::size_t workers = 0;
    std::string report_path;
    std::string format = "csv";
    bool zero_timings = false;
};

int run_verify(const VerifyArgs& args) {
    using namespace certbox;

    if (args.min < 0.0 || args.max < args.min) {
        std::cerr << "error: need 0 <= min <= max\n";
        return kExitConfig;
    }

    VerificationConfig cfg;
    cfg.threshold = args.threshold;
    cfg.methods.vanilla = args.method == "vanilla" || args.method == "both";
    cfg.methods.optimal = args.method == "optimal" || args.method == "both";
    cfg.clamp01 = args.clamp_input;
    cfg.seed = args.seed;
    cfg.workers = args.workers;
    cfg.step1 = args.bounds_path.empty() ? Step1Mode::IBP : Step1Mode::ExternalBounds;

    const PerturbationKind kind = parse_kind(args.perturbation);
    const ContrastMode mode =
        args.contrast_mode == "literal" ? ContrastMode::Literal : ContrastMode::Relative;
    for (std::size_t i = 0; i < args.steps; ++i) {
        const double m =
            args.steps == 1
                ? args.min
                : args.min + (args.max - args.min) * static_cast<double>(i) /
                                 static_cast<double>(args.steps - 1);
        cfg.sweep.emplace_back(kind, m, mode);
    }
    cfg.validate();

    const Dataset dataset = load_dataset(args.dataset_path);

    std::optional<Network> net;
    BoundsMap bounds;
    Step1Source source;
    if (cfg.step1 == Step1Mode::IBP) {
        net = load_network(args.model_path);
        source = Step1Source::from_network(*net);
    } else {
        bounds = load_external_bounds(args.bounds_path);
        source = Step1Source::from_bounds(bounds);
    }

    const SweepResult result = run_sweep(dataset, source, cfg);

    if (!args.report_path.empty()) {
        const ReportFormat fmt = args.format == "json" ? ReportFormat::JSON : ReportFormat::CSV;
        write_report(result.records, args.report_path, fmt, args.zero_timings);
    }

    std::printf("%-12s %-12s %6s %12s %12s %24s %24s\n", "kind", "magnitude", "n", "vba_vanilla",
                "vba_optimal", "mean_vanilla", "mean_optimal");
    for (const SweepRow& row : result.table) {
        char vv[16] = "-";
        char vo[16] = "-";
        char mv[32] = "-";
        char mo[32] = "-";
        if (row.vba_vanilla)
            std::snprintf(vv, sizeof vv, "%.4f", *row.vba_vanilla);
        if (row.vba_optimal)
            std::snprintf(vo, sizeof vo, "%.4f", *row.vba_optimal);
        if (row.mean_vanilla_lo)
            std::snprintf(mv, sizeof mv, "[%.4f, %.4f]", *row.mean_vanilla_lo,
                          *row.mean_vanilla_hi);
        if (row.mean_optimal_lo)
            std::snprintf(mo, sizeof mo, "[%.4f, %.4f]", *row.mean_optimal_lo,
                          *row.mean_optimal_hi);
        std::printf("%-12s %-12.6g %6zu %12s %12s %24s %24s\n", kind_name(row.spec.kind).c_str(),
                    row.spec.magnitude, row.count, vv, vo, mv, mo);
    }
    return kExitOk;
}

struct IouBoundsArgs {
    std::string gt;
    std::string lower;
    std::string upper;
    std::string method = "both";
    std::string format = "text";
};

int run_iou_bounds(const IouBoundsArgs& args) {
    using namespace certbox;

    const auto g = parse_coords(args.gt, "--gt");
    const GroundTruth gt(g[0], g[1], g[2], g[3]);
    const BoxBounds bb =
        BoxBounds::from_corners(parse_coords(args.lower, "--lower"), parse_coords(args.upper, "--upper"));

    const bool want_vanilla = args.method == "vanilla" || args.method == "both";
    const bool want_optimal = args.method == "optimal" || args.method == "both";
    if (!want_vanilla && !want_optimal)
        throw ValidationError("method must be vanilla, optimal or both");

    std::optional<IoUBounds> vanilla;
    std::optional<IoUBounds> optimal;
    std::optional<UpperIoU> upper;
    std::optional<LowerIoU> lower;
    if (want_vanilla)
        vanilla = vanilla_bounds(gt, bb);
    if (want_optimal) {
        upper = optimal_upper(gt, bb);
        lower = optimal_lower(gt, bb);
        optimal = IoUBounds(lower->value, upper->value, BoundMethod::Optimal);
    }

    if (args.format == "json") {
        nlohmann::json doc;
        if (vanilla)
            doc["vanilla"] = bounds_json(*vanilla);
        if (optimal) {
            doc["optimal"] = bounds_json(*optimal);
            doc["optimal"]["maximizer"] = box_json(upper->maximizer);
            if (lower->minimizer)
                doc["optimal"]["minimizer"] = box_json(*lower->minimizer);
            else
                doc["optimal"]["minimizer"] = "collapsed";
        }
        std::cout << doc.dump(2) << '\n';
        return kExitOk;
    }

    if (vanilla)
        std::printf("vanilla  lo=%.12g hi=%.12g\n", vanilla->lo, vanilla->hi);
    if (optimal) {
        std::printf("optimal  lo=%.12g hi=%.12g\n", optimal->lo, optimal->hi);
        std::printf("  maximizer [%g, %g, %g, %g]\n", upper->maximizer.z0, upper->maximizer.z1,
                    upper->maximizer.z2, upper->maximizer.z3);
        if (lower->minimizer)
            std::printf("  minimizer [%g, %g, %g, %g]\n", lower->minimizer->z0,
                        lower->minimizer->z1, lower->minimizer->z2, lower->minimizer->z3);
        else
            std::printf("  minimizer collapsed (lower bound 0: the set contains degenerate "
                        "boxes)\n");
    }
    return kExitOk;
}

struct OracleArgs {
    std::size_t trials = 1000;
    std::uint64_t seed = 7;
    std::size_t divisions = 16;
};

int run_oracle(const OracleArgs& args) {
    using namespace certbox;

    if (args.trials < 1) {
        std::cerr << "error: --trials must be >= 1\n";
        return kExitConfig;
    }
    if (args.divisions < 2) {
        std::cerr << "error: --divisions must be >= 2\n";
        return kExitConfig;
    }

    const auto instances = oracle::random_instances(args.trials, args.seed);
    Rng sample_rng(args.seed ^ 0x9e3779b97f4a7c15ULL);

    double max_vertex_dev = 0.0;
    double max_grid_escape = 0.0;  // grid range outside the optimal bounds
    double max_grid_gap = 0.0;     // looseness of the grid w.r.t. optimal
    std::size_t dominance_violations = 0;
    std::size_t sample_violations = 0;
    std::size_t two_vertex_diffs = 0;
    double max_two_vertex_excess = 0.0;

    for (const oracle::Instance& inst : instances) {
        const IoUBounds opt = optimal_bounds(inst.gt, inst.bb);
        const IoUBounds van = vanilla_bounds(inst.gt, inst.bb);
        const auto vertices = oracle::iou_range_vertices(inst.gt, inst.bb);
        const auto grid = oracle::iou_range_grid(inst.gt, inst.bb, args.divisions);

        max_vertex_dev = std::max({max_vertex_dev, std::abs(vertices.min_iou - opt.lo),
                                   std::abs(vertices.max_iou - opt.hi)});
        max_grid_escape =
            std::max({max_grid_escape, opt.lo - grid.min_iou, grid.max_iou - opt.hi});
        max_grid_gap = std::max({max_grid_gap, grid.min_iou - opt.lo, opt.hi - grid.max_iou});

        if (opt.lo < van.lo - 1e-12 || opt.hi > van.hi + 1e-12)
            ++dominance_violations;

        for (int s = 0; s < 16; ++s) {
            const double v = iou(inst.gt, oracle::sample_box(inst.bb, sample_rng));
            if (v < opt.lo - 1e-12 || v > opt.hi + 1e-12 || v < van.lo - 1e-12 ||
                v > van.hi + 1e-12)
                ++sample_violations;
        }

        const double two = optimal_lower(inst.gt, inst.bb, VertexPolicy::ExtremesOnly).value;
        if (two > opt.lo + 1e-12) {
            ++two_vertex_diffs;
            max_two_vertex_excess = std::max(max_two_vertex_excess, two - opt.lo);
        }
    }

    std::printf("oracle campaign: %zu instances, seed %llu, grid divisions %zu\n", args.trials,
                static_cast<unsigned long long>(args.seed), args.divisions);
    std::printf("max optimal-vs-vertex deviation: %.3g (tolerance 1e-9)\n", max_vertex_dev);
    std::printf("max grid escape outside optimal bounds: %.3g (tolerance 1e-12)\n",
                max_grid_escape);
    std::printf("max grid gap inside optimal bounds: %.3g\n", max_grid_gap);
    std::printf("dominance violations (optimal outside vanilla): %zu\n", dominance_violations);
    std::printf("sampled IoU values outside either bound: %zu\n", sample_violations);
    std::printf("two-vertex variant strictly looser on %zu/%zu instances (max excess %.3g)\n",
                two_vertex_diffs, args.trials, max_two_vertex_excess);

    const bool failed = max_vertex_dev > 1e-9 || max_grid_escape > 1e-12 ||
                        dominance_violations > 0 || sample_violations > 0;
    if (failed) {
        std::printf("RESULT: FAIL\n");
        return kExitCheckFailure;
    }
    std::printf("RESULT: OK\n");
    return kExitOk;
}

struct FixtureArgs {
    std::string out_dir;
    std::size_t images = 20;
    std::size_t height = 16;
    std::size_t width = 16;
    std::size_t rect_w = 5;
    std::size_t rect_h = 4;
    std::uint64_t seed = 1;
};

int run_make_fixture(const FixtureArgs& args) {
    using namespace certbox;

    FixtureOptions opt;
    opt.images = args.images;
    opt.height = args.height;
    opt.width = args.width;
    opt.rect_w = args.rect_w;
    opt.rect_h = args.rect_h;
    opt.seed = args.seed;

    const Dataset ds = make_fixture_dataset(opt);
    const std::string manifest = save_dataset(ds, args.out_dir);
    const std::string model = (std::filesystem::path(args.out_dir) / "model.json").string();
    save_network(make_fixture_detector(opt), model);
    std::printf("dataset: %s\nmodel:   %s\n", manifest.c_str(), model.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"certbox: formal IoU bounds for single-object detectors under input "
                 "perturbations"};
    app.require_subcommand(1);

    VerifyArgs verify_args;
    CLI::App* verify = app.add_subcommand("verify", "run the two-step verification pipeline");
    auto* model_opt = verify->add_option("--model", verify_args.model_path,
                                         "detector model file (step 1 = IBP)");
    auto* bounds_opt = verify->add_option("--bounds", verify_args.bounds_path,
                                          "external box-bounds file (solver-agnostic step 1)");
    model_opt->excludes(bounds_opt);
    bounds_opt->excludes(model_opt);
    verify->add_option("--dataset", verify_args.dataset_path, "dataset manifest")->required();
    verify->add_option("--perturbation", verify_args.perturbation, "perturbation kind")
        ->check(CLI::IsMember({"whitenoise", "brightness", "contrast"}));
    verify->add_option("--min", verify_args.min, "smallest magnitude of the sweep");
    verify->add_option("--max", verify_args.max, "largest magnitude of the sweep");
    verify->add_option("--steps", verify_args.steps, "number of sweep steps")
        ->check(CLI::PositiveNumber);
    verify->add_option("--threshold", verify_args.threshold, "safety threshold t in (0, 1]");
    verify->add_option("--method", verify_args.method, "bound method")
        ->check(CLI::IsMember({"vanilla", "optimal", "both"}));
    verify->add_option("--contrast-mode", verify_args.contrast_mode, "contrast semantics")
        ->check(CLI::IsMember({"literal", "relative"}));
    verify->add_flag("--clamp-input", verify_args.clamp_input,
                     "intersect the input domain with [0, 1]");
    verify->add_option("--seed", verify_args.seed, "rng seed");
    verify->add_option("--workers", verify_args.workers, "worker threads (0 = hardware)")
        ->envname("CERTBOX_WORKERS");
    verify->add_option("--report", verify_args.report_path, "report output path");
    verify->add_option("--format", verify_args.format, "report format")
        ->check(CLI::IsMember({"csv", "json"}));
    verify->add_flag("--zero-timings", verify_args.zero_timings,
                     "write zero step timings for byte-reproducible reports");

    IouBoundsArgs iou_args;
    CLI::App* iou_cmd = app.add_subcommand("iou-bounds", "bound the IoU of one interval box set");
    iou_cmd->add_option("--gt", iou_args.gt, "ground truth z0,z1,z2,z3")->required();
    iou_cmd->add_option("--lower", iou_args.lower, "lower corner z0,z1,z2,z3")->required();
    iou_cmd->add_option("--upper", iou_args.upper, "upper corner z0,z1,z2,z3")->required();
    iou_cmd->add_option("--method", iou_args.method, "bound method")
        ->check(CLI::IsMember({"vanilla", "optimal", "both"}));
    iou_cmd->add_option("--format", iou_args.format, "output format")
        ->check(CLI::IsMember({"text", "json"}));

    OracleArgs oracle_args;
    CLI::App* oracle_cmd =
        app.add_subcommand("oracle", "randomized exactness and soundness campaign");
    oracle_cmd->add_option("--trials", oracle_args.trials, "number of random instances");
    oracle_cmd->add_option("--seed", oracle_args.seed, "rng seed");
    oracle_cmd->add_option("--divisions", oracle_args.divisions, "grid oracle divisions");

    FixtureArgs fixture_args;
    CLI::App* fixture_cmd =
        app.add_subcommand("make-fixture", "generate a synthetic dataset and detector");
    fixture_cmd->add_option("--out", fixture_args.out_dir, "output directory")->required();
    fixture_cmd->add_option("--images", fixture_args.images, "number of images");
    fixture_cmd->add_option("--height", fixture_args.height, "image height");
    fixture_cmd->add_option("--width", fixture_args.width, "image width");
    fixture_cmd->add_option("--rect-w", fixture_args.rect_w, "object width in pixels");
    fixture_cmd->add_option("--rect-h", fixture_args.rect_h, "object height in pixels");
    fixture_cmd->add_option("--seed", fixture_args.seed, "rng seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }

    try {
        if (verify->parsed()) {
            // threshold range is validated by the config; check early for a
            // crisp diagnostic
            if (!(verify_args.threshold > 0.0 && verify_args.threshold <= 1.0)) {
                std::cerr << "error: --threshold must lie in (0, 1]\n";
                return kExitConfig;
            }
            if (verify_args.model_path.empty() && verify_args.bounds_path.empty()) {
                std::cerr << "error: one of --model or --bounds is required\n";
                return kExitConfig;
            }
            return run_verify(verify_args);
        }
        if (iou_cmd->parsed()) {
            try {
                return run_iou_bounds(iou_args);
            } catch (const certbox::InvalidBounds& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kExitConfig;
            }
        }
        if (oracle_cmd->parsed())
            return run_oracle(oracle_args);
        if (fixture_cmd->parsed())
            return run_make_fixture(fixture_args);
    } catch (const certbox::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const certbox::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitConfig;
}
