#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "certbox/dataset.hpp"
#include "certbox/iou_bounds.hpp"
#include "certbox/network.hpp"
#include "certbox/perturbation.hpp"

namespace certbox {

enum class Verdict { Verified, Unknown };

inline std::string verdict_name(Verdict v) {
    return v == Verdict::Verified ? "Verified" : "Unknown";
}

enum class Step1Mode { IBP, ExternalBounds };

struct MethodSelection {
    bool vanilla = true;
    bool optimal = true;
};

struct VerificationConfig {
    double threshold = 0.5;  // t in (0, 1]
    MethodSelection methods;
    Step1Mode step1 = Step1Mode::IBP;
    std::vector<PerturbationSpec> sweep;
    bool clamp01 = false;
    std::uint64_t seed = 0;
    std::size_t workers = 0;  // 0: one per hardware thread

    void validate() const {
        if (!(threshold > 0.0 && threshold <= 1.0))
            throw ValidationError("threshold must lie in (0, 1]");
        if (!methods.vanilla && !methods.optimal)
            throw ValidationError("at least one bound method must be selected");
    }
};

/// Step-1 input: a loaded network (IBP mode) or an external bounds map.
struct Step1Source {
    const Network* net = nullptr;
    const BoundsMap* bounds = nullptr;

    static Step1Source from_network(const Network& n) { return {&n, nullptr}; }
    static Step1Source from_bounds(const BoundsMap& b) { return {nullptr, &b}; }
};

struct VerificationRecord {
    std::string image_id;
    PerturbationSpec spec{PerturbationKind::WhiteNoise, 0.0};
    std::optional<BoxBounds> box_bounds;
    std::optional<IoUBounds> vanilla;
    std::optional<IoUBounds> optimal;
    Verdict verdict = Verdict::Unknown;
    double step1_ms = 0.0;
    double step2_ms = 0.0;
};

/// Run the two-step pipeline for one image and one perturbation. The verdict
/// compares the tightest requested method's lower bound against the
/// threshold; it is two-valued by design, an Unknown may as well be a bound
/// that is not tight enough.
inline VerificationRecord verify_image(const Step1Source& source, const DatasetEntry& entry,
                                       const PerturbationSpec& spec,
                                       const VerificationConfig& cfg) {
    cfg.validate();
    using clock = std::chrono::steady_clock;

    VerificationRecord rec;
    rec.image_id = entry.image_id;
    rec.spec = spec;

    const auto t0 = clock::now();
    if (cfg.step1 == Step1Mode::IBP) {
        if (source.net == nullptr)
            throw ValidationError("IBP mode requires a network");
        rec.box_bounds = propagate_ibp(*source.net, build_domain(entry.image, spec, cfg.clamp01))
                             .bounds;
    } else {
        if (source.bounds == nullptr)
            throw ValidationError("external-bounds mode requires a bounds map");
        const auto it = source.bounds->find(entry.image_id);
        if (it == source.bounds->end())
            throw MissingExternalBounds("no external bounds for image " + entry.image_id);
        rec.box_bounds = it->second;
    }
    const auto t1 = clock::now();

    if (cfg.methods.vanilla)
        rec.vanilla = vanilla_bounds(entry.gt, *rec.box_bounds);
    if (cfg.methods.optimal)
        rec.optimal = optimal_bounds(entry.gt, *rec.box_bounds);
    const auto t2 = clock::now();

    const double lo = cfg.methods.optimal ? rec.optimal->lo : rec.vanilla->lo;
    rec.verdict = lo >= cfg.threshold ? Verdict::Verified : Verdict::Unknown;

    rec.step1_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.step2_ms = std::chrono::duration<double, std::milli>(t2 - t1).count();
    return rec;
}

inline bool same_spec(const PerturbationSpec& a, const PerturbationSpec& b) {
    if (a.kind != b.kind || a.magnitude != b.magnitude)
        return false;
    return a.kind != PerturbationKind::Contrast || a.contrast_mode == b.contrast_mode;
}

/// Verified Box Accuracy: the fraction of records at the given perturbation
/// whose verdict is Verified.
inline double compute_vba(const std::vector<VerificationRecord>& records,
                          const PerturbationSpec& filter) {
    std::size_t total = 0;
    std::size_t verified = 0;
    for (const VerificationRecord& r : records) {
        if (!same_spec(r.spec, filter))
            continue;
        ++total;
        if (r.verdict == Verdict::Verified)
            ++verified;
    }
    if (total == 0)
        throw EmptySelection("no records match the requested perturbation");
    return static_cast<double>(verified) / static_cast<double>(total);
}

/// Per-intensity aggregate over a sweep: per-method VBA and mean bound
/// envelope, plus the verdict-based VBA of the records themselves.
struct SweepRow {
    PerturbationSpec spec{PerturbationKind::WhiteNoise, 0.0};
    std::size_t count = 0;
    double vba = 0.0;
    std::optional<double> vba_vanilla;
    std::optional<double> vba_optimal;
    std::optional<double> mean_vanilla_lo;
    std::optional<double> mean_vanilla_hi;
    std::optional<double> mean_optimal_lo;
    std::optional<double> mean_optimal_hi;
};

struct SweepResult {
    std::vector<VerificationRecord> records;
    std::vector<SweepRow> table;
};

/// Evaluate every (image, perturbation) pair. Pairs are independent; they are
/// distributed over cfg.workers threads and written into pre-assigned slots,
/// so the result does not depend on the worker count.
inline SweepResult run_sweep(const Dataset& dataset, const Step1Source& source,
                             const VerificationConfig& cfg) {
    cfg.validate();
    if (cfg.sweep.empty())
        throw ValidationError("sweep must contain at least one perturbation");

    struct Job {
        const DatasetEntry* entry;
        const PerturbationSpec* spec;
    };
    std::vector<const DatasetEntry*> entries;
    entries.reserve(dataset.entries.size());
    for (const DatasetEntry& e : dataset.entries)
        entries.push_back(&e);
    std::sort(entries.begin(), entries.end(),
              [](const DatasetEntry* a, const DatasetEntry* b) { return a->image_id < b->image_id; });

    std::vector<const PerturbationSpec*> specs;
    specs.reserve(cfg.sweep.size());
    for (const PerturbationSpec& s : cfg.sweep)
        specs.push_back(&s);
    std::stable_sort(specs.begin(), specs.end(),
                     [](const PerturbationSpec* a, const PerturbationSpec* b) {
                         return std::make_tuple(kind_name(a->kind), a->magnitude) <
                                std::make_tuple(kind_name(b->kind), b->magnitude);
                     });

    std::vector<Job> jobs;
    jobs.reserve(entries.size() * specs.size());
    for (const DatasetEntry* e : entries)
        for (const PerturbationSpec* s : specs)
            jobs.push_back(Job{e, s});

    SweepResult result;
    result.records.resize(jobs.size());

    std::size_t workers = cfg.workers != 0 ? cfg.workers : std::thread::hardware_concurrency();
    workers = std::clamp<std::size_t>(workers, 1, jobs.size());

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::string failure;
    std::mutex failure_mutex;

    auto run = [&]() {
        for (std::size_t i = next.fetch_add(1); i < jobs.size(); i = next.fetch_add(1)) {
            if (failed.load())
                return;
            try {
                result.records[i] = verify_image(source, *jobs[i].entry, *jobs[i].spec, cfg);
            } catch (const std::exception& e) {
                const std::scoped_lock lock(failure_mutex);
                if (!failed.exchange(true))
                    failure = e.what();
                return;
            }
        }
    };

    if (workers == 1) {
        run();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i)
            pool.emplace_back(run);
        for (std::thread& t : pool)
            t.join();
    }
    if (failed.load())
        throw Error(failure);

    for (const PerturbationSpec* s : specs) {
        SweepRow row;
        row.spec = *s;
        double sum_vlo = 0, sum_vhi = 0, sum_olo = 0, sum_ohi = 0;
        std::size_t verified = 0, van_ok = 0, opt_ok = 0;
        for (const VerificationRecord& r : result.records) {
            if (!same_spec(r.spec, *s))
                continue;
            ++row.count;
            if (r.verdict == Verdict::Verified)
                ++verified;
            if (r.vanilla) {
                sum_vlo += r.vanilla->lo;
                sum_vhi += r.vanilla->hi;
                if (r.vanilla->lo >= cfg.threshold)
                    ++van_ok;
            }
            if (r.optimal) {
                sum_olo += r.optimal->lo;
                sum_ohi += r.optimal->hi;
                if (r.optimal->lo >= cfg.threshold)
                    ++opt_ok;
            }
        }
        if (row.count == 0)
            continue;
        const double n = static_cast<double>(row.count);
        row.vba = static_cast<double>(verified) / n;
        if (cfg.methods.vanilla) {
            row.vba_vanilla = static_cast<double>(van_ok) / n;
            row.mean_vanilla_lo = sum_vlo / n;
            row.mean_vanilla_hi = sum_vhi / n;
        }
        if (cfg.methods.optimal) {
            row.vba_optimal = static_cast<double>(opt_ok) / n;
            row.mean_optimal_lo = sum_olo / n;
            row.mean_optimal_hi = sum_ohi / n;
        }
        result.table.push_back(row);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { CSV, JSON };

namespace detail {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::vector<const VerificationRecord*> report_order(
    const std::vector<VerificationRecord>& records) {
    std::vector<const VerificationRecord*> ordered;
    ordered.reserve(records.size());
    for (const VerificationRecord& r : records)
        ordered.push_back(&r);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const VerificationRecord* a, const VerificationRecord* b) {
                         return std::make_tuple(a->image_id, kind_name(a->spec.kind),
                                                a->spec.magnitude) <
                                std::make_tuple(b->image_id, kind_name(b->spec.kind),
                                                b->spec.magnitude);
                     });
    return ordered;
}

inline const char* report_header() {
    return "image_id,kind,magnitude,contrast_mode,z0_lo,z0_hi,z1_lo,z1_hi,z2_lo,z2_hi,z3_lo,"
           "z3_hi,vanilla_lo,vanilla_hi,optimal_lo,optimal_hi,verdict,step1_ms,step2_ms";
}

} // namespace detail

/// Write records as CSV or JSON with a deterministic row order (image_id,
/// then kind, then magnitude). With zero_timings the step timing fields are
/// written as 0 so that repeated runs produce byte-identical files.
inline void write_report(const std::vector<VerificationRecord>& records, const std::string& path,
                         ReportFormat format, bool zero_timings = false) {
    const auto ordered = detail::report_order(records);

    std::ofstream file(path, std::ios::binary);
    if (!file)
        throw IoError("cannot write report: " + path);

    auto timing = [&](double ms) { return zero_timings ? 0.0 : ms; };

    if (format == ReportFormat::CSV) {
        file << detail::report_header() << '\n';
        for (const VerificationRecord* r : ordered) {
            const BoxBounds& bb = *r->box_bounds;
            file << r->image_id << ',' << kind_name(r->spec.kind) << ','
                 << detail::format_double(r->spec.magnitude) << ','
                 << contrast_mode_name(r->spec.contrast_mode) << ','
                 << detail::format_double(bb.z0.lo) << ',' << detail::format_double(bb.z0.hi)
                 << ',' << detail::format_double(bb.z1.lo) << ','
                 << detail::format_double(bb.z1.hi) << ',' << detail::format_double(bb.z2.lo)
                 << ',' << detail::format_double(bb.z2.hi) << ','
                 << detail::format_double(bb.z3.lo) << ',' << detail::format_double(bb.z3.hi)
                 << ',';
            if (r->vanilla)
                file << detail::format_double(r->vanilla->lo) << ','
                     << detail::format_double(r->vanilla->hi) << ',';
            else
                file << ",,";
            if (r->optimal)
                file << detail::format_double(r->optimal->lo) << ','
                     << detail::format_double(r->optimal->hi) << ',';
            else
                file << ",,";
            file << verdict_name(r->verdict) << ',' << detail::format_double(timing(r->step1_ms))
                 << ',' << detail::format_double(timing(r->step2_ms)) << '\n';
        }
        return;
    }

    nlohmann::json doc = nlohmann::json::array();
    for (const VerificationRecord* r : ordered) {
        const BoxBounds& bb = *r->box_bounds;
        nlohmann::json node;
        node["image_id"] = r->image_id;
        node["kind"] = kind_name(r->spec.kind);
        node["magnitude"] = r->spec.magnitude;
        node["contrast_mode"] = contrast_mode_name(r->spec.contrast_mode);
        node["z0_lo"] = bb.z0.lo;
        node["z0_hi"] = bb.z0.hi;
        node["z1_lo"] = bb.z1.lo;
        node["z1_hi"] = bb.z1.hi;
        node["z2_lo"] = bb.z2.lo;
        node["z2_hi"] = bb.z2.hi;
        node["z3_lo"] = bb.z3.lo;
        node["z3_hi"] = bb.z3.hi;
        node["vanilla_lo"] = r->vanilla ? nlohmann::json(r->vanilla->lo) : nlohmann::json();
        node["vanilla_hi"] = r->vanilla ? nlohmann::json(r->vanilla->hi) : nlohmann::json();
        node["optimal_lo"] = r->optimal ? nlohmann::json(r->optimal->lo) : nlohmann::json();
        node["optimal_hi"] = r->optimal ? nlohmann::json(r->optimal->hi) : nlohmann::json();
        node["verdict"] = verdict_name(r->verdict);
        node["step1_ms"] = timing(r->step1_ms);
        node["step2_ms"] = timing(r->step2_ms);
        doc.push_back(std::move(node));
    }
    file << doc.dump(2) << '\n';
}

/// Re-read a JSON report. Together with write_report this round-trips every
/// record field exactly.
inline std::vector<VerificationRecord> read_records_json(const std::string& path) {
    std::ifstream file(path);
    if (!file)
        throw IoError("cannot open report: " + path);
    nlohmann::json doc;
    try {
        file >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("report is not valid JSON: ") + e.what());
    }
    if (!doc.is_array())
        throw ParseError("JSON report must be an array of records");

    std::vector<VerificationRecord> records;
    for (const auto& node : doc) {
        VerificationRecord rec;
        rec.image_id = node.at("image_id").get<std::string>();
        const std::string kind = node.at("kind").get<std::string>();
        PerturbationKind k;
        if (kind == "whitenoise")
            k = PerturbationKind::WhiteNoise;
        else if (kind == "brightness")
            k = PerturbationKind::Brightness;
        else if (kind == "contrast")
            k = PerturbationKind::Contrast;
        else
            throw ParseError("unknown perturbation kind in report: " + kind);
        const std::string mode = node.at("contrast_mode").get<std::string>();
        rec.spec = PerturbationSpec(k, node.at("magnitude").get<double>(),
                                    mode == "literal" ? ContrastMode::Literal
                                                      : ContrastMode::Relative);
        rec.box_bounds = BoxBounds(
            Interval(node.at("z0_lo").get<double>(), node.at("z0_hi").get<double>()),
            Interval(node.at("z1_lo").get<double>(), node.at("z1_hi").get<double>()),
            Interval(node.at("z2_lo").get<double>(), node.at("z2_hi").get<double>()),
            Interval(node.at("z3_lo").get<double>(), node.at("z3_hi").get<double>()));
        if (!node.at("vanilla_lo").is_null())
            rec.vanilla = IoUBounds(node.at("vanilla_lo").get<double>(),
                                    node.at("vanilla_hi").get<double>(), BoundMethod::Vanilla);
        if (!node.at("optimal_lo").is_null())
            rec.optimal = IoUBounds(node.at("optimal_lo").get<double>(),
                                    node.at("optimal_hi").get<double>(), BoundMethod::Optimal);
        rec.verdict =
            node.at("verdict").get<std::string>() == "Verified" ? Verdict::Verified : Verdict::Unknown;
        rec.step1_ms = node.at("step1_ms").get<double>();
        rec.step2_ms = node.at("step2_ms").get<double>();
        records.push_back(std::move(rec));
    }
    return records;
}

} // namespace certbox
