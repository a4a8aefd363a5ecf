#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdisc/calibration.hpp"
#include "fdisc/clustering.hpp"
#include "fdisc/core.hpp"
#include "fdisc/dissimilarity.hpp"
#include "fdisc/error.hpp"
#include "fdisc/io.hpp"
#include "fdisc/log.hpp"
#include "fdisc/matching.hpp"
#include "fdisc/metrics.hpp"
#include "fdisc/tracklets.hpp"

namespace fdisc {

// ---------------------------------------------------------------------------
// Names used by config files and the command line
// ---------------------------------------------------------------------------

enum class ConstraintSetting { Weight, HardMax, Off };

namespace detail {

template <class E>
struct EnumName {
    E value;
    const char* name;
};

template <class E, std::size_t N>
std::string enum_to_string(const EnumName<E> (&table)[N], E v) {
    for (const auto& e : table)
        if (e.value == v) return e.name;
    return "?";
}

template <class E, std::size_t N>
E enum_from_string(const EnumName<E> (&table)[N], const std::string& s, const char* what) {
    for (const auto& e : table)
        if (s == e.name) return e.value;
    std::string options;
    for (const auto& e : table) options += std::string(options.empty() ? "" : ", ") + e.name;
    throw Error(Errc::InvalidConfig, std::string("unknown ") + what + " '" + s + "' (expected one of: " + options + ")");
}

inline constexpr EnumName<Linkage> kLinkageNames[] = {
    {Linkage::Single, "single"}, {Linkage::Complete, "complete"}, {Linkage::Average, "average"}};
inline constexpr EnumName<ConstraintSetting> kConstraintNames[] = {
    {ConstraintSetting::Weight, "weight"}, {ConstraintSetting::HardMax, "hard_max"}, {ConstraintSetting::Off, "off"}};
inline constexpr EnumName<MatcherKind> kMatcherNames[] = {
    {MatcherKind::QuadPatch, "quad_patch"}, {MatcherKind::Descriptor, "descriptor"},
    {MatcherKind::Precomputed, "precomputed"}};
inline constexpr EnumName<DescriptorMetric> kMetricNames[] = {
    {DescriptorMetric::CosineSim, "cosine_sim"}, {DescriptorMetric::InvEuclidean, "inv_euclidean"}};
inline constexpr EnumName<NmiNormalization> kNmiNames[] = {
    {NmiNormalization::Arithmetic, "arithmetic"}, {NmiNormalization::Geometric, "geometric"},
    {NmiNormalization::Max, "max"}};

} // namespace detail

inline std::string linkage_name(Linkage v) { return detail::enum_to_string(detail::kLinkageNames, v); }
inline Linkage parse_linkage(const std::string& s) {
    return detail::enum_from_string(detail::kLinkageNames, s, "linkage");
}
inline std::string constraint_name(ConstraintSetting v) { return detail::enum_to_string(detail::kConstraintNames, v); }
inline ConstraintSetting parse_constraint_setting(const std::string& s) {
    return detail::enum_from_string(detail::kConstraintNames, s, "constraint mode");
}
inline std::string matcher_kind_name(MatcherKind v) { return detail::enum_to_string(detail::kMatcherNames, v); }
inline MatcherKind parse_matcher_kind(const std::string& s) {
    return detail::enum_from_string(detail::kMatcherNames, s, "matcher");
}
inline std::string metric_name(DescriptorMetric v) { return detail::enum_to_string(detail::kMetricNames, v); }
inline DescriptorMetric parse_metric(const std::string& s) {
    return detail::enum_from_string(detail::kMetricNames, s, "descriptor metric");
}
inline NmiNormalization parse_nmi_normalization(const std::string& s) {
    return detail::enum_from_string(detail::kNmiNames, s, "NMI normalization");
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
    MatcherConfig matcher;
    Linkage linkage = Linkage::Average;
    std::optional<double> theta; // empty: calibrate on the calibration dataset
    ConstraintSetting constraint_mode = ConstraintSetting::Weight;

    std::string dataset_path;
    std::string calibration_path;
    std::string truth_path;             // empty: identities stored in the dataset, if any
    std::string calibration_truth_path; // empty: identities stored in the calibration dataset
    std::string output_dir;             // empty: nothing is written

    unsigned parallelism = 1; // 0 = one worker per hardware thread
    NmiNormalization nmi_normalization = NmiNormalization::Arithmetic;
    bool allow_same_dataset = false;
    bool compare_unconstrained = false; // also cluster without constraints
    bool baseline = false;              // also run the mean-descriptor baseline
    bool dump_matrices = false;
    TrackerConfig tracker;

    bool calibrates() const { return !theta.has_value(); }

    /// Checks everything that can be checked without touching data.
    void validate() const {
        if (dataset_path.empty()) throw Error(Errc::InvalidConfig, "no dataset path");
        if (calibrates() && calibration_path.empty())
            throw Error(Errc::InvalidConfig, "theta is 'calibrate' but no calibration dataset is configured");
        if (theta && !(*theta >= 0.0)) throw Error(Errc::InvalidConfig, "theta must be >= 0");
        if (baseline && calibration_path.empty())
            throw Error(Errc::InvalidConfig, "the mean-descriptor baseline calibrates its own theta and needs a calibration dataset");
        if (!calibration_path.empty() && !allow_same_dataset) {
            std::error_code ec;
            if (std::filesystem::equivalent(dataset_path, calibration_path, ec))
                throw Error(Errc::InvalidConfig,
                            "calibration and evaluation dataset are the same file; pass the override to allow it");
        }
        matcher.validate();
    }
};

inline nlohmann::json to_json(const MatcherConfig& m) {
    nlohmann::json j = {{"kind", matcher_kind_name(m.kind)},
                        {"patch_size", m.patch_size},
                        {"grid", m.grid},
                        {"search_radius", m.search_radius},
                        {"descriptor_metric", metric_name(m.descriptor_metric)}};
    j["score_table_path"] = m.score_table_path.empty() ? nlohmann::json(nullptr) : nlohmann::json(m.score_table_path);
    return j;
}

inline nlohmann::json to_json(const TrackerConfig& t) {
    return {{"max_gap", t.max_gap},
            {"iou_min", t.iou_min},
            {"sim_min", t.sim_min},
            {"overlap_min", t.overlap_min},
            {"min_face_frame_ratio", t.min_face_frame_ratio}};
}

/// The resolved configuration, as written next to the outputs.
inline nlohmann::json to_json(const PipelineConfig& c) {
    auto path = [](const std::string& p) { return p.empty() ? nlohmann::json(nullptr) : nlohmann::json(p); };
    nlohmann::json j;
    j["matcher"] = to_json(c.matcher);
    j["linkage"] = linkage_name(c.linkage);
    j["theta"] = c.theta ? nlohmann::json(*c.theta) : nlohmann::json("calibrate");
    j["constraint_mode"] = constraint_name(c.constraint_mode);
    j["dataset"] = path(c.dataset_path);
    j["calibration"] = path(c.calibration_path);
    j["truth"] = path(c.truth_path);
    j["calibration_truth"] = path(c.calibration_truth_path);
    j["output_dir"] = path(c.output_dir);
    j["parallelism"] = c.parallelism;
    j["nmi_normalization"] = std::string(to_string(c.nmi_normalization));
    j["allow_same_dataset"] = c.allow_same_dataset;
    j["compare_unconstrained"] = c.compare_unconstrained;
    j["baseline"] = c.baseline;
    j["dump_matrices"] = c.dump_matrices;
    j["tracker"] = to_json(c.tracker);
    return j;
}

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return;
    try {
        out = it->get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(Errc::InvalidConfig, std::string("config field '") + key + "' has the wrong type");
    }
}

} // namespace detail

/// Reads a config document; absent fields keep the values already in `c`.
inline void apply_json(const nlohmann::json& j, PipelineConfig& c) {
    if (!j.is_object()) throw Error(Errc::InvalidConfig, "config must be a JSON object");
    std::string s;
    if (auto m = j.find("matcher"); m != j.end() && m->is_object()) {
        if (s.clear(), detail::read_opt(*m, "kind", s), !s.empty()) c.matcher.kind = parse_matcher_kind(s);
        detail::read_opt(*m, "patch_size", c.matcher.patch_size);
        detail::read_opt(*m, "grid", c.matcher.grid);
        detail::read_opt(*m, "search_radius", c.matcher.search_radius);
        if (s.clear(), detail::read_opt(*m, "descriptor_metric", s), !s.empty())
            c.matcher.descriptor_metric = parse_metric(s);
        detail::read_opt(*m, "score_table_path", c.matcher.score_table_path);
    }
    if (s.clear(), detail::read_opt(j, "linkage", s), !s.empty()) c.linkage = parse_linkage(s);
    if (auto t = j.find("theta"); t != j.end()) {
        if (t->is_string() && t->get<std::string>() == "calibrate") c.theta.reset();
        else if (t->is_number()) c.theta = t->get<double>();
        else throw Error(Errc::InvalidConfig, "theta must be a number or \"calibrate\"");
    }
    if (s.clear(), detail::read_opt(j, "constraint_mode", s), !s.empty())
        c.constraint_mode = parse_constraint_setting(s);
    detail::read_opt(j, "dataset", c.dataset_path);
    detail::read_opt(j, "calibration", c.calibration_path);
    detail::read_opt(j, "truth", c.truth_path);
    detail::read_opt(j, "calibration_truth", c.calibration_truth_path);
    detail::read_opt(j, "output_dir", c.output_dir);
    detail::read_opt(j, "parallelism", c.parallelism);
    if (s.clear(), detail::read_opt(j, "nmi_normalization", s), !s.empty())
        c.nmi_normalization = parse_nmi_normalization(s);
    detail::read_opt(j, "allow_same_dataset", c.allow_same_dataset);
    detail::read_opt(j, "compare_unconstrained", c.compare_unconstrained);
    detail::read_opt(j, "baseline", c.baseline);
    detail::read_opt(j, "dump_matrices", c.dump_matrices);
    if (auto t = j.find("tracker"); t != j.end() && t->is_object()) {
        detail::read_opt(*t, "max_gap", c.tracker.max_gap);
        detail::read_opt(*t, "iou_min", c.tracker.iou_min);
        detail::read_opt(*t, "sim_min", c.tracker.sim_min);
        detail::read_opt(*t, "overlap_min", c.tracker.overlap_min);
        detail::read_opt(*t, "min_face_frame_ratio", c.tracker.min_face_frame_ratio);
    }
}

// ---------------------------------------------------------------------------
// Run
// ---------------------------------------------------------------------------

/// One clustering variant and how it scored.
struct MethodResult {
    std::string name;      // set_pair, set_pair_unconstrained, mean_descriptor
    std::string table_ref; // column of the comparison table this variant stands in for
    double theta = 0.0;
    ClusteringResult clustering;
    std::optional<double> nmi;
    std::optional<double> ari;
};

struct StageTiming {
    std::string stage;
    double milliseconds = 0.0;
};

struct RunReport {
    PipelineConfig config;
    std::size_t n_face_sets = 0;
    double theta = 0.0;
    std::optional<CalibrationResult> calibration;
    std::vector<MethodResult> methods; // methods[0] is the configured pipeline
    std::vector<StageTiming> timings;
    DissimilarityMatrix dissimilarity; // before constraints
    ConstraintMatrix constraints;
};

namespace detail {

class StageClock {
public:
    explicit StageClock(std::vector<StageTiming>& out) : out_(out) {}

    template <class F>
    auto run(const std::string& stage, F&& f) -> decltype(f()) {
        const auto start = std::chrono::steady_clock::now();
        try {
            if constexpr (std::is_void_v<decltype(f())>) {
                f();
                record(stage, start);
            } else {
                auto r = f();
                record(stage, start);
                return r;
            }
        } catch (const Error& e) {
            throw Error(e.code(), "stage " + stage + ": " + e.detail());
        } catch (const std::filesystem::filesystem_error& e) {
            throw Error(Errc::IoFailure, "stage " + stage + ": " + e.what());
        }
    }

private:
    void record(const std::string& stage, std::chrono::steady_clock::time_point start) {
        const std::chrono::duration<double, std::milli> ms = std::chrono::steady_clock::now() - start;
        out_.push_back({stage, ms.count()});
    }

    std::vector<StageTiming>& out_;
};

inline void require_valid(const Dataset& ds, const MatcherConfig& matcher, const std::string& what) {
    ValidationOptions opts;
    opts.require_appearance = matcher.kind != MatcherKind::Precomputed;
    const auto report = validate_dataset(ds, opts);
    if (report.empty()) return;
    std::string msg = what + " has " + std::to_string(report.size()) + " violation(s); first: " + report.front().subject +
                      ": " + report.front().message;
    throw Error(Errc::InvalidDataset, msg);
}

} // namespace detail

/// Loads a dataset; sequences given only as detections are tracked into face-sets first.
inline Dataset load_dataset(const std::string& path, const PipelineConfig& cfg, const Matcher* matcher) {
    Dataset ds = read_manifest(path, cfg.matcher.kind == MatcherKind::QuadPatch);
    if (ds.face_sets.empty() && !ds.detections.empty()) ds = track_dataset(ds, cfg.tracker, matcher);
    return ds;
}

inline std::shared_ptr<const ScoreTable> load_score_table_for(const MatcherConfig& m) {
    if (m.kind != MatcherKind::Precomputed) return nullptr;
    return std::make_shared<const ScoreTable>(load_score_table_file(m.score_table_path));
}

inline MethodResult score_method(std::string name, std::string table_ref, const DissimilarityMatrix& d, double theta,
                                 const PipelineConfig& cfg, const IdentityLabels& truth) {
    MethodResult r;
    r.name = std::move(name);
    r.table_ref = std::move(table_ref);
    r.theta = theta;
    r.clustering = agglomerative_cluster(d, cfg.linkage, theta);
    if (!truth.empty()) {
        const auto table = contingency_table(truth, r.clustering.assignment);
        r.nmi = nmi(table, cfg.nmi_normalization);
        r.ari = ari(table);
    }
    return r;
}

/// Runs the configured pipeline in memory. Nothing is written; see emit_report.
inline RunReport run_pipeline(const PipelineConfig& cfg) {
    RunReport report;
    report.config = cfg;
    detail::StageClock clock(report.timings);

    clock.run("config", [&] { cfg.validate(); });
    const auto table = clock.run("matcher", [&] { return load_score_table_for(cfg.matcher); });
    const Matcher matcher = Matcher::from_config(cfg.matcher, table);

    const Dataset ds = clock.run("load", [&] {
        Dataset d = load_dataset(cfg.dataset_path, cfg, &matcher);
        detail::require_valid(d, cfg.matcher, "dataset");
        if (d.face_sets.size() < 2) throw Error(Errc::InvalidDataset, "dataset needs at least two face-sets");
        return d;
    });
    const IdentityLabels truth = clock.run("truth", [&] {
        return cfg.truth_path.empty() ? identities_from_examples(ds) : read_truth_file(cfg.truth_path);
    });
    report.n_face_sets = ds.face_sets.size();

    std::optional<Dataset> calib;
    IdentityLabels calib_truth;
    if (!cfg.calibration_path.empty()) {
        calib = clock.run("calibration_load", [&] {
            Dataset d = load_dataset(cfg.calibration_path, cfg, &matcher);
            if (d.role != DatasetRole::Training)
                throw Error(Errc::InvalidConfig, "calibration dataset " + cfg.calibration_path +
                                                     " is not flagged as a training dataset");
            if (ds.role == DatasetRole::Training && !cfg.allow_same_dataset)
                throw Error(Errc::InvalidConfig, "evaluation dataset is flagged as training; pass the override to allow it");
            detail::require_valid(d, cfg.matcher, "calibration dataset");
            calib_truth = cfg.calibration_truth_path.empty() ? identities_from_examples(d)
                                                             : read_truth_file(cfg.calibration_truth_path);
            return d;
        });
    }

    if (cfg.calibrates()) {
        report.calibration = clock.run("calibrate", [&] {
            return calibrate_threshold(make_calibration_samples(*calib, calib_truth), matcher, cfg.parallelism);
        });
        report.theta = report.calibration->theta;
    } else {
        report.theta = *cfg.theta;
    }

    report.dissimilarity =
        clock.run("dissimilarity", [&] { return build_dissimilarity_matrix(ds, matcher, cfg.parallelism); });
    report.constraints = clock.run("constraints", [&] { return build_constraint_matrix(ds); });

    clock.run("cluster", [&] {
        const bool constrained = cfg.constraint_mode != ConstraintSetting::Off;
        if (constrained) {
            const auto mode =
                cfg.constraint_mode == ConstraintSetting::Weight ? ConstraintMode::Weight : ConstraintMode::HardMax;
            const auto weighted = apply_constraints(report.dissimilarity, report.constraints, mode);
            report.methods.push_back(score_method("set_pair", "M7", weighted, report.theta, cfg, truth));
        } else {
            report.methods.push_back(score_method("set_pair", "M6", report.dissimilarity, report.theta, cfg, truth));
        }
        if (constrained && cfg.compare_unconstrained)
            report.methods.push_back(
                score_method("set_pair_unconstrained", "M6", report.dissimilarity, report.theta, cfg, truth));
    });

    if (cfg.baseline) {
        clock.run("baseline", [&] {
            const auto theta = calibrate_from_matrix(mean_descriptor_matrix(*calib), calib_truth).theta;
            report.methods.push_back(
                score_method("mean_descriptor", "M5", mean_descriptor_matrix(ds), theta, cfg, truth));
        });
    }
    return report;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

inline double percent(double v) { return v * 100.0; }

inline nlohmann::json dendrogram_summary(const MethodResult& m) {
    const auto& steps = m.clustering.dendrogram.steps;
    std::size_t below = 0;
    for (const auto& s : steps) below += s.height <= m.theta;
    nlohmann::json j = {{"merges", steps.size()},
                        {"merges_at_or_below_theta", below},
                        {"num_clusters", m.clustering.assignment.num_clusters}};
    j["min_height"] = steps.empty() ? nlohmann::json(nullptr) : nlohmann::json(steps.front().height);
    j["max_height"] = steps.empty() ? nlohmann::json(nullptr) : nlohmann::json(steps.back().height);
    return j;
}

inline nlohmann::json method_json(const MethodResult& m) {
    auto opt = [](const std::optional<double>& v, bool pct) {
        return v ? nlohmann::json(pct ? percent(*v) : *v) : nlohmann::json(nullptr);
    };
    return {{"table_ref", m.table_ref},
            {"theta", m.theta},
            {"num_clusters", m.clustering.assignment.num_clusters},
            {"nmi", opt(m.nmi, false)},
            {"ari", opt(m.ari, false)},
            {"nmi_pct", opt(m.nmi, true)},
            {"ari_pct", opt(m.ari, true)}};
}

/// Scores only: no timings and no parallelism, so the text depends on the
/// data and the clustering configuration alone.
inline std::string metrics_json(const RunReport& r) {
    const MethodResult& primary = r.methods.front();
    nlohmann::json j = method_json(primary);
    j.erase("table_ref");
    j["theta"] = r.theta;
    j["n_face_sets"] = r.n_face_sets;
    j["nmi_normalization"] = std::string(to_string(r.config.nmi_normalization));
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& m : r.methods) methods[m.name] = method_json(m);
    j["methods"] = std::move(methods);
    return j.dump(2) + "\n";
}

inline std::string report_json(const RunReport& r) {
    nlohmann::json j;
    j["config"] = to_json(r.config);
    j["n_face_sets"] = r.n_face_sets;
    j["theta"] = r.theta;
    j["constrained_pairs"] = r.constraints.constrained_pairs();
    if (r.calibration) {
        j["calibration"] = {{"theta", r.calibration->theta},
                            {"median_d", r.calibration->median_d},
                            {"same_person_pairs", r.calibration->delta_s_values.size()},
                            {"different_person_pairs", r.calibration->delta_d_values.size()}};
    }
    nlohmann::json methods = nlohmann::json::object();
    for (const auto& m : r.methods) {
        auto mj = method_json(m);
        mj["dendrogram"] = dendrogram_summary(m);
        methods[m.name] = std::move(mj);
    }
    j["methods"] = std::move(methods);

    // Comparison table in the reference column order (M1..M7); columns without an analog stay unavailable.
    nlohmann::json table = nlohmann::json::array();
    for (const char* col : {"M1", "M2", "M3", "M4", "M5", "M6", "M7"}) {
        nlohmann::json row = {{"column", col}, {"available", false}};
        for (const auto& m : r.methods) {
            if (m.table_ref != col) continue;
            row = {{"column", col}, {"available", true}, {"method", m.name}};
            row["nmi_pct"] = m.nmi ? nlohmann::json(percent(*m.nmi)) : nlohmann::json(nullptr);
            row["ari_pct"] = m.ari ? nlohmann::json(percent(*m.ari)) : nlohmann::json(nullptr);
        }
        table.push_back(std::move(row));
    }
    j["table"] = std::move(table);

    nlohmann::json timings = nlohmann::json::object();
    for (const auto& t : r.timings) timings[t.stage] = t.milliseconds;
    j["timings_ms"] = std::move(timings);
    return j.dump(2) + "\n";
}

/// Fig. 3 scatter data: one row per calibration pair, then the two medians.
inline std::string plotdata_csv(const CalibrationResult& c) {
    std::string out = "series,value\n";
    for (double v : c.delta_s_values) out += "delta_s," + format_double("%.17g", v) + "\n";
    for (double v : c.delta_d_values) out += "delta_d," + format_double("%.17g", v) + "\n";
    out += "median_s," + format_double("%.17g", c.theta) + "\n";
    out += "median_d," + format_double("%.17g", c.median_d) + "\n";
    return out;
}

/// Writes a set of files into `dir`. Each file is written atomically; if any
/// write fails, the files already written by this call are removed.
inline void write_outputs(const std::filesystem::path& dir, const std::vector<std::pair<std::string, std::string>>& files) {
    std::vector<std::filesystem::path> written;
    try {
        std::filesystem::create_directories(dir);
        for (const auto& [name, content] : files) {
            write_file_atomic(dir / name, content);
            written.push_back(dir / name);
        }
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) std::filesystem::remove(p, ec);
        throw;
    }
}

/// Renders every output of a run: assignment CSVs, metrics, report, resolved config,
/// plotdata (when calibrated) and matrix dumps (when requested).
inline std::vector<std::pair<std::string, std::string>> render_outputs(const RunReport& r) {
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("assignment.csv", assignment_to_csv(r.methods.front().clustering.assignment));
    for (std::size_t i = 1; i < r.methods.size(); ++i)
        files.emplace_back("assignment_" + r.methods[i].name + ".csv", assignment_to_csv(r.methods[i].clustering.assignment));
    files.emplace_back("metrics.json", metrics_json(r));
    files.emplace_back("report.json", report_json(r));
    files.emplace_back("config.json", to_json(r.config).dump(2) + "\n");
    if (r.calibration) files.emplace_back("plotdata.csv", plotdata_csv(*r.calibration));
    if (r.config.dump_matrices) {
        files.emplace_back("dissimilarity.txt", matrix_to_string(r.dissimilarity));
        files.emplace_back("constraints.txt", matrix_to_string(r.constraints));
    }
    return files;
}

inline void emit_report(const RunReport& r, const std::filesystem::path& dir) {
    try {
        write_outputs(dir, render_outputs(r));
    } catch (const Error& e) {
        throw Error(e.code(), "stage emit: " + e.detail());
    } catch (const std::filesystem::filesystem_error& e) {
        throw Error(Errc::IoFailure, std::string("stage emit: ") + e.what());
    }
}

/// run_pipeline followed by emit_report into the configured output directory.
inline RunReport run_and_emit(const PipelineConfig& cfg) {
    RunReport r = run_pipeline(cfg);
    if (!cfg.output_dir.empty()) emit_report(r, cfg.output_dir);
    return r;
}

} // namespace fdisc
