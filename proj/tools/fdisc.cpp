// fdisc: command-line front end for face-set identity clustering.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdisc/pipeline.hpp"
#include "fdisc/synth.hpp"

namespace fs = std::filesystem;
using namespace fdisc;

namespace {

struct MatcherFlags {
    std::string kind = "descriptor";
    std::string metric = "inv_euclidean";
    int patch_size = 64;
    int grid = 4;
    int radius = 4;
    std::string score_table;

    void add(CLI::App* app) {
        app->add_option("--matcher", kind, "quad_patch | descriptor | precomputed")->capture_default_str();
        app->add_option("--descriptor-metric", metric, "cosine_sim | inv_euclidean")->capture_default_str();
        app->add_option("--patch-size", patch_size)->capture_default_str();
        app->add_option("--grid", grid)->capture_default_str();
        app->add_option("--search-radius", radius)->capture_default_str();
        app->add_option("--score-table", score_table, "TSV of precomputed example-pair scores");
    }

    MatcherConfig resolve() const {
        MatcherConfig m;
        m.kind = parse_matcher_kind(kind);
        m.descriptor_metric = parse_metric(metric);
        m.patch_size = patch_size;
        m.grid = grid;
        m.search_radius = radius;
        m.score_table_path = score_table;
        m.validate();
        return m;
    }
};

std::string write_or_print(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
    } else {
        write_file_atomic(path, content);
    }
    return content;
}

int cmd_validate(const std::string& manifest, bool precomputed) {
    const Dataset ds = read_manifest(manifest, !precomputed);
    ValidationOptions opts;
    opts.require_appearance = !precomputed;
    const auto report = validate_dataset(ds, opts);
    for (const auto& v : report) std::cout << v.subject << ": " << v.message << "\n";
    std::cout << ds.sequences.size() << " sequences, " << ds.face_sets.size() << " face-sets, " << report.size()
              << " violation(s)\n";
    return report.empty() ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cluster face-sets into person identities"};
    app.require_subcommand(1);
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "log progress to stderr");

    // validate
    auto* validate = app.add_subcommand("validate", "check a dataset manifest");
    std::string validate_path;
    bool validate_precomputed = false;
    validate->add_option("manifest", validate_path)->required();
    validate->add_flag("--precomputed", validate_precomputed, "examples need no descriptor or patch");

    // simulate
    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset with ground truth");
    SynthConfig synth;
    std::string synth_out, synth_appearance = "descriptor", synth_role = "evaluation";
    simulate->add_option("--out", synth_out, "output directory")->required();
    simulate->add_option("--seed", synth.seed)->capture_default_str();
    simulate->add_option("--identities", synth.num_identities)->capture_default_str();
    simulate->add_option("--sets-per-identity", synth.sets_per_identity)->capture_default_str();
    simulate->add_option("--examples-min", synth.examples_min)->capture_default_str();
    simulate->add_option("--examples-max", synth.examples_max)->capture_default_str();
    simulate->add_option("--dim", synth.descriptor_dim)->capture_default_str();
    simulate->add_option("--sigma", synth.intra_sigma)->capture_default_str();
    simulate->add_option("--margin", synth.inter_margin)->capture_default_str();
    simulate->add_option("--cooccurrence", synth.cooccurrence_rate)->capture_default_str();
    simulate->add_option("--confusable-pairs", synth.confusable_pairs)->capture_default_str();
    simulate->add_option("--confusable-distance", synth.confusable_distance)->capture_default_str();
    simulate->add_option("--appearance", synth_appearance, "descriptor | patch | both")->capture_default_str();
    simulate->add_option("--role", synth_role, "training | evaluation")->capture_default_str();

    // track
    auto* track = app.add_subcommand("track", "link detections into face-sets");
    std::string track_in, track_out;
    TrackerConfig tracker;
    MatcherFlags track_matcher;
    track->add_option("manifest", track_in)->required();
    track->add_option("--out", track_out, "output manifest")->required();
    track->add_option("--max-gap", tracker.max_gap)->capture_default_str();
    track->add_option("--iou-min", tracker.iou_min)->capture_default_str();
    track->add_option("--sim-min", tracker.sim_min)->capture_default_str();
    track->add_option("--overlap-min", tracker.overlap_min)->capture_default_str();
    track->add_option("--min-face-frame-ratio", tracker.min_face_frame_ratio)->capture_default_str();
    track_matcher.add(track);

    // dissim
    auto* dissim = app.add_subcommand("dissim", "compute the face-set dissimilarity and constraint matrices");
    std::string dissim_in, dissim_out, dissim_constraints;
    unsigned dissim_parallel = 1;
    MatcherFlags dissim_matcher;
    dissim->add_option("manifest", dissim_in)->required();
    dissim->add_option("--out", dissim_out, "matrix file ('-' for stdout)")->required();
    dissim->add_option("--constraints-out", dissim_constraints, "constraint matrix file");
    dissim->add_option("--parallelism", dissim_parallel, "0 = auto")->capture_default_str();
    dissim_matcher.add(dissim);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate", "derive the cut-off threshold from a training dataset");
    std::string calib_in, calib_truth, calib_out;
    unsigned calib_parallel = 1;
    MatcherFlags calib_matcher;
    calibrate->add_option("manifest", calib_in)->required();
    calibrate->add_option("--truth", calib_truth, "set_id,identity CSV (default: identities in the manifest)");
    calibrate->add_option("--out", calib_out, "directory for calibration.json and plotdata.csv")->required();
    calibrate->add_option("--parallelism", calib_parallel)->capture_default_str();
    calib_matcher.add(calibrate);

    // cluster
    auto* cluster = app.add_subcommand("cluster", "cluster a dissimilarity matrix");
    std::string cl_matrix, cl_dataset, cl_constraints, cl_out, cl_linkage = "average", cl_mode = "weight";
    double cl_theta = 0.0;
    cluster->add_option("--matrix", cl_matrix)->required();
    cluster->add_option("--theta", cl_theta)->required();
    cluster->add_option("--dataset", cl_dataset, "manifest naming the rows and supplying constraints");
    cluster->add_option("--constraints", cl_constraints, "constraint matrix file (overrides --dataset)");
    cluster->add_option("--constraint-mode", cl_mode, "weight | hard_max | off")->capture_default_str();
    cluster->add_option("--linkage", cl_linkage, "single | complete | average")->capture_default_str();
    cluster->add_option("--out", cl_out, "assignment CSV ('-' for stdout)")->required();

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "score an assignment against ground truth");
    std::string ev_truth, ev_assign, ev_out, ev_norm = "arithmetic";
    evaluate->add_option("--truth", ev_truth)->required();
    evaluate->add_option("--assignment", ev_assign)->required();
    evaluate->add_option("--nmi-normalization", ev_norm, "arithmetic | geometric | max")->capture_default_str();
    evaluate->add_option("--out", ev_out, "metrics JSON ('-' for stdout)");

    // run
    auto* run = app.add_subcommand("run", "full pipeline: dissimilarity, constraints, clustering, metrics");
    std::string run_config, run_theta, run_linkage, run_mode, run_norm;
    PipelineConfig pc;
    MatcherFlags run_matcher;
    std::optional<unsigned> run_parallel;
    run->add_option("--config", run_config, "JSON config; flags override its fields");
    run->add_option("--dataset", pc.dataset_path);
    run->add_option("--calibration", pc.calibration_path, "training dataset for theta calibration");
    run->add_option("--truth", pc.truth_path);
    run->add_option("--calibration-truth", pc.calibration_truth_path);
    run->add_option("--out", pc.output_dir, "output directory");
    run->add_option("--theta", run_theta, "number or 'calibrate' (default)");
    run->add_option("--linkage", run_linkage, "single | complete | average");
    run->add_option("--constraint-mode", run_mode, "weight | hard_max | off");
    run->add_option("--nmi-normalization", run_norm, "arithmetic | geometric | max");
    run->add_option("--parallelism", run_parallel, "0 = auto");
    run->add_flag("--allow-same-dataset", pc.allow_same_dataset);
    run->add_flag("--compare-unconstrained", pc.compare_unconstrained);
    run->add_flag("--baseline", pc.baseline, "also run the mean-descriptor baseline");
    run->add_flag("--dump-matrices", pc.dump_matrices);
    run_matcher.add(run);

    // report
    auto* report = app.add_subcommand("report", "print the comparison table of a finished run");
    std::string report_dir;
    report->add_option("dir", report_dir)->required();

    CLI11_PARSE(app, argc, argv);
    if (verbose) log::set_level(log::Level::Info);

    try {
        if (*validate) return cmd_validate(validate_path, validate_precomputed);

        if (*simulate) {
            if (synth_appearance == "descriptor") synth.appearance = SynthAppearance::Descriptor;
            else if (synth_appearance == "patch") synth.appearance = SynthAppearance::Patch;
            else if (synth_appearance == "both") synth.appearance = SynthAppearance::Both;
            else throw Error(Errc::InvalidConfig, "unknown appearance " + synth_appearance);
            if (synth_role == "training") synth.role = DatasetRole::Training;
            else if (synth_role == "evaluation") synth.role = DatasetRole::Evaluation;
            else throw Error(Errc::InvalidConfig, "unknown role " + synth_role);
            const auto result = generate_dataset(synth);
            write_manifest(result.dataset, fs::path(synth_out) / "manifest.json");
            write_file_atomic(fs::path(synth_out) / "truth.csv", labels_to_csv(result.truth));
            std::cout << result.dataset.face_sets.size() << " face-sets in " << result.dataset.sequences.size()
                      << " sequences written to " << synth_out << "\n";
            return 0;
        }

        if (*track) {
            const auto mc = track_matcher.resolve();
            const Matcher m = Matcher::from_config(mc, load_score_table_for(mc));
            const Dataset in = read_manifest(track_in, true);
            const Dataset out = track_dataset(in, tracker, &m);
            write_manifest(out, track_out);
            std::cout << out.face_sets.size() << " face-sets from " << in.detections.size() << " detections\n";
            return 0;
        }

        if (*dissim) {
            const auto mc = dissim_matcher.resolve();
            const Matcher m = Matcher::from_config(mc, load_score_table_for(mc));
            const Dataset ds = read_manifest(dissim_in, mc.kind == MatcherKind::QuadPatch);
            write_or_print(dissim_out, matrix_to_string(build_dissimilarity_matrix(ds, m, dissim_parallel)));
            if (!dissim_constraints.empty())
                write_or_print(dissim_constraints, matrix_to_string(build_constraint_matrix(ds)));
            return 0;
        }

        if (*calibrate) {
            const auto mc = calib_matcher.resolve();
            const Matcher m = Matcher::from_config(mc, load_score_table_for(mc));
            const Dataset ds = read_manifest(calib_in, mc.kind == MatcherKind::QuadPatch);
            if (ds.role != DatasetRole::Training)
                throw Error(Errc::InvalidConfig, calib_in + " is not flagged as a training dataset");
            const auto truth = calib_truth.empty() ? identities_from_examples(ds) : read_truth_file(calib_truth);
            const auto result = calibrate_threshold(make_calibration_samples(ds, truth), m, calib_parallel);
            nlohmann::json j = {{"theta", result.theta},
                                {"median_d", result.median_d},
                                {"same_person_pairs", result.delta_s_values.size()},
                                {"different_person_pairs", result.delta_d_values.size()}};
            write_outputs(calib_out, {{"calibration.json", j.dump(2) + "\n"}, {"plotdata.csv", plotdata_csv(result)}});
            std::printf("theta = %.9f (median_d = %.9f)\n", result.theta, result.median_d);
            return 0;
        }

        if (*cluster) {
            std::vector<std::string> ids;
            std::optional<ConstraintMatrix> constraints;
            if (!cl_dataset.empty()) {
                const Dataset ds = read_manifest(cl_dataset, false);
                ids = ds.set_ids();
                constraints = build_constraint_matrix(ds);
            }
            if (!cl_constraints.empty()) constraints = parse_constraints(read_text_file(cl_constraints), cl_constraints);
            DissimilarityMatrix d = parse_dissimilarity(read_text_file(cl_matrix), ids, cl_matrix);
            const auto mode = parse_constraint_setting(cl_mode);
            if (mode != ConstraintSetting::Off && constraints)
                d = apply_constraints(d, *constraints,
                                      mode == ConstraintSetting::Weight ? ConstraintMode::Weight : ConstraintMode::HardMax);
            const auto result = agglomerative_cluster(d, parse_linkage(cl_linkage), cl_theta);
            write_or_print(cl_out, assignment_to_csv(result.assignment));
            return 0;
        }

        if (*evaluate) {
            const auto truth = read_truth_file(ev_truth);
            const auto assignment = read_assignment_file(ev_assign);
            const auto table = contingency_table(truth, assignment);
            const auto norm = parse_nmi_normalization(ev_norm);
            const double n = nmi(table, norm), a = ari(table);
            nlohmann::json j = {{"nmi", n},
                                {"ari", a},
                                {"nmi_pct", percent(n)},
                                {"ari_pct", percent(a)},
                                {"n_face_sets", table.total},
                                {"nmi_normalization", std::string(to_string(norm))}};
            write_or_print(ev_out, j.dump(2) + "\n");
            return 0;
        }

        if (*run) {
            PipelineConfig cfg;
            if (!run_config.empty()) {
                nlohmann::json j;
                try {
                    j = nlohmann::json::parse(read_text_file(run_config));
                } catch (const nlohmann::json::parse_error& e) {
                    throw Error(Errc::InvalidConfig, run_config + ": " + e.what());
                }
                apply_json(j, cfg);
            }
            // Explicit flags win over the config file.
            auto given = [&](const char* name) { return run->count(name) > 0; };
            if (given("--dataset")) cfg.dataset_path = pc.dataset_path;
            if (given("--calibration")) cfg.calibration_path = pc.calibration_path;
            if (given("--truth")) cfg.truth_path = pc.truth_path;
            if (given("--calibration-truth")) cfg.calibration_truth_path = pc.calibration_truth_path;
            if (given("--out")) cfg.output_dir = pc.output_dir;
            if (given("--theta")) {
                if (run_theta == "calibrate") cfg.theta.reset();
                else try {
                    cfg.theta = std::stod(run_theta);
                } catch (const std::exception&) {
                    throw Error(Errc::InvalidConfig, "theta must be a number or 'calibrate'");
                }
            }
            if (given("--linkage")) cfg.linkage = parse_linkage(run_linkage);
            if (given("--constraint-mode")) cfg.constraint_mode = parse_constraint_setting(run_mode);
            if (given("--nmi-normalization")) cfg.nmi_normalization = parse_nmi_normalization(run_norm);
            if (run_parallel) cfg.parallelism = *run_parallel;
            cfg.allow_same_dataset = cfg.allow_same_dataset || pc.allow_same_dataset;
            cfg.compare_unconstrained = cfg.compare_unconstrained || pc.compare_unconstrained;
            cfg.baseline = cfg.baseline || pc.baseline;
            cfg.dump_matrices = cfg.dump_matrices || pc.dump_matrices;
            if (run_config.empty() || given("--matcher") || given("--descriptor-metric") || given("--patch-size") ||
                given("--grid") || given("--search-radius") || given("--score-table")) {
                if (!run_config.empty()) {
                    // Seed unspecified matcher flags from the config file.
                    if (!given("--matcher")) run_matcher.kind = matcher_kind_name(cfg.matcher.kind);
                    if (!given("--descriptor-metric")) run_matcher.metric = metric_name(cfg.matcher.descriptor_metric);
                    if (!given("--patch-size")) run_matcher.patch_size = cfg.matcher.patch_size;
                    if (!given("--grid")) run_matcher.grid = cfg.matcher.grid;
                    if (!given("--search-radius")) run_matcher.radius = cfg.matcher.search_radius;
                    if (!given("--score-table")) run_matcher.score_table = cfg.matcher.score_table_path;
                }
                cfg.matcher = run_matcher.resolve();
            }
            const RunReport r = run_and_emit(cfg);
            for (const auto& m : r.methods) {
                std::printf("%-24s theta=%.6f clusters=%d", m.name.c_str(), m.theta, m.clustering.assignment.num_clusters);
                if (m.nmi) std::printf("  NMI=%.2f ARI=%.2f", percent(*m.nmi), percent(*m.ari));
                std::printf("\n");
            }
            return 0;
        }

        if (*report) {
            const auto j = nlohmann::json::parse(read_text_file(fs::path(report_dir) / "report.json"));
            std::printf("face-sets: %zu  theta: %.6f\n", j.at("n_face_sets").get<std::size_t>(), j.at("theta").get<double>());
            std::printf("%-6s %-24s %8s %8s\n", "column", "method", "NMI %", "ARI %");
            for (const auto& row : j.at("table")) {
                const auto col = row.at("column").get<std::string>();
                if (!row.at("available").get<bool>()) {
                    std::printf("%-6s %-24s %8s %8s\n", col.c_str(), "(unavailable)", "-", "-");
                    continue;
                }
                auto cell = [&](const char* k) {
                    return row.at(k).is_null() ? std::string("-") : format_double("%.2f", row.at(k).get<double>());
                };
                std::printf("%-6s %-24s %8s %8s\n", col.c_str(), row.at("method").get<std::string>().c_str(),
                            cell("nmi_pct").c_str(), cell("ari_pct").c_str());
            }
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "fdisc: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fdisc: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
