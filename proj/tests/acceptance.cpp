// Acceptance checks. Prints one PASS/FAIL line per criterion; exit status is
// non-zero if any selected criterion fails.
//
//   acceptance [--only N] [--cli PATH] [--workdir DIR]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fdisc/pipeline.hpp"
#include "fdisc/synth.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fdisc;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) { return format_double(f, v); }

fs::path g_workdir;
std::string g_cli;

// ---------------------------------------------------------------------------
// 1. clustering oracle equivalence

Outcome clustering_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(20240601);
    int mismatches = 0, partition_mismatches = 0, thetas_checked = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
        const bool dyadic = trial % 2 == 0; // coarse grid: forces ties
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
        DissimilarityMatrix d(ids);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                d.set_symmetric(i, j, dyadic ? std::uniform_int_distribution<int>(0, 8)(rng) / 8.0
                                             : std::uniform_real_distribution<double>(0.0, 1.0)(rng));

        for (auto linkage : {Linkage::Single, Linkage::Complete, Linkage::Average}) {
            const auto got = agglomerative_cluster(d, linkage, 0.0).dendrogram.steps;
            const auto want = oracle::agglomerate(d.values, n, linkage);
            bool same = got.size() == want.size();
            for (std::size_t s = 0; same && s < got.size(); ++s) {
                same = got[s].left == want[s].left && got[s].right == want[s].right &&
                       got[s].merged_id == want[s].merged &&
                       (dyadic ? got[s].height == want[s].height : std::abs(got[s].height - want[s].height) <= 1e-12);
            }
            mismatches += !same;
        }

        // single linkage at every threshold: each distinct entry, just below it, and above the maximum
        std::vector<double> thetas{0.0, 1.5};
        for (double v : d.values) {
            thetas.push_back(v);
            thetas.push_back(std::nextafter(v, -1.0));
        }
        for (double theta : thetas) {
            if (theta < 0.0) continue;
            ++thetas_checked;
            const auto a = agglomerative_cluster(d, Linkage::Single, theta).assignment.by_index;
            if (a != oracle::components(d.values, n, theta)) ++partition_mismatches;
        }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = mismatches == 0 && partition_mismatches == 0 && secs < 30.0;
    o.detail = "200 matrices x 3 linkages, " + std::to_string(mismatches) + " merge-sequence mismatches; " +
               std::to_string(thetas_checked) + " single-linkage cuts, " + std::to_string(partition_mismatches) +
               " differ from connected components; " + fmt("%.2f", secs) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// 2. metric oracle equivalence

Outcome metric_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(77);
    double worst_ari = 0.0, worst_nmi = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int n = std::uniform_int_distribution<int>(2, 12)(rng);
        const int ku = std::uniform_int_distribution<int>(1, n)(rng), kv = std::uniform_int_distribution<int>(1, n)(rng);
        std::vector<int> u(n), v(n);
        for (auto& x : u) x = std::uniform_int_distribution<int>(0, ku - 1)(rng);
        for (auto& x : v) x = std::uniform_int_distribution<int>(0, kv - 1)(rng);
        if (trial % 10 == 0) v = u; // identical partitions, relabeled below
        if (trial % 10 == 1) std::fill(v.begin(), v.end(), 3);
        if (trial % 10 == 0)
            for (auto& x : v) x = 100 - x;
        const auto t = contingency_table(u, v);
        worst_ari = std::max(worst_ari, std::abs(ari(t) - oracle::ari_pairs(u, v)));
        worst_nmi = std::max(worst_nmi, std::abs(nmi(t) - oracle::nmi_entropy(u, v)));
    }

    // degenerate conventions
    auto table = [](std::vector<int> a, std::vector<int> b) { return contingency_table(a, b); };
    const bool both_single = nmi(table({0, 0, 0}, {5, 5, 5})) == 1.0 && ari(table({0, 0, 0}, {5, 5, 5})) == 1.0;
    const bool one_single = nmi(table({0, 0, 1, 1}, {0, 0, 0, 0})) == 0.0 && ari(table({0, 0, 1, 1}, {0, 0, 0, 0})) == 0.0;
    const bool all_singletons = nmi(table({0, 1, 2}, {2, 0, 1})) == 1.0 && ari(table({0, 1, 2}, {2, 0, 1})) == 1.0;
    const bool relabeled = nmi(table({0, 1}, {1, 0})) == 1.0 && ari(table({0, 1}, {1, 0})) == 1.0;

    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = worst_ari <= 1e-12 && worst_nmi <= 1e-9 && both_single && one_single && all_singletons && relabeled &&
             secs < 10.0;
    o.detail = "500 label pairs: max |ARI - pair counting| = " + fmt("%.3g", worst_ari) +
               ", max |NMI - entropy oracle| = " + fmt("%.3g", worst_nmi) + "; degenerate conventions " +
               ((both_single && one_single && all_singletons && relabeled) ? "hold" : "VIOLATED") + "; " +
               fmt("%.2f", secs) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// 3. dissimilarity properties

FaceSet random_set(std::mt19937_64& rng, const std::string& id, std::size_t dim) {
    FaceSet fs;
    fs.set_id = id;
    fs.sequence_id = "seq";
    const int n = std::uniform_int_distribution<int>(1, 8)(rng);
    std::normal_distribution<double> g(0.0, 1.0);
    Descriptor center(dim);
    for (auto& c : center) c = 2.0 * g(rng);
    for (int e = 0; e < n; ++e) {
        FaceExample ex;
        ex.example_id = id + "_" + std::to_string(e);
        ex.sequence_id = "seq";
        ex.frame_index = e;
        ex.bbox = {0, 0, 10, 10};
        Descriptor x = center;
        for (auto& c : x) c += 0.5 * g(rng);
        ex.descriptor = x;
        fs.examples.push_back(std::move(ex));
    }
    return fs;
}

Outcome dissimilarity_properties() {
    const auto t0 = Clock::now();
    const auto previous = log::level();
    log::set_level(log::Level::Off); // singleton sets warn
    std::mt19937_64 rng(3);
    int out_of_range = 0, asymmetric = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        MatcherConfig mc;
        mc.descriptor_metric = trial % 2 ? DescriptorMetric::CosineSim : DescriptorMetric::InvEuclidean;
        const Matcher m = Matcher::from_config(mc);
        const std::size_t dim = std::uniform_int_distribution<std::size_t>(2, 16)(rng);
        const auto r = random_set(rng, "r", dim), t = random_set(rng, "t", dim);
        const double rt = face_set_dissimilarity(r, t, m), tr = face_set_dissimilarity(t, r, m);
        out_of_range += !(rt >= 0.0 && rt <= 1.0);
        asymmetric += rt != tr;
    }
    log::set_level(previous);

    int weighting_errors = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 20)(rng);
        std::vector<std::string> ids(n);
        for (std::size_t i = 0; i < n; ++i) ids[i] = std::to_string(i);
        DissimilarityMatrix d(ids);
        ConstraintMatrix c(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                d.set_symmetric(i, j, std::uniform_real_distribution<double>(0.0, 1.0)(rng));
                if (std::bernoulli_distribution(0.3)(rng)) c.set_symmetric(i, j, 1);
            }
        const auto w = apply_constraints(d, c, ConstraintMode::Weight);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                const double before = d.at(i, j), after = w.at(i, j);
                if (c.at(i, j)) weighting_errors += after != 2.0 * before;
                else weighting_errors += std::memcmp(&before, &after, sizeof(double)) != 0;
            }
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = out_of_range == 0 && asymmetric == 0 && weighting_errors == 0 && secs < 10.0;
    o.detail = "1000 face-set pairs: " + std::to_string(out_of_range) + " outside [0,1], " + std::to_string(asymmetric) +
               " with delta(R,T) != delta(T,R); constraint weighting: " + std::to_string(weighting_errors) +
               " wrong entries over 100 matrices; " + fmt("%.2f", secs) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// Synthetic corpus runs shared by criteria 4-7

SynthConfig corpus(std::uint64_t seed, int confusable) {
    SynthConfig s;
    s.num_identities = 20;
    s.sets_per_identity = 5;
    s.examples_min = 5;
    s.examples_max = 15;
    s.inter_margin = 3.0;
    s.cooccurrence_rate = 0.3;
    s.confusable_pairs = confusable;
    s.seed = seed;
    return s;
}

// Writes an evaluation corpus and a disjoint training corpus (different seed, so
// different identities) and returns a pipeline config pointing at them.
PipelineConfig prepare(const std::string& tag, std::uint64_t seed, int confusable) {
    const fs::path dir = g_workdir / tag;
    auto eval = corpus(seed, confusable);
    auto train = corpus(seed + 100000, confusable);
    train.role = DatasetRole::Training;
    write_manifest(generate_dataset(eval).dataset, dir / "eval" / "manifest.json");
    write_manifest(generate_dataset(train).dataset, dir / "train" / "manifest.json");
    PipelineConfig cfg;
    cfg.dataset_path = (dir / "eval" / "manifest.json").string();
    cfg.calibration_path = (dir / "train" / "manifest.json").string();
    cfg.linkage = Linkage::Average;
    cfg.parallelism = 0;
    return cfg;
}

struct Separation {
    double max_s = 0.0, min_d = 0.0;
};

Separation separation(const CalibrationResult& c) {
    return {*std::max_element(c.delta_s_values.begin(), c.delta_s_values.end()),
            *std::min_element(c.delta_d_values.begin(), c.delta_d_values.end())};
}

// ---------------------------------------------------------------------------
// 4. separation regime

Outcome separation_regime() {
    const auto t0 = Clock::now();
    auto cfg = prepare("separation", 42, 0);
    cfg.constraint_mode = ConstraintSetting::Weight;
    const auto r = run_pipeline(cfg);
    const auto& m = r.methods.front();
    const auto sep = separation(*r.calibration);

    // Diagnostic only: the same dissimilarities cut anywhere inside the gap.
    const double gap_theta = 0.5 * (sep.max_s + sep.min_d);
    const auto gap = score_method("gap", "", apply_constraints(r.dissimilarity, r.constraints, ConstraintMode::Weight),
                                  gap_theta, cfg, identities_from_examples(read_manifest(cfg.dataset_path, false)));

    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = *m.nmi == 1.0 && *m.ari == 1.0 && secs < 60.0;
    o.detail = "NMI = " + fmt("%.4f", *m.nmi) + ", ARI = " + fmt("%.4f", *m.ari) + " with calibrated theta = " +
               fmt("%.5f", r.theta) + " (" + std::to_string(m.clustering.assignment.num_clusters) +
               " clusters for 20 identities); calibration split max delta_s = " + fmt("%.5f", sep.max_s) +
               " < min delta_d = " + fmt("%.5f", sep.min_d) + "; diagnostic cut inside that gap gives NMI = " +
               fmt("%.4f", *gap.nmi) + ", ARI = " + fmt("%.4f", *gap.ari) + "; " + fmt("%.2f", secs) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// 5 and 6. ten-seed comparisons on the confusable corpus

struct SeedRow {
    double nmi_weight, ari_weight, nmi_off, ari_off, nmi_mean;
};

const std::vector<SeedRow>& confusable_rows() {
    static const std::vector<SeedRow> rows = [] {
        std::vector<SeedRow> out;
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            auto cfg = prepare("confusable_" + std::to_string(seed), seed, 5);
            cfg.constraint_mode = ConstraintSetting::Weight;
            cfg.compare_unconstrained = true;
            cfg.baseline = true;
            const auto r = run_pipeline(cfg);
            SeedRow row{};
            for (const auto& m : r.methods) {
                if (m.name == "set_pair") row.nmi_weight = *m.nmi, row.ari_weight = *m.ari;
                if (m.name == "set_pair_unconstrained") row.nmi_off = *m.nmi, row.ari_off = *m.ari;
                if (m.name == "mean_descriptor") row.nmi_mean = *m.nmi;
            }
            out.push_back(row);
        }
        return out;
    }();
    return rows;
}

Outcome constraint_efficacy() {
    const auto& rows = confusable_rows();
    double nw = 0, aw = 0, no = 0, ao = 0;
    int ordered = 0;
    for (const auto& r : rows) {
        nw += r.nmi_weight, aw += r.ari_weight, no += r.nmi_off, ao += r.ari_off;
        ordered += r.ari_weight >= r.ari_off && r.nmi_weight >= r.nmi_off;
    }
    const double k = static_cast<double>(rows.size());
    Outcome o;
    o.pass = aw >= ao && nw >= no && ordered >= 8;
    o.detail = "mean ARI weight " + fmt("%.4f", aw / k) + " vs off " + fmt("%.4f", ao / k) + ", mean NMI weight " +
               fmt("%.4f", nw / k) + " vs off " + fmt("%.4f", no / k) + "; ordering holds on " +
               std::to_string(ordered) + "/10 seeds";
    return o;
}

Outcome set_pair_vs_mean() {
    const auto& rows = confusable_rows();
    int wins = 0;
    std::string per_seed;
    for (const auto& r : rows) {
        wins += r.nmi_weight > r.nmi_mean;
        per_seed += (per_seed.empty() ? "" : " ") + fmt("%.3f", r.nmi_weight) + "/" + fmt("%.3f", r.nmi_mean);
    }
    Outcome o;
    o.pass = wins >= 7;
    o.detail = "set-pair NMI above mean-descriptor NMI on " + std::to_string(wins) +
               "/10 seeds (set-pair/mean per seed: " + per_seed + ")";
    return o;
}

// ---------------------------------------------------------------------------
// 7. calibration correctness

Outcome calibration_correctness() {
    auto train = corpus(4242, 0);
    train.role = DatasetRole::Training;
    const auto gen = generate_dataset(train);
    const Matcher m = Matcher::from_config(MatcherConfig{});
    const auto samples = make_calibration_samples(gen.dataset, gen.truth);
    const auto result = calibrate_threshold(samples, m, 0);

    std::vector<double> delta_s;
    for (std::size_t a = 0; a < gen.dataset.face_sets.size(); ++a)
        for (std::size_t b = a + 1; b < gen.dataset.face_sets.size(); ++b) {
            const auto& fa = gen.dataset.face_sets[a];
            const auto& fb = gen.dataset.face_sets[b];
            if (gen.truth.at(fa.set_id) == gen.truth.at(fb.set_id)) delta_s.push_back(face_set_dissimilarity(fa, fb, m));
        }
    const double brute = oracle::median(delta_s);
    Outcome o;
    o.pass = result.theta < result.median_d && std::abs(result.theta - brute) <= 1e-12;
    o.detail = "theta = " + fmt("%.6f", result.theta) + " < median_d = " + fmt("%.6f", result.median_d) +
               "; |theta - brute-force median of " + std::to_string(delta_s.size()) +
               " delta_s| = " + fmt("%.3g", std::abs(result.theta - brute));
    return o;
}

// ---------------------------------------------------------------------------
// 8. quadrant matcher

Outcome quad_matcher() {
    const auto t0 = Clock::now();
    MatcherConfig cfg;
    cfg.kind = MatcherKind::QuadPatch;
    std::mt19937_64 rng(8);
    const auto tex = random_texture(rng);
    const auto img = render_texture(tex, 64);
    const double self = quad_patch_match(img, img, cfg);
    const double shifted = quad_patch_match(img, render_texture(tex, 64, 2.0, 0.0), cfg);

    int wins = 0;
    for (int i = 0; i < 200; ++i) {
        const auto t = random_texture(rng);
        const auto a = render_jittered(t, 64, 2.0, 6.0, rng);
        const auto b = render_jittered(t, 64, 2.0, 6.0, rng);
        const auto noise = random_noise_image(64, rng);
        wins += quad_patch_match(a, noise, cfg) < quad_patch_match(a, b, cfg);
    }
    const double secs = seconds_since(t0);
    Outcome o;
    o.pass = std::abs(self - 1.0) <= 1e-6 && shifted >= 0.95 && wins >= 190 && secs < 30.0;
    o.detail = "identical " + fmt("%.9f", self) + ", 2-pixel shift " + fmt("%.4f", shifted) +
               ", noise below jittered pair on " + std::to_string(wins) + "/200 triples; " + fmt("%.2f", secs) + " s";
    return o;
}

// ---------------------------------------------------------------------------
// 9. determinism of `run`

Outcome determinism() {
    if (g_cli.empty()) return {false, "no CLI binary given (--cli)"};
    const auto base = prepare("determinism", 9, 5);
    std::vector<std::string> assignments, metrics;
    int failures = 0;
    for (const char* par : {"1", "4", "0", "1"}) {
        const fs::path out = g_workdir / "determinism" / (std::string("out_p") + par + "_" + std::to_string(assignments.size()));
        const std::string cmd = "\"" + g_cli + "\" run --dataset \"" + base.dataset_path + "\" --calibration \"" +
                                base.calibration_path + "\" --out \"" + out.string() +
                                "\" --compare-unconstrained --baseline --parallelism " + par + " > /dev/null";
        failures += std::system(cmd.c_str()) != 0;
        try {
            assignments.push_back(read_text_file(out / "assignment.csv"));
            metrics.push_back(read_text_file(out / "metrics.json"));
        } catch (const Error&) {
            ++failures;
        }
    }
    bool identical = failures == 0 && !assignments.empty();
    for (std::size_t i = 1; identical && i < assignments.size(); ++i)
        identical = assignments[i] == assignments[0] && metrics[i] == metrics[0];
    Outcome o;
    o.pass = identical;
    o.detail = std::to_string(assignments.size()) + " runs (parallelism 1, 4, auto, 1): assignment.csv and metrics.json " +
               (identical ? "byte-identical" : "DIFFER") +
               (failures ? "; " + std::to_string(failures) + " run failure(s)" : std::string());
    return o;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        if (a == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
        else if (a == "--cli" && i + 1 < argc) g_cli = argv[++i];
        else if (a == "--workdir" && i + 1 < argc) g_workdir = argv[++i];
        else {
            std::fprintf(stderr, "usage: acceptance [--only N] [--cli PATH] [--workdir DIR]\n");
            return 2;
        }
    }
    if (g_workdir.empty()) g_workdir = fs::temp_directory_path() / "fdisc_acceptance";
    if (only) g_workdir /= "c" + std::to_string(only);
    fs::remove_all(g_workdir);
    fs::create_directories(g_workdir);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"clustering oracle equivalence", clustering_oracle},
        {"metric oracle equivalence", metric_oracle},
        {"dissimilarity properties", dissimilarity_properties},
        {"separation-regime recovery", separation_regime},
        {"constraint efficacy", constraint_efficacy},
        {"set-pair vs mean-descriptor", set_pair_vs_mean},
        {"calibration correctness", calibration_correctness},
        {"quadrant matcher sanity", quad_matcher},
        {"determinism", determinism},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (only && static_cast<int>(i) + 1 != only) continue;
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        std::printf("%s criterion %zu (%s): %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
        failed += !o.pass;
    }
    return failed ? 1 : 0;
}
