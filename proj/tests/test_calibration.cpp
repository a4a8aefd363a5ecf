#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fdisc/calibration.hpp"
#include "fdisc/synth.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fdisc;
using namespace testing_helpers;

TEST(Calibration, MedianOfSamePersonValues) {
    EXPECT_DOUBLE_EQ(calibrate_from_deltas({0.1, 0.2, 0.3}, {}).theta, 0.2);
    EXPECT_DOUBLE_EQ(calibrate_from_deltas({0.1, 0.3}, {0.9}).theta, 0.2);
    EXPECT_DOUBLE_EQ(calibrate_from_deltas({0.1, 0.3}, {0.9}).median_d, 0.9);
    try {
        calibrate_from_deltas({}, {0.5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NoPositiveSamples);
    }
}

TEST(Calibration, ThetaIgnoresDifferentPersonSamplesAndOrder) {
    SynthConfig cfg;
    cfg.num_identities = 6;
    cfg.sets_per_identity = 3;
    cfg.descriptor_dim = 16;
    cfg.seed = 3;
    const auto gen = generate_dataset(cfg);
    const auto m = inv_euclidean();
    auto samples = make_calibration_samples(gen.dataset, gen.truth);
    EXPECT_EQ(samples.size(), 18u * 17u / 2u);
    const double theta = calibrate_threshold(samples, m).theta;

    std::mt19937_64 rng(1);
    std::shuffle(samples.begin(), samples.end(), rng);
    EXPECT_EQ(calibrate_threshold(samples, m, 3).theta, theta);

    std::vector<CalibrationSample> positives;
    for (const auto& s : samples)
        if (s.same_person) positives.push_back(s);
    EXPECT_EQ(calibrate_threshold(positives, m).theta, theta);

    // theta is the median of the brute-force delta_s list
    std::vector<double> ds;
    for (const auto& s : positives) ds.push_back(face_set_dissimilarity(*s.set_a, *s.set_b, m));
    EXPECT_EQ(theta, oracle::median(ds));
    const auto at_or_below = std::count_if(ds.begin(), ds.end(), [&](double v) { return v <= theta; });
    EXPECT_GE(2 * at_or_below, static_cast<long>(ds.size()));
}

TEST(Calibration, SeparatedCorpusHasThetaBelowMedianD) {
    SynthConfig cfg;
    cfg.role = DatasetRole::Training;
    cfg.seed = 21;
    const auto gen = generate_dataset(cfg);
    const auto r = calibrate_threshold(make_calibration_samples(gen.dataset, gen.truth), inv_euclidean(), 0);
    EXPECT_LT(r.theta, r.median_d);
    EXPECT_EQ(r.delta_s_values.size(), 20u * 10u); // C(5,2) per identity
}

TEST(Calibration, RejectsSelfPairsAndNoPositives) {
    const auto ds = dataset_1d({{{"a", {0.0, 0.1}}, {"b", {1.0, 1.2}}}});
    const auto m = inv_euclidean();
    try {
        calibrate_threshold({{&ds.face_sets[0], &ds.face_sets[0], true}}, m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::InvalidConfig);
    }
    try {
        calibrate_threshold({{&ds.face_sets[0], &ds.face_sets[1], false}}, m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NoPositiveSamples);
    }
}

TEST(Calibration, FromMatrix) {
    DissimilarityMatrix d({"a", "b", "c", "d"});
    d.set_symmetric(0, 1, 0.1);
    d.set_symmetric(2, 3, 0.3);
    d.set_symmetric(0, 2, 0.8);
    d.set_symmetric(0, 3, 0.9);
    d.set_symmetric(1, 2, 0.7);
    d.set_symmetric(1, 3, 0.6);
    const auto r = calibrate_from_matrix(d, {{"a", "x"}, {"b", "x"}, {"c", "y"}, {"d", "y"}});
    EXPECT_DOUBLE_EQ(r.theta, 0.2);
    EXPECT_DOUBLE_EQ(r.median_d, 0.75);
}
