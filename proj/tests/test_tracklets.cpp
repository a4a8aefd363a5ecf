#include <gtest/gtest.h>

#include <random>
#include <set>

#include "fdisc/synth.hpp"
#include "fdisc/tracklets.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace fdisc;
using namespace testing_helpers;

namespace {

Detection det(const std::string& id, int frame, BBox box, std::optional<Descriptor> d = {}) {
    Detection x;
    x.detection_id = id;
    x.sequence_id = "s";
    x.frame_index = frame;
    x.bbox = box;
    x.descriptor = std::move(d);
    return x;
}

std::vector<std::vector<Detection>> by_frame(const std::vector<Detection>& dets, int frames) {
    std::vector<std::vector<Detection>> out(static_cast<std::size_t>(frames));
    for (const auto& d : dets) out[static_cast<std::size_t>(d.frame_index)].push_back(d);
    return out;
}

} // namespace

TEST(Tracker, RecoversSideBySideTracks) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto seq = generate_track_sequence("s", 3, 12, seed);
        const auto sets = track_sequence("s", 12, seq.detections, TrackerConfig{});
        ASSERT_EQ(sets.size(), 3u);
        std::set<std::string> seen;
        for (const auto& fs : sets) {
            EXPECT_EQ(fs.length(), 12u);
            std::set<std::string> identities;
            for (const auto& ex : fs.examples) {
                identities.insert(*ex.true_identity);
                seen.insert(ex.example_id);
            }
            EXPECT_EQ(identities.size(), 1u) << fs.set_id << " mixes tracks";
        }
        EXPECT_EQ(seen.size(), 36u);
        EXPECT_EQ(sets[0].set_id, "s_fs0");
    }
}

TEST(Tracker, GapTolerance) {
    std::vector<Detection> dets;
    for (int f : {0, 1, 4, 8}) dets.push_back(det("d" + std::to_string(f), f, {10, 10, 40, 40}));
    TrackerConfig cfg; // max_gap 2: 1 -> 4 skips frames 2,3 (allowed), 4 -> 8 skips three (not allowed)
    const auto tracks = link_detections(by_frame(dets, 9), cfg);
    ASSERT_EQ(tracks.size(), 2u);
    EXPECT_EQ(tracks[0].detections.size(), 3u);
    EXPECT_EQ(tracks[1].first_frame(), 8);
    EXPECT_DOUBLE_EQ(tracks[0].confidence, 3.0 / 9.0);
}

TEST(Tracker, AppearanceLinksJumps) {
    const std::vector<Detection> dets{det("a", 0, {0, 0, 30, 30}, Descriptor{1.0}),
                                      det("b", 1, {300, 0, 30, 30}, Descriptor{1.05})};
    const Matcher m = inv_euclidean();
    EXPECT_EQ(link_detections(by_frame(dets, 2), TrackerConfig{}, &m).size(), 1u);
    EXPECT_EQ(link_detections(by_frame(dets, 2), TrackerConfig{}, nullptr).size(), 2u);
    TrackerConfig strict;
    strict.sim_min = 0.99;
    EXPECT_EQ(link_detections(by_frame(dets, 2), strict, &m).size(), 2u);
}

TEST(Tracker, OneDetectionPerFramePerTrack) {
    const auto seq = generate_track_sequence("s", 4, 10, 9, 20); // crowded: boxes overlap heavily
    for (const auto& t : link_detections(by_frame(seq.detections, 10), TrackerConfig{})) {
        for (std::size_t i = 1; i < t.detections.size(); ++i)
            EXPECT_LT(t.detections[i - 1].frame_index, t.detections[i].frame_index);
    }
}

TEST(Tracker, DuplicateDetectionsAreBagged) {
    std::vector<Detection> dets;
    for (int f = 0; f < 6; ++f) {
        dets.push_back(det("p" + std::to_string(f), f, {10, 10, 40, 40}));
        dets.push_back(det("q" + std::to_string(f), f, {12, 11, 40, 40}));
    }
    const auto tracks = link_detections(by_frame(dets, 6), TrackerConfig{});
    ASSERT_EQ(tracks.size(), 2u);
    const auto sets = bag_and_prototype(tracks, 0.5, "s");
    ASSERT_EQ(sets.size(), 1u);
    EXPECT_EQ(sets[0].examples.front().example_id, "p0");
}

TEST(Tracker, FrameRatioFilter) {
    std::vector<Detection> dets{det("a", 0, {0, 0, 10, 10}), det("b", 1, {0, 0, 10, 10})};
    TrackerConfig cfg;
    EXPECT_TRUE(track_sequence("s", 10, dets, cfg).empty()); // 2/10 frames with faces
    EXPECT_EQ(track_sequence("s", 4, dets, cfg).size(), 1u); // 2/4
    cfg.min_face_frame_ratio = 0.0;
    EXPECT_EQ(track_sequence("s", 10, dets, cfg).size(), 1u);
}

TEST(Bagging, MatchesConnectedComponents) {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> pos(0, 60), start(0, 4), len(1, 5);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = std::uniform_int_distribution<int>(1, 7)(rng);
        std::vector<Tracklet> tracks;
        for (int t = 0; t < n; ++t) {
            Tracklet tr;
            const int s = start(rng), x = pos(rng), y = pos(rng);
            for (int f = s, l = len(rng); f < s + l; ++f) tr.detections.push_back(det("", f, {x, y, 30, 30}));
            tr.confidence = static_cast<double>(tr.detections.size()) / 10.0;
            tracks.push_back(tr);
        }
        std::vector<double> d(static_cast<std::size_t>(n * n));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) d[i * n + j] = i == j ? 0.0 : -shared_frame_overlap(tracks[i], tracks[j]);
        const auto comps = oracle::components(d, static_cast<std::size_t>(n), -0.5);
        const int expected = *std::max_element(comps.begin(), comps.end()) + 1;
        const auto sets = bag_and_prototype(tracks, 0.5, "s");
        ASSERT_EQ(static_cast<int>(sets.size()), expected);
        // every prototype has the largest confidence in its bag
        for (const auto& fs : sets) {
            const auto first = fs.examples.front().frame_index;
            int comp = -1;
            for (int i = 0; i < n; ++i)
                if (tracks[i].first_frame() == first && tracks[i].detections.size() == fs.length() &&
                    tracks[i].detections.front().bbox == fs.examples.front().bbox)
                    comp = comps[i];
            ASSERT_GE(comp, 0);
            for (int i = 0; i < n; ++i)
                if (comps[i] == comp) {
                    EXPECT_LE(tracks[i].detections.size(), fs.length());
                }
        }
    }
}

TEST(Tracker, TrackDatasetProducesValidFaceSets) {
    Dataset ds;
    for (int s = 0; s < 3; ++s) {
        const std::string id = "seq" + std::to_string(s);
        ds.sequences.push_back({id, 8, {}});
        for (auto d : generate_track_sequence(id, s + 1, 8, 40 + s).detections) {
            d.descriptor = Descriptor{static_cast<double>(s)};
            ds.detections.push_back(d);
        }
    }
    const auto out = track_dataset(ds, TrackerConfig{});
    EXPECT_EQ(out.face_sets.size(), 6u);
    EXPECT_EQ(out.sequences[2].face_set_ids.size(), 3u);
    EXPECT_TRUE(validate_dataset(out).empty());
}
