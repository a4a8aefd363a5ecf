#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "fdisc/core.hpp"
#include "fdisc/matching.hpp"

namespace testing_helpers {

using fdisc::Descriptor;

inline fdisc::FaceExample example(const std::string& id, const std::string& seq, int frame, Descriptor d) {
    fdisc::FaceExample ex;
    ex.example_id = id;
    ex.sequence_id = seq;
    ex.frame_index = frame;
    ex.bbox = {10, 10, 20, 20};
    ex.descriptor = std::move(d);
    return ex;
}

// One-dimensional descriptors: handy for hand-computed similarities.
inline fdisc::FaceSet set_1d(const std::string& id, const std::string& seq, const std::vector<double>& xs) {
    fdisc::FaceSet fs{id, seq, {}};
    for (std::size_t i = 0; i < xs.size(); ++i)
        fs.examples.push_back(example(id + "_" + std::to_string(i), seq, static_cast<int>(i), {xs[i]}));
    return fs;
}

// A dataset with one sequence per entry of `layout`; each entry lists the face-sets in that sequence.
inline fdisc::Dataset dataset_1d(const std::vector<std::vector<std::pair<std::string, std::vector<double>>>>& layout) {
    fdisc::Dataset ds;
    for (std::size_t s = 0; s < layout.size(); ++s) {
        const std::string seq = "q" + std::to_string(s);
        fdisc::SequenceRecord rec{seq, 20, {}};
        for (const auto& [id, xs] : layout[s]) {
            rec.face_set_ids.push_back(id);
            ds.face_sets.push_back(set_1d(id, seq, xs));
        }
        ds.sequences.push_back(rec);
    }
    return ds;
}

inline fdisc::Matcher inv_euclidean() { return fdisc::Matcher::from_config(fdisc::MatcherConfig{}); }

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("fdisc_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing_helpers
