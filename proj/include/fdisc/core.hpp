#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fdisc/image.hpp"

namespace fdisc {

struct BBox {
    int x = 0;
    int y = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const BBox&, const BBox&) = default;
};

inline double intersection_over_union(const BBox& a, const BBox& b) {
    const long ix0 = std::max(a.x, b.x);
    const long iy0 = std::max(a.y, b.y);
    const long ix1 = std::min<long>(static_cast<long>(a.x) + a.width, static_cast<long>(b.x) + b.width);
    const long iy1 = std::min<long>(static_cast<long>(a.y) + a.height, static_cast<long>(b.y) + b.height);
    if (ix1 <= ix0 || iy1 <= iy0) return 0.0;
    const double inter = static_cast<double>(ix1 - ix0) * static_cast<double>(iy1 - iy0);
    const double uni = static_cast<double>(a.width) * a.height + static_cast<double>(b.width) * b.height - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

using Descriptor = std::vector<double>;

/// One face bounding box in one frame of a sequence.
struct FaceExample {
    std::string example_id;
    std::string sequence_id;
    int frame_index = 0;
    BBox bbox;
    std::optional<GrayImage> patch;
    std::string patch_ref; // manifest-relative PGM path, empty when the patch was never stored
    std::optional<Descriptor> descriptor;
    std::optional<std::string> true_identity;

    bool has_appearance() const noexcept { return patch.has_value() || descriptor.has_value(); }

    friend bool operator==(const FaceExample&, const FaceExample&) = default;
};

/// All face examples of one individual within one sequence.
struct FaceSet {
    std::string set_id;
    std::string sequence_id;
    std::vector<FaceExample> examples;

    std::size_t length() const noexcept { return examples.size(); }

    friend bool operator==(const FaceSet&, const FaceSet&) = default;
};

struct SequenceRecord {
    std::string sequence_id;
    int frame_count = 1;
    std::vector<std::string> face_set_ids;

    friend bool operator==(const SequenceRecord&, const SequenceRecord&) = default;
};

/// Raw per-frame face detection, input of the tracklet stage.
struct Detection {
    std::string detection_id;
    std::string sequence_id;
    int frame_index = 0;
    BBox bbox;
    std::optional<GrayImage> patch;
    std::string patch_ref;
    std::optional<Descriptor> descriptor;
    std::optional<std::string> true_identity;

    friend bool operator==(const Detection&, const Detection&) = default;
};

enum class DatasetRole { Unspecified, Training, Evaluation };

struct Dataset {
    DatasetRole role = DatasetRole::Unspecified;
    std::optional<std::size_t> descriptor_dim;
    std::vector<SequenceRecord> sequences;
    std::vector<FaceSet> face_sets;
    std::vector<Detection> detections;

    const FaceSet* find_set(const std::string& set_id) const {
        for (const auto& fs : face_sets)
            if (fs.set_id == set_id) return &fs;
        return nullptr;
    }

    std::vector<std::string> set_ids() const {
        std::vector<std::string> ids;
        ids.reserve(face_sets.size());
        for (const auto& fs : face_sets) ids.push_back(fs.set_id);
        return ids;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Ground-truth identity per face-set id.
using IdentityLabels = std::map<std::string, std::string>;

enum class ViolationKind {
    InvalidBBox,
    MissingAppearance,
    DescriptorDimension,
    EmptyFaceSet,
    SequenceMismatch,
    DuplicateExampleId,
    DuplicateSetId,
    DuplicateSequenceId,
    MixedIdentity,
    NegativeFrameIndex,
    FrameOutOfRange,
    InvalidFrameCount,
    DuplicateSetReference,
    DanglingSetReference,
    UnlistedFaceSet,
};

struct Violation {
    ViolationKind kind;
    std::string subject; // offending identifier
    std::string message;
};

using ValidationReport = std::vector<Violation>;

struct ValidationOptions {
    /// Examples must carry a patch or a descriptor. Turned off when scores come from a precomputed table.
    bool require_appearance = true;
};

/// Reports every invariant breach; an empty report means the dataset is valid.
inline ValidationReport validate_dataset(const Dataset& ds, const ValidationOptions& opts = {}) {
    ValidationReport report;
    auto add = [&](ViolationKind k, const std::string& subject, std::string msg) {
        report.push_back({k, subject, std::move(msg)});
    };

    std::map<std::string, const SequenceRecord*> sequences;
    for (const auto& seq : ds.sequences) {
        if (!sequences.emplace(seq.sequence_id, &seq).second)
            add(ViolationKind::DuplicateSequenceId, seq.sequence_id, "sequence id appears more than once");
        if (seq.frame_count <= 0)
            add(ViolationKind::InvalidFrameCount, seq.sequence_id, "frame_count must be positive");
    }

    std::optional<std::size_t> dim = ds.descriptor_dim;
    std::set<std::string> set_ids;
    std::set<std::string> example_ids;
    for (const auto& fs : ds.face_sets) {
        if (!set_ids.insert(fs.set_id).second)
            add(ViolationKind::DuplicateSetId, fs.set_id, "set id is not globally unique");
        if (fs.examples.empty()) add(ViolationKind::EmptyFaceSet, fs.set_id, "face-set has no examples");

        const SequenceRecord* seq = nullptr;
        if (auto it = sequences.find(fs.sequence_id); it != sequences.end()) seq = it->second;

        std::optional<std::string> identity;
        bool mixed = false;
        for (const auto& ex : fs.examples) {
            if (!example_ids.insert(ex.example_id).second)
                add(ViolationKind::DuplicateExampleId, ex.example_id, "example id is not unique");
            if (ex.sequence_id != fs.sequence_id)
                add(ViolationKind::SequenceMismatch, fs.set_id,
                    "example " + ex.example_id + " belongs to sequence " + ex.sequence_id + ", set belongs to " +
                        fs.sequence_id);
            if (ex.bbox.width <= 0 || ex.bbox.height <= 0)
                add(ViolationKind::InvalidBBox, ex.example_id, "bounding box must have positive width and height");
            if (ex.frame_index < 0) add(ViolationKind::NegativeFrameIndex, ex.example_id, "negative frame index");
            else if (seq && seq->frame_count > 0 && ex.frame_index >= seq->frame_count)
                add(ViolationKind::FrameOutOfRange, ex.example_id, "frame index beyond sequence frame_count");
            if (opts.require_appearance && !ex.has_appearance())
                add(ViolationKind::MissingAppearance, ex.example_id, "example has neither patch nor descriptor");
            if (ex.descriptor) {
                if (!dim) dim = ex.descriptor->size();
                else if (ex.descriptor->size() != *dim)
                    add(ViolationKind::DescriptorDimension, ex.example_id,
                        "descriptor has " + std::to_string(ex.descriptor->size()) + " dimensions, expected " +
                            std::to_string(*dim));
            }
            if (ex.true_identity) {
                if (!identity) identity = ex.true_identity;
                else if (*identity != *ex.true_identity) mixed = true;
            }
        }
        if (mixed) add(ViolationKind::MixedIdentity, fs.set_id, "face-set mixes identity labels");
    }

    // (set_id, sequence_id) of every face-set, duplicates included
    std::set<std::pair<std::string, std::string>> owners;
    std::set<std::string> known;
    for (const auto& fs : ds.face_sets) {
        owners.emplace(fs.set_id, fs.sequence_id);
        known.insert(fs.set_id);
    }
    std::set<std::pair<std::string, std::string>> listed;
    for (const auto& seq : ds.sequences) {
        std::set<std::string> seen;
        for (const auto& id : seq.face_set_ids) {
            if (!seen.insert(id).second)
                add(ViolationKind::DuplicateSetReference, seq.sequence_id, "face-set " + id + " listed twice");
            if (!known.contains(id)) {
                add(ViolationKind::DanglingSetReference, seq.sequence_id, "references unknown face-set " + id);
            } else if (!owners.contains({id, seq.sequence_id})) {
                add(ViolationKind::SequenceMismatch, id, "listed under sequence " + seq.sequence_id);
            }
            listed.emplace(id, seq.sequence_id);
        }
    }
    for (const auto& fs : ds.face_sets) {
        if (!listed.contains({fs.set_id, fs.sequence_id}))
            add(ViolationKind::UnlistedFaceSet, fs.set_id, "face-set is not listed by sequence " + fs.sequence_id);
    }
    return report;
}

/// Identity per face-set, read from the examples' ground-truth labels. Sets without labels are omitted.
inline IdentityLabels identities_from_examples(const Dataset& ds) {
    IdentityLabels labels;
    for (const auto& fs : ds.face_sets) {
        for (const auto& ex : fs.examples) {
            if (ex.true_identity) {
                labels.emplace(fs.set_id, *ex.true_identity);
                break;
            }
        }
    }
    return labels;
}

} // namespace fdisc
