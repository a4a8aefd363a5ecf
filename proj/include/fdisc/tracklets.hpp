#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "fdisc/core.hpp"
#include "fdisc/matching.hpp"

namespace fdisc {

/// Detections of one face linked across frames, ordered by frame index.
struct Tracklet {
    std::vector<Detection> detections;
    double confidence = 0.0; // fraction of the sequence's frames covered

    int first_frame() const { return detections.front().frame_index; }
    int last_frame() const { return detections.back().frame_index; }
};

struct TrackerConfig {
    int max_gap = 2;
    double iou_min = 0.3;
    double sim_min = 0.7;
    double overlap_min = 0.5;
    double min_face_frame_ratio = 0.5;
};

/// Appearance similarity of two detections, 0 when it cannot be evaluated.
inline double appearance_similarity(const Detection& a, const Detection& b, const Matcher* matcher) {
    if (!matcher) return 0.0;
    const bool comparable = (a.descriptor && b.descriptor) || (a.patch && b.patch);
    if (!comparable) return 0.0;
    FaceExample ea{a.detection_id, a.sequence_id, a.frame_index, a.bbox, a.patch, {}, a.descriptor, {}};
    FaceExample eb{b.detection_id, b.sequence_id, b.frame_index, b.bbox, b.patch, {}, b.descriptor, {}};
    try {
        return matcher->operator()(ea, eb);
    } catch (const Error&) {
        return 0.0;
    }
}

/// Greedy frame-to-frame linking.
///
/// Frames are processed in order, detections within a frame by ascending x.
/// A detection joins the best tracklet whose last detection is at most
/// `max_gap` frames back and either overlaps it with IoU >= iou_min or looks
/// alike with similarity >= sim_min; the link score is the larger of the two.
/// Ties go to the longest tracklet, then the oldest. Unmatched detections
/// start new tracklets. A tracklet takes at most one detection per frame.
inline std::vector<Tracklet> link_detections(const std::vector<std::vector<Detection>>& frames,
                                             const TrackerConfig& cfg, const Matcher* matcher = nullptr) {
    std::vector<Tracklet> tracks;
    for (std::size_t f = 0; f < frames.size(); ++f) {
        std::vector<Detection> dets = frames[f];
        for (auto& d : dets) d.frame_index = static_cast<int>(f);
        std::stable_sort(dets.begin(), dets.end(),
                         [](const Detection& a, const Detection& b) { return a.bbox.x < b.bbox.x; });

        for (const auto& det : dets) {
            std::optional<std::size_t> best;
            double best_score = -1.0;
            for (std::size_t t = 0; t < tracks.size(); ++t) {
                const Detection& last = tracks[t].detections.back();
                if (last.frame_index >= det.frame_index) continue; // already extended in this frame
                const int gap = det.frame_index - last.frame_index - 1;
                if (gap > cfg.max_gap) continue;
                const double iou = intersection_over_union(last.bbox, det.bbox);
                const double sim = iou >= cfg.iou_min ? 0.0 : appearance_similarity(last, det, matcher);
                if (iou < cfg.iou_min && sim < cfg.sim_min) continue;
                const double score = std::max(iou, sim);
                if (!best || score > best_score ||
                    (score == best_score && tracks[t].detections.size() > tracks[*best].detections.size())) {
                    best = t;
                    best_score = score;
                }
            }
            if (best) {
                tracks[*best].detections.push_back(det);
            } else {
                tracks.push_back(Tracklet{{det}, 0.0});
            }
        }
    }
    const double frame_count = static_cast<double>(std::max<std::size_t>(frames.size(), 1));
    for (auto& t : tracks) t.confidence = static_cast<double>(t.detections.size()) / frame_count;
    return tracks;
}

/// Mean IoU over the frames both tracklets cover; 0 without shared frames.
inline double shared_frame_overlap(const Tracklet& a, const Tracklet& b) {
    std::map<int, const BBox*> boxes;
    for (const auto& d : a.detections) boxes.emplace(d.frame_index, &d.bbox);
    double sum = 0.0;
    int shared = 0;
    for (const auto& d : b.detections) {
        if (auto it = boxes.find(d.frame_index); it != boxes.end()) {
            sum += intersection_over_union(*it->second, d.bbox);
            ++shared;
        }
    }
    return shared == 0 ? 0.0 : sum / shared;
}

/// Groups overlapping tracklets into bags and keeps one prototype per bag.
///
/// Tracklets whose shared-frame mean IoU reaches `overlap_min` end up in the
/// same bag (transitively). The prototype is the bag's highest-confidence
/// tracklet, earliest start on ties; its detections become the examples of a
/// face-set named `<sequence_id>_fs<k>`.
inline std::vector<FaceSet> bag_and_prototype(const std::vector<Tracklet>& tracklets, double overlap_min,
                                              const std::string& sequence_id) {
    const std::size_t n = tracklets.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (shared_frame_overlap(tracklets[i], tracklets[j]) >= overlap_min) {
                const auto a = find(i), b = find(j);
                parent[std::max(a, b)] = std::min(a, b);
            }

    std::map<std::size_t, std::size_t> prototype_of_root; // ordered by smallest member index
    for (std::size_t i = 0; i < n; ++i) {
        const auto root = find(i);
        auto [it, inserted] = prototype_of_root.emplace(root, i);
        if (inserted) continue;
        const Tracklet& cur = tracklets[it->second];
        const Tracklet& cand = tracklets[i];
        if (cand.confidence > cur.confidence ||
            (cand.confidence == cur.confidence && cand.first_frame() < cur.first_frame()))
            it->second = i;
    }

    std::vector<FaceSet> sets;
    std::size_t k = 0;
    for (const auto& [root, proto] : prototype_of_root) {
        FaceSet fs;
        fs.set_id = sequence_id + "_fs" + std::to_string(k++);
        fs.sequence_id = sequence_id;
        std::size_t e = 0;
        for (const auto& d : tracklets[proto].detections) {
            FaceExample ex;
            ex.example_id = d.detection_id.empty() ? fs.set_id + "_e" + std::to_string(e) : d.detection_id;
            ex.sequence_id = sequence_id;
            ex.frame_index = d.frame_index;
            ex.bbox = d.bbox;
            ex.patch = d.patch;
            ex.patch_ref = d.patch_ref;
            ex.descriptor = d.descriptor;
            ex.true_identity = d.true_identity;
            fs.examples.push_back(std::move(ex));
            ++e;
        }
        sets.push_back(std::move(fs));
    }
    return sets;
}

/// Face-sets of one sequence. Sequences where the fraction of frames with at
/// least one detection is below `min_face_frame_ratio` yield no face-sets.
inline std::vector<FaceSet> track_sequence(const std::string& sequence_id, int frame_count,
                                           const std::vector<Detection>& detections, const TrackerConfig& cfg,
                                           const Matcher* matcher = nullptr) {
    if (frame_count <= 0) return {};
    std::vector<std::vector<Detection>> frames(static_cast<std::size_t>(frame_count));
    for (const auto& d : detections) {
        if (d.frame_index < 0 || d.frame_index >= frame_count) continue;
        frames[static_cast<std::size_t>(d.frame_index)].push_back(d);
    }
    const auto with_faces = std::count_if(frames.begin(), frames.end(), [](const auto& f) { return !f.empty(); });
    if (static_cast<double>(with_faces) / frame_count < cfg.min_face_frame_ratio) return {};
    return bag_and_prototype(link_detections(frames, cfg, matcher), cfg.overlap_min, sequence_id);
}

/// Rebuilds the face-sets of every sequence from the dataset's detections.
inline Dataset track_dataset(const Dataset& in, const TrackerConfig& cfg, const Matcher* matcher = nullptr) {
    Dataset out = in;
    out.face_sets.clear();
    std::map<std::string, std::vector<Detection>> by_sequence;
    for (const auto& d : in.detections) by_sequence[d.sequence_id].push_back(d);
    for (auto& seq : out.sequences) {
        seq.face_set_ids.clear();
        auto sets = track_sequence(seq.sequence_id, seq.frame_count, by_sequence[seq.sequence_id], cfg, matcher);
        for (auto& fs : sets) {
            seq.face_set_ids.push_back(fs.set_id);
            out.face_sets.push_back(std::move(fs));
        }
    }
    return out;
}

} // namespace fdisc
