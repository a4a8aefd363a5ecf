#pragma once

#include <string>
#include <vector>

#include "fdisc/core.hpp"
#include "fdisc/dissimilarity.hpp"
#include "fdisc/error.hpp"
#include "fdisc/parallel.hpp"
#include "fdisc/stats.hpp"

namespace fdisc {

/// A labelled pair of distinct face-sets from a training dataset.
struct CalibrationSample {
    const FaceSet* set_a = nullptr;
    const FaceSet* set_b = nullptr;
    bool same_person = false;
};

struct CalibrationResult {
    double theta = 0.0;
    std::vector<double> delta_s_values; // same-person dissimilarities, sample order
    std::vector<double> delta_d_values; // different-person dissimilarities, sample order
    double median_d = 0.0;              // diagnostic; 0 when there are no different-person samples
};

/// All labelled pairs among the face-sets of `ds` that carry an identity.
/// Pointers refer into `ds`, which must outlive the samples.
inline std::vector<CalibrationSample> make_calibration_samples(const Dataset& ds, const IdentityLabels& truth) {
    std::vector<CalibrationSample> samples;
    for (std::size_t m = 0; m < ds.face_sets.size(); ++m) {
        const auto im = truth.find(ds.face_sets[m].set_id);
        if (im == truth.end()) continue;
        for (std::size_t k = m + 1; k < ds.face_sets.size(); ++k) {
            const auto ik = truth.find(ds.face_sets[k].set_id);
            if (ik == truth.end()) continue;
            samples.push_back({&ds.face_sets[m], &ds.face_sets[k], im->second == ik->second});
        }
    }
    return samples;
}

/// Cut-off threshold: the median of the same-person dissimilarities.
inline CalibrationResult calibrate_from_deltas(std::vector<double> delta_s, std::vector<double> delta_d) {
    CalibrationResult r;
    const auto theta = median(delta_s);
    if (!theta) throw Error(Errc::NoPositiveSamples, "calibration needs at least one same-person pair");
    r.theta = *theta;
    r.median_d = median(delta_d).value_or(0.0);
    r.delta_s_values = std::move(delta_s);
    r.delta_d_values = std::move(delta_d);
    return r;
}

inline CalibrationResult calibrate_threshold(const std::vector<CalibrationSample>& samples, const Matcher& matcher,
                                             unsigned workers = 1) {
    bool any_positive = false;
    for (const auto& s : samples) {
        if (!s.set_a || !s.set_b) throw Error(Errc::InvalidConfig, "calibration sample without face-sets");
        if (s.set_a == s.set_b || s.set_a->set_id == s.set_b->set_id)
            throw Error(Errc::InvalidConfig, "calibration sample pairs face-set " + s.set_a->set_id + " with itself");
        any_positive = any_positive || s.same_person;
    }
    if (!any_positive) throw Error(Errc::NoPositiveSamples, "calibration needs at least one same-person pair");

    std::vector<double> delta(samples.size());
    parallel_for(samples.size(), workers, [&](std::size_t i) {
        delta[i] = face_set_dissimilarity(*samples[i].set_a, *samples[i].set_b, matcher);
    });

    std::vector<double> delta_s, delta_d;
    for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].same_person ? delta_s : delta_d).push_back(delta[i]);
    return calibrate_from_deltas(std::move(delta_s), std::move(delta_d));
}

/// Same procedure applied to an already computed dissimilarity matrix, used
/// for baselines whose dissimilarity is not face_set_dissimilarity.
inline CalibrationResult calibrate_from_matrix(const DissimilarityMatrix& d, const IdentityLabels& truth) {
    std::vector<double> delta_s, delta_d;
    for (std::size_t m = 0; m < d.order(); ++m) {
        const auto im = truth.find(d.set_ids[m]);
        if (im == truth.end()) continue;
        for (std::size_t k = m + 1; k < d.order(); ++k) {
            const auto ik = truth.find(d.set_ids[k]);
            if (ik == truth.end()) continue;
            (im->second == ik->second ? delta_s : delta_d).push_back(d.at(m, k));
        }
    }
    return calibrate_from_deltas(std::move(delta_s), std::move(delta_d));
}

} // namespace fdisc
