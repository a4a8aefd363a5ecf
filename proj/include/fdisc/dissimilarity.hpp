#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fdisc/core.hpp"
#include "fdisc/error.hpp"
#include "fdisc/log.hpp"
#include "fdisc/matching.hpp"
#include "fdisc/parallel.hpp"
#include "fdisc/stats.hpp"

namespace fdisc {

enum class ScoreKind { Self, Cross };

/// Pairwise example similarities: within one face-set (Self) or between two (Cross).
struct ScoreMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;
    ScoreKind kind = ScoreKind::Cross;

    double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }

    /// Entries entering the median: the strict upper triangle for Self, everything for Cross.
    std::vector<double> statistic_entries() const {
        std::vector<double> out;
        if (kind == ScoreKind::Self) {
            out.reserve(rows * (rows - (rows > 0 ? 1 : 0)) / 2);
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t k = i + 1; k < cols; ++k) out.push_back(at(i, k));
        } else {
            out = values;
        }
        return out;
    }
};

/// Median similarity of a score matrix (phi).
struct SimilaritySummary {
    double phi = 1.0;
};

/// Self similarity of a singleton face-set, which has no example pairs.
inline constexpr double kSingletonPhi = 1.0;

inline ScoreMatrix self_score_matrix(const FaceSet& r, const Matcher& matcher) {
    const std::size_t n = r.length();
    ScoreMatrix m{n, n, std::vector<double>(n * n, 1.0), ScoreKind::Self};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = i + 1; k < n; ++k) {
            const double s = matcher(r.examples[i], r.examples[k]);
            m.at(i, k) = s;
            m.at(k, i) = s;
        }
    }
    return m;
}

inline ScoreMatrix cross_score_matrix(const FaceSet& r, const FaceSet& t, const Matcher& matcher) {
    ScoreMatrix m{r.length(), t.length(), std::vector<double>(r.length() * t.length()), ScoreKind::Cross};
    for (std::size_t i = 0; i < r.length(); ++i)
        for (std::size_t j = 0; j < t.length(); ++j) m.at(i, j) = matcher(r.examples[i], t.examples[j]);
    return m;
}

inline SimilaritySummary summarize(const ScoreMatrix& m, const std::string& subject = {}) {
    if (auto phi = median(m.statistic_entries())) return {*phi};
    if (m.kind == ScoreKind::Self) {
        log::warn("singleton face-set " + subject + ": self similarity taken as 1.0");
        return {kSingletonPhi};
    }
    throw Error(Errc::InvalidDataset, "empty cross score matrix for " + subject);
}

/// phi^R: median over distinct example pairs inside R.
inline SimilaritySummary self_similarity_summary(const FaceSet& r, const Matcher& matcher) {
    return summarize(self_score_matrix(r, matcher), r.set_id);
}

/// phi^T: median over all l(R) * l(T) cross scores.
inline SimilaritySummary cross_similarity_summary(const FaceSet& r, const FaceSet& t, const Matcher& matcher) {
    return summarize(cross_score_matrix(r, t, matcher), r.set_id + "/" + t.set_id);
}

/// |phi_ref - phi_cross|, the one-directional dissimilarity with `ref` as reference.
inline double directional_dissimilarity(const SimilaritySummary& ref, const SimilaritySummary& cross) {
    return std::fabs(ref.phi - cross.phi);
}

/// Combines both reference directions: (|phi^R - phi^X| + |phi^T - phi^X|) / 2.
inline double symmetrized_dissimilarity(double phi_r, double phi_t, double phi_cross) {
    return (std::fabs(phi_r - phi_cross) + std::fabs(phi_t - phi_cross)) / 2.0;
}

/// Face-set dissimilarity, symmetrized over the choice of reference set. Result in [0, 1].
///
/// The cross median is taken once: S^T for T as reference is the transpose of
/// S^T for R as reference, and the median does not depend on orientation.
inline double face_set_dissimilarity(const FaceSet& r, const FaceSet& t, const Matcher& matcher) {
    const double phi_r = self_similarity_summary(r, matcher).phi;
    const double phi_t = self_similarity_summary(t, matcher).phi;
    const double phi_x = cross_similarity_summary(r, t, matcher).phi;
    return symmetrized_dissimilarity(phi_r, phi_t, phi_x);
}

/// Square symmetric matrix over face-sets, indexed like `set_ids`.
struct DissimilarityMatrix {
    std::vector<std::string> set_ids;
    std::vector<double> values;

    DissimilarityMatrix() = default;
    explicit DissimilarityMatrix(std::vector<std::string> ids)
        : set_ids(std::move(ids)), values(set_ids.size() * set_ids.size(), 0.0) {}

    std::size_t order() const noexcept { return set_ids.size(); }
    double at(std::size_t m, std::size_t n) const { return values[m * order() + n]; }
    double& at(std::size_t m, std::size_t n) { return values[m * order() + n]; }

    void set_symmetric(std::size_t m, std::size_t n, double v) {
        at(m, n) = v;
        at(n, m) = v;
    }

    double max_value() const {
        double mx = 0.0;
        for (double v : values) mx = std::max(mx, v);
        return mx;
    }
};

/// c_mn = 1 when face-sets m and n were extracted from the same sequence.
class ConstraintMatrix {
public:
    ConstraintMatrix() = default;
    explicit ConstraintMatrix(std::size_t n) : order_(n), flags_(n * n, 0) {}

    std::size_t order() const noexcept { return order_; }
    std::uint8_t at(std::size_t m, std::size_t n) const { return flags_[m * order_ + n]; }

    void set_symmetric(std::size_t m, std::size_t n, std::uint8_t v) {
        flags_[m * order_ + n] = v;
        flags_[n * order_ + m] = v;
    }

    std::size_t constrained_pairs() const {
        std::size_t c = 0;
        for (std::size_t m = 0; m < order_; ++m)
            for (std::size_t n = m + 1; n < order_; ++n) c += at(m, n);
        return c;
    }

private:
    std::size_t order_ = 0;
    std::vector<std::uint8_t> flags_;
};

inline ConstraintMatrix build_constraint_matrix(const Dataset& ds) {
    const std::size_t n = ds.face_sets.size();
    ConstraintMatrix c(n);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = m + 1; k < n; ++k)
            if (ds.face_sets[m].sequence_id == ds.face_sets[k].sequence_id) c.set_symmetric(m, k, 1);
    return c;
}

/// N x N dissimilarity over all face-sets of the dataset. The result is
/// assembled by index, so it does not depend on `workers`.
inline DissimilarityMatrix build_dissimilarity_matrix(const Dataset& ds, const Matcher& matcher,
                                                      unsigned workers = 1) {
    const std::size_t n = ds.face_sets.size();
    if (n < 2) throw Error(Errc::InvalidDataset, "dissimilarity matrix needs at least two face-sets");

    std::vector<double> phi(n);
    parallel_for(n, workers, [&](std::size_t i) { phi[i] = self_similarity_summary(ds.face_sets[i], matcher).phi; });

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    pairs.reserve(n * (n - 1) / 2);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t k = m + 1; k < n; ++k) pairs.emplace_back(m, k);

    DissimilarityMatrix d(ds.set_ids());
    parallel_for(pairs.size(), workers, [&](std::size_t p) {
        const auto [m, k] = pairs[p];
        const double phi_x = cross_similarity_summary(ds.face_sets[m], ds.face_sets[k], matcher).phi;
        d.set_symmetric(m, k, symmetrized_dissimilarity(phi[m], phi[k], phi_x));
    });
    return d;
}

enum class ConstraintMode { Weight, HardMax };

/// Value forced onto constrained pairs in hard_max mode: twice the similarity range maximum.
inline constexpr double kHardMaxSentinel = 2.0;

/// Weight mode multiplies each entry by c_mn + 1; hard_max mode sets constrained entries to the sentinel.
/// Unconstrained entries are copied untouched.
inline DissimilarityMatrix apply_constraints(const DissimilarityMatrix& d, const ConstraintMatrix& c,
                                             ConstraintMode mode) {
    if (d.order() != c.order())
        throw Error(Errc::OrderMismatch, "dissimilarity order " + std::to_string(d.order()) +
                                             " vs constraint order " + std::to_string(c.order()));
    DissimilarityMatrix out = d;
    const std::size_t n = d.order();
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t k = 0; k < n; ++k) {
            if (m == k || c.at(m, k) == 0) continue;
            const double w = static_cast<double>(c.at(m, k)) + 1.0;
            out.at(m, k) = mode == ConstraintMode::Weight ? d.at(m, k) * w : kHardMaxSentinel;
        }
    }
    return out;
}

} // namespace fdisc
