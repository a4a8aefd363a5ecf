#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "fdisc/core.hpp"
#include "fdisc/dissimilarity.hpp"
#include "fdisc/error.hpp"

namespace fdisc {

enum class Linkage { Single, Complete, Average };

/// One merge of the agglomeration. Leaves are clusters 0..N-1; the merge at
/// step s creates cluster N + s.
struct MergeStep {
    std::size_t step_index = 0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::size_t merged_id = 0;
    double height = 0.0;

    friend bool operator==(const MergeStep&, const MergeStep&) = default;
};

struct Dendrogram {
    std::vector<MergeStep> steps;
    std::vector<std::string> leaf_ids;
};

struct ClusterAssignment {
    std::vector<std::string> set_ids; // leaf order
    std::vector<int> by_index;        // label of set_ids[i]
    int num_clusters = 0;

    std::map<std::string, int> labels() const {
        std::map<std::string, int> out;
        for (std::size_t i = 0; i < set_ids.size(); ++i) out.emplace(set_ids[i], by_index[i]);
        return out;
    }
};

struct ClusteringResult {
    Dendrogram dendrogram;
    ClusterAssignment assignment;
};

namespace detail {

struct DisjointSets {
    std::vector<std::size_t> parent;
    explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

/// Labels numbered by first appearance in leaf order.
inline ClusterAssignment assignment_from_roots(const std::vector<std::string>& ids, DisjointSets& ds) {
    ClusterAssignment a;
    a.set_ids = ids;
    a.by_index.resize(ids.size());
    std::map<std::size_t, int> label_of_root;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto [it, inserted] = label_of_root.emplace(ds.find(i), static_cast<int>(label_of_root.size()));
        a.by_index[i] = it->second;
    }
    a.num_clusters = static_cast<int>(label_of_root.size());
    return a;
}

} // namespace detail

inline void check_dissimilarity(const DissimilarityMatrix& d) {
    const std::size_t n = d.order();
    if (d.values.size() != n * n) throw Error(Errc::InvalidMatrix, "value count does not match order");
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t k = 0; k < n; ++k) {
            const double v = d.at(m, k);
            if (std::isnan(v)) throw Error(Errc::InvalidMatrix, "NaN entry");
            if (v < 0.0) throw Error(Errc::InvalidMatrix, "negative entry at (" + d.set_ids[m] + ", " + d.set_ids[k] + ")");
            if (v != d.at(k, m))
                throw Error(Errc::InvalidMatrix, "asymmetric entry at (" + d.set_ids[m] + ", " + d.set_ids[k] + ")");
        }
    }
}

/// Partition obtained by applying the merges of `dendrogram` up to (not
/// including) the first one whose height exceeds `theta`. Merge heights are
/// non-decreasing for the supported linkages, so this is the cut at `theta`.
inline ClusterAssignment cut_dendrogram(const Dendrogram& dendrogram, double theta) {
    const std::size_t n = dendrogram.leaf_ids.size();
    detail::DisjointSets ds(n);
    std::vector<std::size_t> representative(n + dendrogram.steps.size());
    std::iota(representative.begin(), representative.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
    for (const auto& step : dendrogram.steps) {
        representative[step.merged_id] = representative[step.left];
        if (step.height > theta) break;
        ds.unite(representative[step.left], representative[step.right]);
    }
    return detail::assignment_from_roots(dendrogram.leaf_ids, ds);
}

/// Greedy bottom-up merging on the minimum linkage dissimilarity.
///
/// Ties on the minimum go to the pair with the lexicographically smallest
/// (min cluster id, max cluster id). The full dendrogram is always built; the
/// assignment stops merging as soon as the minimum linkage exceeds `theta`.
inline ClusteringResult agglomerative_cluster(const DissimilarityMatrix& d, Linkage linkage, double theta) {
    check_dissimilarity(d);
    if (!(theta >= 0.0)) throw Error(Errc::InvalidConfig, "theta must be non-negative");
    const std::size_t n = d.order();

    ClusteringResult result;
    result.dendrogram.leaf_ids = d.set_ids;
    if (n == 0) {
        result.assignment.num_clusters = 0;
        return result;
    }

    // Slot-indexed working state. For average linkage `link` holds the sum of
    // leaf-pair dissimilarities, for single/complete the min/max.
    std::vector<double> link = d.values;
    std::vector<std::size_t> cluster_id(n), size(n, 1);
    std::iota(cluster_id.begin(), cluster_id.end(), std::size_t{0});
    std::vector<bool> active(n, true);

    auto value = [&](std::size_t a, std::size_t b) {
        const double v = link[a * n + b];
        return linkage == Linkage::Average ? v / static_cast<double>(size[a] * size[b]) : v;
    };

    detail::DisjointSets stop_early(n);
    std::vector<std::size_t> leaf_of_slot(n);
    std::iota(leaf_of_slot.begin(), leaf_of_slot.end(), std::size_t{0});
    bool stopped = false;

    for (std::size_t step = 0; step + 1 < n; ++step) {
        double best = std::numeric_limits<double>::infinity();
        std::pair<std::size_t, std::size_t> best_ids{n * 2, n * 2};
        std::size_t sa = 0, sb = 0;
        for (std::size_t a = 0; a < n; ++a) {
            if (!active[a]) continue;
            for (std::size_t b = a + 1; b < n; ++b) {
                if (!active[b]) continue;
                const double v = value(a, b);
                const std::pair<std::size_t, std::size_t> ids{std::min(cluster_id[a], cluster_id[b]),
                                                              std::max(cluster_id[a], cluster_id[b])};
                if (v < best || (v == best && ids < best_ids)) {
                    best = v;
                    best_ids = ids;
                    sa = a;
                    sb = b;
                }
            }
        }
        if (cluster_id[sa] > cluster_id[sb]) std::swap(sa, sb);

        const std::size_t merged = n + step;
        result.dendrogram.steps.push_back({step, cluster_id[sa], cluster_id[sb], merged, best});
        if (!stopped && best > theta) stopped = true;
        if (!stopped) stop_early.unite(leaf_of_slot[sa], leaf_of_slot[sb]);

        // merged cluster lives in slot sa
        for (std::size_t k = 0; k < n; ++k) {
            if (!active[k] || k == sa || k == sb) continue;
            double v = 0.0;
            switch (linkage) {
            case Linkage::Single: v = std::min(link[sa * n + k], link[sb * n + k]); break;
            case Linkage::Complete: v = std::max(link[sa * n + k], link[sb * n + k]); break;
            case Linkage::Average: v = link[sa * n + k] + link[sb * n + k]; break;
            }
            link[sa * n + k] = v;
            link[k * n + sa] = v;
        }
        active[sb] = false;
        size[sa] += size[sb];
        cluster_id[sa] = merged;
    }

    result.assignment = detail::assignment_from_roots(d.set_ids, stop_early);
    return result;
}

/// Euclidean distances between face-set mean descriptors (mean-descriptor baseline).
inline DissimilarityMatrix mean_descriptor_matrix(const Dataset& ds) {
    const std::size_t n = ds.face_sets.size();
    std::vector<Descriptor> means;
    means.reserve(n);
    std::optional<std::size_t> dim;
    for (const auto& fs : ds.face_sets) {
        if (fs.examples.empty()) throw Error(Errc::InvalidDataset, "face-set " + fs.set_id + " is empty");
        Descriptor mean;
        for (const auto& ex : fs.examples) {
            if (!ex.descriptor) throw Error(Errc::MissingDescriptor, "example " + ex.example_id + " has no descriptor");
            if (!dim) dim = ex.descriptor->size();
            if (ex.descriptor->size() != *dim)
                throw Error(Errc::DimensionMismatch, "example " + ex.example_id + " descriptor size differs");
            if (mean.empty()) mean.assign(*dim, 0.0);
            for (std::size_t i = 0; i < *dim; ++i) mean[i] += (*ex.descriptor)[i];
        }
        for (double& v : mean) v /= static_cast<double>(fs.examples.size());
        means.push_back(std::move(mean));
    }

    DissimilarityMatrix d(ds.set_ids());
    for (std::size_t m = 0; m < n; ++m) {
        for (std::size_t k = m + 1; k < n; ++k) {
            double sq = 0.0;
            for (std::size_t i = 0; i < means[m].size(); ++i) {
                const double diff = means[m][i] - means[k][i];
                sq += diff * diff;
            }
            d.set_symmetric(m, k, std::sqrt(sq));
        }
    }
    return d;
}

} // namespace fdisc
