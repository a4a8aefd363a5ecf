#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fdisc/clustering.hpp"
#include "fdisc/core.hpp"
#include "fdisc/error.hpp"

namespace fdisc {

/// counts[i][j]: items of true class i assigned to predicted cluster j.
struct ContingencyTable {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint64_t> counts;
    std::vector<std::uint64_t> row_sums;
    std::vector<std::uint64_t> col_sums;
    std::uint64_t total = 0;

    std::uint64_t at(std::size_t i, std::size_t j) const { return counts[i * cols + j]; }
};

/// Builds the table from two parallel label sequences. Classes and clusters
/// are indexed in order of their sorted label values.
template <class TruthLabel, class PredLabel>
ContingencyTable contingency_table(const std::vector<TruthLabel>& truth, const std::vector<PredLabel>& predicted) {
    if (truth.size() != predicted.size())
        throw Error(Errc::LabelUniverseMismatch, std::to_string(truth.size()) + " truth labels vs " +
                                                     std::to_string(predicted.size()) + " predicted labels");
    std::map<TruthLabel, std::size_t> row_index;
    std::map<PredLabel, std::size_t> col_index;
    for (const auto& t : truth) row_index.emplace(t, 0);
    for (const auto& p : predicted) col_index.emplace(p, 0);
    std::size_t r = 0, c = 0;
    for (auto& [label, idx] : row_index) idx = r++;
    for (auto& [label, idx] : col_index) idx = c++;

    ContingencyTable t;
    t.rows = row_index.size();
    t.cols = col_index.size();
    t.counts.assign(t.rows * t.cols, 0);
    t.row_sums.assign(t.rows, 0);
    t.col_sums.assign(t.cols, 0);
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const std::size_t i = row_index[truth[k]];
        const std::size_t j = col_index[predicted[k]];
        ++t.counts[i * t.cols + j];
        ++t.row_sums[i];
        ++t.col_sums[j];
    }
    t.total = truth.size();
    return t;
}

/// Table over the face-sets of `predicted`; every one of them needs a truth label and vice versa.
inline ContingencyTable contingency_table(const IdentityLabels& truth, const ClusterAssignment& predicted) {
    if (truth.size() != predicted.set_ids.size())
        throw Error(Errc::LabelUniverseMismatch, std::to_string(truth.size()) + " labelled face-sets vs " +
                                                     std::to_string(predicted.set_ids.size()) + " clustered");
    std::vector<std::string> t;
    t.reserve(truth.size());
    for (const auto& id : predicted.set_ids) {
        auto it = truth.find(id);
        if (it == truth.end()) throw Error(Errc::LabelUniverseMismatch, "face-set " + id + " has no truth label");
        t.push_back(it->second);
    }
    return contingency_table(t, predicted.by_index);
}

enum class NmiNormalization { Arithmetic, Geometric, Max };

inline std::string_view to_string(NmiNormalization n) {
    switch (n) {
    case NmiNormalization::Arithmetic: return "arithmetic";
    case NmiNormalization::Geometric: return "geometric";
    case NmiNormalization::Max: return "max";
    }
    return "arithmetic";
}

namespace detail {

inline bool is_relabeling(const ContingencyTable& t) {
    if (t.rows != t.cols) return false;
    for (std::size_t i = 0; i < t.rows; ++i) {
        std::size_t nonzero = 0;
        for (std::size_t j = 0; j < t.cols; ++j) nonzero += t.at(i, j) != 0;
        if (nonzero != 1) return false;
    }
    for (std::size_t j = 0; j < t.cols; ++j) {
        std::size_t nonzero = 0;
        for (std::size_t i = 0; i < t.rows; ++i) nonzero += t.at(i, j) != 0;
        if (nonzero != 1) return false;
    }
    return true;
}

inline double entropy(const std::vector<std::uint64_t>& sums, double total) {
    double h = 0.0;
    for (auto s : sums) {
        if (s == 0) continue;
        const double p = static_cast<double>(s) / total;
        h -= p * std::log(p);
    }
    return h;
}

} // namespace detail

/// Normalized mutual information in nats, in [0, 1].
///
/// Identical partitions (up to relabeling, including two single-cluster
/// partitions) give exactly 1. When exactly one side has zero entropy the
/// value is 0.
inline double nmi(const ContingencyTable& t, NmiNormalization norm = NmiNormalization::Arithmetic) {
    if (t.total == 0) throw Error(Errc::EmptyTable, "NMI of an empty contingency table");
    if (detail::is_relabeling(t)) return 1.0;

    const double n = static_cast<double>(t.total);
    const double hu = detail::entropy(t.row_sums, n);
    const double hv = detail::entropy(t.col_sums, n);
    if (hu == 0.0 || hv == 0.0) return 0.0;

    double mi = 0.0;
    for (std::size_t i = 0; i < t.rows; ++i) {
        for (std::size_t j = 0; j < t.cols; ++j) {
            const auto nij = t.at(i, j);
            if (nij == 0) continue;
            const double joint = static_cast<double>(nij);
            mi += joint / n *
                  std::log(joint * n / (static_cast<double>(t.row_sums[i]) * static_cast<double>(t.col_sums[j])));
        }
    }
    double denom = 0.0;
    switch (norm) {
    case NmiNormalization::Arithmetic: denom = 0.5 * (hu + hv); break;
    case NmiNormalization::Geometric: denom = std::sqrt(hu * hv); break;
    case NmiNormalization::Max: denom = std::max(hu, hv); break;
    }
    return std::clamp(mi / denom, 0.0, 1.0);
}

/// Adjusted Rand index over item pairs.
///
/// Evaluated as one ratio of exact integers,
/// (2*C(n,2)*Index - 2*A*B) / (C(n,2)*(A+B) - 2*A*B) with A, B the
/// per-class and per-cluster pair counts; correctly rounded while both
/// terms stay below 2^53.
inline double ari(const ContingencyTable& t) {
    if (t.total == 0) throw Error(Errc::EmptyTable, "ARI of an empty contingency table");
    if (t.total < 2) throw Error(Errc::FewerThanTwoItems, "ARI needs at least two items");

    using wide = __int128;
    auto comb2 = [](std::uint64_t x) -> wide { return static_cast<wide>(x) * (static_cast<wide>(x) - 1) / 2; };
    wide index = 0, sum_a = 0, sum_b = 0;
    for (auto c : t.counts) index += comb2(c);
    for (auto a : t.row_sums) sum_a += comb2(a);
    for (auto b : t.col_sums) sum_b += comb2(b);
    const wide pairs = comb2(t.total);

    const wide numerator = 2 * pairs * index - 2 * sum_a * sum_b;
    const wide denominator = pairs * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if (denominator == 0) return detail::is_relabeling(t) ? 1.0 : 0.0;
    constexpr wide exact_limit = wide{1} << 53;
    const auto magnitude = [](wide v) { return v < 0 ? -v : v; };
    if (magnitude(numerator) <= exact_limit && magnitude(denominator) <= exact_limit)
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    return static_cast<double>(static_cast<long double>(numerator) / static_cast<long double>(denominator));
}

} // namespace fdisc
