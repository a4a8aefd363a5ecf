#pragma once

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fdisc/core.hpp"
#include "fdisc/error.hpp"
#include "fdisc/image.hpp"

namespace fdisc {

enum class MatcherKind { QuadPatch, Descriptor, Precomputed };
enum class DescriptorMetric { CosineSim, InvEuclidean };

struct MatcherConfig {
    MatcherKind kind = MatcherKind::Descriptor;
    int patch_size = 64;
    int grid = 4;
    int search_radius = 4;
    DescriptorMetric descriptor_metric = DescriptorMetric::InvEuclidean;
    std::string score_table_path;

    void validate_geometry() const {
        if (grid <= 0) throw Error(Errc::InvalidConfig, "grid must be positive");
        if (patch_size <= 0 || patch_size % (2 * grid) != 0)
            throw Error(Errc::InvalidConfig, "patch_size must be a positive multiple of 2*grid");
        if (search_radius < 0) throw Error(Errc::InvalidConfig, "search_radius must be non-negative");
    }

    void validate() const {
        validate_geometry();
        if (kind == MatcherKind::Precomputed && score_table_path.empty())
            throw Error(Errc::InvalidConfig, "precomputed matcher needs a score table path");
    }
};

// ---------------------------------------------------------------------------
// Quadrant-patch matcher
//
// Both images are resampled to patch_size x patch_size and tiled into
// grid x grid patches. Every patch is split into four quadrants; each
// quadrant searches a +-search_radius window in the other image and keeps
// its best normalized cross-correlation, mapped from [-1,1] to [0,1].
// The image score is the mean over patches of the mean of their quadrant
// scores, averaged over both matching directions.
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr double kFlatVariance = 1e-9;
inline constexpr double kNeutralScore = 0.5;

/// Summed-area tables of values and squared values, (w+1) x (h+1).
struct IntegralImage {
    int width = 0;
    int height = 0;
    std::vector<double> sum;
    std::vector<double> sum_sq;

    explicit IntegralImage(const FloatImage& img)
        : width(img.width), height(img.height),
          sum(static_cast<std::size_t>(img.width + 1) * (img.height + 1), 0.0),
          sum_sq(sum.size(), 0.0) {
        const auto stride = static_cast<std::size_t>(width + 1);
        for (int y = 0; y < height; ++y) {
            double row = 0.0;
            double row_sq = 0.0;
            for (int x = 0; x < width; ++x) {
                const double v = img.at(x, y);
                row += v;
                row_sq += v * v;
                sum[(y + 1) * stride + x + 1] = sum[y * stride + x + 1] + row;
                sum_sq[(y + 1) * stride + x + 1] = sum_sq[y * stride + x + 1] + row_sq;
            }
        }
    }

    std::pair<double, double> window(int x, int y, int side) const {
        const auto stride = static_cast<std::size_t>(width + 1);
        auto box = [&](const std::vector<double>& t) {
            return t[(y + side) * stride + x + side] - t[y * stride + x + side] - t[(y + side) * stride + x] +
                   t[y * stride + x];
        };
        return {box(sum), box(sum_sq)};
    }
};

/// Displacements ordered by squared length, then (dy, dx); the first best wins ties.
inline std::vector<std::pair<int, int>> displacement_order(int radius) {
    std::vector<std::pair<int, int>> order;
    for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) order.emplace_back(dx, dy);
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        const int la = a.first * a.first + a.second * a.second;
        const int lb = b.first * b.first + b.second * b.second;
        if (la != lb) return la < lb;
        return std::pair(a.second, a.first) < std::pair(b.second, b.first);
    });
    return order;
}

inline double directional_quad_score(const FloatImage& ref, const FloatImage& target, const IntegralImage& target_sums,
                                     const MatcherConfig& cfg, const std::vector<std::pair<int, int>>& order) {
    const int patch = cfg.patch_size / cfg.grid;
    const int side = patch / 2;
    const double n = static_cast<double>(side) * side;
    const int max_origin = cfg.patch_size - side;

    double total = 0.0;
    int quadrants = 0;
    std::vector<double> centred(static_cast<std::size_t>(side) * side);
    for (int py = 0; py < cfg.grid; ++py) {
        for (int px = 0; px < cfg.grid; ++px) {
            for (int q = 0; q < 4; ++q) {
                const int ox = px * patch + (q % 2) * side;
                const int oy = py * patch + (q / 2) * side;

                double mean = 0.0;
                for (int y = 0; y < side; ++y)
                    for (int x = 0; x < side; ++x) mean += ref.at(ox + x, oy + y);
                mean /= n;
                double ref_var = 0.0;
                for (int y = 0; y < side; ++y) {
                    for (int x = 0; x < side; ++x) {
                        const double c = ref.at(ox + x, oy + y) - mean;
                        centred[static_cast<std::size_t>(y) * side + x] = c;
                        ref_var += c * c;
                    }
                }
                ++quadrants;
                if (ref_var <= kFlatVariance) {
                    total += kNeutralScore;
                    continue;
                }

                double best = -1.0;
                for (const auto& [dx, dy] : order) {
                    const int tx = ox + dx;
                    const int ty = oy + dy;
                    if (tx < 0 || ty < 0 || tx > max_origin || ty > max_origin) continue;
                    const auto [s, s2] = target_sums.window(tx, ty, side);
                    const double target_var = s2 - s * s / n;
                    double score = kNeutralScore;
                    if (target_var > kFlatVariance) {
                        double cross = 0.0;
                        for (int y = 0; y < side; ++y)
                            for (int x = 0; x < side; ++x)
                                cross += centred[static_cast<std::size_t>(y) * side + x] * target.at(tx + x, ty + y);
                        const double ncc = std::clamp(cross / std::sqrt(ref_var * target_var), -1.0, 1.0);
                        score = 0.5 * (ncc + 1.0);
                    }
                    if (score > best) best = score;
                }
                total += best;
            }
        }
    }
    return total / quadrants;
}

} // namespace detail

/// Symmetric quadrant-patch similarity in [0, 1].
inline double quad_patch_match(const GrayImage& a, const GrayImage& b, const MatcherConfig& cfg) {
    if (a.empty() || b.empty()) throw Error(Errc::EmptyImage, "quad_patch_match on a zero-area image");
    cfg.validate_geometry();
    const FloatImage ra = resize_bilinear(a, cfg.patch_size, cfg.patch_size);
    const FloatImage rb = resize_bilinear(b, cfg.patch_size, cfg.patch_size);
    const detail::IntegralImage ia(ra);
    const detail::IntegralImage ib(rb);
    const auto order = detail::displacement_order(cfg.search_radius);
    const double ab = detail::directional_quad_score(ra, rb, ib, cfg, order);
    const double ba = detail::directional_quad_score(rb, ra, ia, cfg, order);
    return std::clamp(0.5 * (ab + ba), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Descriptor similarity
// ---------------------------------------------------------------------------

/// cosine_sim = (1 + cos(a, b)) / 2, inv_euclidean = 1 / (1 + |a - b|).
inline double descriptor_similarity(std::span<const double> a, std::span<const double> b, DescriptorMetric metric) {
    if (a.size() != b.size())
        throw Error(Errc::DimensionMismatch,
                    "descriptor sizes " + std::to_string(a.size()) + " and " + std::to_string(b.size()));
    if (metric == DescriptorMetric::InvEuclidean) {
        double sq = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            sq += d * d;
        }
        return 1.0 / (1.0 + std::sqrt(sq));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw Error(Errc::ZeroVector, "cosine similarity of a zero vector");
    const double cosine = std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
    return 0.5 * (1.0 + cosine);
}

// ---------------------------------------------------------------------------
// Precomputed score tables
// ---------------------------------------------------------------------------

/// Externally computed similarities keyed by unordered example-id pair.
class ScoreTable {
public:
    using Key = std::pair<std::string, std::string>;

    static Key key(const std::string& a, const std::string& b) { return a < b ? Key{a, b} : Key{b, a}; }

    /// Returns false when the pair already holds a different score.
    bool insert(const std::string& a, const std::string& b, double score) {
        if (!(score >= 0.0 && score <= 1.0))
            throw Error(Errc::ScoreOutOfRange, "score for (" + a + ", " + b + ") outside [0,1]");
        auto [it, inserted] = entries_.emplace(key(a, b), score);
        return inserted || it->second == score;
    }

    std::optional<double> find(const std::string& a, const std::string& b) const {
        if (auto it = entries_.find(key(a, b)); it != entries_.end()) return it->second;
        return std::nullopt;
    }

    double lookup(const std::string& a, const std::string& b) const {
        if (auto s = find(a, b)) return *s;
        throw Error(Errc::MissingPair, "no score for (" + a + ", " + b + ")");
    }

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    const std::map<Key, double>& entries() const noexcept { return entries_; }

private:
    std::map<Key, double> entries_;
};

/// Parses `id_a<TAB>id_b<TAB>score` lines; blank lines and '#' comments are skipped.
inline ScoreTable load_score_table(std::istream& in) {
    ScoreTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;

        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos || line.find('\t', t2 + 1) != std::string::npos)
            throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": expected three tab-separated fields");
        const std::string a = line.substr(0, t1);
        const std::string b = line.substr(t1 + 1, t2 - t1 - 1);
        const std::string s = line.substr(t2 + 1);
        if (a.empty() || b.empty())
            throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": empty example id");

        double score = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), score);
        if (ec != std::errc() || ptr != s.data() + s.size())
            throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": bad score '" + s + "'");
        if (!(score >= 0.0 && score <= 1.0))
            throw Error(Errc::ScoreOutOfRange, "line " + std::to_string(lineno) + ": score " + s + " outside [0,1]");
        if (!table.insert(a, b, score))
            throw Error(Errc::ParseError, "line " + std::to_string(lineno) + ": conflicting duplicate pair");
    }
    return table;
}

inline ScoreTable load_score_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::IoFailure, "cannot open score table " + path);
    return load_score_table(in);
}

inline void write_score_table(std::ostream& out, const ScoreTable& table) {
    char buf[64];
    for (const auto& [k, v] : table.entries()) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << k.first << '\t' << k.second << '\t' << buf << '\n';
    }
}

// ---------------------------------------------------------------------------
// Matcher: the face-example similarity contract used by every later stage.
// ---------------------------------------------------------------------------

class Matcher {
public:
    using Fn = std::function<double(const FaceExample&, const FaceExample&)>;

    /// Wraps an arbitrary similarity. Results outside [0,1] are reported as MatcherFailure.
    static Matcher custom(std::string name, Fn fn) { return Matcher(std::move(name), std::move(fn)); }

    static Matcher from_config(const MatcherConfig& cfg, std::shared_ptr<const ScoreTable> table = nullptr) {
        switch (cfg.kind) {
        case MatcherKind::QuadPatch:
            cfg.validate();
            return Matcher("quad_patch", [cfg](const FaceExample& a, const FaceExample& b) {
                if (!a.patch || !b.patch) throw Error(Errc::MissingAppearance, "quad_patch matcher needs patches");
                return quad_patch_match(*a.patch, *b.patch, cfg);
            });
        case MatcherKind::Descriptor: {
            const auto metric = cfg.descriptor_metric;
            return Matcher("descriptor", [metric](const FaceExample& a, const FaceExample& b) {
                if (!a.descriptor || !b.descriptor)
                    throw Error(Errc::MissingDescriptor, "descriptor matcher needs descriptors");
                return descriptor_similarity(*a.descriptor, *b.descriptor, metric);
            });
        }
        case MatcherKind::Precomputed:
            if (!table) {
                cfg.validate();
                table = std::make_shared<const ScoreTable>(load_score_table_file(cfg.score_table_path));
            }
            return Matcher("precomputed", [table](const FaceExample& a, const FaceExample& b) {
                return table->lookup(a.example_id, b.example_id);
            });
        }
        throw Error(Errc::InvalidConfig, "unknown matcher kind");
    }

    /// Delta(a, b). Any failure is rethrown as MatcherFailure naming the pair.
    double operator()(const FaceExample& a, const FaceExample& b) const {
        double score = 0.0;
        try {
            score = fn_(a, b);
        } catch (const Error& e) {
            throw Error(Errc::MatcherFailure, "pair (" + a.example_id + ", " + b.example_id + "): " + e.what());
        }
        if (!(score >= 0.0 && score <= 1.0))
            throw Error(Errc::MatcherFailure,
                        "pair (" + a.example_id + ", " + b.example_id + "): score outside [0,1]");
        return score;
    }

    const std::string& name() const noexcept { return name_; }

private:
    Matcher(std::string name, Fn fn) : name_(std::move(name)), fn_(std::move(fn)) {}

    std::string name_;
    Fn fn_;
};

} // namespace fdisc
