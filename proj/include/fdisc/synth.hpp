#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "fdisc/core.hpp"
#include "fdisc/error.hpp"
#include "fdisc/image.hpp"

namespace fdisc {

enum class SynthAppearance { Descriptor, Patch, Both };

struct SynthConfig {
    int num_identities = 20;
    int sets_per_identity = 5;
    int examples_min = 5;
    int examples_max = 15;
    int descriptor_dim = 128;
    double intra_sigma = 1.0;         // expected norm of the per-example noise
    double inter_margin = 3.0;        // minimum centroid distance, in units of intra_sigma
    double cooccurrence_rate = 0.3;   // fraction of sequences holding two identities
    int confusable_pairs = 0;         // identity pairs (2p, 2p+1) placed below the margin, forced to co-occur
    double confusable_distance = 1.0; // centroid distance of a confusable pair, in units of intra_sigma
    int frames_min = 10;
    int frames_max = 40;
    double centroid_spread = 0.0;     // side of the placement cube in units of margin; 0 picks one from K and dim
    int max_attempts = 1000;          // placement retries per centroid
    SynthAppearance appearance = SynthAppearance::Descriptor;
    int patch_side = 64;
    double patch_noise = 6.0;         // gray-level noise of rendered patches
    double patch_shift = 2.0;         // max texture offset jitter, pixels
    DatasetRole role = DatasetRole::Evaluation;
    std::uint64_t seed = 1;

    void validate() const {
        if (num_identities < 1) throw Error(Errc::InvalidConfig, "num_identities must be >= 1");
        if (sets_per_identity < 1) throw Error(Errc::InvalidConfig, "sets_per_identity must be >= 1");
        if (examples_min < 1 || examples_min > examples_max)
            throw Error(Errc::InvalidConfig, "examples range must satisfy 1 <= min <= max");
        if (descriptor_dim < 1) throw Error(Errc::InvalidConfig, "descriptor_dim must be >= 1");
        if (intra_sigma < 0.0) throw Error(Errc::InvalidConfig, "intra_sigma must be >= 0");
        if (!(inter_margin > 0.0)) throw Error(Errc::InvalidConfig, "inter_margin must be > 0");
        if (cooccurrence_rate < 0.0 || cooccurrence_rate > 1.0)
            throw Error(Errc::InvalidConfig, "cooccurrence_rate must be in [0,1]");
        if (confusable_pairs < 0 || 2 * confusable_pairs > num_identities)
            throw Error(Errc::InvalidConfig, "confusable_pairs needs two identities per pair");
        if (confusable_distance < 0.0 || confusable_distance >= inter_margin)
            throw Error(Errc::InvalidConfig, "confusable_distance must lie in [0, inter_margin)");
        if (frames_min < 1 || frames_min > frames_max) throw Error(Errc::InvalidConfig, "frames range invalid");
        if (patch_side < 8) throw Error(Errc::InvalidConfig, "patch_side must be >= 8");
    }
};

struct SynthResult {
    Dataset dataset;
    IdentityLabels truth;
    std::vector<Descriptor> centroids;
};

// ---------------------------------------------------------------------------
// Textures for the patch-rendering mode
// ---------------------------------------------------------------------------

/// Smooth random texture: a sum of oriented sinusoids, evaluated anywhere in the plane.
struct Texture {
    struct Wave {
        double fx, fy, phase, amplitude;
    };
    std::vector<Wave> waves;
    double base = 128.0;

    double value(double x, double y) const {
        double v = base;
        for (const auto& w : waves) v += w.amplitude * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
        return v;
    }
};

template <class Rng>
Texture random_texture(Rng& rng, int waves = 6) {
    std::uniform_real_distribution<double> freq(0.03, 0.12);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::uniform_real_distribution<double> amp(12.0, 30.0);
    Texture t;
    std::uniform_real_distribution<double> base(100.0, 156.0);
    t.base = base(rng);
    for (int i = 0; i < waves; ++i) {
        const double f = freq(rng);
        const double a = angle(rng);
        t.waves.push_back({f * std::cos(a), f * std::sin(a), angle(rng), amp(rng)});
    }
    return t;
}

inline std::uint8_t to_gray(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

/// Renders `side` x `side` pixels of the texture with its origin at (dx, dy).
inline GrayImage render_texture(const Texture& t, int side, double dx = 0.0, double dy = 0.0, double gain = 1.0,
                                double offset = 0.0) {
    GrayImage img(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x) img.at(x, y) = to_gray(gain * t.value(x + dx, y + dy) + offset);
    return img;
}

/// A jittered view: random sub-pixel shift, brightness change and pixel noise.
template <class Rng>
GrayImage render_jittered(const Texture& t, int side, double max_shift, double noise, Rng& rng) {
    std::uniform_real_distribution<double> shift(-max_shift, max_shift);
    std::uniform_real_distribution<double> gain(0.85, 1.15);
    std::uniform_real_distribution<double> offset(-15.0, 15.0);
    std::normal_distribution<double> pixel(0.0, noise > 0.0 ? noise : 1.0);
    const double g = gain(rng), o = offset(rng), dx = shift(rng), dy = shift(rng);
    GrayImage img(side, side);
    for (int y = 0; y < side; ++y)
        for (int x = 0; x < side; ++x)
            img.at(x, y) = to_gray(g * t.value(x + dx, y + dy) + o + (noise > 0.0 ? pixel(rng) : 0.0));
    return img;
}

/// Independent uniform noise image.
template <class Rng>
GrayImage random_noise_image(int side, Rng& rng) {
    std::uniform_int_distribution<int> px(0, 255);
    GrayImage img(side, side);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(px(rng));
    return img;
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

namespace detail {

inline std::string padded(const char* prefix, int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%0*d", prefix, width, value);
    return buf;
}

inline double distance(const Descriptor& a, const Descriptor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

template <class Rng>
std::vector<Descriptor> place_centroids(const SynthConfig& cfg, Rng& rng) {
    const int k = cfg.num_identities;
    const int dim = cfg.descriptor_dim;
    const double unit = cfg.intra_sigma > 0.0 ? cfg.intra_sigma : 1.0;
    const double margin = cfg.inter_margin * (cfg.intra_sigma > 0.0 ? cfg.intra_sigma : 0.0);
    const double spread = cfg.centroid_spread > 0.0
                              ? cfg.centroid_spread
                              : 2.0 * std::ceil(std::pow(static_cast<double>(k), 1.0 / dim)) + 2.0;
    const double side = spread * cfg.inter_margin * unit;
    std::uniform_real_distribution<double> coord(-side / 2.0, side / 2.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    auto partner_of = [&](int id) {
        if (id < 2 * cfg.confusable_pairs) return id % 2 == 0 ? id + 1 : id - 1;
        return -1;
    };
    std::vector<Descriptor> centroids;
    auto far_enough = [&](const Descriptor& c, int id) {
        for (int j = 0; j < static_cast<int>(centroids.size()); ++j) {
            if (j == partner_of(id)) continue;
            if (distance(c, centroids[j]) < margin) return false;
        }
        return true;
    };

    for (int id = 0; id < k; ++id) {
        const bool is_partner = partner_of(id) >= 0 && id % 2 == 1;
        bool placed = false;
        for (int attempt = 0; attempt < cfg.max_attempts && !placed; ++attempt) {
            Descriptor c(static_cast<std::size_t>(dim));
            if (is_partner) {
                Descriptor u(static_cast<std::size_t>(dim));
                double norm = 0.0;
                for (auto& v : u) {
                    v = gauss(rng);
                    norm += v * v;
                }
                norm = std::sqrt(norm);
                const Descriptor& anchor = centroids[static_cast<std::size_t>(id - 1)];
                for (std::size_t i = 0; i < c.size(); ++i)
                    c[i] = anchor[i] + (norm > 0.0 ? u[i] / norm : 0.0) * cfg.confusable_distance * unit;
            } else {
                for (auto& v : c) v = coord(rng);
            }
            if (far_enough(c, id)) {
                centroids.push_back(std::move(c));
                placed = true;
            }
        }
        if (!placed)
            throw Error(Errc::InfeasibleGeometry, "could not place identity " + std::to_string(id) + " of " +
                                                      std::to_string(k) + " at margin " +
                                                      std::to_string(cfg.inter_margin) + " in " + std::to_string(dim) +
                                                      " dimensions");
    }
    return centroids;
}

} // namespace detail

/// Synthetic face-set dataset with known identities.
///
/// Identities are descriptor centroids at least inter_margin * sigma apart,
/// except confusable pairs which sit confusable_distance * sigma apart and
/// share sequences. Each example is its centroid plus isotropic Gaussian noise
/// of expected norm sigma. In patch mode every identity is a smooth texture
/// and examples are jittered renderings of it. Deterministic given the seed.
inline SynthResult generate_dataset(const SynthConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);

    SynthResult out;
    const bool want_descriptor = cfg.appearance != SynthAppearance::Patch;
    const bool want_patch = cfg.appearance != SynthAppearance::Descriptor;
    out.centroids = detail::place_centroids(cfg, rng);

    std::vector<Texture> textures;
    if (want_patch)
        for (int k = 0; k < cfg.num_identities; ++k) textures.push_back(random_texture(rng));

    const int k_count = cfg.num_identities;
    const int s_count = cfg.sets_per_identity;
    const int m_count = k_count * s_count;
    auto identity_of = [&](int set) { return set / s_count; };

    // Sequence membership: groups of one or two sets.
    std::vector<int> group_of(static_cast<std::size_t>(m_count), -1);
    std::vector<std::vector<int>> groups;
    for (int p = 0; p < cfg.confusable_pairs; ++p) {
        for (int j = 0; j < s_count; ++j) {
            const int a = (2 * p) * s_count + j;
            const int b = (2 * p + 1) * s_count + j;
            group_of[a] = group_of[b] = static_cast<int>(groups.size());
            groups.push_back({a, b});
        }
    }
    const int target_pairs =
        static_cast<int>(std::lround(cfg.cooccurrence_rate * m_count / (1.0 + cfg.cooccurrence_rate)));
    std::vector<int> singles;
    for (int s = 0; s < m_count; ++s)
        if (group_of[s] < 0) singles.push_back(s);
    std::shuffle(singles.begin(), singles.end(), rng);
    int pairs = static_cast<int>(groups.size());
    for (std::size_t i = 0; i < singles.size() && pairs < target_pairs; ++i) {
        const int a = singles[i];
        if (group_of[a] >= 0) continue;
        for (std::size_t j = i + 1; j < singles.size(); ++j) {
            const int b = singles[j];
            if (group_of[b] >= 0 || identity_of(a) == identity_of(b)) continue;
            group_of[a] = group_of[b] = static_cast<int>(groups.size());
            groups.push_back({a, b});
            ++pairs;
            break;
        }
    }
    for (int s : singles)
        if (group_of[s] < 0) {
            group_of[s] = static_cast<int>(groups.size());
            groups.push_back({s});
        }
    std::shuffle(groups.begin(), groups.end(), rng);

    std::uniform_int_distribution<int> example_count(cfg.examples_min, cfg.examples_max);
    std::uniform_int_distribution<int> frame_count(cfg.frames_min, cfg.frames_max);
    std::uniform_int_distribution<int> box_jitter(-4, 4);
    std::normal_distribution<double> noise(0.0, cfg.intra_sigma / std::sqrt(static_cast<double>(cfg.descriptor_dim)));

    Dataset& ds = out.dataset;
    ds.role = cfg.role;
    if (want_descriptor) ds.descriptor_dim = static_cast<std::size_t>(cfg.descriptor_dim);
    const int id_width = 4;
    int set_counter = 0;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        SequenceRecord seq;
        seq.sequence_id = detail::padded("seq", static_cast<int>(g), id_width);
        std::vector<int> lengths;
        for (std::size_t slot = 0; slot < groups[g].size(); ++slot) lengths.push_back(example_count(rng));
        seq.frame_count = std::max(frame_count(rng), *std::max_element(lengths.begin(), lengths.end()));

        for (std::size_t slot = 0; slot < groups[g].size(); ++slot) {
            const int set = groups[g][slot];
            const int identity = identity_of(set);
            FaceSet fs;
            fs.set_id = detail::padded("fs", set_counter++, id_width);
            fs.sequence_id = seq.sequence_id;

            std::vector<int> frames(static_cast<std::size_t>(seq.frame_count));
            std::iota(frames.begin(), frames.end(), 0);
            std::shuffle(frames.begin(), frames.end(), rng);
            frames.resize(static_cast<std::size_t>(lengths[slot]));
            std::sort(frames.begin(), frames.end());

            for (int e = 0; e < lengths[slot]; ++e) {
                FaceExample ex;
                ex.example_id = fs.set_id + detail::padded("_e", e, 2);
                ex.sequence_id = seq.sequence_id;
                ex.frame_index = frames[static_cast<std::size_t>(e)];
                ex.bbox = {40 + 160 * static_cast<int>(slot) + box_jitter(rng), 60 + box_jitter(rng),
                           cfg.patch_side, cfg.patch_side};
                ex.true_identity = detail::padded("id", identity, 3);
                if (want_descriptor) {
                    Descriptor d = out.centroids[static_cast<std::size_t>(identity)];
                    if (cfg.intra_sigma > 0.0)
                        for (auto& v : d) v += noise(rng);
                    ex.descriptor = std::move(d);
                }
                if (want_patch) {
                    ex.patch = render_jittered(textures[static_cast<std::size_t>(identity)], cfg.patch_side,
                                               cfg.patch_shift, cfg.patch_noise, rng);
                    ex.patch_ref = "patches/" + ex.example_id + ".pgm";
                }
                fs.examples.push_back(std::move(ex));
            }
            out.truth.emplace(fs.set_id, detail::padded("id", identity, 3));
            seq.face_set_ids.push_back(fs.set_id);
            ds.face_sets.push_back(std::move(fs));
        }
        ds.sequences.push_back(std::move(seq));
    }
    return out;
}

/// Detections for one sequence holding `tracks` people walking side by side
/// for `frames` consecutive frames; ground truth is the track index per detection.
struct SyntheticTrackSequence {
    std::vector<Detection> detections;
    std::vector<int> track_of; // parallel to detections
};

inline SyntheticTrackSequence generate_track_sequence(const std::string& sequence_id, int tracks, int frames,
                                                      std::uint64_t seed, int spacing = 150) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> jitter(-3, 3);
    SyntheticTrackSequence out;
    for (int f = 0; f < frames; ++f) {
        for (int t = 0; t < tracks; ++t) {
            Detection d;
            d.sequence_id = sequence_id;
            d.detection_id = sequence_id + "_t" + std::to_string(t) + "_f" + std::to_string(f);
            d.frame_index = f;
            d.bbox = {20 + spacing * t + 2 * f + jitter(rng), 50 + jitter(rng), 64, 64};
            d.true_identity = "track" + std::to_string(t);
            out.detections.push_back(std::move(d));
            out.track_of.push_back(t);
        }
    }
    return out;
}

} // namespace fdisc
