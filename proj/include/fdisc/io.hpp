#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdisc/clustering.hpp"
#include "fdisc/core.hpp"
#include "fdisc/dissimilarity.hpp"
#include "fdisc/error.hpp"
#include "fdisc/image.hpp"

namespace fdisc {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes `content` to a sibling temporary file and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::IoFailure, "cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error(Errc::IoFailure, "short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error(Errc::IoFailure, "cannot move " + tmp.string() + " into place");
    }
}

inline std::string format_double(const char* fmt, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

// ---------------------------------------------------------------------------
// Dataset manifest (JSON)
//
// {
//   "role": "training" | "evaluation",          optional
//   "descriptor_dim": 128,                       optional
//   "sequences":  [{"sequence_id", "frame_count", "face_set_ids": [...]}],
//   "face_sets":  [{"set_id", "sequence_id", "example_ids": [...]}],
//   "examples":   [{"example_id", "sequence_id", "frame_index", "bbox": [x, y, w, h],
//                   "descriptor": [...]?, "patch": "rel/path.pgm"?, "identity": "..."?}],
//   "detections": [{"detection_id"?, "sequence_id", "frame_index", "bbox",
//                   "descriptor"?, "patch"?, "identity"?}]   optional
// }
//
// The canonical form is the one written by write_manifest: sorted keys,
// two-space indent, trailing newline.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string_view role_name(DatasetRole r) {
    switch (r) {
    case DatasetRole::Training: return "training";
    case DatasetRole::Evaluation: return "evaluation";
    case DatasetRole::Unspecified: return "";
    }
    return "";
}

[[noreturn]] inline void schema_error(const std::string& where, const std::string& what) {
    throw Error(Errc::ParseError, where + ": " + what);
}

inline const json& field(const json& obj, const char* key, const std::string& where) {
    if (!obj.is_object()) schema_error(where, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(where, std::string("missing field '") + key + "'");
    return *it;
}

inline std::string string_field(const json& obj, const char* key, const std::string& where) {
    const json& v = field(obj, key, where);
    if (!v.is_string()) schema_error(where + "." + key, "expected a string");
    return v.get<std::string>();
}

inline long long int_field(const json& obj, const char* key, const std::string& where) {
    const json& v = field(obj, key, where);
    if (!v.is_number_integer()) schema_error(where + "." + key, "expected an integer");
    return v.get<long long>();
}

inline BBox parse_bbox(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 4) schema_error(where, "bbox must be [x, y, width, height]");
    for (const auto& c : v)
        if (!c.is_number_integer()) schema_error(where, "bbox entries must be integers");
    return {v[0].get<int>(), v[1].get<int>(), v[2].get<int>(), v[3].get<int>()};
}

inline json bbox_json(const BBox& b) { return json::array({b.x, b.y, b.width, b.height}); }

struct Appearance {
    std::optional<GrayImage> patch;
    std::string patch_ref;
    std::optional<Descriptor> descriptor;
    std::optional<std::string> identity;
};

inline Appearance parse_appearance(const json& obj, const std::string& where,
                                   const std::optional<std::filesystem::path>& base_dir) {
    Appearance a;
    if (auto it = obj.find("descriptor"); it != obj.end()) {
        if (!it->is_array()) schema_error(where + ".descriptor", "expected an array of numbers");
        Descriptor d;
        d.reserve(it->size());
        for (const auto& x : *it) {
            if (!x.is_number()) schema_error(where + ".descriptor", "expected numbers");
            d.push_back(x.get<double>());
        }
        a.descriptor = std::move(d);
    }
    if (auto it = obj.find("patch"); it != obj.end()) {
        if (!it->is_string()) schema_error(where + ".patch", "expected a relative path");
        a.patch_ref = it->get<std::string>();
        if (base_dir) {
            try {
                a.patch = read_pgm_file((*base_dir / a.patch_ref).string());
            } catch (const Error& e) {
                schema_error(where + ".patch", e.detail());
            }
        }
    }
    if (auto it = obj.find("identity"); it != obj.end()) {
        if (!it->is_string()) schema_error(where + ".identity", "expected a string");
        a.identity = it->get<std::string>();
    }
    return a;
}

inline void put_appearance(json& obj, const std::optional<Descriptor>& descriptor, const std::string& patch_ref,
                           const std::optional<std::string>& identity) {
    if (descriptor) obj["descriptor"] = *descriptor;
    if (!patch_ref.empty()) obj["patch"] = patch_ref;
    if (identity) obj["identity"] = *identity;
}

} // namespace detail

/// Parses a manifest. Patch paths are resolved against `base_dir`; without
/// one, patches are referenced but not loaded. Errors name the offending record.
inline Dataset parse_manifest(const std::string& text, const std::optional<std::filesystem::path>& base_dir = {}) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(Errc::ParseError, std::string("manifest: ") + e.what());
    }
    if (!doc.is_object()) detail::schema_error("manifest", "top level must be an object");

    Dataset ds;
    if (auto it = doc.find("role"); it != doc.end()) {
        const auto role = it->is_string() ? it->get<std::string>() : std::string("?");
        if (role == "training") ds.role = DatasetRole::Training;
        else if (role == "evaluation") ds.role = DatasetRole::Evaluation;
        else detail::schema_error("role", "expected \"training\" or \"evaluation\"");
    }
    if (auto it = doc.find("descriptor_dim"); it != doc.end()) {
        if (!it->is_number_unsigned()) detail::schema_error("descriptor_dim", "expected a non-negative integer");
        ds.descriptor_dim = it->get<std::size_t>();
    }

    const json& sequences = detail::field(doc, "sequences", "manifest");
    const json& face_sets = detail::field(doc, "face_sets", "manifest");
    const json& examples = detail::field(doc, "examples", "manifest");
    if (!sequences.is_array() || !face_sets.is_array() || !examples.is_array())
        detail::schema_error("manifest", "sequences, face_sets and examples must be arrays");

    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const std::string where = "sequences[" + std::to_string(i) + "]";
        SequenceRecord seq;
        seq.sequence_id = detail::string_field(sequences[i], "sequence_id", where);
        seq.frame_count = static_cast<int>(detail::int_field(sequences[i], "frame_count", where));
        const json& ids = detail::field(sequences[i], "face_set_ids", where);
        if (!ids.is_array()) detail::schema_error(where + ".face_set_ids", "expected an array");
        for (const auto& id : ids) {
            if (!id.is_string()) detail::schema_error(where + ".face_set_ids", "expected strings");
            seq.face_set_ids.push_back(id.get<std::string>());
        }
        ds.sequences.push_back(std::move(seq));
    }

    std::map<std::string, FaceExample> by_id;
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const std::string where = "examples[" + std::to_string(i) + "]";
        const json& e = examples[i];
        FaceExample ex;
        ex.example_id = detail::string_field(e, "example_id", where);
        ex.sequence_id = detail::string_field(e, "sequence_id", where);
        ex.frame_index = static_cast<int>(detail::int_field(e, "frame_index", where));
        ex.bbox = detail::parse_bbox(detail::field(e, "bbox", where), where + ".bbox");
        auto a = detail::parse_appearance(e, where, base_dir);
        ex.patch = std::move(a.patch);
        ex.patch_ref = std::move(a.patch_ref);
        ex.descriptor = std::move(a.descriptor);
        ex.true_identity = std::move(a.identity);
        if (by_id.contains(ex.example_id)) detail::schema_error(where, "duplicate example id " + ex.example_id);
        position.emplace(ex.example_id, i);
        by_id.emplace(ex.example_id, std::move(ex));
    }

    std::set<std::string> used;
    for (std::size_t i = 0; i < face_sets.size(); ++i) {
        const std::string where = "face_sets[" + std::to_string(i) + "]";
        FaceSet fs;
        fs.set_id = detail::string_field(face_sets[i], "set_id", where);
        fs.sequence_id = detail::string_field(face_sets[i], "sequence_id", where);
        const json& ids = detail::field(face_sets[i], "example_ids", where);
        if (!ids.is_array()) detail::schema_error(where + ".example_ids", "expected an array");
        for (std::size_t k = 0; k < ids.size(); ++k) {
            const std::string w = where + ".example_ids[" + std::to_string(k) + "]";
            if (!ids[k].is_string()) detail::schema_error(w, "expected a string");
            const auto id = ids[k].get<std::string>();
            auto it = by_id.find(id);
            if (it == by_id.end()) detail::schema_error(w, "unknown example " + id);
            if (!used.insert(id).second) detail::schema_error(w, "example " + id + " already belongs to a face-set");
            fs.examples.push_back(it->second);
        }
        ds.face_sets.push_back(std::move(fs));
    }
    for (const auto& [id, pos] : position)
        if (!used.contains(id))
            detail::schema_error("examples[" + std::to_string(pos) + "]", "example " + id + " is not in any face-set");

    if (auto it = doc.find("detections"); it != doc.end()) {
        if (!it->is_array()) detail::schema_error("detections", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const std::string where = "detections[" + std::to_string(i) + "]";
            const json& e = (*it)[i];
            Detection d;
            if (auto id = e.find("detection_id"); id != e.end()) {
                if (!id->is_string()) detail::schema_error(where + ".detection_id", "expected a string");
                d.detection_id = id->get<std::string>();
            }
            d.sequence_id = detail::string_field(e, "sequence_id", where);
            d.frame_index = static_cast<int>(detail::int_field(e, "frame_index", where));
            d.bbox = detail::parse_bbox(detail::field(e, "bbox", where), where + ".bbox");
            auto a = detail::parse_appearance(e, where, base_dir);
            d.patch = std::move(a.patch);
            d.patch_ref = std::move(a.patch_ref);
            d.descriptor = std::move(a.descriptor);
            d.true_identity = std::move(a.identity);
            ds.detections.push_back(std::move(d));
        }
    }
    return ds;
}

inline Dataset read_manifest(const std::filesystem::path& path, bool load_patches = true) {
    const std::string text = read_text_file(path);
    std::optional<std::filesystem::path> base;
    if (load_patches) base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    try {
        return parse_manifest(text, base);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.detail());
    }
}

inline std::string patch_path_for(const std::string& id, const std::string& ref) {
    return ref.empty() ? "patches/" + id + ".pgm" : ref;
}

/// Canonical manifest text.
inline std::string manifest_to_string(const Dataset& ds) {
    json doc = json::object();
    if (ds.role != DatasetRole::Unspecified) doc["role"] = std::string(detail::role_name(ds.role));
    if (ds.descriptor_dim) doc["descriptor_dim"] = *ds.descriptor_dim;

    json sequences = json::array();
    for (const auto& s : ds.sequences)
        sequences.push_back({{"sequence_id", s.sequence_id}, {"frame_count", s.frame_count}, {"face_set_ids", s.face_set_ids}});
    json sets = json::array();
    json examples = json::array();
    for (const auto& fs : ds.face_sets) {
        json ids = json::array();
        for (const auto& ex : fs.examples) {
            ids.push_back(ex.example_id);
            json e = {{"example_id", ex.example_id},
                      {"sequence_id", ex.sequence_id},
                      {"frame_index", ex.frame_index},
                      {"bbox", detail::bbox_json(ex.bbox)}};
            detail::put_appearance(e, ex.descriptor, ex.patch ? patch_path_for(ex.example_id, ex.patch_ref) : ex.patch_ref,
                                   ex.true_identity);
            examples.push_back(std::move(e));
        }
        sets.push_back({{"set_id", fs.set_id}, {"sequence_id", fs.sequence_id}, {"example_ids", std::move(ids)}});
    }
    doc["sequences"] = std::move(sequences);
    doc["face_sets"] = std::move(sets);
    doc["examples"] = std::move(examples);

    if (!ds.detections.empty()) {
        json dets = json::array();
        for (const auto& d : ds.detections) {
            json e = {{"sequence_id", d.sequence_id}, {"frame_index", d.frame_index}, {"bbox", detail::bbox_json(d.bbox)}};
            if (!d.detection_id.empty()) e["detection_id"] = d.detection_id;
            const std::string key = d.detection_id.empty() ? d.sequence_id + "_det" + std::to_string(dets.size()) : d.detection_id;
            detail::put_appearance(e, d.descriptor, d.patch ? patch_path_for(key, d.patch_ref) : d.patch_ref,
                                   d.true_identity);
            dets.push_back(std::move(e));
        }
        doc["detections"] = std::move(dets);
    }
    return doc.dump(2) + "\n";
}

/// Writes the manifest and every in-memory patch as PGM beside it.
inline void write_manifest(const Dataset& ds, const std::filesystem::path& path) {
    const auto base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    auto write_patch = [&](const std::string& rel, const GrayImage& img) {
        std::ostringstream pgm;
        write_pgm(pgm, img);
        write_file_atomic(base / rel, pgm.str());
    };
    for (const auto& fs : ds.face_sets)
        for (const auto& ex : fs.examples)
            if (ex.patch) write_patch(patch_path_for(ex.example_id, ex.patch_ref), *ex.patch);
    for (std::size_t i = 0; i < ds.detections.size(); ++i) {
        const auto& d = ds.detections[i];
        const std::string key = d.detection_id.empty() ? d.sequence_id + "_det" + std::to_string(i) : d.detection_id;
        if (d.patch) write_patch(patch_path_for(key, d.patch_ref), *d.patch);
    }
    write_file_atomic(path, manifest_to_string(ds));
}

// ---------------------------------------------------------------------------
// Label files: "set_id,label" per line, sorted by set_id, no header.
// ---------------------------------------------------------------------------

inline std::string labels_to_csv(const std::map<std::string, std::string>& labels) {
    std::string out;
    for (const auto& [id, label] : labels) out += id + "," + label + "\n";
    return out;
}

inline std::string assignment_to_csv(const ClusterAssignment& a) {
    std::map<std::string, std::string> labels;
    for (const auto& [id, label] : a.labels()) labels.emplace(id, std::to_string(label));
    return labels_to_csv(labels);
}

inline std::map<std::string, std::string> parse_label_csv(const std::string& text, const std::string& origin) {
    std::map<std::string, std::string> labels;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos || comma == 0 || comma + 1 == line.size() ||
            line.find(',', comma + 1) != std::string::npos)
            throw Error(Errc::ParseError, origin + ": line " + std::to_string(lineno) + ": expected 'set_id,label'");
        if (!labels.emplace(line.substr(0, comma), line.substr(comma + 1)).second)
            throw Error(Errc::ParseError, origin + ": line " + std::to_string(lineno) + ": duplicate set id");
    }
    return labels;
}

inline IdentityLabels read_truth_file(const std::filesystem::path& path) {
    return parse_label_csv(read_text_file(path), path.string());
}

inline ClusterAssignment read_assignment_file(const std::filesystem::path& path) {
    const auto raw = parse_label_csv(read_text_file(path), path.string());
    ClusterAssignment a;
    std::set<int> distinct;
    for (const auto& [id, label] : raw) {
        int v = 0;
        try {
            std::size_t used = 0;
            v = std::stoi(label, &used);
            if (used != label.size()) throw std::invalid_argument(label);
        } catch (const std::exception&) {
            throw Error(Errc::ParseError, path.string() + ": cluster id '" + label + "' is not an integer");
        }
        a.set_ids.push_back(id);
        a.by_index.push_back(v);
        distinct.insert(v);
    }
    a.num_clusters = static_cast<int>(distinct.size());
    return a;
}

// ---------------------------------------------------------------------------
// Matrix dump: "N" then N rows of N space-separated values, 9 digits after
// the decimal point.
// ---------------------------------------------------------------------------

inline std::string matrix_to_string(std::size_t n, const std::vector<double>& values) {
    std::string out = std::to_string(n) + "\n";
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (j) out += ' ';
            out += format_double("%.9f", values[i * n + j]);
        }
        out += '\n';
    }
    return out;
}

inline std::string matrix_to_string(const DissimilarityMatrix& d) { return matrix_to_string(d.order(), d.values); }

inline std::string matrix_to_string(const ConstraintMatrix& c) {
    std::vector<double> v(c.order() * c.order());
    for (std::size_t i = 0; i < c.order(); ++i)
        for (std::size_t j = 0; j < c.order(); ++j) v[i * c.order() + j] = c.at(i, j);
    return matrix_to_string(c.order(), v);
}

inline std::vector<double> parse_matrix(const std::string& text, std::size_t& order, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.find_first_not_of(" \t") != std::string::npos) return true;
        }
        return false;
    };
    if (!next_line()) throw Error(Errc::ParseError, origin + ": empty matrix file");
    try {
        std::size_t used = 0;
        const long long n = std::stoll(line, &used);
        if (n < 0 || line.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(line);
        order = static_cast<std::size_t>(n);
    } catch (const std::exception&) {
        throw Error(Errc::ParseError, origin + ": line " + std::to_string(lineno) + ": expected the matrix order");
    }
    std::vector<double> values;
    values.reserve(order * order);
    for (std::size_t i = 0; i < order; ++i) {
        if (!next_line())
            throw Error(Errc::ParseError, origin + ": expected " + std::to_string(order) + " rows, found " +
                                              std::to_string(i));
        std::istringstream row(line);
        std::string token;
        std::size_t count = 0;
        while (row >> token) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
            if (ec != std::errc() || ptr != token.data() + token.size())
                throw Error(Errc::ParseError, origin + ": line " + std::to_string(lineno) + ": bad number '" + token + "'");
            values.push_back(v);
            ++count;
        }
        if (count != order)
            throw Error(Errc::ParseError, origin + ": line " + std::to_string(lineno) + ": expected " +
                                              std::to_string(order) + " values, found " + std::to_string(count));
    }
    if (next_line()) throw Error(Errc::ParseError, origin + ": line " + std::to_string(lineno) + ": trailing data");
    return values;
}

/// Loads a dumped dissimilarity matrix, labelling rows with `set_ids`.
inline DissimilarityMatrix parse_dissimilarity(const std::string& text, std::vector<std::string> set_ids,
                                               const std::string& origin = "<matrix>") {
    std::size_t n = 0;
    auto values = parse_matrix(text, n, origin);
    if (set_ids.empty())
        for (std::size_t i = 0; i < n; ++i) set_ids.push_back(std::to_string(i));
    if (set_ids.size() != n)
        throw Error(Errc::OrderMismatch, origin + ": matrix order " + std::to_string(n) + " but " +
                                             std::to_string(set_ids.size()) + " face-set ids");
    DissimilarityMatrix d(std::move(set_ids));
    d.values = std::move(values);
    return d;
}

inline ConstraintMatrix parse_constraints(const std::string& text, const std::string& origin = "<constraints>") {
    std::size_t n = 0;
    const auto values = parse_matrix(text, n, origin);
    ConstraintMatrix c(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double v = values[i * n + j];
            if (v != 0.0 && v != 1.0) throw Error(Errc::ParseError, origin + ": constraint flags must be 0 or 1");
            if (values[j * n + i] != v) throw Error(Errc::ParseError, origin + ": constraint matrix must be symmetric");
            if (i == j && v != 0.0) throw Error(Errc::ParseError, origin + ": constraint diagonal must be 0");
            if (i < j && v == 1.0) c.set_symmetric(i, j, 1);
        }
    }
    return c;
}

} // namespace fdisc
