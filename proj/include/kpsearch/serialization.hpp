#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kpsearch/search.hpp"
#include "kpsearch/sut.hpp"
#include "kpsearch/tree.hpp"
#include "kpsearch/types.hpp"

// JSON encodings for every persisted type. Doubles go through the library's
// shortest round-trip formatting, so a value survives write/parse bit for bit
// and equal runs produce byte-identical files.

namespace kpsearch {

using nlohmann::json;

inline void to_json(json& j, const Point2D& p) { j = json::array({p.x, p.y}); }
inline void from_json(const json& j, Point2D& p) {
    p.x = j.at(0).get<double>();
    p.y = j.at(1).get<double>();
}

inline void to_json(json& j, const Interval& iv) { j = json::array({iv.lo, iv.hi}); }
inline void from_json(const json& j, Interval& iv) {
    iv.lo = j.at(0).get<double>();
    iv.hi = j.at(1).get<double>();
}

inline void to_json(json& j, const GenomeBounds& b) {
    j = json{{"roll", b.roll}, {"pitch", b.pitch}, {"yaw", b.yaw}};
}
inline void from_json(const json& j, GenomeBounds& b) {
    j.at("roll").get_to(b.roll);
    j.at("pitch").get_to(b.pitch);
    j.at("yaw").get_to(b.yaw);
}

inline void to_json(json& j, const ImageCharacteristics& ic) {
    j = json{{"roll", ic.roll}, {"pitch", ic.pitch}, {"yaw", ic.yaw}, {"model_id", ic.model_id}};
}
inline void from_json(const json& j, ImageCharacteristics& ic) {
    j.at("roll").get_to(ic.roll);
    j.at("pitch").get_to(ic.pitch);
    j.at("yaw").get_to(ic.yaw);
    j.at("model_id").get_to(ic.model_id);
}

inline void to_json(json& j, const GroundTruth& t) {
    json actual = json::array();
    for (const auto& p : t.positions) {
        if (p) {
            actual.push_back(*p);
        } else {
            actual.push_back(nullptr);
        }
    }
    j = json{{"actual", std::move(actual)},
             {"face_width", t.face_width},
             {"face_height", t.face_height}};
}
inline void from_json(const json& j, GroundTruth& t) {
    t.positions.clear();
    for (const auto& e : j.at("actual")) {
        if (e.is_null()) {
            t.positions.push_back(std::nullopt);
        } else {
            t.positions.push_back(e.get<Point2D>());
        }
    }
    j.at("face_width").get_to(t.face_width);
    j.at("face_height").get_to(t.face_height);
}

inline void to_json(json& j, const Prediction& p) {
    j = json{{"predicted", p.positions}};
}
inline void from_json(const json& j, Prediction& p) {
    j.at("predicted").get_to(p.positions);
}

inline void to_json(json& j, const EvaluatedTestCase& t) {
    j = json{{"ic", t.ic}, {"truth", t.truth}, {"prediction", t.prediction},
             {"fitness", t.fitness}};
}
inline void from_json(const json& j, EvaluatedTestCase& t) {
    j.at("ic").get_to(t.ic);
    j.at("truth").get_to(t.truth);
    j.at("prediction").get_to(t.prediction);
    j.at("fitness").get_to(t.fitness);
}

inline void to_json(json& j, const EvaluationRecord& r) {
    j = json{{"ordinal", r.ordinal}, {"generation", r.generation}, {"test", r.test}};
}
inline void from_json(const json& j, EvaluationRecord& r) {
    j.at("ordinal").get_to(r.ordinal);
    j.at("generation").get_to(r.generation);
    j.at("test").get_to(r.test);
}

inline void to_json(json& j, const GenerationRecord& r) {
    j = json{{"generation", r.generation},
             {"evaluations", r.evaluations},
             {"covered", r.covered},
             {"population", r.population},
             {"effectiveness", r.effectiveness}};
}
inline void from_json(const json& j, GenerationRecord& r) {
    j.at("generation").get_to(r.generation);
    j.at("evaluations").get_to(r.evaluations);
    j.at("covered").get_to(r.covered);
    j.at("population").get_to(r.population);
    j.at("effectiveness").get_to(r.effectiveness);
}

inline void to_json(json& j, const Vec3& v) { j = json::array({v.x, v.y, v.z}); }
inline void from_json(const json& j, Vec3& v) {
    v.x = j.at(0).get<double>();
    v.y = j.at(1).get<double>();
    v.z = j.at(2).get<double>();
}

inline void to_json(json& j, const CanonicalPoint& p) {
    j = json{{"label", p.label}, {"position", p.position}, {"normal", p.normal}};
}
inline void from_json(const json& j, CanonicalPoint& p) {
    j.at("label").get_to(p.label);
    j.at("position").get_to(p.position);
    j.at("normal").get_to(p.normal);
}

inline void to_json(json& j, const ModelParams& m) {
    j = json{{"scale", m.scale},
             {"aspect", m.aspect},
             {"offset_x", m.offset_x},
             {"offset_y", m.offset_y}};
}
inline void from_json(const json& j, ModelParams& m) {
    j.at("scale").get_to(m.scale);
    j.at("aspect").get_to(m.aspect);
    j.at("offset_x").get_to(m.offset_x);
    j.at("offset_y").get_to(m.offset_y);
}

inline void to_json(json& j, const DefectRegion& d) {
    j = json{{"key_point", d.key_point},
             {"model_id", d.model_id},
             {"roll", d.roll},
             {"pitch", d.pitch},
             {"yaw", d.yaw},
             {"magnitude", d.magnitude},
             {"center", json::array({d.center_roll, d.center_pitch, d.center_yaw})},
             {"core_radius", d.core_radius},
             {"basin_height", d.basin_height},
             {"direction", json::array({d.dir_x, d.dir_y})}};
}
inline void from_json(const json& j, DefectRegion& d) {
    j.at("key_point").get_to(d.key_point);
    j.at("model_id").get_to(d.model_id);
    j.at("roll").get_to(d.roll);
    j.at("pitch").get_to(d.pitch);
    j.at("yaw").get_to(d.yaw);
    j.at("magnitude").get_to(d.magnitude);
    d.center_roll = j.at("center").at(0).get<double>();
    d.center_pitch = j.at("center").at(1).get<double>();
    d.center_yaw = j.at("center").at(2).get<double>();
    j.at("core_radius").get_to(d.core_radius);
    j.at("basin_height").get_to(d.basin_height);
    d.dir_x = j.at("direction").at(0).get<double>();
    d.dir_y = j.at("direction").at(1).get<double>();
}

inline void to_json(json& j, const SyntheticSutConfig& c) {
    j = json{{"points", c.points},
             {"models", c.models},
             {"bounds", c.bounds},
             {"projection_scale", c.projection_scale},
             {"center_x", c.center_x},
             {"center_y", c.center_y},
             {"visibility_threshold", c.visibility_threshold},
             {"noise_amplitude", c.noise_amplitude},
             {"defects", c.defects}};
}
inline void from_json(const json& j, SyntheticSutConfig& c) {
    j.at("points").get_to(c.points);
    j.at("models").get_to(c.models);
    j.at("bounds").get_to(c.bounds);
    j.at("projection_scale").get_to(c.projection_scale);
    j.at("center_x").get_to(c.center_x);
    j.at("center_y").get_to(c.center_y);
    j.at("visibility_threshold").get_to(c.visibility_threshold);
    j.at("noise_amplitude").get_to(c.noise_amplitude);
    j.at("defects").get_to(c.defects);
}

inline void to_json(json& j, const OperatorParams& p) {
    j = json{{"crossover_prob", p.crossover_prob},
             {"eta_c", p.eta_c},
             {"mutation_prob", p.mutation_prob},
             {"eta_m", p.eta_m},
             {"adaptive_eta_lo", p.adaptive_eta_lo},
             {"adaptive_eta_hi", p.adaptive_eta_hi}};
}
inline void from_json(const json& j, OperatorParams& p) {
    p = OperatorParams{};
    if (j.contains("crossover_prob")) j.at("crossover_prob").get_to(p.crossover_prob);
    if (j.contains("eta_c")) j.at("eta_c").get_to(p.eta_c);
    if (j.contains("mutation_prob")) j.at("mutation_prob").get_to(p.mutation_prob);
    if (j.contains("eta_m")) j.at("eta_m").get_to(p.eta_m);
    if (j.contains("adaptive_eta_lo")) j.at("adaptive_eta_lo").get_to(p.adaptive_eta_lo);
    if (j.contains("adaptive_eta_hi")) j.at("adaptive_eta_hi").get_to(p.adaptive_eta_hi);
}

inline void to_json(json& j, const Rule& r) {
    j = json::object();
    if (r.model) j["model"] = *r.model;
    static constexpr std::array<const char*, 3> names{"roll", "pitch", "yaw"};
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const AngleBound& b = r.angles[axis];
        if (!b.bounded()) continue;
        json jb = json::object();
        if (std::isfinite(b.lo)) jb["lo"] = b.lo;
        if (std::isfinite(b.hi)) jb["hi"] = b.hi;
        j[names[axis]] = std::move(jb);
    }
    j["mean"] = r.mean;
    j["count"] = r.count;
    j["text"] = r.text();
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline json parse_json(const std::string& text, const std::string& what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw IoError("invalid JSON in " + what);
    return j;
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_json(buf.str(), path);
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("short write to " + path);
}

inline void write_json_file(const std::string& path, const json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

// One compact JSON document per line.
template <typename T>
void write_jsonl_file(const std::string& path, const std::vector<T>& items) {
    std::string text;
    for (const auto& item : items) {
        text += json(item).dump();
        text += '\n';
    }
    write_text_file(path, text);
}

inline std::vector<json> read_jsonl_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<json> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        lines.push_back(parse_json(line, path));
    }
    return lines;
}

struct ArchiveLine {
    std::size_t objective = 0;
    EvaluatedTestCase test;
};

inline void to_json(json& j, const ArchiveLine& line) {
    j = json{{"objective", line.objective}, {"test", line.test}};
}
inline void from_json(const json& j, ArchiveLine& line) {
    j.at("objective").get_to(line.objective);
    j.at("test").get_to(line.test);
}

inline std::string archive_jsonl_string(const Archive& archive) {
    std::string text;
    for (const auto& [objective, test] : archive.entries()) {
        text += json(ArchiveLine{objective, test}).dump();
        text += '\n';
    }
    return text;
}

inline void save_archive(const std::string& path, const Archive& archive) {
    write_text_file(path, archive_jsonl_string(archive));
}

inline Archive load_archive(const std::string& path, double epsilon) {
    Archive archive(epsilon);
    for (const json& j : read_jsonl_file(path)) {
        ArchiveLine line = j.get<ArchiveLine>();
        archive.restore(line.objective, std::move(line.test));
    }
    return archive;
}

inline void save_trace(const std::string& path, const std::vector<EvaluationRecord>& trace) {
    write_jsonl_file(path, trace);
}

inline std::vector<EvaluationRecord> load_trace(const std::string& path) {
    std::vector<EvaluationRecord> trace;
    for (const json& j : read_jsonl_file(path)) trace.push_back(j.get<EvaluationRecord>());
    return trace;
}

inline SyntheticSutConfig load_synthetic_config(const std::string& path) {
    try {
        SyntheticSutConfig cfg = load_json_file(path).get<SyntheticSutConfig>();
        cfg.validate();
        return cfg;
    } catch (const json::exception& e) {
        throw ConfigError("bad synthetic sut config " + path + ": " + e.what());
    }
}

}  // namespace kpsearch
