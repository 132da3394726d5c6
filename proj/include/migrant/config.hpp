#pragma once

// Experiment configuration: strict JSON loading (unknown keys are errors)
// and a resolved dump embedded in every report.

#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "migrant/schemes.hpp"

namespace migrant {

using Json = nlohmann::ordered_json;

struct TraceSource {
    std::optional<std::string> file;
    SyntheticSpec synthetic;
    bool synthetic_seed_set = false;  // otherwise the run seed is used
};

struct AblationAxes {
    std::vector<std::uint32_t> threshold{0, 8, 16, 64};
    std::vector<std::uint32_t> subblock_bytes{0, 128, 512};
    std::vector<Replacement> replacement{Replacement::RapidLru, Replacement::PerfectLru, Replacement::Random};
    std::vector<MigrateOn> migrate_on{MigrateOn::All, MigrateOn::WritesOnly};
};

struct ExperimentConfig {
    TraceSource trace;
    std::vector<SchemeId> schemes{std::begin(kAllSchemes), std::end(kAllSchemes)};
    std::vector<std::uint64_t> seeds{1};
    std::string output_dir = "out";
    SimConfig sim;
    AblationAxes ablate;
};

namespace detail {

class Section {
public:
    Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    /// Rejects keys that no getter asked about.
    void done() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key())) throw ConfigError(path_ + ": unknown key '" + it.key() + "'");
    }

    const Json* find(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    template <typename T>
    void get(const std::string& key, T& out) {
        const Json* v = find(key);
        if (!v) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!v->is_boolean()) throw ConfigError("");
            } else if constexpr (std::is_integral_v<T>) {
                if (!v->is_number_unsigned() || v->get<std::uint64_t>() > std::numeric_limits<T>::max()) throw ConfigError("");
            } else if constexpr (std::is_floating_point_v<T>) {
                if (!v->is_number()) throw ConfigError("");
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!v->is_string()) throw ConfigError("");
            }
            out = v->get<T>();
        } catch (const std::exception&) {
            throw ConfigError(path_ + "." + key + ": wrong type");
        }
    }

    std::string sub(const std::string& key) const { return path_ + "." + key; }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline std::uint32_t parse_subblock(const Json& v, const std::string& where) {
    if (v.is_string() && v.get<std::string>() == "none") return 0;
    if (v.is_number_unsigned()) return v.get<std::uint32_t>();
    throw ConfigError(where + ": expected a byte count or \"none\"");
}

inline Json subblock_json(std::uint32_t b) { return b ? Json(b) : Json("none"); }

inline void read_device(Section& parent, const std::string& key, DeviceGeometry& g) {
    const Json* v = parent.find(key);
    if (!v) return;
    Section s(*v, parent.sub(key));
    s.get("capacity_bytes", g.capacity);
    s.get("num_banks", g.num_banks);
    s.get("interleave", g.interleave);
    s.get("row_bytes", g.row_bytes);
    s.get("queue_depth", g.queue_depth);
    s.get("read_latency", g.read_latency);
    s.get("write_latency", g.write_latency);
    s.get("row_hit_fraction", g.row_hit_fraction);
    s.get("leakage_mw", g.leakage_mw);
    if (const Json* e = s.find("energy")) {
        Section es(*e, s.sub("energy"));
        es.get("read_miss", g.energy.read_miss);
        es.get("read_hit", g.energy.read_hit);
        es.get("write_miss", g.energy.write_miss);
        es.get("write_subblock", g.energy.write_subblock);
        es.get("write_hit", g.energy.write_hit);
        es.get("subblock_ref_bytes", g.energy.subblock_ref_bytes);
        es.done();
    }
    s.done();
    g.validate();
}

inline Json device_json(const DeviceGeometry& g) {
    return Json{{"capacity_bytes", g.capacity},
                {"num_banks", g.num_banks},
                {"interleave", g.interleave},
                {"row_bytes", g.row_bytes},
                {"queue_depth", g.queue_depth},
                {"read_latency", g.read_latency},
                {"write_latency", g.write_latency},
                {"row_hit_fraction", g.row_hit_fraction},
                {"leakage_mw", g.leakage_mw},
                {"energy",
                 {{"read_miss", g.energy.read_miss},
                  {"read_hit", g.energy.read_hit},
                  {"write_miss", g.energy.write_miss},
                  {"write_subblock", g.energy.write_subblock},
                  {"write_hit", g.energy.write_hit},
                  {"subblock_ref_bytes", g.energy.subblock_ref_bytes}}}};
}

inline void read_migrantstore(Section& s, MigrantStoreConfig& m) {
    s.get("capacity_bytes", m.capacity_bytes);
    s.get("threshold", m.threshold);
    if (const Json* v = s.find("subblock_bytes")) m.subblock_bytes = parse_subblock(*v, s.sub("subblock_bytes"));
    s.get("rapid_capacity", m.rapid_capacity);
    if (const Json* v = s.find("replacement")) {
        if (!v->is_string()) throw ConfigError(s.sub("replacement") + ": expected a string");
        m.replacement = parse_replacement(v->get<std::string>());
    }
    if (const Json* v = s.find("migrate_on")) {
        if (!v->is_string()) throw ConfigError(s.sub("migrate_on") + ": expected a string");
        m.migrate_on = parse_migrate_on(v->get<std::string>());
    }
    s.get("count_writebacks", m.count_writebacks);
    s.get("software_cycles", m.software_cycles);
    s.get("software_nj", m.software_nj);
    s.get("validate_data", m.validate_data);
    s.done();
    m.validate();
}

template <typename T, typename F>
std::vector<T> read_list(const Json& v, const std::string& where, F&& conv) {
    if (!v.is_array() || v.empty()) throw ConfigError(where + ": expected a non-empty array");
    std::vector<T> out;
    for (const auto& e : v) out.push_back(conv(e));
    return out;
}

inline std::string as_string(const Json& v, const std::string& where) {
    if (!v.is_string()) throw ConfigError(where + ": expected a string");
    return v.get<std::string>();
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& root) {
    using detail::Section;
    ExperimentConfig c;
    Section top(root, "config");

    if (const Json* t = top.find("trace")) {
        Section ts(*t, "trace");
        if (const Json* f = ts.find("file")) c.trace.file = detail::as_string(*f, "trace.file");
        if (const Json* syn = ts.find("synthetic")) {
            if (c.trace.file) throw ConfigError("trace: give either file or synthetic, not both");
            Section ss(*syn, "trace.synthetic");
            auto& sp = c.trace.synthetic;
            if (const Json* g = ss.find("generator")) sp.generator = parse_generator(detail::as_string(*g, "trace.synthetic.generator"));
            ss.get("footprint_pages", sp.footprint_pages);
            ss.get("zipf_exponent", sp.zipf_exponent);
            ss.get("write_fraction", sp.write_fraction);
            ss.get("records", sp.records);
            ss.get("gap_cycles", sp.gap_cycles);
            ss.get("num_cores", sp.num_cores);
            ss.get("phases", sp.phases);
            if (ss.find("seed")) {
                c.trace.synthetic_seed_set = true;
                ss.get("seed", sp.seed);
            }
            ss.done();
            detail::validate(sp);
        }
        ts.done();
    }
    if (const Json* v = top.find("schemes")) {
        c.schemes = detail::read_list<SchemeId>(*v, "schemes", [](const Json& e) { return parse_scheme(detail::as_string(e, "schemes")); });
        std::set<SchemeId> uniq(c.schemes.begin(), c.schemes.end());
        if (uniq.size() != c.schemes.size()) throw ConfigError("schemes: duplicate entry");
    }
    if (const Json* v = top.find("seeds")) {
        c.seeds = detail::read_list<std::uint64_t>(*v, "seeds", [](const Json& e) {
            if (!e.is_number_unsigned()) throw ConfigError("seeds: expected unsigned integers");
            return e.get<std::uint64_t>();
        });
    }
    top.get("output_dir", c.output_dir);

    auto& sim = c.sim;
    if (const Json* v = top.find("devices")) {
        Section ds(*v, "devices");
        detail::read_device(ds, "pcm", sim.pcm);
        detail::read_device(ds, "base_dram", sim.base_dram);
        detail::read_device(ds, "ms_dram", sim.ms_dram);
        detail::read_device(ds, "hwc_seq_dram", sim.hwc_seq_dram);
        detail::read_device(ds, "hwc_par_dram", sim.hwc_par_dram);
        ds.done();
        sim.pcm.is_pcm = true;
    }
    if (const Json* v = top.find("migrantstore")) {
        Section ms(*v, "migrantstore");
        detail::read_migrantstore(ms, sim.migrantstore);
    }
    if (const Json* v = top.find("l3")) {
        Section ls(*v, "l3");
        ls.get("capacity_bytes", sim.l3.capacity);
        ls.get("block_bytes", sim.l3.block_bytes);
        ls.get("associativity", sim.l3.associativity);
        ls.get("hit_latency", sim.l3.hit_latency);
        ls.get("access_energy_nj", sim.l3.access_energy_nj);
        ls.get("leakage_mw", sim.l3.leakage_mw);
        ls.done();
        sim.l3.validate();
    }
    if (const Json* v = top.find("hw_cache")) {
        Section hs(*v, "hw_cache");
        std::uint64_t cap = sim.hw_cache_seq.capacity;
        std::uint32_t assoc = sim.hw_cache_seq.associativity;
        std::uint32_t sub = sim.hw_cache_seq.subblock_bytes;
        hs.get("capacity_bytes", cap);
        hs.get("associativity", assoc);
        if (const Json* s = hs.find("subblock_bytes")) sub = detail::parse_subblock(*s, "hw_cache.subblock_bytes");
        hs.get("seq_tag_latency", sim.hw_cache_seq.tag_latency);
        hs.get("par_tag_latency", sim.hw_cache_par.tag_latency);
        hs.done();
        for (auto* h : {&sim.hw_cache_seq, &sim.hw_cache_par}) {
            h->capacity = cap;
            h->associativity = assoc;
            h->subblock_bytes = sub;
            h->validate();
        }
    }
    if (const Json* v = top.find("row_buffers")) {
        Section rs(*v, "row_buffers");
        rs.get("count", sim.row_buffers.count);
        rs.get("bytes", sim.row_buffers.bytes);
        rs.done();
    }
    if (const Json* v = top.find("os_quanta")) {
        Section os(*v, "os_quanta");
        os.get("capacity_bytes", sim.os_quanta.capacity_bytes);
        os.get("quantum_cycles", sim.os_quanta.quantum_cycles);
        os.get("write_threshold", sim.os_quanta.write_threshold);
        os.done();
    }
    if (const Json* v = top.find("system")) {
        Section ss(*v, "system");
        ss.get("cpu_hz", sim.cpu_hz);
        ss.get("flush_cycles_per_burst", sim.flush_cycles_per_burst);
        ss.get("rapid_insert_nj", sim.rapid_insert_nj);
        ss.get("endurance", sim.endurance);
        ss.get("lifetime_quantile", sim.lifetime_quantile);
        ss.done();
        if (!(sim.cpu_hz > 0)) throw ConfigError("system.cpu_hz must be > 0");
        if (!(sim.lifetime_quantile > 0 && sim.lifetime_quantile <= 1)) throw ConfigError("system.lifetime_quantile must be in (0,1]");
        if (sim.endurance < 0) throw ConfigError("system.endurance must be >= 0");
    }
    if (const Json* v = top.find("ablate")) {
        Section as(*v, "ablate");
        auto& a = c.ablate;
        if (const Json* l = as.find("threshold"))
            a.threshold = detail::read_list<std::uint32_t>(*l, "ablate.threshold", [](const Json& e) {
                if (!e.is_number_unsigned()) throw ConfigError("ablate.threshold: expected unsigned integers");
                return e.get<std::uint32_t>();
            });
        if (const Json* l = as.find("subblock_bytes"))
            a.subblock_bytes = detail::read_list<std::uint32_t>(*l, "ablate.subblock_bytes",
                                                                [](const Json& e) { return detail::parse_subblock(e, "ablate.subblock_bytes"); });
        if (const Json* l = as.find("replacement"))
            a.replacement = detail::read_list<Replacement>(
                *l, "ablate.replacement", [](const Json& e) { return parse_replacement(detail::as_string(e, "ablate.replacement")); });
        if (const Json* l = as.find("migrate_on"))
            a.migrate_on = detail::read_list<MigrateOn>(
                *l, "ablate.migrate_on", [](const Json& e) { return parse_migrate_on(detail::as_string(e, "ablate.migrate_on")); });
        as.done();
    }
    top.done();
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    Json root;
    try {
        root = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path + "': " + e.what());
    }
    return parse_config(root);
}

/// The fully-resolved configuration of one run, defaults included.
inline Json resolved_json(const ExperimentConfig& c, std::uint64_t seed) {
    const auto& s = c.sim;
    Json trace;
    if (c.trace.file) {
        trace["file"] = *c.trace.file;
    } else {
        const auto& sp = c.trace.synthetic;
        trace["synthetic"] = {{"generator", std::string(generator_name(sp.generator))},
                              {"footprint_pages", sp.footprint_pages},
                              {"zipf_exponent", sp.zipf_exponent},
                              {"write_fraction", sp.write_fraction},
                              {"records", sp.records},
                              {"gap_cycles", sp.gap_cycles},
                              {"num_cores", sp.num_cores},
                              {"phases", sp.phases},
                              {"seed", c.trace.synthetic_seed_set ? sp.seed : seed}};
    }
    Json schemes = Json::array();
    for (auto id : c.schemes) schemes.push_back(std::string(scheme_name(id)));
    const auto& m = s.migrantstore;
    Json ab = {{"threshold", c.ablate.threshold}, {"subblock_bytes", Json::array()}, {"replacement", Json::array()}, {"migrate_on", Json::array()}};
    for (auto b : c.ablate.subblock_bytes) ab["subblock_bytes"].push_back(detail::subblock_json(b));
    for (auto r : c.ablate.replacement) ab["replacement"].push_back(std::string(replacement_name(r)));
    for (auto r : c.ablate.migrate_on) ab["migrate_on"].push_back(std::string(migrate_on_name(r)));
    return Json{
        {"trace", trace},
        {"schemes", schemes},
        {"seeds", Json::array({seed})},
        {"output_dir", c.output_dir},
        {"devices",
         {{"pcm", detail::device_json(s.pcm)},
          {"base_dram", detail::device_json(s.base_dram)},
          {"ms_dram", detail::device_json(s.ms_dram)},
          {"hwc_seq_dram", detail::device_json(s.hwc_seq_dram)},
          {"hwc_par_dram", detail::device_json(s.hwc_par_dram)}}},
        {"migrantstore",
         {{"capacity_bytes", m.capacity_bytes},
          {"threshold", m.threshold},
          {"subblock_bytes", detail::subblock_json(m.subblock_bytes)},
          {"rapid_capacity", m.rapid_capacity},
          {"replacement", std::string(replacement_name(m.replacement))},
          {"migrate_on", std::string(migrate_on_name(m.migrate_on))},
          {"count_writebacks", m.count_writebacks},
          {"software_cycles", m.software_cycles},
          {"software_nj", m.software_nj},
          {"validate_data", m.validate_data}}},
        {"l3",
         {{"capacity_bytes", s.l3.capacity},
          {"block_bytes", s.l3.block_bytes},
          {"associativity", s.l3.associativity},
          {"hit_latency", s.l3.hit_latency},
          {"access_energy_nj", s.l3.access_energy_nj},
          {"leakage_mw", s.l3.leakage_mw}}},
        {"hw_cache",
         {{"capacity_bytes", s.hw_cache_seq.capacity},
          {"associativity", s.hw_cache_seq.associativity},
          {"subblock_bytes", detail::subblock_json(s.hw_cache_seq.subblock_bytes)},
          {"seq_tag_latency", s.hw_cache_seq.tag_latency},
          {"par_tag_latency", s.hw_cache_par.tag_latency}}},
        {"row_buffers", {{"count", s.row_buffers.count}, {"bytes", s.row_buffers.bytes}}},
        {"os_quanta",
         {{"capacity_bytes", s.os_quanta.capacity_bytes},
          {"quantum_cycles", s.os_quanta.quantum_cycles},
          {"write_threshold", s.os_quanta.write_threshold}}},
        {"system",
         {{"cpu_hz", s.cpu_hz},
          {"flush_cycles_per_burst", s.flush_cycles_per_burst},
          {"rapid_insert_nj", s.rapid_insert_nj},
          {"endurance", s.endurance},
          {"lifetime_quantile", s.lifetime_quantile}}},
        {"ablate", ab},
    };
}

}  // namespace migrant
