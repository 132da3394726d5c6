#pragma once

// Report assembly: one record per scheme, normalized against pcm_base when
// that scheme ran. JSON layout is documented in docs/report.md.

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "migrant/config.hpp"
#include "migrant/metrics.hpp"
#include "migrant/schemes.hpp"

namespace migrant {

inline constexpr int kReportSchemaVersion = 1;

/// Float formatted to 6 significant digits.
inline std::string fmt6(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// JSON number rounded to 6 significant digits; non-finite becomes null.
inline Json json6(double v) {
    if (!std::isfinite(v)) return nullptr;
    return std::stod(fmt6(v));
}

/// Derived per-scheme figures that depend on the baseline.
struct SchemeSummary {
    const SchemeStats* stats = nullptr;
    std::optional<double> norm_perf;
    std::optional<double> norm_energy;
    double busy_banks_avg = 0;    // over the baseline's cycles, or own cycles without one
    Lifetime lifetime;            // at the baseline's execution time, or own
};

inline std::vector<SchemeSummary> summarize(const std::vector<SchemeStats>& runs, const SimConfig& cfg) {
    const SchemeStats* base = nullptr;
    for (const auto& r : runs)
        if (r.scheme == SchemeId::PcmBase) base = &r;
    std::vector<SchemeSummary> out;
    for (const auto& r : runs) {
        SchemeSummary s;
        s.stats = &r;
        const Cycle window = base ? base->exec_cycles : r.exec_cycles;
        if (base) {
            s.norm_perf = r.exec_cycles ? static_cast<double>(base->exec_cycles) / r.exec_cycles : 0.0;
            const auto be = base->energy.total();
            s.norm_energy = be ? static_cast<double>(r.energy.total()) / be : 0.0;
        }
        s.busy_banks_avg = busy_bank_average(r.busy_bank_cycles(), window);
        s.lifetime = worst_case_lifetime(r.wear, window, cfg.cpu_hz, cfg.endurance, cfg.lifetime_quantile);
        out.push_back(s);
    }
    return out;
}

inline bool has_baseline(const std::vector<SchemeStats>& runs) {
    for (const auto& r : runs)
        if (r.scheme == SchemeId::PcmBase) return true;
    return false;
}

inline Json scheme_json(const SchemeSummary& s) {
    const auto& r = *s.stats;
    Json devices = Json::array();
    for (const auto& d : r.devices)
        devices.push_back({{"name", d.name},
                           {"is_pcm", d.is_pcm},
                           {"busy_cycles", d.busy_cycles},
                           {"reads", d.counters.reads},
                           {"writes", d.counters.writes},
                           {"row_hits", d.counters.row_hits},
                           {"backpressure_events", d.counters.backpressure_events}});
    Json cdf = Json::array();
    if (!r.wear.empty())
        for (const auto& p : wear_cdf(r.wear)) cdf.push_back(Json::array({p.writes, json6(p.fraction)}));
    const auto& e = r.energy;
    return Json{{"scheme", std::string(scheme_name(r.scheme))},
                {"exec_cycles", r.exec_cycles},
                {"core_cycles", r.core_cycles},
                {"read_misses", r.read_misses},
                {"writebacks", r.writebacks},
                {"l2_misses", r.l2_misses()},
                {"dram_misses", r.dram_misses},
                {"dram_miss_rate", json6(r.dram_miss_rate())},
                {"migrations", r.migrations},
                {"migrations_per_l2_miss", json6(r.migrations_per_miss())},
                {"busy_bank_cycles", r.busy_bank_cycles()},
                {"busy_banks_avg", json6(s.busy_banks_avg)},
                {"devices", devices},
                {"energy_nj",
                 {{"pcm_dynamic", json6(pj_to_nj(e.pcm_dynamic))},
                  {"dram_dynamic", json6(pj_to_nj(e.dram_dynamic))},
                  {"sram_dynamic", json6(pj_to_nj(e.sram_dynamic))},
                  {"leakage", json6(pj_to_nj(e.leakage))},
                  {"software", json6(pj_to_nj(e.software))},
                  {"total", json6(e.total_nj())}}},
                {"energy_pj_total", e.total()},
                {"pcm_write_bytes", r.pcm_write_bytes()},
                {"pcm_writeback_bytes", r.pcm_writeback_bytes()},
                {"wear",
                 {{"touched_blocks", r.wear.touched_blocks()},
                  {"total_writes", r.wear.total_writes()},
                  {"quantile_max_writes", s.lifetime.max_writes},
                  {"lifetime_years", json6(s.lifetime.years)},
                  {"cdf", cdf}}},
                {"normalized_perf", s.norm_perf ? json6(*s.norm_perf) : Json(nullptr)},
                {"normalized_energy", s.norm_energy ? json6(*s.norm_energy) : Json(nullptr)}};
}

inline Json report_json(const std::vector<SchemeStats>& runs, const ExperimentConfig& cfg, std::uint64_t seed) {
    const bool base = has_baseline(runs);
    Json warnings = Json::array();
    if (!base) warnings.push_back("pcm_base did not run; normalized columns are null and busy-bank/lifetime use each scheme's own cycles");
    Json schemes = Json::array();
    for (const auto& s : summarize(runs, cfg.sim)) schemes.push_back(scheme_json(s));
    return Json{{"schema_version", kReportSchemaVersion}, {"seed", seed}, {"normalized", base}, {"warnings", warnings},
                {"config", resolved_json(cfg, seed)},    {"schemes", schemes}};
}

inline const std::vector<std::string>& csv_columns() {
    static const std::vector<std::string> cols = {
        "scheme",          "exec_cycles",        "read_misses",      "writebacks",        "dram_misses",      "dram_miss_rate",
        "migrations",      "migrations_per_l2_miss", "busy_bank_cycles", "busy_banks_avg",  "energy_pcm_nj",    "energy_dram_nj",
        "energy_sram_nj",  "energy_leakage_nj",  "energy_software_nj", "energy_total_nj", "pcm_write_bytes",  "pcm_writeback_bytes",
        "touched_blocks",  "quantile_max_writes", "lifetime_years",  "normalized_perf",   "normalized_energy"};
    return cols;
}

inline void write_csv(std::ostream& out, const std::vector<SchemeStats>& runs, const SimConfig& cfg) {
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << "\n";
    auto opt = [](const std::optional<double>& v) { return v ? fmt6(*v) : std::string(); };
    for (const auto& s : summarize(runs, cfg)) {
        const auto& r = *s.stats;
        const auto& e = r.energy;
        const std::vector<std::string> row = {std::string(scheme_name(r.scheme)),
                                              std::to_string(r.exec_cycles),
                                              std::to_string(r.read_misses),
                                              std::to_string(r.writebacks),
                                              std::to_string(r.dram_misses),
                                              fmt6(r.dram_miss_rate()),
                                              std::to_string(r.migrations),
                                              fmt6(r.migrations_per_miss()),
                                              std::to_string(r.busy_bank_cycles()),
                                              fmt6(s.busy_banks_avg),
                                              fmt6(pj_to_nj(e.pcm_dynamic)),
                                              fmt6(pj_to_nj(e.dram_dynamic)),
                                              fmt6(pj_to_nj(e.sram_dynamic)),
                                              fmt6(pj_to_nj(e.leakage)),
                                              fmt6(pj_to_nj(e.software)),
                                              fmt6(e.total_nj()),
                                              std::to_string(r.pcm_write_bytes()),
                                              std::to_string(r.pcm_writeback_bytes()),
                                              std::to_string(r.wear.touched_blocks()),
                                              std::to_string(s.lifetime.max_writes),
                                              fmt6(s.lifetime.years),
                                              opt(s.norm_perf),
                                              opt(s.norm_energy)};
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << "\n";
    }
}

}  // namespace migrant
