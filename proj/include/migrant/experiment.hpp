#pragma once

// Experiment orchestration behind the CLI: run, ablate and gen.

#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "migrant/config.hpp"
#include "migrant/report.hpp"
#include "migrant/schemes.hpp"
#include "migrant/trace.hpp"

namespace migrant {

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitTrace = 2, kExitInvariant = 3 };

inline Trace load_trace(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.trace.file) {
        std::ifstream in(*cfg.trace.file);
        if (!in) throw TraceError("cannot read trace '" + *cfg.trace.file + "'");
        return parse_trace(in, cfg.sim.pcm.capacity);
    }
    SyntheticSpec sp = cfg.trace.synthetic;
    if (!cfg.trace.synthetic_seed_set) sp.seed = seed;
    Trace t = generate(sp);
    for (const auto& r : t)
        if (r.addr >= cfg.sim.pcm.capacity) throw TraceError("synthetic footprint exceeds PCM capacity");
    return t;
}

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads. The first
/// exception is rethrown after all workers stop.
template <typename F>
void parallel_for(std::size_t n, unsigned jobs, F&& fn) {
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
    if (jobs <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const auto i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

/// pcm_base runs first; the rest may run concurrently. Results keep the
/// configured scheme order.
inline std::vector<SchemeStats> run_schemes(const std::vector<SchemeId>& schemes, const Trace& trace, const SimConfig& sim,
                                            std::uint64_t seed, unsigned jobs) {
    std::vector<SchemeStats> out(schemes.size());
    std::vector<std::size_t> rest;
    for (std::size_t i = 0; i < schemes.size(); ++i) {
        if (schemes[i] == SchemeId::PcmBase) {
            out[i] = run_scheme(schemes[i], trace, sim, seed);
        } else {
            rest.push_back(i);
        }
    }
    parallel_for(rest.size(), jobs, [&](std::size_t k) { out[rest[k]] = run_scheme(schemes[rest[k]], trace, sim, seed); });
    return out;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + p.string() + "'");
    out << text;
    if (!out) throw ConfigError("write failed for '" + p.string() + "'");
}

inline void write_reports(const std::filesystem::path& dir, const std::vector<SchemeStats>& runs, const ExperimentConfig& cfg,
                          std::uint64_t seed) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir.string() + "'");
    write_text(dir / "report.json", report_json(runs, cfg, seed).dump(2) + "\n");
    std::ostringstream csv;
    write_csv(csv, runs, cfg.sim);
    write_text(dir / "report.csv", csv.str());
}

/// Maps exceptions to exit codes and prints one diagnostic line.
template <typename F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const TraceError& e) {
        std::cerr << "trace error: " << e.what() << "\n";
        return kExitTrace;
    } catch (const InvariantError& e) {
        std::cerr << "invariant violated: " << e.what() << "\n";
        return kExitInvariant;
    }
}

struct RunOptions {
    std::string config_path;
    std::string out_dir;  // empty: config output_dir
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
};

inline std::vector<std::uint64_t> seeds_of(const ExperimentConfig& cfg, const RunOptions& opt) {
    return opt.seed ? std::vector<std::uint64_t>{*opt.seed} : cfg.seeds;
}

inline std::filesystem::path seed_dir(const std::filesystem::path& root, std::size_t nseeds, std::uint64_t seed) {
    return nseeds > 1 ? root / ("seed_" + std::to_string(seed)) : root;
}

inline int cmd_run(const RunOptions& opt) {
    return guarded([&] {
        auto cfg = load_config(opt.config_path);
        if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
        const auto seeds = seeds_of(cfg, opt);
        bool warned = false;
        for (auto seed : seeds) {
            const Trace trace = load_trace(cfg, seed);
            const auto runs = run_schemes(cfg.schemes, trace, cfg.sim, seed, opt.jobs);
            if (!has_baseline(runs) && !warned) {
                std::cerr << "warning: pcm_base not in schemes; reporting absolute values only\n";
                warned = true;
            }
            write_reports(seed_dir(cfg.output_dir, seeds.size(), seed), runs, cfg, seed);
        }
        return static_cast<int>(kExitOk);
    });
}

struct AblationCell {
    std::uint32_t threshold = 16;
    std::uint32_t subblock_bytes = 512;
    Replacement replacement = Replacement::RapidLru;
    MigrateOn migrate_on = MigrateOn::All;
};

inline std::vector<AblationCell> ablation_cells(const AblationAxes& a) {
    std::vector<AblationCell> out;
    for (auto t : a.threshold)
        for (auto s : a.subblock_bytes)
            for (auto r : a.replacement)
                for (auto m : a.migrate_on) out.push_back({t, s, r, m});
    return out;
}

inline int cmd_ablate(const RunOptions& opt) {
    return guarded([&] {
        auto cfg = load_config(opt.config_path);
        if (!opt.out_dir.empty()) cfg.output_dir = opt.out_dir;
        const auto seeds = seeds_of(cfg, opt);
        const auto cells = ablation_cells(cfg.ablate);
        for (auto seed : seeds) {
            const std::filesystem::path root = seed_dir(cfg.output_dir, seeds.size(), seed);
            const Trace trace = load_trace(cfg, seed);
            const SchemeStats base = run_scheme(SchemeId::PcmBase, trace, cfg.sim, seed);

            std::vector<ExperimentConfig> cell_cfg(cells.size(), cfg);
            std::vector<std::vector<SchemeStats>> results(cells.size());
            for (std::size_t i = 0; i < cells.size(); ++i) {
                auto& m = cell_cfg[i].sim.migrantstore;
                m.threshold = cells[i].threshold;
                m.subblock_bytes = cells[i].subblock_bytes;
                m.replacement = cells[i].replacement;
                m.migrate_on = cells[i].migrate_on;
                m.validate();
                cell_cfg[i].schemes = {SchemeId::PcmBase, SchemeId::MigrantStore};
            }
            parallel_for(cells.size(), opt.jobs, [&](std::size_t i) {
                results[i] = {base, run_scheme(SchemeId::MigrantStore, trace, cell_cfg[i].sim, seed)};
            });

            std::ostringstream summary;
            summary << "cell,threshold,subblock_bytes,replacement,migrate_on,exec_cycles,normalized_perf,normalized_energy,"
                       "dram_miss_rate,migrations_per_l2_miss,pcm_writeback_bytes,quantile_max_writes,lifetime_years\n";
            for (std::size_t i = 0; i < cells.size(); ++i) {
                char name[32];
                std::snprintf(name, sizeof name, "cell_%03zu", i);
                write_reports(root / name, results[i], cell_cfg[i], seed);
                const auto sums = summarize(results[i], cell_cfg[i].sim);
                const auto& ms = sums[1];
                const auto& c = cells[i];
                summary << name << "," << c.threshold << "," << (c.subblock_bytes ? std::to_string(c.subblock_bytes) : "none") << ","
                        << replacement_name(c.replacement) << "," << migrate_on_name(c.migrate_on) << "," << ms.stats->exec_cycles << ","
                        << fmt6(*ms.norm_perf) << "," << fmt6(*ms.norm_energy) << "," << fmt6(ms.stats->dram_miss_rate()) << ","
                        << fmt6(ms.stats->migrations_per_miss()) << "," << ms.stats->pcm_writeback_bytes() << "," << ms.lifetime.max_writes
                        << "," << fmt6(ms.lifetime.years) << "\n";
            }
            std::filesystem::create_directories(root);
            write_text(root / "ablation.csv", summary.str());
        }
        return static_cast<int>(kExitOk);
    });
}

struct GenOptions {
    std::string config_path;  // optional: trace.synthetic section of a config
    std::string out_path;
    SyntheticSpec spec;
    bool seed_set = false;
};

inline int cmd_gen(const GenOptions& opt) {
    return guarded([&] {
        SyntheticSpec sp = opt.spec;
        if (!opt.config_path.empty()) {
            const auto cfg = load_config(opt.config_path);
            if (cfg.trace.file) throw ConfigError("gen: config names a trace file, not a synthetic spec");
            const auto seed = sp.seed;
            sp = cfg.trace.synthetic;
            if (opt.seed_set || !cfg.trace.synthetic_seed_set) sp.seed = opt.seed_set ? seed : cfg.seeds.front();
        }
        const Trace t = generate(sp);
        if (opt.out_path.empty() || opt.out_path == "-") {
            serialize_trace(std::cout, t);
            return static_cast<int>(kExitOk);
        }
        std::ofstream out(opt.out_path, std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + opt.out_path + "'");
        serialize_trace(out, t);
        if (!out) throw ConfigError("write failed for '" + opt.out_path + "'");
        return static_cast<int>(kExitOk);
    });
}

}  // namespace migrant
