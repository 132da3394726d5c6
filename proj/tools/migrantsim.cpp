// migrantsim: hybrid DRAM-PCM memory simulator driver.

#include <cstdint>
#include <string>

#include "CLI11.hpp"
#include "migrant/experiment.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Trace-driven hybrid DRAM-PCM memory simulator"};
    app.require_subcommand(1);

    migrant::RunOptions run_opt;
    std::uint64_t seed = 0;

    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--config", run_opt.config_path, "Experiment config (JSON)")->required();
        sub->add_option("--out", run_opt.out_dir, "Output directory (overrides output_dir)");
        sub->add_option("--seed", seed, "Run a single seed instead of the configured list");
        sub->add_option("--jobs", run_opt.jobs, "Worker threads for independent runs")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "Run the configured schemes and write report.json / report.csv");
    add_run_flags(run);
    auto* ablate = app.add_subcommand("ablate", "Sweep MigrantStore knobs; one report per cell plus ablation.csv");
    add_run_flags(ablate);

    migrant::GenOptions gen_opt;
    std::string generator = "zipf";
    auto* gen = app.add_subcommand("gen", "Write a synthetic trace");
    gen->add_option("--config", gen_opt.config_path, "Take trace.synthetic from this config");
    gen->add_option("--out", gen_opt.out_path, "Trace file to write ('-' for stdout)");
    gen->add_option("--generator", generator, "zipf | loop | phased");
    gen->add_option("--footprint", gen_opt.spec.footprint_pages, "Footprint in 8 KB pages");
    gen->add_option("--records", gen_opt.spec.records, "Number of records");
    gen->add_option("--exponent", gen_opt.spec.zipf_exponent, "Zipf exponent");
    gen->add_option("--write-fraction", gen_opt.spec.write_fraction, "Fraction of writebacks");
    gen->add_option("--gap", gen_opt.spec.gap_cycles, "Mean inter-event gap per core, CPU cycles");
    gen->add_option("--cores", gen_opt.spec.num_cores, "Number of cores");
    gen->add_option("--phases", gen_opt.spec.phases, "Working-set phases (phased generator)");
    auto* gen_seed = gen->add_option("--seed", gen_opt.spec.seed, "Generator seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // Usage errors share the config-error exit code; --help exits 0.
        return app.exit(e) == 0 ? migrant::kExitOk : migrant::kExitConfig;
    }

    if (*run || *ablate) {
        if ((*run ? run : ablate)->count("--seed")) run_opt.seed = seed;
        return *run ? migrant::cmd_run(run_opt) : migrant::cmd_ablate(run_opt);
    }
    gen_opt.seed_set = gen_seed->count() > 0;
    return migrant::guarded([&] {
        gen_opt.spec.generator = migrant::parse_generator(generator);
        return migrant::cmd_gen(gen_opt);
    });
}
