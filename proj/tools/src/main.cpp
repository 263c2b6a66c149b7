#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "config.hpp"

using namespace drflow;
using namespace drflow::cli;

namespace {

// Field-level overrides shared by every subcommand. Only flags the user
// actually passed are applied on top of the config file.
struct Overrides {
    std::string config_path;

    void attach(CLI::App* app, RunConfig& cfg) {
        app->add_option("--config", config_path, "JSON configuration file");
        app->add_option("--out", cfg.out, "output directory");
        app->add_option("--seed", cfg.seed, "base RNG seed");
        app->add_option("--workers", cfg.workers, "worker threads (0 = hardware)");
        app->add_option("--a", cfg.a, "continuous jump rate a");
        app->add_option("--alpha", cfg.alpha, "discrete renewal rate alpha");
        app->add_option("--h", cfg.h, "lattice step (1/h integral)");
        app->add_option("--x-max", cfg.x_max, "grid upper end");
        app->add_option("--T", cfg.T, "continuous horizon");
        app->add_option("--steps", cfg.steps, "discrete steps");
        app->add_option("--k-list", cfg.k_list, "scaling parameters k");
        app->add_option("--t-list", cfg.t_list, "check times");
        app->add_option("--n-paths", cfg.n_paths, "Monte Carlo paths");
        app->add_option("--q", cfg.q, "offspring weights q_1 q_2 ...");
        app->add_option("--initial-kind", cfg.initial_kind,
                        "dirac | two_atom | exponential | lattice");
        app->add_option("--p", cfg.p, "delta_0 weight of the initial mixture");
        app->add_option("--x0", cfg.x0, "initial atom position");
        app->add_option("--lambda", cfg.lambda, "initial exponential rate");
        app->add_option("--p-grid", cfg.p_grid, "phase scan grid");
        app->add_option("--epsilon-f", cfg.epsilon_f, "phase threshold");
        app->add_option("--picard-iters", cfg.picard_iters, "Picard iterations");
        app->add_option("--start-sites", cfg.start_sites, "semigroup start sites");
        app->add_option("--support-cap", cfg.support_cap, "exact transport support cap");
        app->add_flag("--event-log", cfg.event_log, "write the per-path event log");
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Derrida-Retaux measure-flow engine"};
    app.require_subcommand(1);

    RunConfig cfg;
    Overrides overrides;

    auto* discrete = app.add_subcommand("discrete", "discrete DR trajectory");
    auto* cdr = app.add_subcommand("cdr", "continuous flow: march + Picard + residuals");
    auto* paths = app.add_subcommand("paths", "path simulators + martingale report");
    auto* scaling = app.add_subcommand("scaling", "rate-theorem verification");
    auto* phase = app.add_subcommand("phase", "phase scan over the delta_0 weight");
    auto* semigroup = app.add_subcommand("semigroup", "transition semigroup checks");
    for (auto* sub : {discrete, cdr, paths, scaling, phase, semigroup}) {
        overrides.attach(sub, cfg);
    }

    CLI11_PARSE(app, argc, argv);

    auto* active = app.get_subcommands().front();
    try {
        // precedence: defaults < config file < explicit flags < DRFLOW_OUT
        RunConfig from_file = load_config(overrides.config_path);
        RunConfig merged = from_file;
        for (const CLI::Option* opt : active->get_options()) {
            (void)opt;
        }
        // CLI11 already wrote parsed flags into cfg; copy the fields the
        // user actually set over the file values.
        auto touched = [&](const std::string& name) {
            return active->count(name) > 0;
        };
        if (touched("--out")) merged.out = cfg.out;
        if (touched("--seed")) merged.seed = cfg.seed;
        if (touched("--workers")) merged.workers = cfg.workers;
        if (touched("--a")) merged.a = cfg.a;
        if (touched("--alpha")) merged.alpha = cfg.alpha;
        if (touched("--h")) merged.h = cfg.h;
        if (touched("--x-max")) merged.x_max = cfg.x_max;
        if (touched("--T")) merged.T = cfg.T;
        if (touched("--steps")) merged.steps = cfg.steps;
        if (touched("--k-list")) merged.k_list = cfg.k_list;
        if (touched("--t-list")) merged.t_list = cfg.t_list;
        if (touched("--n-paths")) merged.n_paths = cfg.n_paths;
        if (touched("--q")) merged.q = cfg.q;
        if (touched("--initial-kind")) merged.initial_kind = cfg.initial_kind;
        if (touched("--p")) merged.p = cfg.p;
        if (touched("--x0")) merged.x0 = cfg.x0;
        if (touched("--lambda")) merged.lambda = cfg.lambda;
        if (touched("--p-grid")) merged.p_grid = cfg.p_grid;
        if (touched("--epsilon-f")) merged.epsilon_f = cfg.epsilon_f;
        if (touched("--picard-iters")) merged.picard_iters = cfg.picard_iters;
        if (touched("--start-sites")) merged.start_sites = cfg.start_sites;
        if (touched("--support-cap")) merged.support_cap = cfg.support_cap;
        if (touched("--event-log")) merged.event_log = cfg.event_log;

        if (const char* env_out = std::getenv("DRFLOW_OUT")) merged.out = env_out;

        merged.validate();

        if (active == discrete) return cmd_discrete(merged);
        if (active == cdr) return cmd_cdr(merged);
        if (active == paths) return cmd_paths(merged);
        if (active == scaling) return cmd_scaling(merged);
        if (active == phase) return cmd_phase(merged);
        if (active == semigroup) return cmd_semigroup(merged);
        return kExitConfigError;
    } catch (const tail_overflow_error& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumericalAbort;
    } catch (const numeric_error& e) {
        std::cerr << "numerical abort: " << e.what() << "\n";
        return kExitNumericalAbort;
    } catch (const grid_error& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfigError;
    }
}
