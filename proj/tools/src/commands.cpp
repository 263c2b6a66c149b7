#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "drflow/io.hpp"
#include "drflow/mc_sim.hpp"
#include "drflow/scaling.hpp"
#include "drflow/semigroup.hpp"
#include "drflow/wasserstein.hpp"

namespace drflow::cli {

namespace {

namespace fs = std::filesystem;
using io::format_double;

fs::path prepare_out(const RunConfig& config, const std::string& command) {
    const fs::path dir(config.out);
    fs::create_directories(dir);
    write_manifest(config, command, dir);
    return dir;
}

void write_gnuplot(const fs::path& dir, const std::string& name, const std::string& body) {
    std::ofstream os(dir / (name + ".gp"));
    os << "set datafile separator ','\n"
       << "set key autotitle columnhead\n"
       << body;
}

} // namespace

int cmd_discrete(const RunConfig& config) {
    const fs::path dir = prepare_out(config, "discrete");
    const DiscreteModel model = config.discrete_model();
    const auto trajectory = evolve(model, static_cast<std::size_t>(config.steps));
    const auto proxy = free_energy_proxy(trajectory, model);

    io::CsvWriter csv(dir / "trajectory.csv",
                      {"n", "moment1", "moment2", "proxy", "sustainability", "mass_at_zero",
                       "overflow"});
    bool gate_ok = true;
    const double growth1 = 1.0 + model.alpha * model.q.m1();
    const double growth2 = 1.0 + 2.0 * model.alpha * model.q.m1() + model.alpha * model.q.m2();
    for (std::size_t n = 0; n < trajectory.size(); ++n) {
        const GridMeasure& mu = trajectory[n];
        csv.row({std::to_string(n), format_double(moment(mu, 1)), format_double(moment(mu, 2)),
                 format_double(proxy[n]), format_double(sustainability(mu)),
                 format_double(mu.mass_at(0)), format_double(mu.overflow())});
        if (n > 0) {
            if (moment(mu, 1) > growth1 * moment(trajectory[n - 1], 1) + 1e-8) gate_ok = false;
            if (moment(mu, 2) > growth2 * moment(trajectory[n - 1], 2) + 1e-8) gate_ok = false;
            if (proxy[n] > proxy[n - 1] + 1e-9) gate_ok = false;
        }
    }
    write_gnuplot(dir, "trajectory",
                  "set logscale y\nplot 'trajectory.csv' using 1:4 with lines, "
                  "'trajectory.csv' using 1:5 with lines\n");
    if (!gate_ok) {
        std::cerr << "discrete: moment or proxy monotonicity gate failed\n";
        return kExitGateFailure;
    }
    std::cout << "discrete: " << trajectory.size() - 1 << " steps, final proxy "
              << format_double(proxy.back()) << "\n";
    return kExitOk;
}

int cmd_cdr(const RunConfig& config) {
    const fs::path dir = prepare_out(config, "cdr");
    const CdrModel model = config.cdr_model();
    const MeasureFlow flow = march_solve(model);
    const auto times = config.resolved_check_times();

    io::CsvWriter csv(dir / "flow.csv", {"t", "moment1", "moment2", "mass_at_zero", "total_mass"});
    for (std::size_t i = 0; i < flow.slice_count(); ++i) {
        const GridMeasure& mu = flow.slice(i);
        csv.row({format_double(static_cast<double>(i) * flow.delta()),
                 format_double(moment(mu, 1)), format_double(moment(mu, 2)),
                 format_double(mu.mass_at(0)), format_double(mu.total_mass())});
    }
    write_flow_checkpoint(flow, dir / "flow.bin");

    const auto suite = default_test_suite();
    const auto residuals = form_residuals(flow, suite, times);
    io::CsvWriter rcsv(dir / "residuals.csv",
                       {"f", "t", "differential_form", "shift_mild_form", "exponential_form"});
    for (const auto& row : residuals.rows) {
        rcsv.row({row.f_name, format_double(row.t), format_double(row.differential_form),
                  format_double(row.shift_mild_form), format_double(row.exponential_form)});
    }

    bool gate_ok = residuals.max_mass_residual <= 1e-6;

    // cross-method agreement at the last check time
    const double t_check = times.back();
    const GridMeasure via_picard = picard_solve(model, t_check, config.picard_iters);
    TransportOptions opt;
    opt.support_cap = config.support_cap;
    opt.want_plan = false;
    opt.want_dual = false;
    double cross = 0.0;
    bool cross_upper = false;
    try {
        cross = exact_w(via_picard, flow.slice_at(t_check), opt).value;
    } catch (const support_cap_error&) {
        cross = upper_w(via_picard, flow.slice_at(t_check));
        cross_upper = true;
    }
    const double tail = picard_tail_bound(model.a, model.q.m1(), t_check, config.picard_iters);
    const double cross_budget = 5.0 * (flow.delta() + tail);
    if (cross > cross_budget) gate_ok = false;

    io::CsvWriter scsv(dir / "summary.csv", {"quantity", "value"});
    scsv.row({"max_form_residual", format_double(residuals.max_form_residual)});
    scsv.row({"max_mass_residual", format_double(residuals.max_mass_residual)});
    scsv.row({"cross_method_w", format_double(cross)});
    scsv.row({"cross_method_budget", format_double(cross_budget)});
    scsv.row({"cross_method_upper_bound_used", cross_upper ? "1" : "0"});
    write_gnuplot(dir, "flow", "plot 'flow.csv' using 1:2 with lines\n");

    if (!gate_ok) {
        std::cerr << "cdr: mass or cross-method gate failed\n";
        return kExitGateFailure;
    }
    std::cout << "cdr: " << flow.slice_count() << " slices, max mass residual "
              << format_double(residuals.max_mass_residual) << ", cross-method W "
              << format_double(cross) << "\n";
    return kExitOk;
}

int cmd_paths(const RunConfig& config) {
    const fs::path dir = prepare_out(config, "paths");
    const CdrModel model = config.cdr_model();
    const MeasureFlow flow = march_solve(model);
    const auto times = config.resolved_check_times();

    const auto ensemble =
        simulate_cdr_ensemble(flow, config.n_paths, config.seed, config.workers);

    io::CsvWriter csv(dir / "ensemble_summary.csv",
                      {"t", "mean", "var", "mass_at_zero_fraction"});
    bool gate_ok = true;
    for (double t : times) {
        double mean = 0.0, m2 = 0.0, at_zero = 0.0;
        for (const auto& path : ensemble.paths) {
            const double x = continuous_state(path, t);
            mean += x;
            m2 += x * x;
            if (x == 0.0) at_zero += 1.0;
        }
        const auto n = static_cast<double>(ensemble.paths.size());
        mean /= n;
        m2 /= n;
        csv.row({format_double(t), format_double(mean), format_double(m2 - mean * mean),
                 format_double(at_zero / n)});

        // marginal against the deterministic flow
        const GridMeasure empirical = empirical_measure(ensemble, t, model.h);
        const double w = upper_w(empirical, flow.slice_at(t));
        if (w > 0.02 + 2.0 * model.h + flow.delta() + 4.0 / std::sqrt(n)) gate_ok = false;
    }

    const auto suite = default_test_suite();
    const auto report = martingale_residual(ensemble, flow, suite, times, config.workers);
    io::CsvWriter mcsv(dir / "martingale.csv", {"f", "t", "mean", "stderr", "flagged"});
    for (const auto& row : report.rows) {
        mcsv.row({row.f_name, format_double(row.time), format_double(row.mean),
                  format_double(row.stderr_), row.flagged ? "1" : "0"});
    }
    io::CsvWriter ccsv(dir / "martingale_corr.csv",
                       {"f", "t", "s", "correlation", "threshold", "flagged"});
    for (const auto& row : report.corr_rows) {
        ccsv.row({row.f_name, format_double(row.t), format_double(row.s),
                  format_double(row.correlation), format_double(row.threshold),
                  row.flagged ? "1" : "0"});
    }
    if (report.any_flagged()) gate_ok = false;

    if (config.event_log) {
        io::CsvWriter ecsv(dir / "events.csv", {"path", "x0", "time", "size"});
        for (std::size_t p = 0; p < ensemble.paths.size(); ++p) {
            const auto& path = ensemble.paths[p];
            if (path.jumps.empty()) {
                ecsv.row({std::to_string(p), format_double(path.x0), "", ""});
            }
            for (const auto& e : path.jumps) {
                ecsv.row({std::to_string(p), format_double(path.x0), format_double(e.time),
                          format_double(e.size)});
            }
        }
    }
    write_gnuplot(dir, "ensemble", "plot 'ensemble_summary.csv' using 1:2 with linespoints\n");

    if (!gate_ok) {
        std::cerr << "paths: marginal or martingale gate failed\n";
        return kExitGateFailure;
    }
    std::cout << "paths: " << ensemble.paths.size() << " paths, no flags\n";
    return kExitOk;
}

int cmd_scaling(const RunConfig& config) {
    const fs::path dir = prepare_out(config, "scaling");
    const CdrModel model = config.cdr_model();
    const MeasureFlow flow = march_solve(model);
    TransportOptions opt;
    opt.support_cap = config.support_cap;
    const ScalingReport report =
        verify_rate(model, config.k_list, config.t_list, flow, opt, config.workers);

    io::CsvWriter csv(dir / "scaling.csv",
                      {"k", "t", "measured_w", "bound", "budget", "vacuous", "used_upper",
                       "pass"});
    for (const auto& row : report.rows) {
        csv.row({std::to_string(row.k), format_double(row.t), format_double(row.measured),
                 format_double(row.bound), format_double(row.budget), row.vacuous ? "1" : "0",
                 row.used_upper ? "1" : "0", row.pass ? "1" : "0"});
    }
    io::CsvWriter fcsv(dir / "slopes.csv", {"t", "slope", "in_band"});
    for (const auto& fit : report.slopes) {
        fcsv.row({format_double(fit.t), format_double(fit.slope), fit.in_band ? "1" : "0"});
    }
    write_gnuplot(dir, "scaling",
                  "set logscale xy\nplot 'scaling.csv' using 1:3 with points, "
                  "'scaling.csv' using 1:4 with points\n");

    std::size_t vacuous = 0, failures = 0;
    for (const auto& row : report.rows) {
        if (row.vacuous) ++vacuous;
        if (!row.pass && !row.vacuous) ++failures;
    }
    std::cout << "scaling: " << report.rows.size() << " rows, " << vacuous << " vacuous, "
              << failures << " non-vacuous failures\n";
    if (failures > 0 || !report.all_pass) return kExitGateFailure;
    return kExitOk;
}

int cmd_phase(const RunConfig& config) {
    const fs::path dir = prepare_out(config, "phase");
    const DiscreteModel model = config.discrete_model();
    const auto scan = phase_scan(model.initial, config.p_grid, config.steps, model,
                                 config.epsilon_f, config.bracket_tol, config.workers);

    io::CsvWriter csv(dir / "phase.csv",
                      {"p", "proxy", "sustainability", "mass_at_zero", "moment1"});
    for (const auto& row : scan.rows) {
        csv.row({format_double(row.p), format_double(row.proxy),
                 format_double(row.sustainability), format_double(row.mass_at_zero),
                 format_double(row.moment1)});
    }
    io::CsvWriter ecsv(dir / "estimate.csv",
                       {"p_c_estimate", "bracket_lo", "bracket_hi", "n", "epsilon_f", "note"});
    ecsv.row({format_double(scan.p_c_estimate), format_double(scan.bracket_lo),
              format_double(scan.bracket_hi), std::to_string(scan.n),
              format_double(scan.epsilon_f), "finite-n heuristic"});
    write_gnuplot(dir, "phase", "plot 'phase.csv' using 1:2 with linespoints\n");

    bool monotone = true;
    for (std::size_t i = 0; i + 1 < scan.rows.size(); ++i) {
        if (scan.rows[i + 1].proxy > scan.rows[i].proxy + 1e-9) monotone = false;
    }
    const bool bracket_ok = scan.bracket_hi - scan.bracket_lo <= config.bracket_tol + 1e-12;
    std::cout << "phase: p_c ~ " << format_double(scan.p_c_estimate) << " (finite-n heuristic, n="
              << scan.n << ")\n";
    if (!monotone || !bracket_ok) {
        std::cerr << "phase: monotonicity or bracket gate failed\n";
        return kExitGateFailure;
    }
    return kExitOk;
}

int cmd_semigroup(const RunConfig& config) {
    const fs::path dir = prepare_out(config, "semigroup");
    const CdrModel model = config.cdr_model();
    const MeasureFlow flow = march_solve(model);
    const auto times = config.resolved_check_times();
    const double r = 0.0;
    const double t = times.back();
    const double s = times.front();

    const auto starts = default_start_sites(flow, config.start_sites);
    bool gate_ok = true;

    const double ck = chapman_kolmogorov_residual(flow, r, s, t, starts);
    if (ck > 1e-8) gate_ok = false;

    const GridMeasure entrance = transition(flow, 0.0, t, flow.slice(0));
    const double entrance_tv = tv_distance(entrance, flow.slice_at(t));
    if (entrance_tv > 1e-8) gate_ok = false;

    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i + 1 < starts.size(); i += 2) {
        pairs.emplace_back(starts[i], starts[i + 1]);
    }
    const auto contraction = contraction_check(flow, r, t, pairs, -1.0, config.workers);
    io::CsvWriter ccsv(dir / "contraction.csv", {"x_site", "y_site", "w", "bound", "pass"});
    for (const auto& row : contraction) {
        ccsv.row({std::to_string(row.x_site), std::to_string(row.y_site),
                  format_double(row.distance), format_double(row.bound), row.pass ? "1" : "0"});
        if (!row.pass) gate_ok = false;
    }

    const auto suite = default_test_suite();
    std::vector<std::size_t> xs(starts.begin(), starts.begin() + std::min<std::size_t>(8, starts.size()));
    const auto fb = forward_backward_residuals(flow, r, t, suite, xs);
    io::CsvWriter fcsv(dir / "forward_backward.csv", {"f", "x_site", "forward", "backward"});
    for (const auto& row : fb.rows) {
        fcsv.row({row.f_name, std::to_string(row.x_site), format_double(row.forward_residual),
                  format_double(row.backward_residual)});
    }

    io::CsvWriter scsv(dir / "summary.csv", {"quantity", "value"});
    scsv.row({"chapman_kolmogorov_residual", format_double(ck)});
    scsv.row({"entrance_law_tv", format_double(entrance_tv)});
    scsv.row({"max_forward_residual", format_double(fb.max_forward)});
    scsv.row({"max_backward_residual", format_double(fb.max_backward)});
    write_gnuplot(dir, "contraction", "plot 'contraction.csv' using 3:4 with points\n");

    if (!gate_ok) {
        std::cerr << "semigroup: Chapman-Kolmogorov, entrance or contraction gate failed\n";
        return kExitGateFailure;
    }
    std::cout << "semigroup: CK residual " << format_double(ck) << ", entrance tv "
              << format_double(entrance_tv) << "\n";
    return kExitOk;
}

} // namespace drflow::cli
