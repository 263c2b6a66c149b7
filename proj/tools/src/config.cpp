#include "config.hpp"

#include <fstream>

namespace drflow::cli {

InitialMeasureSpec RunConfig::initial_spec() const {
    if (initial_kind == "dirac") return InitialMeasureSpec::dirac(x0);
    if (initial_kind == "two_atom") return InitialMeasureSpec::two_atom(p, x0);
    if (initial_kind == "exponential") return InitialMeasureSpec::exponential_mixture(p, lambda);
    if (initial_kind == "lattice") return InitialMeasureSpec::lattice_law(lattice_weights, p);
    throw grid_error("unknown initial kind '" + initial_kind + "'");
}

DiscreteModel RunConfig::discrete_model() const {
    DiscreteModel m;
    m.alpha = alpha;
    m.q = OffspringDistribution::from_weights(q);
    m.initial = initial_spec();
    m.h = h;
    m.x_max = x_max;
    return m;
}

CdrModel RunConfig::cdr_model() const {
    CdrModel m;
    m.a = a;
    m.q = OffspringDistribution::from_weights(q);
    m.initial = initial_spec();
    m.h = h;
    m.x_max = x_max;
    m.horizon = T;
    return m;
}

std::vector<double> RunConfig::resolved_check_times() const {
    if (!check_times.empty()) return check_times;
    return {T / 2.0, T};
}

void RunConfig::validate() const {
    const double inv = 1.0 / h;
    if (std::abs(inv - std::round(inv)) > 1e-9 * inv) {
        throw grid_error("h must divide 1 exactly");
    }
    if (alpha < 0.0 || alpha > 1.0) throw grid_error("alpha must lie in [0,1]");
    if (a < 0.0) throw grid_error("a must be nonnegative");
    if (a * h > 1.0) throw grid_error("a * Delta exceeds 1; refine h");
    if (x_max <= 0.0 || T < 0.0) throw grid_error("x_max and T must be positive");
    if (steps < 0) throw grid_error("steps must be nonnegative");
    const auto cells = static_cast<std::size_t>(std::llround(inv));
    for (std::size_t k : k_list) {
        if (k == 0 || cells % k != 0) {
            throw grid_error("k = " + std::to_string(k) + " does not divide 1/h = " +
                             std::to_string(cells));
        }
    }
    for (double t : t_list) {
        if (t < 0.0 || t > T) throw grid_error("t_list entries must lie in [0, T]");
    }
    for (double pv : p_grid) {
        if (pv < 0.0 || pv > 1.0) throw grid_error("p_grid entries must lie in [0,1]");
    }
    (void)initial_spec();
    (void)OffspringDistribution::from_weights(q);
}

nlohmann::ordered_json RunConfig::to_json() const {
    nlohmann::ordered_json j;
    j["model"] = {
        {"a", a},
        {"alpha", alpha},
        {"q", q},
        {"initial",
         {{"kind", initial_kind}, {"p", p}, {"x0", x0}, {"lambda", lambda},
          {"weights", lattice_weights}}},
    };
    j["grid"] = {{"h", h}, {"x_max", x_max}, {"T", T}, {"steps", steps}};
    j["scaling"] = {{"k_list", k_list}, {"t_list", t_list}};
    j["mc"] = {{"n_paths", n_paths}, {"seed", seed}, {"event_log", event_log}};
    j["phase"] = {{"p_grid", p_grid}, {"epsilon_f", epsilon_f}, {"bracket_tol", bracket_tol}};
    j["cdr"] = {{"check_times", check_times}, {"picard_iters", picard_iters}};
    j["semigroup"] = {{"start_sites", start_sites}};
    j["engine"] = {{"out", out}, {"workers", workers}, {"support_cap", support_cap}};
    return j;
}

namespace {

template <typename T>
void maybe(const nlohmann::ordered_json& j, const char* key, T& into) {
    if (j.contains(key)) into = j.at(key).get<T>();
}

} // namespace

RunConfig RunConfig::from_json(const nlohmann::ordered_json& j) {
    RunConfig c;
    if (j.contains("model")) {
        const auto& m = j.at("model");
        maybe(m, "a", c.a);
        maybe(m, "alpha", c.alpha);
        maybe(m, "q", c.q);
        if (m.contains("initial")) {
            const auto& i = m.at("initial");
            maybe(i, "kind", c.initial_kind);
            maybe(i, "p", c.p);
            maybe(i, "x0", c.x0);
            maybe(i, "lambda", c.lambda);
            maybe(i, "weights", c.lattice_weights);
        }
    }
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        maybe(g, "h", c.h);
        maybe(g, "x_max", c.x_max);
        maybe(g, "T", c.T);
        maybe(g, "steps", c.steps);
    }
    if (j.contains("scaling")) {
        const auto& s = j.at("scaling");
        maybe(s, "k_list", c.k_list);
        maybe(s, "t_list", c.t_list);
    }
    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        maybe(m, "n_paths", c.n_paths);
        maybe(m, "seed", c.seed);
        maybe(m, "event_log", c.event_log);
    }
    if (j.contains("phase")) {
        const auto& ph = j.at("phase");
        maybe(ph, "p_grid", c.p_grid);
        maybe(ph, "epsilon_f", c.epsilon_f);
        maybe(ph, "bracket_tol", c.bracket_tol);
    }
    if (j.contains("cdr")) {
        const auto& f = j.at("cdr");
        maybe(f, "check_times", c.check_times);
        maybe(f, "picard_iters", c.picard_iters);
    }
    if (j.contains("semigroup")) {
        maybe(j.at("semigroup"), "start_sites", c.start_sites);
    }
    if (j.contains("engine")) {
        const auto& e = j.at("engine");
        maybe(e, "out", c.out);
        maybe(e, "workers", c.workers);
        maybe(e, "support_cap", c.support_cap);
    }
    return c;
}

RunConfig load_config(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    std::ifstream is(config_path);
    if (!is) throw grid_error("cannot open config file " + config_path);
    nlohmann::ordered_json j;
    is >> j;
    return RunConfig::from_json(j);
}

void write_manifest(const RunConfig& config, const std::string& command,
                    const std::filesystem::path& out_dir) {
    nlohmann::ordered_json j;
    j["tool"] = "drflow";
    j["version"] = "0.1.0";
    j["command"] = command;
    j["config"] = config.to_json();
    std::ofstream os(out_dir / "manifest.json");
    os << j.dump(2) << "\n";
}

} // namespace drflow::cli
