#include "drflow/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "drflow/rng.hpp"

namespace drflow {

namespace {

constexpr double kFlowDust = 1e-15;

struct Residuals {
    std::size_t lo = 0;          // first hull site (global index)
    std::vector<double> supply;  // (mu - nu)+ on the hull
    std::vector<double> demand;  // (nu - mu)+ on the hull
    std::size_t source_sites = 0;
    std::size_t sink_sites = 0;
    double mass = 0.0;           // total residual mass per side
};

// Lumps overflow onto the last site, removes common mass in place and
// rescales the demand side so both sides balance exactly.
Residuals reduce(const GridMeasure& mu, const GridMeasure& nu) {
    const std::size_t n = std::max(mu.sites(), nu.sites());
    const double total_mu = mu.total_mass();
    const double total_nu = nu.total_mass();
    if (std::abs(total_mu - total_nu) > 1e-9) {
        throw numeric_error("transport marginals differ in mass by " +
                            std::to_string(std::abs(total_mu - total_nu)));
    }
    const double scale = total_nu > 0.0 ? total_mu / total_nu : 1.0;

    Residuals r;
    std::vector<double> supply(n, 0.0), demand(n, 0.0);
    std::size_t lo = n, hi = 0;
    for (std::size_t j = 0; j < n; ++j) {
        double a = j < mu.sites() ? mu.mass_at(j) : 0.0;
        double b = (j < nu.sites() ? nu.mass_at(j) : 0.0) * scale;
        if (j == mu.sites() - 1) a += mu.overflow();
        if (j == nu.sites() - 1) b += nu.overflow() * scale;
        const double d = a - b;
        if (d > kFlowDust) {
            supply[j] = d;
            ++r.source_sites;
            r.mass += d;
        } else if (d < -kFlowDust) {
            demand[j] = -d;
            ++r.sink_sites;
        }
        if (supply[j] != 0.0 || demand[j] != 0.0) {
            lo = std::min(lo, j);
            hi = std::max(hi, j);
        }
    }
    if (lo > hi) {  // measures agree up to dust
        r.lo = 0;
        r.mass = 0.0;
        return r;
    }
    r.lo = lo;
    r.supply.assign(supply.begin() + static_cast<long>(lo),
                    supply.begin() + static_cast<long>(hi) + 1);
    r.demand.assign(demand.begin() + static_cast<long>(lo),
                    demand.begin() + static_cast<long>(hi) + 1);

    // Balance float dust so the flow problem is exactly feasible.
    double dsum = 0.0;
    for (double d : r.demand) dsum += d;
    if (dsum > 0.0) {
        const double fix = r.mass / dsum;
        for (double& d : r.demand) d *= fix;
    }
    return r;
}

// Min-cost flow on the chain + teleport-hub graph.
//
// rho(x_i, x_j) = 1 /\ |i-j|h equals the shortest-path distance between
// hull sites when adjacent sites are joined at cost h and every site is
// joined to one hub at cost 1/2, so the optimal transport value is the
// min-cost flow shipping the residual supplies to the residual demands.
//
// Node layout: 0..m-1 hull sites, m = hub, m+1 = super-source.
class ChainHubFlow {
public:
    ChainHubFlow(const Residuals& r, double h) : m_(r.supply.size()), h_(h) {
        const std::size_t nodes = m_ + 2;
        head_.assign(nodes, -1);
        pi_.assign(nodes, 0.0);
        supply_ = r.supply;
        demand_ = r.demand;
        remaining_ = 0.0;
        for (double s : supply_) remaining_ += s;
        scale_ = std::max(1.0, remaining_);

        for (std::size_t i = 0; i + 1 < m_; ++i) {
            add_pair(i, i + 1, h_);
            add_pair(i + 1, i, h_);
        }
        for (std::size_t i = 0; i < m_; ++i) {
            add_pair(i, hub(), 0.5);
            add_pair(hub(), i, 0.5);
        }
        for (std::size_t i = 0; i < m_; ++i) {
            if (supply_[i] > 0.0) add_pair(source(), i, 0.0, supply_[i]);
        }
    }

    std::size_t hub() const { return m_; }
    std::size_t source() const { return m_ + 1; }

    double solve() {
        double cost = 0.0;
        const long max_rounds = 4 * static_cast<long>(m_) + 64;
        long rounds = 0;
        while (remaining_ > 1e-14 * scale_) {
            if (++rounds > max_rounds) {
                throw numeric_error("min-cost flow failed to converge (internal)");
            }
            cost += augment_once();
        }
        return cost;
    }

    /// Net right-going flow between hull sites i and i+1.
    double chain_flow(std::size_t i) const {
        const std::size_t base = 4 * i;
        return arcs_[base].flow - arcs_[base + 2].flow;
    }
    /// Net flow from hull site i into the hub.
    double hub_flow(std::size_t i) const {
        const std::size_t base = 4 * (m_ - 1) + 4 * i;
        return arcs_[base].flow - arcs_[base + 2].flow;
    }
    double potential(std::size_t node) const { return pi_[node]; }

private:
    struct Arc {
        int to;
        int next;
        double cost;
        double cap;
        double flow;
    };

    void add_pair(std::size_t from, std::size_t to, double cost,
                  double cap = std::numeric_limits<double>::infinity()) {
        arcs_.push_back({static_cast<int>(to), head_[from], cost, cap, 0.0});
        head_[from] = static_cast<int>(arcs_.size()) - 1;
        arcs_.push_back({static_cast<int>(from), head_[to], -cost, 0.0, 0.0});
        head_[to] = static_cast<int>(arcs_.size()) - 1;
    }

    // One Dijkstra from the super-source to the nearest unmet sink,
    // then a saturating augmentation along the parent path.
    double augment_once() {
        const std::size_t nodes = m_ + 2;
        constexpr double inf = std::numeric_limits<double>::infinity();
        dist_.assign(nodes, inf);
        parent_.assign(nodes, -1);
        done_.assign(nodes, 0);

        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        dist_[source()] = 0.0;
        pq.emplace(0.0, source());

        long sink = -1;
        while (!pq.empty()) {
            const auto [d, u] = pq.top();
            pq.pop();
            if (done_[u]) continue;
            done_[u] = 1;
            if (u < m_ && demand_[u] > kFlowDust) {
                sink = static_cast<long>(u);
                break;
            }
            for (int e = head_[u]; e != -1; e = arcs_[e].next) {
                const Arc& a = arcs_[e];
                if (a.cap - a.flow <= kFlowDust) continue;
                double rc = a.cost + pi_[u] - pi_[a.to];
                if (rc < 0.0) {
                    if (rc < -1e-9) throw numeric_error("negative reduced cost (internal)");
                    rc = 0.0;
                }
                const double nd = d + rc;
                if (nd < dist_[a.to]) {
                    dist_[a.to] = nd;
                    parent_[a.to] = e;
                    pq.emplace(nd, a.to);
                }
            }
        }
        if (sink < 0) throw numeric_error("transport network disconnected (internal)");

        const double dt = dist_[sink];
        for (std::size_t v = 0; v < nodes; ++v) pi_[v] += std::min(dist_[v], dt);

        double bottleneck = demand_[static_cast<std::size_t>(sink)];
        for (long v = sink; v != static_cast<long>(source());) {
            const Arc& a = arcs_[parent_[v]];
            bottleneck = std::min(bottleneck, a.cap - a.flow);
            v = arcs_[parent_[v] ^ 1].to;
        }

        double cost = 0.0;
        for (long v = sink; v != static_cast<long>(source());) {
            const int e = parent_[v];
            arcs_[e].flow += bottleneck;
            arcs_[e ^ 1].flow -= bottleneck;
            cost += arcs_[e].cost * bottleneck;
            v = arcs_[e ^ 1].to;
        }
        demand_[static_cast<std::size_t>(sink)] -= bottleneck;
        remaining_ -= bottleneck;
        return cost;
    }

    std::size_t m_;
    double h_;
    double scale_ = 1.0;
    std::vector<Arc> arcs_;
    std::vector<int> head_;
    std::vector<double> pi_;
    std::vector<double> supply_;
    std::vector<double> demand_;
    std::vector<double> dist_;
    std::vector<int> parent_;
    std::vector<char> done_;
    double remaining_;
};

// Decomposes the optimal flow into source -> sink lanes. Every lane
// follows positive net flow, so each step zeroes a lane bottleneck and
// the walk cannot cycle (the optimal flow has no positive-cost cycles).
std::vector<PlanEntry> decompose_plan(const ChainHubFlow& net, const Residuals& r) {
    const std::size_t m = r.supply.size();
    std::vector<double> chain(m > 0 ? m - 1 : 0), into_hub(m);
    for (std::size_t i = 0; i + 1 < m; ++i) chain[i] = net.chain_flow(i);
    for (std::size_t i = 0; i < m; ++i) into_hub[i] = net.hub_flow(i);

    std::vector<double> supply = r.supply;
    std::vector<double> demand = r.demand;
    std::vector<PlanEntry> plan;
    std::size_t hub_out_scan = 0;

    struct Move {
        std::size_t from, to;
        bool hub;
    };
    std::vector<Move> moves;

    for (std::size_t s = 0; s < m; ++s) {
        long guard = 0;
        while (supply[s] > 64 * kFlowDust) {
            if (++guard > (1L << 22)) throw numeric_error("plan decomposition stalled (internal)");
            moves.clear();
            std::size_t cur = s;
            bool used_hub = false;
            double lane = supply[s];
            for (;;) {
                if (demand[cur] > kFlowDust) {
                    lane = std::min(lane, demand[cur]);
                    break;
                }
                if (!used_hub && into_hub[cur] > kFlowDust) {
                    while (hub_out_scan < m && into_hub[hub_out_scan] >= -kFlowDust) ++hub_out_scan;
                    if (hub_out_scan >= m) throw numeric_error("hub flow unbalanced (internal)");
                    lane = std::min({lane, into_hub[cur], -into_hub[hub_out_scan]});
                    moves.push_back({cur, hub_out_scan, true});
                    used_hub = true;
                    cur = hub_out_scan;
                } else if (cur + 1 < m && chain[cur] > kFlowDust) {
                    lane = std::min(lane, chain[cur]);
                    moves.push_back({cur, cur + 1, false});
                    ++cur;
                } else if (cur > 0 && chain[cur - 1] < -kFlowDust) {
                    lane = std::min(lane, -chain[cur - 1]);
                    moves.push_back({cur, cur - 1, false});
                    --cur;
                } else {
                    throw numeric_error("flow decomposition stuck (internal)");
                }
            }
            supply[s] -= lane;
            demand[cur] -= lane;
            for (const Move& mv : moves) {
                if (mv.hub) {
                    into_hub[mv.from] -= lane;
                    into_hub[mv.to] += lane;
                } else if (mv.to == mv.from + 1) {
                    chain[mv.from] -= lane;
                } else {
                    chain[mv.to] += lane;
                }
            }
            plan.push_back({r.lo + s, r.lo + cur, lane});
        }
    }
    return plan;
}

// Kantorovich potential from the final node potentials: f := pi(hub) - pi
// restricted to the hull is 1-Lipschitz with range inside a length-1
// interval (every chain arc enforces |df| <= h, every hub arc |f| <= 1/2),
// and <mu - nu, f> equals the flow cost at optimality.
std::vector<double> certificate_from_potentials(const ChainHubFlow& net, const Residuals& r,
                                                std::size_t sites) {
    const std::size_t m = r.supply.size();
    std::vector<double> f(sites, 0.0);
    if (m == 0) return f;
    const double ref = net.potential(net.hub());
    for (std::size_t i = 0; i < m; ++i) f[r.lo + i] = ref - net.potential(i);
    for (std::size_t j = 0; j < r.lo; ++j) f[j] = f[r.lo];
    for (std::size_t j = r.lo + m; j < sites; ++j) f[j] = f[r.lo + m - 1];
    return f;
}

double pair_inner(const GridMeasure& mu, const GridMeasure& nu, const std::vector<double>& f) {
    double s = 0.0;
    for (std::size_t j = 0; j < mu.sites(); ++j) s += mu.mass_at(j) * f[j];
    s += mu.overflow() * f[mu.sites() - 1];
    for (std::size_t j = 0; j < nu.sites(); ++j) s -= nu.mass_at(j) * f[j];
    s -= nu.overflow() * f[nu.sites() - 1];
    return s;
}

} // namespace

TransportResult exact_w(const GridMeasure& mu, const GridMeasure& nu,
                        const TransportOptions& options) {
    if (mu.unit_cells() != nu.unit_cells()) throw grid_error("exact_w: lattice steps differ");

    Residuals r = reduce(mu, nu);
    TransportResult out;
    const std::size_t sites = std::max(mu.sites(), nu.sites());
    if (r.mass <= kFlowDust) {
        if (options.want_dual) out.dual_potentials.assign(sites, 0.0);
        return out;
    }
    if (r.source_sites + r.sink_sites > options.support_cap) {
        throw support_cap_error("residual support " +
                                std::to_string(r.source_sites + r.sink_sites) +
                                " exceeds cap " + std::to_string(options.support_cap) +
                                "; use upper_w or coarsen");
    }

    ChainHubFlow net(r, mu.step());
    out.value = std::min(net.solve(), 1.0);
    if (out.value < 0.0) out.value = 0.0;
    if (options.want_plan) out.plan = decompose_plan(net, r);
    if (options.want_dual) out.dual_potentials = certificate_from_potentials(net, r, sites);
    return out;
}

double upper_w(const GridMeasure& mu, const GridMeasure& nu) {
    if (mu.unit_cells() != nu.unit_cells()) throw grid_error("upper_w: lattice steps differ");
    Residuals r = reduce(mu, nu);
    const std::size_t m = r.supply.size();
    const double h = mu.step();

    // comonotone sweep: match residual mass in increasing site order
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    double si = 0.0, dj = 0.0;
    while (true) {
        while (i < m && r.supply[i] - si <= kFlowDust) {
            ++i;
            si = 0.0;
        }
        while (j < m && r.demand[j] - dj <= kFlowDust) {
            ++j;
            dj = 0.0;
        }
        if (i >= m || j >= m) break;
        const double move = std::min(r.supply[i] - si, r.demand[j] - dj);
        const double d = h * static_cast<double>(i > j ? i - j : j - i);
        cost += move * std::min(1.0, d);
        si += move;
        dj += move;
    }
    return std::min(cost, 1.0);
}

double dual_lb(const GridMeasure& mu, const GridMeasure& nu, int trials, std::uint64_t seed) {
    if (mu.unit_cells() != nu.unit_cells()) throw grid_error("dual_lb: lattice steps differ");
    const std::size_t sites = std::max(mu.sites(), nu.sites());
    double best = 0.0;

    try {
        TransportOptions opt;
        opt.want_plan = false;
        TransportResult res = exact_w(mu, nu, opt);
        best = std::max(best, std::abs(pair_inner(mu, nu, res.dual_potentials)));
    } catch (const support_cap_error&) {
        // random trials only
    }

    const double h = mu.step();
    CounterRng rng(seed, 0);
    std::vector<double> f(sites);
    for (int t = 0; t < trials; ++t) {
        double v = rng.uniform() - 0.5;
        for (std::size_t j = 0; j < sites; ++j) {
            f[j] = v;
            const double slope = 2.0 * rng.uniform() - 1.0;
            v = std::clamp(v + slope * h, -0.5, 0.5);
        }
        best = std::max(best, std::abs(pair_inner(mu, nu, f)));
    }
    return best;
}

ApproxTransport exact_w_coarsened(const GridMeasure& mu, const GridMeasure& nu,
                                  const TransportOptions& options) {
    std::size_t factor = 1;
    for (;;) {
        const GridMeasure cm = coarsen(mu, factor);
        const GridMeasure cn = coarsen(nu, factor);
        try {
            TransportResult res = exact_w(cm, cn, options);
            ApproxTransport out;
            out.value = res.value;
            out.coarsen_factor = factor;
            out.extra_error = factor == 1 ? 0.0 : cm.step();
            return out;
        } catch (const support_cap_error&) {
            std::size_t next = factor * 2;
            while (next <= mu.unit_cells() && mu.unit_cells() % next != 0) next *= 2;
            if (next > mu.unit_cells() || next == factor) throw;
            factor = next;
        }
    }
}

} // namespace drflow
