#include "feller/harness.hpp"

#include "feller/expression.hpp"
#include "feller/invariant.hpp"
#include "feller/lyapunov.hpp"
#include "feller/montecarlo.hpp"
#include "feller/semigroup.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <random>
#include <sstream>

namespace feller {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

class Output {
public:
    Output(const std::string& dir, const RunConfig& config)
        : dir_(dir), hash_(config_hash(config)), seed_(config.seed) {
        fs::create_directories(dir_);
    }

    void csv(const std::string& name, const std::string& producer, const std::function<void(std::ostream&)>& body) const {
        std::ofstream os(dir_ / name);
        os << "# producer: " << producer << " config_hash: " << hash_ << " seed: " << seed_ << '\n';
        body(os);
    }

    void json(const std::string& name, const std::string& producer, const Json& body) const {
        Json doc;
        doc["producer"] = producer;
        doc["config_hash"] = hash_;
        doc["seed"] = seed_;
        for (const auto& [k, v] : body.items()) doc[k] = v;
        std::ofstream os(dir_ / name);
        os << doc.dump(2) << '\n';
    }

private:
    fs::path dir_;
    std::string hash_;
    std::uint64_t seed_;
};

Json point_json(const Point& p, int d) {
    return d == 1 ? Json::array({p[0]}) : Json::array({p[0], p[1]});
}

void write_values_csv(std::ostream& os, const Grid& g, const Vector& v, bool window_only) {
    os << (g.dimension() == 1 ? "node,x,class,value\n" : "node,x,y,class,value\n");
    char buf[160];
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (window_only && !g.in_window(i)) continue;
        const Point& p = g.node(i);
        if (g.dimension() == 1)
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%s,%.17g\n", i, p[0], to_string(g.kind(i)),
                          v[static_cast<Eigen::Index>(i)]);
        else
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%s,%.17g\n", i, p[0], p[1], to_string(g.kind(i)),
                          v[static_cast<Eigen::Index>(i)]);
        os << buf;
    }
}

std::function<double(const Point&)> initial_function(const RunConfig& c) {
    if (c.initial == "constant") {
        const double v = c.value;
        return [v](const Point&) { return v; };
    }
    if (c.initial == "indicator") {
        const Point lo = c.box_lo, hi = c.box_hi;
        const int d = c.dimension;
        return [lo, hi, d](const Point& x) {
            for (int k = 0; k < d; ++k)
                if (x[k] < lo[k] || x[k] > hi[k]) return 0.0;
            return 1.0;
        };
    }
    const Expression e = Expression::parse(c.expression);
    return [e](const Point& x) { return e(x); };
}

ExhaustOptions exhaust_options(const RunConfig& c) {
    ExhaustOptions o;
    o.n0 = c.n0;
    o.tol = c.tol;
    o.max_n = c.max_n;
    o.window_radius = c.window;
    return o;
}

/// Truncation for evolution: the configured n, or the point where the
/// exhaustion of the constant function settles.
int evolution_truncation(const RunConfig& c, const Problem& p) {
    if (c.n) return *c.n;
    const ExhaustResult r = exhaust_resolvent(p, 1.0, [](const Point&) { return 1.0; }, exhaust_options(c));
    return r.final_n;
}

std::optional<double> window_of(const RunConfig& c, const Problem& p) {
    if (c.window) return c.window;
    return c.n0.value_or(default_initial_truncation(p)) + 1.0;
}

std::size_t start_node(const RunConfig& c, const Grid& g) {
    if (!g.domain().contains(c.x0)) throw ConfigError("task.x0", "task.x0 must lie in the domain");
    if (auto i = g.find(c.x0); i && g.kind(*i) == NodeKind::interior) return *i;
    return g.nearest_interior(c.x0);
}

std::vector<double> times_of(const RunConfig& c) { return c.times.empty() ? std::vector<double>{c.t} : c.times; }

int cmd_grid(const RunConfig& c, const Output& out) {
    const Problem p = make_problem(c);
    const int n = c.n.value_or(c.n0.value_or(default_initial_truncation(p)));
    const Truncation t = build_truncation(p, n, window_of(c, p));
    out.csv("grid.csv", "domain-grid/build_exhaustion", [&](std::ostream& os) { write_grid_csv(os, *t.grid); });
    out.csv("measure.csv", "boundary-measure/truncate_measure",
            [&](std::ostream& os) { write_truncated_measure_csv(os, t.measure); });
    Json j;
    j["n"] = n;
    j["h"] = c.h;
    j["nodes"] = t.grid->size();
    j["interior"] = t.grid->nodes_of(NodeKind::interior).size();
    j["physical_boundary"] = t.grid->nodes_of(NodeKind::physical_boundary).size();
    j["artificial_boundary"] = t.grid->nodes_of(NodeKind::artificial_boundary).size();
    j["m_matrix_pattern"] = has_m_matrix_pattern(t.op);
    out.json("grid.json", "domain-grid/build_exhaustion", j);
    return exit_ok;
}

int cmd_solve(const RunConfig& c, const Output& out, std::ostream& log) {
    const Problem p = make_problem(c);
    const ExhaustResult r = exhaust_resolvent(p, c.lambda, initial_function(c), exhaust_options(c));
    out.csv("solve.csv", "elliptic-resolvent/exhaust_resolvent",
            [&](std::ostream& os) { write_values_csv(os, *r.solution.grid, r.solution.values, false); });
    Json j;
    j["lambda"] = c.lambda;
    j["converged"] = r.converged;
    j["final_n"] = r.final_n;
    j["condition_estimate"] = r.condition_estimate;
    Json hist = Json::array();
    for (const auto& h : r.history)
        hist.push_back({{"n", h.n}, {"min_increment", h.min_increment}, {"sup_increment", h.sup_increment}});
    j["increments"] = hist;
    out.json("solve.json", "elliptic-resolvent/exhaust_resolvent", j);
    if (!r.converged) {
        log << "exhaustion did not converge within max_n = " << c.max_n << '\n';
        return exit_numerical_failure;
    }
    return exit_ok;
}

int cmd_evolve(const RunConfig& c, const Output& out) {
    const Problem p = make_problem(c);
    const int n = evolution_truncation(c, p);
    const Truncation t = build_truncation(p, n, window_of(c, p));
    const SemigroupEvolver ev(t.op, c.tau);
    const Vector f = GridFunction::sample(t.grid, initial_function(c)).values;
    auto times = times_of(c);
    std::sort(times.begin(), times.end());
    std::vector<std::pair<double, Vector>> snaps{{0.0, f}};
    Vector u = f;
    double now = 0.0;
    for (double s : times) {
        u = ev.evolve(u, s - now);
        now = s;
        snaps.emplace_back(s, u);
    }
    out.csv("evolve.csv", "semigroup-evolution/evolve", [&](std::ostream& os) {
        os << (t.grid->dimension() == 1 ? "t,node,x,value\n" : "t,node,x,y,value\n");
        char buf[160];
        for (const auto& [s, v] : snaps)
            for (std::size_t i : t.grid->window_nodes()) {
                if (t.grid->kind(i) == NodeKind::artificial_boundary) continue;
                const Point& x = t.grid->node(i);
                if (t.grid->dimension() == 1)
                    std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g\n", s, i, x[0], v[static_cast<Eigen::Index>(i)]);
                else
                    std::snprintf(buf, sizeof buf, "%.17g,%zu,%.17g,%.17g,%.17g\n", s, i, x[0], x[1],
                                  v[static_cast<Eigen::Index>(i)]);
                os << buf;
            }
    });
    Json j;
    j["n"] = n;
    j["tau"] = c.tau;
    Json defects = Json::array();
    for (double s : times) defects.push_back({{"t", s}, {"markov_defect", markov_defect(ev, s)}});
    j["markov_defect"] = defects;
    out.json("evolve.json", "semigroup-evolution/evolve", j);
    return exit_ok;
}

std::vector<std::shared_ptr<const Grid>> grid_sequence(const Problem& p, int n0, int count) {
    std::vector<std::shared_ptr<const Grid>> grids;
    for (int k = 0; k < count; ++k)
        grids.push_back(std::make_shared<const Grid>(build_exhaustion(p.domain, n0 + k, p.h)));
    return grids;
}

Json uniqueness_json(const UniquenessReport& u) {
    Json j;
    j["pass"] = u.pass;
    j["grows"] = u.grows;
    j["generator_bounded"] = u.generator_bounded;
    j["stable"] = u.stable;
    j["radius"] = u.radius ? Json(*u.radius) : Json(nullptr);
    j["message"] = u.message;
    return j;
}

Json invariant_json(const InvariantReport& r) {
    Json j;
    j["pass"] = r.pass;
    j["nonnegative_and_growing"] = r.nonnegative_and_growing;
    j["generator_to_minus_infinity"] = r.generator_to_minus_infinity;
    j["boundary_average"] = r.boundary_average;
    j["worst_gap"] = std::isfinite(r.worst_gap) ? Json(r.worst_gap) : Json("infinite");
    j["message"] = r.message;
    return j;
}

int cmd_lyapunov(const RunConfig& c, const Output& out) {
    const Problem p = make_problem(c);
    const std::string mode = c.mode.empty() ? "verify" : c.mode;
    Json j;
    j["mode"] = mode;
    if (mode == "verify") {
        const LyapunovSpec V = quadratic_lyapunov(p.coefficients);
        const int n0 = c.n0.value_or(default_initial_truncation(p));
        j["uniqueness"] = uniqueness_json(verify_uniqueness_lyapunov(V, c.lambda, grid_sequence(p, n0, 4)));
        j["invariant"] = invariant_json(verify_invariant_lyapunov(V, p.measure, p.domain));
    } else if (mode == "modify") {
        const ModifiedLyapunov m = modify_lyapunov(p.measure, p.domain, p.coefficients);
        j["M"] = m.M;
        j["epsilon"] = m.epsilon;
        j["band_mass"] = m.band_mass;
        j["invariant"] = invariant_json(verify_invariant_lyapunov(m.spec, p.measure, p.domain));
        Json rows = Json::array();
        bool all = true;
        for (const ChainRow& r : verify_modified_chain(m, p.measure, p.domain)) {
            all = all && r.pass;
            rows.push_back({{"z", point_json(r.z, c.dimension)},
                            {"integral", r.integral},
                            {"band_bound", r.band_bound},
                            {"uniform_bound", r.uniform_bound},
                            {"value", r.value},
                            {"pass", r.pass}});
        }
        j["chain"] = rows;
        j["chain_pass"] = all;
    } else {
        throw ConfigError("task.mode", "lyapunov mode must be verify or modify");
    }
    out.json("lyapunov.json", "lyapunov-invariant/" + mode, j);
    return exit_ok;
}

int cmd_invariant(const RunConfig& c, const Output& out) {
    const Problem p = make_problem(c);
    const std::string mode = c.mode.empty() ? "abel" : c.mode;
    if (mode != "abel" && mode != "stationary" && mode != "evolve-compare")
        throw ConfigError("task.mode", "invariant mode must be abel, stationary or evolve-compare");
    const int n = evolution_truncation(c, p);
    const Truncation t = build_truncation(p, n, window_of(c, p));
    const std::size_t x0 = start_node(c, *t.grid);
    Json j;
    j["mode"] = mode;
    j["n"] = n;
    std::optional<MeasureVector> abel_limit, stationary;
    if (mode != "stationary") {
        const AbelResult a = abel_invariant(t.op, x0, halving_sequence(c.abel_halvings), c.tv_tol);
        Json steps = Json::array();
        for (const AbelStep& s : a.steps)
            steps.push_back({{"lambda", s.lambda},
                             {"mass", s.nu.total()},
                             {"window_mass", s.window_mass},
                             {"tv_to_previous", s.tv_to_previous}});
        j["abel"] = {{"converged", a.converged}, {"limit_lambda", a.steps[a.limit_index].lambda}, {"steps", steps}};
        abel_limit = a.limit().normalized();
    }
    if (mode != "abel") {
        const StationaryResult s = stationary_solve(t.op);
        j["stationary"] = {{"eigenvalue", s.eigenvalue},
                           {"iterations", s.iterations},
                           {"converged", s.converged},
                           {"has_stationary", s.has_stationary}};
        stationary = s.nu;
    }
    if (mode == "evolve-compare") {
        j["tv_abel_stationary"] = tv_distance(*abel_limit, *stationary);
        const SemigroupEvolver ev(t.op, c.tau);
        std::vector<Vector> dict;
        for (const auto& [name, f] : test_dictionary()) dict.push_back(GridFunction::sample(t.grid, f).values);
        const auto rows = convergence_study(ev, MeasureVector::dirac(t.grid, x0), *stationary, times_of(c), dict);
        Json conv = Json::array();
        for (const auto& r : rows) conv.push_back({{"t", r.t}, {"tv", r.tv}, {"sup_error", r.sup_error}});
        j["convergence"] = conv;
    }
    const MeasureVector& nu = stationary ? *stationary : *abel_limit;
    out.csv("invariant.csv", "lyapunov-invariant/" + mode, [&](std::ostream& os) { write_measure_csv(os, nu); });
    out.json("invariant.json", "lyapunov-invariant/" + mode, j);
    return exit_ok;
}

int cmd_simulate(const RunConfig& c, const Output& out) {
    const Problem p = make_problem(c);
    if (!p.domain.contains(c.x0)) throw ConfigError("task.x0", "task.x0 must lie in the domain");
    PathOptions po;
    po.dt = c.dt;
    po.particles = c.particles;
    po.seed = c.seed;
    auto times = times_of(c);
    std::sort(times.begin(), times.end());
    const auto ens = simulate_snapshots(p.coefficients, p.domain, p.measure, c.x0, times, po);
    Json snaps = Json::array();
    for (const auto& e : ens) {
        Json est = Json::object();
        for (const auto& [name, f] : test_dictionary()) {
            const Estimate s = estimate_expectation(e, f);
            est[name] = {{"mean", s.mean}, {"standard_error", s.standard_error}};
        }
        snaps.push_back({{"t", e.time}, {"boundary_hits", e.boundary_hits}, {"max_radius", e.max_radius}, {"estimates", est}});
    }
    const int n = c.n.value_or(c.n0.value_or(default_initial_truncation(p)));
    auto grid = std::make_shared<const Grid>(build_exhaustion(p.domain, n, p.h, window_of(c, p)));
    OccupationOptions oo;
    oo.burn_in = c.burn_in;
    oo.horizon = c.horizon;
    oo.dt = c.dt;
    oo.sample_every = c.sample_every;
    oo.particles = c.particles;
    oo.seed = c.seed;
    const OccupationResult occ = estimate_invariant(p.coefficients, p.domain, p.measure, grid, c.x0, oo);
    Json j;
    j["snapshots"] = snaps;
    j["occupation"] = {{"samples", occ.samples},
                       {"escapes", occ.escapes},
                       {"boundary_hits", occ.boundary_hits},
                       {"max_radius", occ.max_radius},
                       {"segment_window_fraction", occ.segment_window_fraction},
                       {"segment_mean_max_radius", occ.segment_mean_max_radius}};
    out.csv("occupation.csv", "montecarlo-oracle/estimate_invariant",
            [&](std::ostream& os) { write_measure_csv(os, occ.histogram); });
    out.json("simulate.json", "montecarlo-oracle/simulate_paths", j);
    return exit_ok;
}

int cmd_compare(const RunConfig& c, const Output& out) {
    const Problem p = make_problem(c);
    const int n = evolution_truncation(c, p);
    const Truncation t = build_truncation(p, n, window_of(c, p));
    const std::size_t x0 = start_node(c, *t.grid);
    const Point start = t.grid->node(x0);
    const SemigroupEvolver ev(t.op, c.tau);
    auto times = c.times.empty() ? std::vector<double>{0.5, 1.0, 2.0} : c.times;
    std::sort(times.begin(), times.end());

    PathOptions po;
    po.dt = c.dt;
    po.particles = c.particles;
    po.seed = c.seed;
    po.max_recorded_returns = 20;
    const auto ens = simulate_snapshots(p.coefficients, p.domain, p.measure, start, times, po);

    Json rows = Json::array();
    bool all = true;
    std::ostringstream table;
    table << "t,function,pde,mc_mean,mc_se,difference,pass\n";
    for (const auto& [name, f] : test_dictionary()) {
        Vector u = GridFunction::sample(t.grid, f).values;
        double now = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) {
            u = ev.evolve(u, times[k] - now);
            now = times[k];
            const double pde = u[static_cast<Eigen::Index>(x0)];
            const Estimate e = estimate_expectation(ens[k], f);
            const double diff = std::abs(pde - e.mean);
            const bool pass = diff <= 3.0 * e.standard_error;
            all = all && pass;
            char buf[256];
            std::snprintf(buf, sizeof buf, "%.17g,%s,%.17g,%.17g,%.17g,%.17g,%s\n", times[k], name.c_str(), pde,
                          e.mean, e.standard_error, diff, pass ? "pass" : "fail");
            table << buf;
            rows.push_back({{"t", times[k]}, {"function", name}, {"pde", pde}, {"mc_mean", e.mean},
                            {"mc_se", e.standard_error}, {"pass", pass}});
        }
    }
    std::vector<ReturnEvent> returns = ens.back().returns;
    const ChiSquareReport chi = return_distribution_test(p.measure, returns);
    all = all && chi.pass;
    out.csv("compare.csv", "cli-harness/compare", [&](std::ostream& os) { os << table.str(); });
    Json j;
    j["x0"] = point_json(start, c.dimension);
    j["n"] = n;
    j["rows"] = rows;
    j["return_test"] = {{"statistic", chi.statistic}, {"dof", chi.dof}, {"critical", chi.critical},
                        {"samples", chi.samples}, {"pass", chi.pass}};
    j["pass"] = all;
    out.json("compare.json", "cli-harness/compare", j);
    return all ? exit_ok : exit_property_failure;
}

int cmd_verify(const RunConfig& c, const Output& out, std::ostream& log) {
    const auto results = verify_properties(c);
    Json rows = Json::array();
    bool all = true;
    for (const auto& r : results) {
        all = all && r.pass;
        log << (r.pass ? "PASS " : "FAIL ") << r.name << (r.detail.empty() ? "" : ": " + r.detail) << '\n';
        rows.push_back({{"property", r.name}, {"pass", r.pass}, {"detail", r.detail}});
    }
    out.json("verify.json", "cli-harness/verify", {{"pass", all}, {"properties", rows}});
    return all ? exit_ok : exit_property_failure;
}

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s{"grid", "solve", "evolve", "lyapunov",
                                            "invariant", "simulate", "verify", "compare"};
    return s;
}

std::vector<NamedFunction> test_dictionary() {
    return {
        {"shell_indicator", [](const Point& x) { const double r = x.norm(); return r >= 1.5 && r <= 2.5 ? 1.0 : 0.0; }},
        {"ball_indicator", [](const Point& x) { return x.norm() <= 2.0 ? 1.0 : 0.0; }},
        {"gaussian_bump", [](const Point& x) { const double d = x.norm() - 2.0; return std::exp(-d * d); }},
        {"inverse_square", [](const Point& x) { return 1.0 / (1.0 + x.squaredNorm()); }},
        {"cosine", [](const Point& x) { return std::cos(x.norm()); }},
    };
}

std::vector<PropertyResult> verify_properties(const RunConfig& c) {
    std::vector<PropertyResult> res;
    auto add = [&](std::string name, bool pass, std::string detail = {}) {
        res.push_back({std::move(name), pass, std::move(detail)});
    };
    auto guarded = [&](const std::string& name, const std::function<void()>& body) {
        try {
            body();
        } catch (const std::exception& e) {
            add(name, false, e.what());
        }
    };
    const Problem p = make_problem(c);
    const int n0 = c.n0.value_or(default_initial_truncation(p));
    const auto window = window_of(c, p);
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);

    const Truncation base = build_truncation(p, n0 + 1, window);
    const std::size_t size = base.grid->size();
    auto random_vector = [&](bool nonneg) {
        Vector v(static_cast<Eigen::Index>(size));
        for (auto& x : v) x = nonneg ? std::abs(unif(rng)) : unif(rng);
        return v;
    };

    guarded("ellipticity", [&] {
        const auto r = check_ellipticity(p.coefficients, *base.grid);
        add("ellipticity", r.pass, "min margin " + num(r.min_margin));
    });
    add("m-matrix sign pattern", has_m_matrix_pattern(base.op));
    guarded("truncated measure monotone in n", [&] {
        const Truncation coarse = build_truncation(p, n0, window);
        const auto r = check_monotone(coarse.measure, base.measure);
        add("truncated measure monotone in n", r.pass, "worst violation " + num(r.worst_violation));
    });
    guarded("resolvent contraction and positivity", [&] {
        for (double lambda : {0.5, 1.0, 2.0}) {
            const Resolvent r(base.op, lambda);
            for (int k = 0; k < 10; ++k) {
                const Vector f = base.op.interior_part(random_vector(k % 2 == 0));
                check_resolvent_contract(lambda, f, r.apply(f));
            }
        }
        add("resolvent contraction and positivity", true);
    });
    guarded("resolvent identity", [&] {
        const Vector f = random_vector(false);
        const double r = resolvent_identity_residual(base.op, 0.5, 2.0, f);
        add("resolvent identity", r <= 1e-8 * std::max(1.0, f.cwiseAbs().maxCoeff()), "residual " + num(r));
    });
    guarded("monotone exhaustion", [&] {
        ExhaustOptions o = exhaust_options(c);
        const auto r = exhaust_resolvent(p, c.lambda, [](const Point&) { return 1.0; }, o);
        add("monotone exhaustion", r.converged, "final n " + std::to_string(r.final_n));
    });
    guarded("maximum principle", [&] {
        const Resolvent r(base.op, c.lambda);
        const Vector u = -r.apply(base.op.interior_part(random_vector(true)));
        add("maximum principle", maximum_principle_check(base.op, c.lambda, u) == PrincipleOutcome::pass);
    });

    const int n_ev = evolution_truncation(c, p);
    const Truncation big = build_truncation(p, n_ev, window);
    const SemigroupEvolver ev(big.op, c.tau);
    const std::size_t x0_node = p.domain.contains(c.x0) ? start_node(c, *big.grid)
                                                        : big.grid->nodes_of(NodeKind::interior).front();
    guarded("Chapman-Kolmogorov", [&] {
        double worst = 0.0;
        for (int k = 0; k < 5; ++k) {
            Vector f(static_cast<Eigen::Index>(big.grid->size()));
            for (auto& x : f) x = unif(rng);
            worst = std::max(worst, chapman_kolmogorov_residual(ev, f, 4 * c.tau, 4 * c.tau));
        }
        add("Chapman-Kolmogorov", worst <= 1e-12, "residual " + num(worst));
    });
    guarded("kernel rows sub-Markov", [&] {
        bool ok = true;
        const auto interior = big.grid->nodes_of(NodeKind::interior);
        for (std::size_t k = 0; k < interior.size(); k += std::max<std::size_t>(1, interior.size() / 16)) {
            const Vector row = ev.kernel_row(interior[k]);
            ok = ok && row.minCoeff() >= -1e-12 && row.sum() <= 1.0 + 1e-9;
        }
        add("kernel rows sub-Markov", ok);
    });
    guarded("sub-Markov evolution", [&] {
        const Vector one = Vector::Ones(static_cast<Eigen::Index>(big.grid->size()));
        const Vector u = ev.evolve(one, c.t);
        add("sub-Markov evolution", u.maxCoeff() <= 1.0 + 1e-9);
    });
    guarded("generator of |x|^2", [&] {
        const LyapunovSpec V = quadratic_lyapunov(p.coefficients);
        const Vector v = GridFunction::sample(big.grid, V.V).values;
        const Vector av = big.op.apply_generator(v);
        double worst = 0.0;
        for (std::size_t i = 0; i < big.grid->size(); ++i) {
            if (big.grid->kind(i) != NodeKind::interior || !big.grid->in_window(i)) continue;
            const Point& x = big.grid->node(i);
            const double err = std::abs(av[static_cast<Eigen::Index>(i)] - V.AV(x));
            worst = std::max(worst, err / (1.0 + x.norm() + 1.0 / big.grid->spacing()));
        }
        add("generator of |x|^2", worst <= 4.0 * big.grid->spacing() + 1e-9, "scaled error " + num(worst));
    });
    guarded("Markov defect under uniqueness", [&] {
        const auto u = verify_uniqueness_lyapunov(quadratic_lyapunov(p.coefficients), 1.0, grid_sequence(p, n0, 3));
        const double d = markov_defect(ev, c.t);
        add("Markov defect under uniqueness", !u.pass || d <= 1e-3,
            std::string(u.pass ? "uniqueness holds" : "uniqueness not shown") + ", defect " + num(d));
    });
    guarded("total variation metric", [&] {
        bool ok = true;
        for (int k = 0; k < 20; ++k) {
            auto draw = [&] {
                Vector m(static_cast<Eigen::Index>(big.grid->size()));
                for (auto& x : m) x = std::abs(unif(rng));
                return MeasureVector{big.grid, m / m.sum()};
            };
            const MeasureVector x = draw(), y = draw(), z = draw();
            const double xy = tv_distance(x, y), yz = tv_distance(y, z), xz = tv_distance(x, z);
            ok = ok && std::abs(xy - tv_distance(y, x)) <= 1e-15 && xz <= xy + yz + 1e-15 && xy >= 0.0 &&
                 xy <= 1.0 + 1e-12 && tv_distance(x, x) == 0.0;
        }
        add("total variation metric", ok);
    });
    guarded("Abel masses bounded", [&] {
        const AbelResult a = abel_invariant(big.op, x0_node, halving_sequence(4));
        bool ok = true;
        for (const auto& s : a.steps) ok = ok && s.nu.total() <= 1.0 + 1e-9;
        add("Abel masses bounded", ok);
    });
    guarded("Monte Carlo reproducibility", [&] {
        PathOptions po;
        po.dt = c.dt;
        po.particles = 64;
        po.seed = c.seed;
        const Point x0 = big.grid->node(x0_node);
        const double tt = 0.1 - std::fmod(0.1, c.dt);
        po.exec = Exec::parallel;
        const auto a = simulate_paths(p.coefficients, p.domain, p.measure, x0, tt, po);
        po.exec = Exec::serial;
        const auto b = simulate_paths(p.coefficients, p.domain, p.measure, x0, tt, po);
        add("Monte Carlo reproducibility", a.positions == b.positions && a.boundary_hits == b.boundary_hits);
    });
    guarded("return distribution", [&] {
        std::vector<ReturnEvent> events;
        Philox4x32 g(c.seed, 0);
        for (const Point& z : p.domain.boundary_samples(16))
            for (int k = 0; k < 200; ++k) events.push_back({z, p.measure.sample(z, [&g] { return g.uniform(); })});
        const auto r = return_distribution_test(p.measure, events);
        add("return distribution", r.pass, "chi-square " + num(r.statistic) + " vs " + num(r.critical));
    });
    guarded("modified Lyapunov chain", [&] {
        const ModifiedLyapunov m = modify_lyapunov(p.measure, p.domain, p.coefficients);
        bool ok = true;
        for (const auto& r : verify_modified_chain(m, p.measure, p.domain)) ok = ok && r.pass;
        add("modified Lyapunov chain", ok, "M " + num(m.M) + ", epsilon " + num(m.epsilon));
    });
    guarded("configuration round trip", [&] {
        std::istringstream is(serialize_config(c));
        add("configuration round trip", parse_config(is) == c);
    });
    return res;
}

int run(const std::string& subcommand, const RunConfig& config, const std::string& out_dir, std::ostream& log) {
    try {
        const Output out(out_dir, config);
        if (subcommand == "grid") return cmd_grid(config, out);
        if (subcommand == "solve") return cmd_solve(config, out, log);
        if (subcommand == "evolve") return cmd_evolve(config, out);
        if (subcommand == "lyapunov") return cmd_lyapunov(config, out);
        if (subcommand == "invariant") return cmd_invariant(config, out);
        if (subcommand == "simulate") return cmd_simulate(config, out);
        if (subcommand == "verify") return cmd_verify(config, out, log);
        if (subcommand == "compare") return cmd_compare(config, out);
        log << "unknown subcommand: " << subcommand << '\n';
        return exit_config_error;
    } catch (const ConfigError& e) {
        log << "configuration error [" << e.key() << "]: " << e.what() << '\n';
        return exit_config_error;
    } catch (const NumericalError& e) {
        log << subcommand << ": numerical failure: " << e.what() << '\n';
        return exit_numerical_failure;
    } catch (const DivergentIntegral& e) {
        log << subcommand << ": numerical failure: " << e.what() << '\n';
        return exit_numerical_failure;
    } catch (const std::exception& e) {
        log << subcommand << ": " << e.what() << '\n';
        return exit_numerical_failure;
    }
}

}  // namespace feller
