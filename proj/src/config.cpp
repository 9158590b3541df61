#include "feller/config.hpp"

#include "feller/expression.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace feller {

namespace {

namespace pt = boost::property_tree;

const std::map<std::string, std::set<std::string>>& schema() {
    static const std::map<std::string, std::set<std::string>> s{
        {"domain", {"kind", "dimension", "radius"}},
        {"operator", {"name", "alpha", "beta", "a11", "a12", "a22", "b1", "b2", "eta"}},
        {"measure", {"kind", "atoms", "factors", "r_inner", "r_outer", "exponent"}},
        {"numerics",
         {"h", "tau", "dt", "tol", "tv_tol", "max_n", "n0", "n", "window", "particles"}},
        {"task",
         {"lambda", "t", "times", "initial", "value", "box_lo", "box_hi", "expression", "x0", "mode",
          "abel_halvings", "burn_in", "horizon", "sample_every"}},
        {"run", {"seed", "jobs"}},
    };
    return s;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v))
        throw ConfigError(key, key + ": expected a finite number, got '" + text + "'");
    return v;
}

long long to_integer(const std::string& key, const std::string& text) {
    const std::string t = trim(text);
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
        throw ConfigError(key, key + ": expected an integer, got '" + text + "'");
    return v;
}

std::vector<double> to_list(const std::string& key, const std::string& text) {
    std::string t = text;
    for (char& c : t)
        if (c == ',') c = ' ';
    std::istringstream is(t);
    std::vector<double> out;
    std::string tok;
    while (is >> tok) out.push_back(to_double(key, tok));
    return out;
}

Point to_point(const std::string& key, const std::string& text, int dimension) {
    const auto v = to_list(key, text);
    if (static_cast<int>(v.size()) != dimension)
        throw ConfigError(key, key + ": expected " + std::to_string(dimension) + " coordinate(s)");
    return dimension == 1 ? Point(v[0], 0.0) : Point(v[0], v[1]);
}

/// "coords [@ weight]; ..." with weights defaulting to equal shares.
std::vector<Atom> to_atoms(const std::string& key, const std::string& text, int dimension, bool radial) {
    std::vector<Atom> atoms;
    std::string item;
    std::istringstream is(text);
    bool any_weight = false;
    while (std::getline(is, item, ';')) {
        item = trim(item);
        if (item.empty()) continue;
        Atom a;
        std::string where = item;
        const auto at = item.find('@');
        if (at != std::string::npos) {
            where = item.substr(0, at);
            a.weight = to_double(key, item.substr(at + 1));
            any_weight = true;
        }
        if (radial) {
            a.placement = AtomPlacement::radial;
            a.factor = to_double(key, where);
        } else {
            a.location = to_point(key, where, dimension);
        }
        atoms.push_back(a);
    }
    if (atoms.empty()) throw ConfigError(key, key + ": no atoms given");
    if (!any_weight)
        for (Atom& a : atoms) a.weight = 1.0 / static_cast<double>(atoms.size());
    return atoms;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_point(const Point& p, int dimension) {
    return dimension == 1 ? fmt_double(p[0]) : fmt_double(p[0]) + " " + fmt_double(p[1]);
}

void require_positive(const std::string& key, double v) {
    if (!(v > 0.0)) throw ConfigError(key, key + " must be positive");
}

}  // namespace

RunConfig parse_config(std::istream& is) {
    pt::ptree tree;
    try {
        pt::read_ini(is, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("", std::string("malformed configuration: ") + e.message());
    }
    std::map<std::string, std::string> values;
    for (const auto& [section, body] : tree) {
        const auto it = schema().find(section);
        if (body.empty() || it == schema().end())
            throw ConfigError(section, "unknown section or key outside a section: " + section);
        for (const auto& [key, leaf] : body) {
            const std::string full = section + "." + key;
            if (!it->second.count(key)) throw ConfigError(full, "unknown key: " + full);
            values[full] = leaf.get_value<std::string>();
        }
    }
    std::set<std::string> used;
    auto get = [&](const std::string& key) -> std::optional<std::string> {
        auto v = values.find(key);
        if (v == values.end()) return std::nullopt;
        used.insert(key);
        return trim(v->second);
    };
    auto need = [&](const std::string& key) {
        auto v = get(key);
        if (!v) throw ConfigError(key, "missing required key: " + key);
        return *v;
    };

    RunConfig c;
    const std::string kind = need("domain.kind");
    if (kind == "half-line") c.domain_kind = DomainKind::half_line;
    else if (kind == "ball-exterior") c.domain_kind = DomainKind::ball_exterior;
    else throw ConfigError("domain.kind", "domain.kind must be half-line or ball-exterior");
    if (auto v = get("domain.dimension")) c.dimension = static_cast<int>(to_integer("domain.dimension", *v));
    else if (c.domain_kind == DomainKind::ball_exterior) throw ConfigError("domain.dimension", "missing required key: domain.dimension");
    if (c.dimension != 1 && c.dimension != 2) throw ConfigError("domain.dimension", "domain.dimension must be 1 or 2");
    if (c.domain_kind == DomainKind::half_line && c.dimension != 1)
        throw ConfigError("domain.dimension", "the half-line is one-dimensional");
    c.radius = to_double("domain.radius", need("domain.radius"));
    require_positive("domain.radius", c.radius);

    c.operator_name = need("operator.name");
    const bool custom = c.operator_name == "custom";
    if (!custom && !parse_builtin_operator(c.operator_name))
        throw ConfigError("operator.name", "unknown operator: " + c.operator_name);
    if (auto v = get("operator.alpha")) c.alpha = to_double("operator.alpha", *v);
    if (auto v = get("operator.beta")) c.beta = to_double("operator.beta", *v);
    const std::pair<const char*, std::string CustomCoefficients::*> exprs[] = {
        {"a11", &CustomCoefficients::a11}, {"a12", &CustomCoefficients::a12}, {"a22", &CustomCoefficients::a22},
        {"b1", &CustomCoefficients::b1},   {"b2", &CustomCoefficients::b2},   {"eta", &CustomCoefficients::eta}};
    for (const auto& [name, member] : exprs) {
        const std::string key = std::string("operator.") + name;
        if (auto v = get(key)) {
            if (!custom) throw ConfigError(key, key + " is only allowed for the custom operator");
            try {
                Expression::parse(*v);
            } catch (const std::invalid_argument& e) {
                throw ConfigError(key, key + ": " + e.what());
            }
            c.custom.*member = *v;
        }
    }
    if (custom && (c.custom.a11.empty() || c.custom.eta.empty()))
        throw ConfigError("operator.a11", "the custom operator needs at least a11 and eta");

    c.measure_kind = need("measure.kind");
    if (c.measure_kind == "dirac") {
        c.atoms = to_atoms("measure.atoms", need("measure.atoms"), c.dimension, false);
    } else if (c.measure_kind == "radial-dirac") {
        c.atoms = to_atoms("measure.factors", need("measure.factors"), c.dimension, true);
    } else if (c.measure_kind == "shell") {
        c.r_inner = to_double("measure.r_inner", need("measure.r_inner"));
        c.r_outer = to_double("measure.r_outer", need("measure.r_outer"));
    } else if (c.measure_kind == "power-tail") {
        c.r_inner = to_double("measure.r_inner", need("measure.r_inner"));
        c.exponent = to_double("measure.exponent", need("measure.exponent"));
    } else {
        throw ConfigError("measure.kind", "measure.kind must be dirac, radial-dirac, shell or power-tail");
    }

    c.h = to_double("numerics.h", need("numerics.h"));
    require_positive("numerics.h", c.h);
    auto positive = [&](const std::string& key, double& field) {
        if (auto v = get(key)) field = to_double(key, *v);
        require_positive(key, field);
    };
    positive("numerics.tau", c.tau);
    positive("numerics.dt", c.dt);
    positive("numerics.tol", c.tol);
    positive("numerics.tv_tol", c.tv_tol);
    auto positive_int = [&](const std::string& key) -> std::optional<long long> {
        auto v = get(key);
        if (!v) return std::nullopt;
        const long long n = to_integer(key, *v);
        if (n < 1) throw ConfigError(key, key + " must be at least 1");
        return n;
    };
    if (auto v = positive_int("numerics.max_n")) c.max_n = static_cast<int>(*v);
    if (auto v = positive_int("numerics.n0")) c.n0 = static_cast<int>(*v);
    if (auto v = positive_int("numerics.n")) c.n = static_cast<int>(*v);
    if (auto v = get("numerics.window")) {
        c.window = to_double("numerics.window", *v);
        require_positive("numerics.window", *c.window);
    }
    if (auto v = positive_int("numerics.particles")) {
        if (*v < 2) throw ConfigError("numerics.particles", "numerics.particles must be at least 2");
        c.particles = static_cast<std::size_t>(*v);
    }

    positive("task.lambda", c.lambda);
    if (auto v = get("task.t")) c.t = to_double("task.t", *v);
    if (c.t < 0.0) throw ConfigError("task.t", "task.t must be nonnegative");
    if (auto v = get("task.times")) {
        c.times = to_list("task.times", *v);
        for (double t : c.times)
            if (t < 0.0) throw ConfigError("task.times", "task.times must be nonnegative");
    }
    if (auto v = get("task.initial")) c.initial = *v;
    if (c.initial != "constant" && c.initial != "indicator" && c.initial != "expression")
        throw ConfigError("task.initial", "task.initial must be constant, indicator or expression");
    if (auto v = get("task.value")) c.value = to_double("task.value", *v);
    if (auto v = get("task.box_lo")) c.box_lo = to_point("task.box_lo", *v, c.dimension);
    if (auto v = get("task.box_hi")) c.box_hi = to_point("task.box_hi", *v, c.dimension);
    if (auto v = get("task.expression")) {
        try {
            Expression::parse(*v);
        } catch (const std::invalid_argument& e) {
            throw ConfigError("task.expression", std::string("task.expression: ") + e.what());
        }
        c.expression = *v;
    }
    if (c.initial == "expression" && c.expression.empty())
        throw ConfigError("task.expression", "task.initial = expression needs task.expression");
    if (auto v = get("task.x0")) c.x0 = to_point("task.x0", *v, c.dimension);
    if (auto v = get("task.mode")) c.mode = *v;
    if (auto v = get("task.abel_halvings")) {
        c.abel_halvings = static_cast<int>(to_integer("task.abel_halvings", *v));
        if (c.abel_halvings < 1 || c.abel_halvings > 40)
            throw ConfigError("task.abel_halvings", "task.abel_halvings must lie in [1, 40]");
    }
    if (auto v = get("task.burn_in")) c.burn_in = to_double("task.burn_in", *v);
    if (c.burn_in < 0.0) throw ConfigError("task.burn_in", "task.burn_in must be nonnegative");
    positive("task.horizon", c.horizon);
    positive("task.sample_every", c.sample_every);

    if (auto v = get("run.seed")) {
        const long long s = to_integer("run.seed", *v);
        if (s < 0) throw ConfigError("run.seed", "run.seed must be nonnegative");
        c.seed = static_cast<std::uint64_t>(s);
    }
    if (auto v = get("run.jobs")) {
        c.jobs = static_cast<int>(to_integer("run.jobs", *v));
        if (c.jobs < 0) throw ConfigError("run.jobs", "run.jobs must be nonnegative");
    }

    for (const auto& [key, v] : values)
        if (!used.count(key)) throw ConfigError(key, key + " does not apply to this configuration");

    // Surface physics errors (bad parameters, misplaced atoms) at parse time.
    make_problem(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("", "cannot open configuration file: " + path);
    return parse_config(is);
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    os << "[domain]\n";
    os << "kind = " << (c.domain_kind == DomainKind::half_line ? "half-line" : "ball-exterior") << '\n';
    os << "dimension = " << c.dimension << '\n';
    os << "radius = " << fmt_double(c.radius) << '\n';

    os << "\n[operator]\nname = " << c.operator_name << '\n';
    if (c.operator_name == "custom") {
        const std::pair<const char*, const std::string*> exprs[] = {
            {"a11", &c.custom.a11}, {"a12", &c.custom.a12}, {"a22", &c.custom.a22},
            {"b1", &c.custom.b1},   {"b2", &c.custom.b2},   {"eta", &c.custom.eta}};
        for (const auto& [name, text] : exprs)
            if (!text->empty()) os << name << " = " << *text << '\n';
    }
    os << "alpha = " << fmt_double(c.alpha) << '\n';
    os << "beta = " << fmt_double(c.beta) << '\n';

    os << "\n[measure]\nkind = " << c.measure_kind << '\n';
    if (c.measure_kind == "dirac" || c.measure_kind == "radial-dirac") {
        os << (c.measure_kind == "dirac" ? "atoms = " : "factors = ");
        for (std::size_t k = 0; k < c.atoms.size(); ++k) {
            const Atom& a = c.atoms[k];
            if (k) os << "; ";
            os << (a.placement == AtomPlacement::radial ? fmt_double(a.factor) : fmt_point(a.location, c.dimension))
               << " @ " << fmt_double(a.weight);
        }
        os << '\n';
    } else if (c.measure_kind == "shell") {
        os << "r_inner = " << fmt_double(c.r_inner) << "\nr_outer = " << fmt_double(c.r_outer) << '\n';
    } else {
        os << "r_inner = " << fmt_double(c.r_inner) << "\nexponent = " << fmt_double(c.exponent) << '\n';
    }

    os << "\n[numerics]\n";
    os << "h = " << fmt_double(c.h) << '\n';
    os << "tau = " << fmt_double(c.tau) << '\n';
    os << "dt = " << fmt_double(c.dt) << '\n';
    os << "tol = " << fmt_double(c.tol) << '\n';
    os << "tv_tol = " << fmt_double(c.tv_tol) << '\n';
    os << "max_n = " << c.max_n << '\n';
    if (c.n0) os << "n0 = " << *c.n0 << '\n';
    if (c.n) os << "n = " << *c.n << '\n';
    if (c.window) os << "window = " << fmt_double(*c.window) << '\n';
    os << "particles = " << c.particles << '\n';

    os << "\n[task]\n";
    os << "lambda = " << fmt_double(c.lambda) << '\n';
    os << "t = " << fmt_double(c.t) << '\n';
    if (!c.times.empty()) {
        os << "times = ";
        for (std::size_t k = 0; k < c.times.size(); ++k) os << (k ? ", " : "") << fmt_double(c.times[k]);
        os << '\n';
    }
    os << "initial = " << c.initial << '\n';
    os << "value = " << fmt_double(c.value) << '\n';
    os << "box_lo = " << fmt_point(c.box_lo, c.dimension) << '\n';
    os << "box_hi = " << fmt_point(c.box_hi, c.dimension) << '\n';
    if (!c.expression.empty()) os << "expression = " << c.expression << '\n';
    os << "x0 = " << fmt_point(c.x0, c.dimension) << '\n';
    if (!c.mode.empty()) os << "mode = " << c.mode << '\n';
    os << "abel_halvings = " << c.abel_halvings << '\n';
    os << "burn_in = " << fmt_double(c.burn_in) << '\n';
    os << "horizon = " << fmt_double(c.horizon) << '\n';
    os << "sample_every = " << fmt_double(c.sample_every) << '\n';

    os << "\n[run]\nseed = " << c.seed << "\njobs = " << c.jobs << '\n';
    return os.str();
}

std::string config_hash(const RunConfig& config) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : serialize_config(config)) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

DomainSpec make_domain(const RunConfig& c) {
    try {
        return c.domain_kind == DomainKind::half_line ? DomainSpec::half_line(c.radius)
                                                      : DomainSpec::ball_exterior(c.dimension, c.radius);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("domain", e.what());
    }
}

CoefficientField make_operator(const RunConfig& c) {
    try {
        if (c.operator_name == "custom") return custom_operator(c.dimension, c.custom);
        return builtin_operator(*parse_builtin_operator(c.operator_name), c.dimension, {c.alpha, c.beta});
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError("operator", std::string("operator: ") + e.what());
    }
}

BoundaryMeasureSpec make_measure(const RunConfig& c) {
    BoundaryMeasureSpec spec;
    if (c.measure_kind == "dirac" || c.measure_kind == "radial-dirac")
        spec = BoundaryMeasureSpec(AtomicMeasure{c.atoms}, c.dimension);
    else if (c.measure_kind == "shell")
        spec = BoundaryMeasureSpec(ShellDensity{c.r_inner, c.r_outer}, c.dimension);
    else
        spec = BoundaryMeasureSpec(PowerTailDensity{c.r_inner, c.exponent}, c.dimension);
    try {
        spec.validate(make_domain(c));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError("measure", std::string("measure: ") + e.what());
    }
    return spec;
}

Problem make_problem(const RunConfig& c) {
    return {make_domain(c), make_operator(c), make_measure(c), c.h};
}

}  // namespace feller
