#include "stefan/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "stefan/kernels.hpp"

namespace stefan {

ConfigError::ConfigError(std::size_t line, const std::string& msg)
    : StefanError(ErrorCode::kConfigParse, line ? fmt::format("line {}: {}", line, msg) : msg), line_(line) {}

namespace {

std::string summarize(const ValidationReport& r) {
    std::string out = "assumption check failed:";
    for (const auto& c : r.checks) {
        if (!c.pass) out += fmt::format(" {} (margin {:.6g}: {});", c.name, c.margin, c.detail);
    }
    return out;
}

} // namespace

AssumptionError::AssumptionError(ValidationReport report)
    : StefanError(ErrorCode::kAssumptionViolation, summarize(report)), report_(std::move(report)) {}

double SampledSignal::at(double time) const {
    if (t.empty()) return 0.0;
    auto it = std::upper_bound(t.begin(), t.end(), time);
    if (it == t.begin()) return v.front();
    return v[static_cast<std::size_t>(it - t.begin()) - 1];
}

SampledSignal SampledSignal::load_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, fmt::format("cannot open {}", path.string()));
    SampledSignal s;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double a, b;
        if (!(ls >> a >> b)) {
            if (n == 1) continue; // header
            throw ConfigError(n, fmt::format("{}: expected two numbers", path.string()));
        }
        if (!std::isfinite(a) || !std::isfinite(b)) throw ConfigError(n, "non-finite sample");
        if (!s.t.empty() && a <= s.t.back()) throw ConfigError(n, "sample times must increase");
        s.t.push_back(a);
        s.v.push_back(b);
    }
    if (s.t.empty()) throw ConfigError(0, fmt::format("{} holds no samples", path.string()));
    return s;
}

double OperatorSignal::at(double t) const {
    switch (kind) {
    case Kind::kConstant: return value;
    case Kind::kSinusoid: return amplitude * std::sin(2.0 * M_PI * t / period) + offset;
    case Kind::kFile: return samples.at(t);
    case Kind::kLive: return 0.0;
    }
    return 0.0;
}

double Disturbance::declared_bound() const {
    if (bound) return *bound;
    switch (kind) {
    case Kind::kNone: return 0.0;
    case Kind::kConstant: return value;
    case Kind::kRandom: return q_max;
    case Kind::kFile: return *std::max_element(samples.v.begin(), samples.v.end());
    }
    return 0.0;
}

DisturbanceSource::DisturbanceSource(const Disturbance& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

double DisturbanceSource::at(double t) {
    switch (spec_.kind) {
    case Disturbance::Kind::kNone: return 0.0;
    case Disturbance::Kind::kConstant: return spec_.value;
    case Disturbance::Kind::kFile: return spec_.samples.at(t);
    case Disturbance::Kind::kRandom: {
        const auto k = static_cast<long long>(std::floor(t / spec_.hold));
        std::uniform_real_distribution<double> u(0.0, spec_.q_max);
        while (interval_ < k) {
            current_ = u(rng_);
            ++interval_;
        }
        return current_;
    }
    }
    return 0.0;
}

// ---------------------------------------------------------------------------
// Config

double ScenarioConfig::logged_c1() const {
    if (c1_log) return *c1_log;
    if (const auto* n = std::get_if<NonovGains>(&gains)) return n->c1;
    const auto& q = std::get<QpGains>(gains);
    const double disc = q.k1 * q.k1 - 4.0 * q.k2;
    if (disc < 0.0) return q.k1 / 2.0;
    return (q.k1 - std::sqrt(disc)) / 2.0;
}

std::optional<double> ScenarioConfig::flux_ceiling() const {
    if (variant != ControlVariant::kUpper) return std::nullopt;
    return setpoint.flux_ceiling(material);
}

SafetyTolerances ScenarioConfig::effective_tolerances() const {
    if (tolerances) return *tolerances;
    const double h = solver.grid.dxi();
    const double scale_T = std::max(initial_peak, initial_solid_depth);
    const double scale_q = std::max({actuator.qc, flux_ceiling().value_or(0.0)});
    return {.tol_T = 1e-9 * std::max(scale_T, 1e-300),
            .tol_s = 1e-2 * h * setpoint.s_r,
            .tol_q = 1e-9 * std::max(scale_q, 1e-300),
            .tol_cbf = 0.0};
}

namespace {

struct Entry {
    std::string value;
    std::size_t line;
};

class Entries {
public:
    std::map<std::string, Entry> map;
    std::set<std::string> used;

    const Entry* find(const std::string& key) {
        auto it = map.find(key);
        if (it == map.end()) return nullptr;
        used.insert(key);
        return &it->second;
    }

    bool has(const std::string& key) const { return map.count(key) != 0; }

    std::optional<double> number(const std::string& key, bool length = false) {
        const Entry* e = find(key);
        if (!e) return std::nullopt;
        return parse_number(*e, length);
    }

    double number_or(const std::string& key, double fallback, bool length = false) {
        return number(key, length).value_or(fallback);
    }

    double required(const std::string& key, bool length = false) {
        auto v = number(key, length);
        if (!v) throw ConfigError(0, fmt::format("missing required key {}", key));
        return *v;
    }

    std::optional<std::string> text(const std::string& key) {
        const Entry* e = find(key);
        if (!e) return std::nullopt;
        return e->value;
    }

    static double parse_number(const Entry& e, bool length) {
        const char* first = e.value.data();
        const char* last = first + e.value.size();
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(first, last, v);
        if (ec != std::errc() || ptr == first) throw ConfigError(e.line, fmt::format("'{}' is not a number", e.value));
        std::string rest(ptr, last);
        rest.erase(0, rest.find_first_not_of(" \t"));
        if (!rest.empty()) {
            if (!length) throw ConfigError(e.line, fmt::format("unexpected unit '{}'", rest));
            if (rest == "mm") {
                v *= 1e-3;
            } else if (rest != "m") {
                throw ConfigError(e.line, fmt::format("unknown length unit '{}' (use m or mm)", rest));
            }
        }
        if (!std::isfinite(v)) throw ConfigError(e.line, "value must be finite");
        return v;
    }
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

Entries tokenize(std::string_view text) {
    Entries out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        const std::string body = trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'section.key = value'");
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.find('.') == std::string::npos) throw ConfigError(line_no, fmt::format("key '{}' lacks a section", key));
        if (value.empty()) throw ConfigError(line_no, fmt::format("key '{}' has no value", key));
        if (out.map.count(key)) throw ConfigError(line_no, fmt::format("duplicate key '{}'", key));
        out.map.emplace(key, Entry{value, line_no});
    }
    return out;
}

template <class Enum>
Enum pick(Entries& e, const std::string& key, std::initializer_list<std::pair<const char*, Enum>> options, Enum fallback) {
    const Entry* entry = e.find(key);
    if (!entry) return fallback;
    for (const auto& [name, v] : options) {
        if (entry->value == name) return v;
    }
    std::string names;
    for (const auto& o : options) names += fmt::format(" {}", o.first);
    throw ConfigError(entry->line, fmt::format("{} must be one of:{}", key, names));
}

MaterialProperties read_material(Entries& e, const std::string& section, MaterialProperties m) {
    m.k = e.number_or(section + ".k", m.k);
    m.rho = e.number_or(section + ".rho", m.rho);
    m.cp = e.number_or(section + ".cp", m.cp);
    m.dH = e.number_or(section + ".dH", m.dH);
    m.Tm = e.number_or(section + ".Tm", m.Tm);
    return m;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

void check(bool ok, const Entry* e, const std::string& msg) {
    if (!ok) throw ConfigError(e ? e->line : 0, msg);
}

} // namespace

ScenarioConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    Entries e = tokenize(text);
    ScenarioConfig c;
    if (auto v = e.text("scenario.name")) c.name = *v;
    c.plant = pick(e, "scenario.plant", {{"one-phase", PlantKind::kOnePhase}, {"two-phase", PlantKind::kTwoPhase}},
                   PlantKind::kOnePhase);
    c.horizon = e.number_or("scenario.horizon", c.horizon);
    if (const Entry* s = e.find("scenario.seed")) {
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(s->value.data(), s->value.data() + s->value.size(), seed);
        check(ec == std::errc() && ptr == s->value.data() + s->value.size(), s, "scenario.seed must be an unsigned integer");
        c.seed = seed;
    }
    check(c.horizon >= 0.0, e.find("scenario.horizon"), "scenario.horizon must be >= 0");

    const bool two = c.plant == PlantKind::kTwoPhase;
    const std::string preset = e.text("material.preset").value_or("ti6al4v");
    MaterialProperties base;
    if (preset == "ti6al4v") {
        base = MaterialProperties::ti6al4v();
    } else if (preset == "unit") {
        base = MaterialProperties::unit();
    } else {
        throw ConfigError(e.find("material.preset")->line, "material.preset must be ti6al4v or unit");
    }
    c.material = read_material(e, "material", base);
    c.solid = read_material(e, "solid", c.material);
    try {
        c.material.validate();
        c.solid.validate();
    } catch (const StefanError& err) {
        throw ConfigError(0, err.what());
    }

    c.s0 = e.number_or("geometry.s0", c.s0, true);
    c.L = e.number_or("geometry.L", c.L, true);
    c.setpoint.s_r = e.number_or("geometry.s_r", c.setpoint.s_r, true);
    c.setpoint.T_star = e.number("geometry.T_star");
    c.setpoint.q_star = e.number("geometry.q_star");
    check(c.s0 > 0.0 && c.s0 < c.L, e.find("geometry.s0"), "geometry.s0 must lie in (0, L)");
    try {
        c.setpoint.validate(c.L, c.material.Tm);
    } catch (const StefanError& err) {
        throw ConfigError(e.has("geometry.s_r") ? e.find("geometry.s_r")->line : 0, err.what());
    }

    c.initial_peak = e.number_or("initial.peak", c.initial_peak);
    c.initial_solid_depth = e.number_or("initial.solid_depth", c.initial_solid_depth);
    check(c.initial_peak >= 0.0, e.find("initial.peak"), "initial.peak must be >= 0");
    check(c.initial_solid_depth >= 0.0, e.find("initial.solid_depth"), "initial.solid_depth must be >= 0");
    if (auto f = e.text("initial.file")) c.initial_profile = SampledSignal::load_csv(resolve(base_dir, *f));

    const int order = static_cast<int>(e.number_or("actuator.order", 1));
    check(order == 1 || order == 2, e.find("actuator.order"), "actuator.order must be 1 or 2");
    c.actuator.qc = e.required("actuator.qc0");
    if (order == 2) c.actuator.p = e.number_or("actuator.p0", 0.0);

    c.variant = pick(e, "controller.variant",
                     {{"nonov-1", ControlVariant::kNonov1},
                      {"nonov-2", ControlVariant::kNonov2},
                      {"qp", ControlVariant::kQp},
                      {"upper", ControlVariant::kUpper},
                      {"two-phase", ControlVariant::kTwoPhase}},
                     two ? ControlVariant::kTwoPhase : ControlVariant::kNonov1);
    const Entry* variant_entry = e.find("controller.variant");
    check(two == (c.variant == ControlVariant::kTwoPhase), variant_entry,
          "the two-phase plant pairs with controller.variant = two-phase only");
    check((order == 2) == (c.variant == ControlVariant::kNonov2), variant_entry,
          "controller.variant = nonov-2 pairs with actuator.order = 2");

    const bool has_c = e.has("controller.c1") || e.has("controller.c2");
    const bool has_k = e.has("controller.k1") || e.has("controller.k2");
    const bool qp = c.variant == ControlVariant::kQp ||
                    (c.variant == ControlVariant::kUpper && (e.has("controller.delta1") || e.has("controller.delta2")));
    if (qp) {
        QpGains g{.k1 = e.required("controller.k1"),
                  .k2 = e.required("controller.k2"),
                  .delta1 = e.number_or("controller.delta1", 0.0),
                  .delta2 = e.number_or("controller.delta2", 0.0)};
        try {
            g.validate();
        } catch (const StefanError& err) {
            throw ConfigError(0, err.what());
        }
        c.gains = g;
        c.c1_log = e.number("controller.c1");
    } else {
        NonovGains g{};
        if (has_k && !has_c) {
            // -(c1 + c2) qc + c1 c2 sigma = -k1 qc + k2 sigma with real rates
            const double k1 = e.required("controller.k1"), k2 = e.required("controller.k2");
            const double disc = k1 * k1 - 4.0 * k2;
            check(disc >= 0.0, e.find("controller.k2"), "k1^2 < 4 k2 has no real rate pair (c1, c2)");
            g.c1 = (k1 - std::sqrt(disc)) / 2.0;
            g.c2 = (k1 + std::sqrt(disc)) / 2.0;
        } else {
            g.c1 = e.required("controller.c1");
            g.c2 = e.required("controller.c2");
        }
        if (order == 2) g.c3 = e.required("controller.c3");
        try {
            g.validate();
        } catch (const StefanError& err) {
            throw ConfigError(0, err.what());
        }
        c.gains = g;
    }
    check(c.variant != ControlVariant::kUpper || c.setpoint.flux_ceiling(c.material), variant_entry,
          "controller.variant = upper needs geometry.T_star or geometry.q_star");

    using OK = OperatorSignal::Kind;
    c.operator_signal.kind = pick(e, "operator.kind",
                                  {{"constant", OK::kConstant}, {"sinusoid", OK::kSinusoid}, {"file", OK::kFile},
                                   {"live", OK::kLive}},
                                  OK::kConstant);
    c.operator_signal.value = e.number_or("operator.value", 0.0);
    c.operator_signal.amplitude = e.number_or("operator.amplitude", 0.0);
    c.operator_signal.period = e.number_or("operator.period", 1.0);
    c.operator_signal.offset = e.number_or("operator.offset", 0.0);
    check(c.operator_signal.period > 0.0, e.find("operator.period"), "operator.period must be positive");
    if (c.operator_signal.kind == OK::kFile) {
        auto f = e.text("operator.file");
        check(f.has_value(), nullptr, "operator.kind = file needs operator.file");
        c.operator_signal.samples = SampledSignal::load_csv(resolve(base_dir, *f));
    }

    using DK = Disturbance::Kind;
    c.disturbance.kind = pick(e, "disturbance.kind",
                              {{"none", DK::kNone}, {"constant", DK::kConstant}, {"random", DK::kRandom}, {"file", DK::kFile}},
                              DK::kNone);
    check(two || c.disturbance.kind == DK::kNone, e.find("disturbance.kind"), "disturbances act on the solid phase only");
    c.disturbance.value = e.number_or("disturbance.value", 0.0);
    c.disturbance.q_max = e.number_or("disturbance.q_max", 0.0);
    c.disturbance.hold = e.number_or("disturbance.hold", 1e-3);
    c.disturbance.bound = e.number("disturbance.bound");
    check(c.disturbance.value >= 0.0 && c.disturbance.q_max >= 0.0, nullptr, "disturbance magnitudes must be >= 0");
    check(c.disturbance.hold > 0.0, e.find("disturbance.hold"), "disturbance.hold must be positive");
    if (c.disturbance.kind == DK::kFile) {
        auto f = e.text("disturbance.file");
        check(f.has_value(), nullptr, "disturbance.kind = file needs disturbance.file");
        c.disturbance.samples = SampledSignal::load_csv(resolve(base_dir, *f));
        for (double v : c.disturbance.samples.v) check(v >= 0.0, nullptr, "disturbance samples must be >= 0");
    }

    c.bounds = {.T_l_bar = e.number_or("bounds.T_l_bar", std::max(c.initial_peak, 1e-12)),
                .T_s_bar = e.number_or("bounds.T_s_bar", std::max(c.initial_solid_depth, 1e-12)),
                .eta_l = e.number_or("bounds.eta_l", 1.0),
                .eta_s = e.number_or("bounds.eta_s", 1.0),
                .q_f_bar = c.disturbance.declared_bound()};

    const auto n = static_cast<std::size_t>(e.number_or("solver.n", 200));
    c.solver.grid = Grid(n);
    c.solver.integrator = pick(e, "solver.integrator",
                               {{"implicit", Integrator::kImplicitEuler}, {"explicit", Integrator::kExplicitEuler}},
                               Integrator::kImplicitEuler);
    if (const Entry* dt = e.find("solver.dt")) {
        if (dt->value == "auto") {
            check(c.solver.integrator == Integrator::kExplicitEuler, dt, "solver.dt = auto needs the explicit integrator");
            c.auto_dt = true;
        } else {
            c.solver.dt = Entries::parse_number(*dt, false);
        }
    }
    c.solver.safety_factor = e.number_or("solver.cfl", c.solver.safety_factor);
    c.solver.min_interface = e.number_or("solver.min_interface", c.solver.min_interface, true);
    try {
        c.solver.validate();
    } catch (const StefanError& err) {
        throw ConfigError(0, err.what());
    }

    const double dec = e.number_or("output.decimate", 100);
    check(dec >= 1.0, e.find("output.decimate"), "output.decimate must be >= 1");
    c.decimate = static_cast<std::size_t>(dec);

    if (e.has("tolerance.T") || e.has("tolerance.s") || e.has("tolerance.q") || e.has("tolerance.cbf")) {
        SafetyTolerances t = c.effective_tolerances();
        t.tol_T = e.number_or("tolerance.T", t.tol_T);
        t.tol_s = e.number_or("tolerance.s", t.tol_s, true);
        t.tol_q = e.number_or("tolerance.q", t.tol_q);
        t.tol_cbf = e.number_or("tolerance.cbf", t.tol_cbf);
        try {
            t.validate();
        } catch (const StefanError& err) {
            throw ConfigError(0, err.what());
        }
        c.tolerances = t;
    }

    c.timescale = e.number_or("serve.timescale", c.timescale);
    c.frame_rate = e.number_or("serve.frame_rate", c.frame_rate);
    check(c.timescale > 0.0, e.find("serve.timescale"), "serve.timescale must be positive");
    check(c.frame_rate > 0.0, e.find("serve.frame_rate"), "serve.frame_rate must be positive");

    for (const auto& [key, entry] : e.map) {
        if (!e.used.count(key)) throw ConfigError(entry.line, fmt::format("unknown key '{}'", key));
    }
    return c;
}

PlantState initial_state(const ScenarioConfig& cfg) {
    const Grid& g = cfg.solver.grid;
    std::vector<double> liquid(g.n_nodes());
    for (std::size_t i = 0; i < liquid.size(); ++i) {
        const double xi = g.node(i);
        if (cfg.initial_profile) {
            const auto& p = *cfg.initial_profile;
            auto it = std::lower_bound(p.t.begin(), p.t.end(), xi);
            if (it == p.t.begin()) {
                liquid[i] = p.v.front();
            } else if (it == p.t.end()) {
                liquid[i] = p.v.back();
            } else {
                const auto k = static_cast<std::size_t>(it - p.t.begin());
                const double w = (xi - p.t[k - 1]) / (p.t[k] - p.t[k - 1]);
                liquid[i] = (1.0 - w) * p.v[k - 1] + w * p.v[k];
            }
        } else {
            liquid[i] = cfg.initial_peak * (1.0 - xi);
        }
    }
    if (cfg.plant == PlantKind::kOnePhase) return OnePhaseState(0.0, cfg.s0, std::move(liquid));
    std::vector<double> solid(g.n_nodes());
    for (std::size_t i = 0; i < solid.size(); ++i) solid[i] = -cfg.initial_solid_depth * g.node(i);
    return TwoPhaseState(0.0, cfg.s0, cfg.L, std::move(liquid), std::move(solid));
}

ValidationReport validate_config(const ScenarioConfig& cfg) {
    const PlantState st = initial_state(cfg);
    ValidationReport r;
    double sigma0 = 0.0;
    if (cfg.plant == PlantKind::kOnePhase) {
        const auto& s = std::get<OnePhaseState>(st);
        r = validate_scenario_assumptions(s, cfg.actuator, cfg.material, cfg.L, cfg.setpoint, cfg.variant);
        sigma0 = sigma_one_phase(s, cfg.material, cfg.setpoint);
    } else {
        const auto& s = std::get<TwoPhaseState>(st);
        const auto mat = cfg.two_phase_material();
        r = validate_scenario_assumptions(s, cfg.actuator.qc, mat, cfg.setpoint, std::get<NonovGains>(cfg.gains),
                                          cfg.bounds);
        sigma0 = sigma_two_phase(s, mat, cfg.setpoint);
    }
    if (!(sigma0 > 0.0)) {
        r.add("A3.positive_deficit", sigma0, "initial energy deficit sigma(0) > 0", true);
        return r;
    }
    r.merge(validate_gains({.sigma0 = sigma0, .qc0 = cfg.actuator.qc, .p0 = cfg.actuator.p}, cfg.gains, cfg.variant,
                           cfg.flux_ceiling()));
    return r;
}

ScenarioConfig load_config(std::string_view text, const std::filesystem::path& base_dir) {
    ScenarioConfig cfg = parse_config(text, base_dir);
    auto report = validate_config(cfg);
    if (!report.ok()) throw AssumptionError(std::move(report));
    return cfg;
}

ScenarioConfig load_config_file(const std::filesystem::path& path, bool validate) {
    std::ifstream in(path);
    if (!in) throw ConfigError(0, fmt::format("cannot open {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    const auto base = path.parent_path();
    ScenarioConfig cfg = validate ? load_config(ss.str(), base) : parse_config(ss.str(), base);
    if (cfg.name == "scenario") cfg.name = path.stem().string();
    return cfg;
}

// ---------------------------------------------------------------------------
// CSV

void write_csv_header(std::ostream& out) {
    out << "t,s,qc,p,U_applied,U_o,U_lower,U_upper,h1,h2,h3,h2_star,h4,h5,h_min,Phi,clamp\n";
}

namespace {

void field(std::string& buf, double v) { fmt::format_to(std::back_inserter(buf), "{:.17g},", v); }
void field(std::string& buf, const std::optional<double>& v) {
    if (v) fmt::format_to(std::back_inserter(buf), "{:.17g}", *v);
    buf.push_back(',');
}

} // namespace

void write_csv_row(std::ostream& out, const TrajectoryRecord& r) {
    std::string buf;
    field(buf, r.t);
    field(buf, r.s);
    field(buf, r.qc);
    field(buf, r.p);
    field(buf, r.u_applied);
    field(buf, r.u_operator);
    field(buf, r.u_lower);
    field(buf, r.u_upper);
    field(buf, r.cbf.h1);
    field(buf, r.cbf.h2);
    field(buf, r.cbf.h3);
    field(buf, r.cbf.h2_star);
    field(buf, r.cbf.h4);
    field(buf, r.cbf.h5);
    field(buf, r.cbf.h_min);
    field(buf, r.phi);
    if (r.clamp) buf += to_string(*r.clamp);
    buf.push_back('\n');
    out << buf;
}

// ---------------------------------------------------------------------------
// Closed loop

namespace {

MonitorLimits limits_for(const ScenarioConfig& cfg) {
    MonitorLimits lim{.s_r = cfg.setpoint.s_r, .L = cfg.L, .check_setpoint = cfg.plant == PlantKind::kOnePhase};
    if (cfg.variant == ControlVariant::kUpper) {
        lim.q_bar = cfg.flux_ceiling();
        if (cfg.setpoint.T_star) lim.theta_ceiling = *cfg.setpoint.T_star - cfg.material.Tm;
    }
    return lim;
}

CbfParams cbf_params_for(const ScenarioConfig& cfg) {
    CbfParams p{.c1 = cfg.logged_c1(), .q_bar = cfg.flux_ceiling()};
    if (const auto* n = std::get_if<NonovGains>(&cfg.gains); n && n->c3) p.c2 = n->c2;
    return p;
}

} // namespace

ClosedLoop::ClosedLoop(const ScenarioConfig& cfg)
    : cfg_(cfg),
      state_(initial_state(cfg)),
      actuator_(cfg.actuator),
      monitor_(limits_for(cfg), cfg.effective_tolerances()),
      disturbance_(cfg.disturbance, cfg.seed),
      cbf_params_(cbf_params_for(cfg)),
      record_{} {
    s_max_ = s();
    refresh(cfg.operator_signal.at(0.0));
    std::visit([&](const auto& st) { monitor_.observe(st, actuator_, record_.cbf); }, state_);
}

double ClosedLoop::t() const {
    return std::visit([](const auto& st) { return st.t(); }, state_);
}

double ClosedLoop::s() const {
    return std::visit([](const auto& st) { return st.s(); }, state_);
}

bool ClosedLoop::done() const { return t() >= cfg_.horizon * (1.0 - 1e-12); }

double ClosedLoop::sigma() const {
    if (const auto* one = std::get_if<OnePhaseState>(&state_)) return sigma_one_phase(*one, cfg_.material, cfg_.setpoint);
    return sigma_two_phase(std::get<TwoPhaseState>(state_), cfg_.two_phase_material(), cfg_.setpoint);
}

CbfBundle ClosedLoop::bundle() const {
    const double sig = sigma();
    const double h_min = std::visit(
        [](const auto& st) {
            if constexpr (std::is_same_v<std::decay_t<decltype(st)>, OnePhaseState>) {
                return kernels::min_value(st.theta());
            } else {
                return kernels::min_value(st.theta_l());
            }
        },
        state_);
    return cbf_bundle(sig, h_min, actuator_, cbf_params_);
}

void ClosedLoop::set_operator_input(double u_o) { refresh(u_o); }

void ClosedLoop::refresh(double u_o) {
    u_o_ = u_o;
    TrajectoryRecord r{};
    r.t = t();
    r.s = s();
    r.qc = actuator_.qc;
    r.p = actuator_.p;
    r.cbf = bundle();
    const double sig = r.cbf.h1;
    if (const auto* q = std::get_if<QpGains>(&cfg_.gains)) {
        const auto d = cfg_.variant == ControlVariant::kUpper
                           ? qp_filter_upper(u_o, sig, actuator_.qc, *q, *cfg_.flux_ceiling())
                           : qp_filter(u_o, sig, actuator_.qc, *q);
        r.u_applied = d.u_applied;
        r.u_operator = d.u_operator;
        r.u_lower = d.u_lower;
        r.u_upper = d.u_upper;
        r.clamp = d.clamp;
    } else {
        const auto& g = std::get<NonovGains>(cfg_.gains);
        switch (cfg_.variant) {
        case ControlVariant::kNonov2: r.u_applied = nonovershooting_high(sig, actuator_.qc, actuator_.p.value_or(0.0), g); break;
        case ControlVariant::kTwoPhase: r.u_applied = nonovershooting_two_phase(sig, actuator_.qc, g); break;
        default: r.u_applied = nonovershooting(sig, actuator_.qc, g); break;
        }
    }
    r.phi = std::visit([&](const auto& st) { return phi_norm(st, actuator_, cfg_.setpoint); }, state_);
    record_ = r;
}

bool ClosedLoop::step() {
    if (done()) return false;
    SolverConfig sc = cfg_.solver;
    if (cfg_.auto_dt) {
        sc.dt = std::visit(
            [&](const auto& st) {
                if constexpr (std::is_same_v<std::decay_t<decltype(st)>, OnePhaseState>) {
                    return stable_dt(st, derive_constants(cfg_.material), sc.safety_factor);
                } else {
                    return stable_dt_two_phase(st, cfg_.two_phase_material(), sc.safety_factor);
                }
            },
            state_);
    }
    const double remaining = cfg_.horizon - t();
    if (sc.dt >= remaining * (1.0 - 1e-9)) sc.dt = remaining;
    const double dt = sc.dt;
    const double U = record_.u_applied;

    // Exact zero-order hold on the actuator chain; the plant sees the step-average flux.
    double q_avg;
    ActuatorState next = actuator_;
    if (actuator_.p) {
        const double p = *actuator_.p;
        q_avg = actuator_.qc + p * dt / 2.0 + U * dt * dt / 6.0;
        next.qc = actuator_.qc + p * dt + U * dt * dt / 2.0;
        next.p = p + U * dt;
    } else {
        q_avg = actuator_.qc + U * dt / 2.0;
        next.qc = actuator_.qc + U * dt;
    }

    if (auto* one = std::get_if<OnePhaseState>(&state_)) {
        state_ = stefan::step(*one, q_avg, cfg_.material, sc);
    } else {
        auto& two = std::get<TwoPhaseState>(state_);
        const double qf = disturbance_.at(two.t() + dt / 2.0);
        state_ = step_two_phase(two, q_avg, qf, cfg_.two_phase_material(), sc);
    }
    actuator_ = next;
    clamps_.add(record_.clamp.value_or(Clamp::kNone));
    s_max_ = std::max(s_max_, s());

    const double u_o = cfg_.operator_signal.kind == OperatorSignal::Kind::kLive ? u_o_ : cfg_.operator_signal.at(t());
    refresh(u_o);
    std::visit([&](const auto& st) { monitor_.observe(st, actuator_, record_.cbf); }, state_);
    return true;
}

void ClosedLoop::profile(std::vector<double>& x, std::vector<double>& theta, std::size_t max_points) const {
    x.clear();
    theta.clear();
    auto sample = [&](std::span<const double> v, double x0, double width, std::size_t budget) {
        const std::size_t n = v.size();
        const std::size_t stride = std::max<std::size_t>(1, (n + budget - 2) / std::max<std::size_t>(budget - 1, 1));
        const double h = 1.0 / static_cast<double>(n - 1);
        for (std::size_t i = 0; i < n; i += stride) {
            x.push_back(x0 + width * static_cast<double>(i) * h);
            theta.push_back(v[i]);
        }
        if ((n - 1) % stride != 0) {
            x.push_back(x0 + width);
            theta.push_back(v[n - 1]);
        }
    };
    if (const auto* one = std::get_if<OnePhaseState>(&state_)) {
        sample(one->theta(), 0.0, one->s(), max_points);
    } else {
        const auto& two = std::get<TwoPhaseState>(state_);
        sample(two.theta_l(), 0.0, two.s(), max_points / 2);
        sample(two.theta_s(), two.s(), two.L() - two.s(), max_points / 2);
    }
}

RunReport make_report(const ClosedLoop& loop, const ValidationReport& assumptions) {
    const auto& cfg = loop.config();
    RunReport r;
    r.scenario = cfg.name;
    r.variant = to_string(cfg.variant);
    r.t_end = loop.t();
    r.s_end = loop.s();
    r.s_max = loop.s_max();
    r.s_r = cfg.setpoint.s_r;
    r.c1_logged = cfg.logged_c1();
    r.violation_count = loop.monitor().count();
    r.violations = loop.monitor().stored();
    r.clamp_stats = loop.clamp_stats();
    r.assumption_report = assumptions;
    r.tolerances = loop.monitor().tolerances();
    if (r.violation_count) r.status = "violation";
    return r;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    ScenarioResult out;
    const auto assumptions = validate_config(cfg);
    ClosedLoop loop(cfg);
    std::vector<std::pair<double, double>> phi;
    std::size_t n = 0;
    out.rows.push_back(loop.record());
    phi.emplace_back(loop.record().t, loop.record().phi);
    std::string error;
    try {
        while (loop.step()) {
            ++n;
            if (n % cfg.decimate == 0 || loop.done()) {
                out.rows.push_back(loop.record());
                phi.emplace_back(loop.record().t, loop.record().phi);
            }
        }
    } catch (const StefanError& e) {
        error = e.what();
        if (out.rows.back().t != loop.record().t) out.rows.push_back(loop.record());
    }
    out.report = make_report(loop, assumptions);
    out.report.phi_series = std::move(phi);
    out.report.finalize_decay();
    if (!error.empty()) {
        out.report.status = "numerical-failure";
        out.report.error = error;
    }
    return out;
}

} // namespace stefan
