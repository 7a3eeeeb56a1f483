#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <vector>

#include <fmt/format.h>
#include <omp.h>

#include "CLI11.hpp"

#include "stefan/scenario.hpp"

using namespace stefan;
namespace fs = std::filesystem;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitViolation = 2;
constexpr int kExitConfig = 3;
constexpr int kExitNumerical = 4;

void print_report(const ValidationReport& r) {
    for (const auto& c : r.checks) {
        fmt::print("{:<40} {:<4} margin {:>14.6g}  {}\n", c.name, c.pass ? "ok" : "FAIL", c.margin, c.detail);
    }
    for (const auto& c : r.warnings) fmt::print("{:<40} {:<4} margin {:>14.6g}  {}\n", c.name, "WARN", c.margin, c.detail);
}

struct Outcome {
    int code = kExitClean;
    std::string summary;
};

Outcome simulate_one(const fs::path& config, const fs::path& out_dir, std::size_t decimate) {
    ScenarioConfig cfg;
    try {
        cfg = load_config_file(config);
    } catch (const AssumptionError& e) {
        print_report(e.report());
        return {kExitConfig, fmt::format("{}: {}", config.string(), e.what())};
    } catch (const StefanError& e) {
        return {kExitConfig, fmt::format("{}: {}", config.string(), e.what())};
    }
    if (decimate) cfg.decimate = decimate;
    const auto result = run_scenario(cfg);
    fs::create_directories(out_dir);
    {
        std::ofstream csv(out_dir / "trajectory.csv");
        write_csv_header(csv);
        for (const auto& row : result.rows) write_csv_row(csv, row);
    }
    {
        std::ofstream json(out_dir / "report.json");
        json << result.report.to_json().dump(2) << '\n';
    }
    const auto& r = result.report;
    Outcome o;
    o.summary = fmt::format("{}: status {} t_end {:.6g} s_end {:.9g} violations {}", cfg.name, r.status, r.t_end,
                            r.s_end, r.violation_count);
    if (r.decay) o.summary += fmt::format(" decay b {:.6g}", r.decay->b);
    if (r.status == "numerical-failure") {
        o.code = kExitNumerical;
        o.summary += " error: " + r.error;
    } else if (r.violation_count) {
        o.code = kExitViolation;
    }
    return o;
}

int run_simulate(const std::vector<std::string>& configs, const std::string& out, std::size_t decimate, int jobs) {
    std::vector<Outcome> outcomes(configs.size());
    const fs::path root(out);
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const fs::path dir = configs.size() == 1 ? root : root / fs::path(configs[i]).stem();
        outcomes[i] = simulate_one(configs[i], dir, decimate);
    }
    int code = kExitClean;
    for (const auto& o : outcomes) {
        fmt::print("{}\n", o.summary);
        code = std::max(code, o.code);
    }
    return code;
}

int run_validate(const std::string& config) {
    try {
        const auto cfg = load_config_file(config, false);
        const auto report = validate_config(cfg);
        print_report(report);
        fmt::print("{}\n", report.ok() ? "all checks pass" : "assumption check failed");
        return report.ok() ? kExitClean : kExitConfig;
    } catch (const StefanError& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kExitConfig;
    }
}

int run_traveling_wave(double v, double s0, double horizon, const std::vector<std::size_t>& grids, double cfl,
                       const std::string& integrator) {
    const auto mat = MaterialProperties::unit();
    const TravelingWave wave{.v = v, .s0 = s0};
    fmt::print("{:>6} {:>12} {:>14} {:>14} {:>14}\n", "n", "dt", "max|s-s_ex|", "s(T)", "s_exact(T)");
    for (std::size_t n : grids) {
        SolverConfig cfg{.grid = Grid(n), .safety_factor = cfl};
        cfg.integrator = integrator == "implicit" ? Integrator::kImplicitEuler : Integrator::kExplicitEuler;
        const auto at0 = traveling_wave_oracle(wave, mat, 0.0);
        OnePhaseState init(0.0, at0.s_exact, at0.profile(cfg.grid));
        if (cfg.integrator == Integrator::kImplicitEuler) cfg.dt = 0.05 * cfg.grid.dxi();
        auto flux = [&](double t) { return traveling_wave_oracle(wave, mat, t).flux; };
        const auto traj = simulate(init, flux, horizon, mat, cfg);
        double err = 0.0;
        for (const auto& st : traj) err = std::max(err, std::abs(st.s() - traveling_wave_oracle(wave, mat, st.t()).s_exact));
        const double dt = traj.size() > 1 ? traj[1].t() - traj[0].t() : 0.0;
        fmt::print("{:>6} {:>12.4g} {:>14.6e} {:>14.9f} {:>14.9f}\n", n, dt, err, traj.back().s(),
                   traveling_wave_oracle(wave, mat, horizon).s_exact);
    }
    return kExitClean;
}

} // namespace

int run_serve(const std::string& config, int port, double timescale, const std::string& static_dir, int http_port);

int main(int argc, char** argv) {
    CLI::App app{"Stefan problem simulator with CBF safety filters"};
    app.require_subcommand(1);

    std::vector<std::string> configs;
    std::string out = "out";
    std::size_t decimate = 0;
    int jobs = 1;
    auto* sim = app.add_subcommand("simulate", "run closed-loop scenarios and write trajectory.csv and report.json");
    sim->add_option("--config", configs, "scenario config file(s)")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", out, "output directory (one subdirectory per config when several are given)");
    sim->add_option("--decimate", decimate, "write every k-th step")->check(CLI::PositiveNumber);
    sim->add_option("--jobs", jobs, "configs run in parallel")->check(CLI::PositiveNumber);

    std::string vconfig;
    auto* val = app.add_subcommand("validate", "check assumptions and gain conditions");
    val->add_option("--config", vconfig, "scenario config file")->required()->check(CLI::ExistingFile);

    double v = 0.5, s0 = 0.3, horizon = 1.0, cfl = 0.4;
    std::vector<std::size_t> grids{50, 100, 200};
    std::string integrator = "explicit";
    auto* oracle = app.add_subcommand("oracle", "exact-solution comparisons");
    oracle->require_subcommand(1);
    auto* tw = oracle->add_subcommand("traveling-wave", "nondimensional traveling-wave solution error table");
    tw->add_option("--v", v, "front speed")->check(CLI::PositiveNumber);
    tw->add_option("--s0", s0, "initial interface")->check(CLI::PositiveNumber);
    tw->add_option("--horizon", horizon, "final time")->check(CLI::NonNegativeNumber);
    tw->add_option("--n", grids, "grid sizes");
    tw->add_option("--cfl", cfl, "explicit safety factor");
    tw->add_option("--integrator", integrator)->check(CLI::IsMember({"explicit", "implicit"}));

    std::string sconfig, static_dir;
    int port = 8765, http_port = 0;
    double timescale = 0.0;
    auto* serve = app.add_subcommand("serve", "live operator session over newline-delimited JSON on TCP");
    serve->add_option("--config", sconfig, "scenario config file")->required()->check(CLI::ExistingFile);
    serve->add_option("--port", port, "TCP port for the JSON protocol");
    serve->add_option("--timescale", timescale, "simulated seconds per wall second (default from config)");
    serve->add_option("--static-dir", static_dir, "directory of console assets served over HTTP");
    serve->add_option("--http-port", http_port, "HTTP port for --static-dir");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*sim) return run_simulate(configs, out, decimate, jobs);
        if (*val) return run_validate(vconfig);
        if (*tw) return run_traveling_wave(v, s0, horizon, grids, cfl, integrator);
        if (*serve) return run_serve(sconfig, port, timescale, static_dir, http_port);
    } catch (const StefanError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return e.code() == ErrorCode::kConfigParse || e.code() == ErrorCode::kAssumptionViolation ? kExitConfig
                                                                                                   : kExitNumerical;
    }
    return kExitClean;
}
