// Command-line driver: solve | simulate | risk | pipeline | check.
//
// Exit codes: 0 success, 1 user/config error, 2 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "utoc/pipeline.hpp"

namespace fs = std::filesystem;
using namespace utoc;

namespace {

int default_workers() {
    if (const char* env = std::getenv("UTOC_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out << text;
}

RunConfig make_config(const std::string& config_path,
                      const std::string& problem, int nodes,
                      const std::string& scheme, int workers) {
    RunConfig cfg =
        config_path.empty() ? RunConfig{} : load_config(config_path);
    if (!problem.empty()) cfg.problem = problem;
    if (nodes > 0) cfg.nodes = nodes;
    if (!scheme.empty()) {
        if (scheme == "trapezoid") {
            cfg.scheme = Scheme::Trapezoid;
        } else if (scheme == "hermite_simpson") {
            cfg.scheme = Scheme::HermiteSimpson;
        } else {
            throw ConfigError("unknown scheme '" + scheme + "'");
        }
    }
    cfg.solver.workers = workers;
    return cfg;
}

struct SolveArtifacts {
    SolveRun run;
    fs::path control_path;
};

SolveArtifacts do_solve(const RunConfig& cfg, const fs::path& dir,
                        const std::string& tag,
                        const std::optional<ControlSolution>& warm,
                        std::optional<double> warm_tf) {
    const TychasticProblem problem = configured_problem(cfg);
    SolveRunOptions opt = default_solve_options(cfg.problem, cfg);
    if (warm) {
        opt.warm_control = warm;
        opt.warm_tf = warm_tf;
    }
    SolveRun run = run_solve(problem, opt);

    fs::create_directories(dir);
    const std::string base = tag.empty() ? cfg.problem : tag;
    SolveArtifacts art;
    art.control_path = dir / (base + "_control.csv");
    write_control_csv(art.control_path.string(), run.control);
    write_text(dir / (base + "_solve.json"),
               solve_summary_json(cfg.problem, run));
    write_iteration_log_csv(run.result.log,
                            (dir / (base + "_iterations.csv")).string());
    const Trajectory traj = extract_states(run.transcription, run.result.x, 0);
    write_trajectory_csv((dir / (base + "_trajectory.csv")).string(), traj,
                         run.control);
    art.run = std::move(run);
    return art;
}

MonteCarloReport do_simulate(const RunConfig& cfg,
                             const ControlSolution& control,
                             const fs::path& dir, const std::string& tag) {
    const TychasticProblem problem = configured_problem(cfg);
    MonteCarloOptions mco;
    mco.workers = cfg.solver.workers;
    MonteCarloReport report =
        monte_carlo(problem, control, cfg.mc_n, cfg.mc_seed, {}, mco);
    const Eigen::VectorXd target = cfg.risk_target.size()
                                       ? cfg.risk_target
                                       : problem.target_point;
    if (target.size() == report.outputs.cols()) {
        risk_curve(report, target, default_epsilon_grid());
    }
    fs::create_directories(dir);
    const std::string base = tag.empty() ? cfg.problem + "_mc" : tag;
    write_text(dir / (base + "_report.json"), report_json(report));
    write_report_csv((dir / (base + "_samples.csv")).string(), report);
    if (report.outputs.cols() >= 2) {
        write_text(dir / (base + "_scatter.svg"),
                   ellipse_scatter_svg(report, 0, 1, 0.95));
    }
    return report;
}

std::vector<std::pair<double, double>> read_risk_curve(
    const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open report " + path);
    nlohmann::json doc = nlohmann::json::parse(in);
    if (!doc.contains("risk_curve")) {
        throw ConfigError(path + " has no risk_curve field");
    }
    std::vector<std::pair<double, double>> curve;
    for (const auto& row : doc["risk_curve"]) {
        curve.emplace_back(row[0].get<double>(), row[1].get<double>());
    }
    return curve;
}

int exit_code_for(SolveStatus status) {
    return status == SolveStatus::Converged ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unscented tychastic trajectory optimization"};
    app.require_subcommand(1);

    std::string config_path, problem, scheme, out_dir = "artifacts";
    std::string control_path, report_path, report_path2;
    int nodes = 0, workers = default_workers();
    int mc_n = 0;
    std::uint64_t mc_seed = 0;
    bool have_seed = false;
    double tolerance = 1e-3;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "config file (JSON)");
        cmd->add_option("--problem", problem,
                        "builtin problem name (overrides config)");
        cmd->add_option("--workers", workers, "worker thread cap");
        cmd->add_option("--out", out_dir, "output directory");
    };

    CLI::App* cmd_solve = app.add_subcommand("solve", "transcribe and solve");
    add_common(cmd_solve);
    cmd_solve->add_option("--nodes", nodes, "collocation nodes");
    cmd_solve->add_option("--scheme", scheme,
                          "trapezoid | hermite_simpson");

    CLI::App* cmd_sim =
        app.add_subcommand("simulate", "Monte Carlo under a fixed control");
    add_common(cmd_sim);
    cmd_sim->add_option("--control", control_path, "control CSV")->required();
    cmd_sim->add_option("--n", mc_n, "sample count");
    CLI::Option* seed_opt =
        cmd_sim->add_option("--seed", mc_seed, "sample seed");

    CLI::App* cmd_risk =
        app.add_subcommand("risk", "risk tables from MC reports");
    cmd_risk->add_option("--report", report_path, "baseline report JSON")
        ->required();
    cmd_risk->add_option("--other", report_path2,
                         "second report, adds the reduction column");
    cmd_risk->add_option("--out", out_dir, "output directory");

    CLI::App* cmd_check =
        app.add_subcommand("check", "feasibility re-propagation");
    add_common(cmd_check);
    cmd_check->add_option("--control", control_path, "control CSV")
        ->required();
    cmd_check->add_option("--tol", tolerance, "violation tolerance");

    CLI::App* cmd_pipe =
        app.add_subcommand("pipeline", "sequential design procedure");
    add_common(cmd_pipe);

    CLI11_PARSE(app, argc, argv);
    have_seed = seed_opt->count() > 0;

    try {
        if (app.got_subcommand(cmd_solve)) {
            const RunConfig cfg =
                make_config(config_path, problem, nodes, scheme, workers);
            const SolveArtifacts art =
                do_solve(cfg, out_dir, "", std::nullopt, std::nullopt);
            std::cout << solve_summary_json(cfg.problem, art.run) << "\n";
            return exit_code_for(art.run.result.status);
        }

        if (app.got_subcommand(cmd_sim)) {
            RunConfig cfg = make_config(config_path, problem, 0, "", workers);
            if (mc_n > 0) cfg.mc_n = mc_n;
            if (have_seed) cfg.mc_seed = mc_seed;
            const ControlSolution control = read_control_csv(control_path);
            if (cfg.mc_n < 2) {
                std::cerr << "warning: n < 2, covariance undefined\n";
                return 1;
            }
            const MonteCarloReport report =
                do_simulate(cfg, control, out_dir, "");
            std::cout << report_json(report) << "\n";
            return 0;
        }

        if (app.got_subcommand(cmd_risk)) {
            const auto base = read_risk_curve(report_path);
            std::optional<std::vector<std::pair<double, double>>> other;
            if (!report_path2.empty()) other = read_risk_curve(report_path2);
            if (other && other->size() != base.size()) {
                std::cerr << "error: risk tables have different lengths\n";
                return 1;
            }
            fs::create_directories(out_dir);
            write_risk_csv((fs::path(out_dir) / "risk.csv").string(), base,
                           other ? &*other : nullptr);
            write_text(fs::path(out_dir) / "risk.svg",
                       risk_curve_svg(base, other ? &*other : nullptr));
            return 0;
        }

        if (app.got_subcommand(cmd_check)) {
            const RunConfig cfg =
                make_config(config_path, problem, 0, "", workers);
            const TychasticProblem prob = configured_problem(cfg);
            const ControlSolution control = read_control_csv(control_path);
            const FeasibilityReport rep =
                feasibility_check(prob, control, tolerance);
            std::cout << (rep.pass ? "PASS" : "FAIL")
                      << " endpoint_violation=" << rep.endpoint_violation
                      << " path_violation=" << rep.path_violation << "\n";
            return rep.pass ? 0 : 2;
        }

        if (app.got_subcommand(cmd_pipe)) {
            RunConfig cfg = make_config(config_path, problem, 0, "", workers);
            std::string text;
            if (!config_path.empty()) {
                std::ifstream in(config_path);
                std::stringstream buf;
                buf << in.rdbuf();
                text = buf.str();
            } else {
                text = cfg.problem;
            }
            char tag[32];
            std::snprintf(tag, sizeof(tag), "%016llx-%llu",
                          static_cast<unsigned long long>(config_hash(text)),
                          static_cast<unsigned long long>(cfg.mc_seed));
            const fs::path dir = fs::path(out_dir) / tag;
            fs::create_directories(dir);

            nlohmann::json summary;
            auto satisfied = [&](const MonteCarloReport& report) {
                const double miss = report.mean.norm();
                const double tc = report.covariance.trace();
                return cfg.satisfaction_mean_miss >= 0.0 &&
                       miss <= cfg.satisfaction_mean_miss &&
                       (cfg.satisfaction_trace_cov < 0.0 ||
                        tc <= cfg.satisfaction_trace_cov);
            };
            auto record = [&](const std::string& step, const SolveRun* run,
                              const MonteCarloReport* report) {
                nlohmann::json row;
                if (run) {
                    row["tf"] = run->tf;
                    row["objective"] = run->result.objective;
                    row["status"] = to_string(run->result.status);
                }
                if (report) {
                    row["mean_miss"] = report->mean.norm();
                    row["trace_cov"] = report->covariance.trace();
                }
                summary[step] = row;
            };

            if (cfg.problem.rfind("HST", 0) == 0) {
                RunConfig base_cfg = cfg;
                base_cfg.problem = "HST_baseline";
                const SolveArtifacts base =
                    do_solve(base_cfg, dir, "step1_baseline", std::nullopt,
                             std::nullopt);
                const MonteCarloReport base_mc =
                    do_simulate(base_cfg, base.run.control, dir,
                                "step2_baseline_mc");
                record("step1_baseline", &base.run, &base_mc);
                if (satisfied(base_mc)) {
                    write_text(dir / "summary.json", summary.dump(2));
                    std::cout << summary.dump(2) << "\n";
                    return 0;
                }
                RunConfig un_cfg = cfg;
                un_cfg.problem = "HST_unscented";
                const SolveArtifacts un =
                    do_solve(un_cfg, dir, "step4_unscented",
                             base.run.control, base.run.tf);
                const MonteCarloReport un_mc = do_simulate(
                    un_cfg, un.run.control, dir, "step5_unscented_mc");
                record("step4_unscented", &un.run, &un_mc);

                // Table-style mean/variance comparison per output
                std::ofstream cmp(dir / "comparison.csv");
                cmp << "output, baseline_mean, unscented_mean, "
                       "baseline_variance, unscented_variance\n";
                cmp.precision(12);
                for (Eigen::Index j = 0; j < base_mc.mean.size(); ++j) {
                    cmp << base_mc.output_names[j] << ", " << base_mc.mean[j]
                        << ", " << un_mc.mean[j] << ", "
                        << base_mc.covariance(j, j) << ", "
                        << un_mc.covariance(j, j) << "\n";
                }
                write_text(dir / "summary.json", summary.dump(2));
                std::cout << summary.dump(2) << "\n";
                return exit_code_for(un.run.result.status);
            }

            // Zermelo sequence: deterministic baseline, mean targeting,
            // dispersion minimization, risk comparison
            RunConfig z0 = cfg;
            z0.problem = "Z0";
            const SolveArtifacts s1 =
                do_solve(z0, dir, "step1_Z0", std::nullopt, std::nullopt);
            const RunConfig z1_cfg = [&] {
                RunConfig c = cfg;
                c.problem = "Z1";
                return c;
            }();
            // Step 2 MC uses the uncertain distribution of the family
            MonteCarloReport s2 = do_simulate(z1_cfg, s1.run.control, dir,
                                              "step2_Z0_mc");
            record("step1_Z0", &s1.run, &s2);
            if (satisfied(s2)) {
                write_text(dir / "summary.json", summary.dump(2));
                std::cout << summary.dump(2) << "\n";
                return 0;
            }
            const SolveArtifacts s3 = do_solve(z1_cfg, dir, "step4_Z1",
                                               s1.run.control, s1.run.tf);
            MonteCarloReport s5 = do_simulate(z1_cfg, s3.run.control, dir,
                                              "step5_Z1_mc");
            record("step4_Z1", &s3.run, &s5);
            if (satisfied(s5)) {
                write_text(dir / "summary.json", summary.dump(2));
                std::cout << summary.dump(2) << "\n";
                return 0;
            }
            RunConfig z2_cfg = cfg;
            z2_cfg.problem = "Z2";
            const SolveArtifacts s6 = do_solve(z2_cfg, dir, "step7_Z2",
                                               s3.run.control, s3.run.tf);
            MonteCarloReport s7 = do_simulate(z2_cfg, s6.run.control, dir,
                                              "step7_Z2_mc");
            record("step7_Z2", &s6.run, &s7);

            if (!s2.risk_curve.empty() && !s7.risk_curve.empty()) {
                write_risk_csv((dir / "risk.csv").string(), s2.risk_curve,
                               &s7.risk_curve);
                write_text(dir / "risk.svg",
                           risk_curve_svg(s2.risk_curve, &s7.risk_curve));
            }
            write_text(dir / "summary.json", summary.dump(2));
            std::cout << summary.dump(2) << "\n";
            return exit_code_for(s6.run.result.status);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
