#include "utoc/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace utoc {

namespace {

Eigen::VectorXd to_vector(const nlohmann::json& node, const std::string& key) {
    if (!node.is_array()) throw ConfigError("'" + key + "' must be an array");
    Eigen::VectorXd v(node.size());
    for (std::size_t i = 0; i < node.size(); ++i) {
        if (!node[i].is_number()) {
            throw ConfigError("'" + key + "' must be numeric");
        }
        v[i] = node[i].get<double>();
    }
    return v;
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(origin + ": not valid JSON: " + e.what());
    }
    RunConfig cfg;
    for (const auto& [key, value] : doc.items()) {
        if (key == "problem") {
            cfg.problem = value.get<std::string>();
        } else if (key == "transcription") {
            for (const auto& [k, v] : value.items()) {
                if (k == "nodes") {
                    cfg.nodes = v.get<int>();
                } else if (k == "scheme") {
                    const std::string s = v.get<std::string>();
                    if (s == "trapezoid") {
                        cfg.scheme = Scheme::Trapezoid;
                    } else if (s == "hermite_simpson") {
                        cfg.scheme = Scheme::HermiteSimpson;
                    } else {
                        throw ConfigError("unknown scheme '" + s + "'");
                    }
                } else if (k == "tf_guess") {
                    cfg.transcribe.tf_guess = v.get<double>();
                } else if (k == "control_reg") {
                    cfg.transcribe.control_reg = v.get<double>();
                } else {
                    throw ConfigError("unknown transcription key '" + k + "'");
                }
            }
        } else if (key == "solver") {
            for (const auto& [k, v] : value.items()) {
                if (k == "outer_tol") {
                    cfg.solver.outer_tol = v.get<double>();
                } else if (k == "inner_tol") {
                    cfg.solver.inner_tol = v.get<double>();
                } else if (k == "max_outer") {
                    cfg.solver.max_outer = v.get<int>();
                } else if (k == "max_inner") {
                    cfg.solver.max_inner = v.get<int>();
                } else if (k == "workers") {
                    cfg.solver.workers = v.get<int>();
                } else if (k == "verbose") {
                    cfg.solver.verbose = v.get<bool>();
                } else {
                    throw ConfigError("unknown solver key '" + k + "'");
                }
            }
        } else if (key == "monte_carlo") {
            for (const auto& [k, v] : value.items()) {
                if (k == "n") {
                    cfg.mc_n = v.get<int>();
                } else if (k == "seed") {
                    cfg.mc_seed = v.get<std::uint64_t>();
                } else {
                    throw ConfigError("unknown monte_carlo key '" + k + "'");
                }
            }
        } else if (key == "satisfaction") {
            for (const auto& [k, v] : value.items()) {
                if (k == "mean_miss") {
                    cfg.satisfaction_mean_miss = v.get<double>();
                } else if (k == "trace_cov") {
                    cfg.satisfaction_trace_cov = v.get<double>();
                } else {
                    throw ConfigError("unknown satisfaction key '" + k + "'");
                }
            }
        } else if (key == "risk") {
            for (const auto& [k, v] : value.items()) {
                if (k == "target") {
                    cfg.risk_target = to_vector(v, "risk.target");
                } else {
                    throw ConfigError("unknown risk key '" + k + "'");
                }
            }
        } else if (key == "distribution") {
            for (const auto& [k, v] : value.items()) {
                if (k == "mean") {
                    cfg.dist_mean = to_vector(v, "distribution.mean");
                } else if (k == "sigmas") {
                    cfg.dist_sigmas = to_vector(v, "distribution.sigmas");
                } else if (k == "scheme") {
                    const std::string s = v.get<std::string>();
                    if (s == "symmetric") {
                        cfg.sigma_scheme = SigmaScheme::Symmetric;
                    } else if (s == "simplex") {
                        cfg.sigma_scheme = SigmaScheme::Simplex;
                    } else {
                        throw ConfigError("unknown sigma scheme '" + s + "'");
                    }
                } else if (k == "kappa") {
                    cfg.kappa = v.get<double>();
                } else {
                    throw ConfigError("unknown distribution key '" + k + "'");
                }
            }
        } else {
            throw ConfigError(origin + ": unknown config key '" + key + "'");
        }
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

TychasticProblem configured_problem(const RunConfig& config) {
    TychasticProblem problem = builtin_problem(config.problem);
    if (config.dist_mean || config.dist_sigmas) {
        const Eigen::VectorXd mean = config.dist_mean
                                         ? *config.dist_mean
                                         : problem.distribution.spec.mean();
        if (config.dist_sigmas) {
            problem.distribution.spec =
                GaussianSpec::from_sigmas(mean, *config.dist_sigmas);
        } else {
            problem.distribution.spec =
                GaussianSpec(mean, problem.distribution.spec.covariance());
        }
    }
    if (config.sigma_scheme) problem.distribution.scheme = *config.sigma_scheme;
    if (config.kappa) problem.distribution.kappa = *config.kappa;
    return problem;
}

SolveRunOptions default_solve_options(const std::string& problem,
                                      const RunConfig& config) {
    SolveRunOptions opt;
    opt.nodes = config.nodes;
    opt.scheme = config.scheme;
    opt.solver = config.solver;
    opt.transcribe = config.transcribe;

    if (problem.rfind("Z", 0) == 0) {
        opt.transcribe.final_state_guess = Eigen::Vector2d::Zero();
        if (opt.transcribe.control_guess.size() == 0) {
            // heading from the start point toward the target
            opt.transcribe.control_guess =
                Eigen::VectorXd::Constant(1, std::atan2(-1.0, -2.25));
        }
        if (problem == "Z2" && !opt.transcribe.tf_guess) {
            // the dispersion landscape has separated basins in final time
            opt.tf_multistart = {6.1, 4.5, 2.6};
        }
    } else if (problem.rfind("HST", 0) == 0) {
        Eigen::VectorXd xf(7);
        xf.head(4) = quaternion_from_ypr(M_PI / 2.0, M_PI / 4.0, 0.0);
        xf.tail(3).setZero();
        opt.transcribe.final_state_guess = xf;
        if (opt.transcribe.state_scale.size() == 0) {
            opt.transcribe.state_scale = (Eigen::VectorXd(7) << 1, 1, 1, 1,
                                          1e-3, 1e-3, 1e-3)
                                             .finished();
        }
    }
    return opt;
}

SolveRun run_solve(const TychasticProblem& problem,
                   const SolveRunOptions& options) {
    const SigmaSet set = make_sigma_set(problem);
    const EnsembleProblem ensemble = instantiate_unscented(problem, set);

    std::vector<double> guesses = options.tf_multistart;
    if (guesses.empty()) {
        guesses.push_back(options.transcribe.tf_guess.value_or(
            problem.tf_free ? problem.tf_guess : problem.tf_fixed));
    }

    std::optional<SolveRun> best;
    for (double tfg : guesses) {
        TranscribeOptions topt = options.transcribe;
        topt.tf_guess = tfg;
        if (guesses.size() > 1) {
            // trust region per start: keep each solve inside its own basin
            topt.tf_floor = std::max(topt.tf_floor, 0.9 * tfg);
            topt.tf_ceiling = std::min(topt.tf_ceiling, 1.1 * tfg);
        }
        TranscribedNLP nlp =
            transcribe(ensemble, options.nodes, options.scheme, topt);
        if (options.warm_control) {
            warm_start_from_control(nlp, *options.warm_control,
                                    problem.tf_free
                                        ? tfg
                                        : problem.tf_fixed);
        }
        SolveRun run;
        run.result = solve(nlp.nlp, options.solver);
        run.tf = extract_tf(nlp, run.result.x);
        run.control = extract_control(nlp, run.result.x);
        run.transcription = std::move(nlp);

        const bool feasible =
            run.result.infeasibility <= 10.0 * options.solver.outer_tol;
        if (!best) {
            best = std::move(run);
            continue;
        }
        const bool best_feasible =
            best->result.infeasibility <= 10.0 * options.solver.outer_tol;
        const bool better =
            (feasible && !best_feasible) ||
            (feasible && best_feasible &&
             run.result.objective < best->result.objective) ||
            (!feasible && !best_feasible &&
             run.result.infeasibility < best->result.infeasibility);
        if (better) best = std::move(run);
    }
    return std::move(*best);
}

void write_control_csv(const std::string& path,
                       const ControlSolution& control) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t";
    for (int m = 0; m < control.nu(); ++m) out << ", u" << m + 1;
    out << "\n";
    out.precision(17);
    for (Eigen::Index k = 0; k < control.times().size(); ++k) {
        out << control.times()[k];
        for (int m = 0; m < control.nu(); ++m) {
            out << ", " << control.values()(m, k);
        }
        out << "\n";
    }
}

ControlSolution read_control_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("empty control file " + path);
    }
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    if (rows.size() < 2) {
        throw std::runtime_error("control file needs at least 2 rows");
    }
    const int nu = static_cast<int>(rows[0].size()) - 1;
    Eigen::VectorXd times(rows.size());
    Eigen::MatrixXd values(nu, rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        times[k] = rows[k][0];
        for (int m = 0; m < nu; ++m) values(m, k) = rows[k][m + 1];
    }
    return ControlSolution(times, values);
}

void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const ControlSolution& control) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "t";
    for (Eigen::Index j = 0; j < traj.states.rows(); ++j) {
        out << ", x" << j + 1;
    }
    for (int m = 0; m < control.nu(); ++m) out << ", u" << m + 1;
    out << "\n";
    out.precision(17);
    for (Eigen::Index k = 0; k < traj.times.size(); ++k) {
        out << traj.times[k];
        for (Eigen::Index j = 0; j < traj.states.rows(); ++j) {
            out << ", " << traj.states(j, k);
        }
        const Eigen::VectorXd u = control(traj.times[k]);
        for (int m = 0; m < control.nu(); ++m) out << ", " << u[m];
        out << "\n";
    }
}

std::string solve_summary_json(const std::string& problem,
                               const SolveRun& run) {
    nlohmann::json doc;
    doc["problem"] = problem;
    doc["status"] = to_string(run.result.status);
    doc["objective"] = run.result.objective;
    doc["infeasibility"] = run.result.infeasibility;
    doc["tf"] = run.tf;
    doc["nodes"] = run.transcription.layout.nodes;
    doc["scheme"] = run.transcription.scheme == Scheme::Trapezoid
                        ? "trapezoid"
                        : "hermite_simpson";
    return doc.dump(2);
}

void write_risk_csv(const std::string& path,
                    const std::vector<std::pair<double, double>>& base,
                    const std::vector<std::pair<double, double>>* other) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    if (other && other->size() != base.size()) {
        throw std::runtime_error("risk tables have different lengths");
    }
    out << "epsilon, risk" << (other ? ", risk_other, reduction" : "")
        << "\n";
    out.precision(17);
    for (std::size_t k = 0; k < base.size(); ++k) {
        out << base[k].first << ", " << base[k].second;
        if (other) {
            const double r0 = base[k].second;
            const double r1 = (*other)[k].second;
            const double red = r0 > 0.0 ? (r0 - r1) / r0 : 0.0;
            out << ", " << r1 << ", " << red;
        }
        out << "\n";
    }
}

std::string risk_curve_svg(
    const std::vector<std::pair<double, double>>& base,
    const std::vector<std::pair<double, double>>* other) {
    const double W = 640.0, H = 480.0, margin = 56.0;
    double xmax = 0.0;
    for (const auto& [e, r] : base) xmax = std::max(xmax, e);
    if (other) {
        for (const auto& [e, r] : *other) xmax = std::max(xmax, e);
    }
    if (xmax <= 0.0) xmax = 1.0;
    auto px = [&](double x) { return margin + x / xmax * (W - 2 * margin); };
    auto py = [&](double r) { return H - margin - r * (H - 2 * margin); };

    std::ostringstream svg;
    svg.precision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
        << "\">\n<rect width=\"" << W << "\" height=\"" << H
        << "\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\""
        << W - 2 * margin << "\" height=\"" << H - 2 * margin
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"14\">epsilon</text>\n";
    svg << "<text x=\"16\" y=\"" << H / 2
        << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 "
           "16 "
        << H / 2 << ")\">risk</text>\n";
    auto polyline = [&](const std::vector<std::pair<double, double>>& curve,
                        const char* color) {
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        for (const auto& [e, r] : curve) {
            svg << px(e) << "," << py(r) << " ";
        }
        svg << "\"/>\n";
    };
    polyline(base, "steelblue");
    if (other) polyline(*other, "crimson");
    svg << "</svg>\n";
    return svg.str();
}

std::uint64_t config_hash(const std::string& text) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

}  // namespace utoc
