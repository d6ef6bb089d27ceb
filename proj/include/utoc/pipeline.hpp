/**
 * @file pipeline.hpp
 * @brief Shared driver layer: config ingestion, solve orchestration with
 *        warm starts, and artifact emission for the CLI and the acceptance
 *        runner.
 */

#ifndef UTOC_PIPELINE_HPP
#define UTOC_PIPELINE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "utoc/nlp.hpp"
#include "utoc/transcription.hpp"
#include "utoc/verification.hpp"

namespace utoc {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunConfig {
    std::string problem = "Z0";  // builtin name
    int nodes = 50;
    Scheme scheme = Scheme::HermiteSimpson;
    SolverOptions solver;
    TranscribeOptions transcribe;
    int mc_n = 1000;
    std::uint64_t mc_seed = 20260815;
    // pipeline early-exit thresholds
    double satisfaction_mean_miss = -1.0;   // < 0: disabled
    double satisfaction_trace_cov = -1.0;
    Eigen::VectorXd risk_target;            // empty: problem default
    // optional overrides of the builtin distribution
    std::optional<Eigen::VectorXd> dist_mean;
    std::optional<Eigen::VectorXd> dist_sigmas;
    std::optional<SigmaScheme> sigma_scheme;
    std::optional<double> kappa;
};

/// Parse a JSON-formatted config file. Unknown keys raise ConfigError
/// naming the key.
RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text, const std::string& origin);

/// Builtin problem with the config's distribution overrides applied.
TychasticProblem configured_problem(const RunConfig& config);

struct SolveRunOptions {
    int nodes = 50;
    Scheme scheme = Scheme::HermiteSimpson;
    SolverOptions solver;
    TranscribeOptions transcribe;
    // warm start: control signal of a previously solved problem
    std::optional<ControlSolution> warm_control;
    std::optional<double> warm_tf;
    // candidate final-time guesses tried in order; best feasible kept
    std::vector<double> tf_multistart;
};

struct SolveRun {
    TranscribedNLP transcription;
    SolveResult result;
    ControlSolution control;
    double tf = 0.0;
};

/// Transcribe and solve; with a multistart list, solves once per final-time
/// guess and keeps the lowest feasible objective.
SolveRun run_solve(const TychasticProblem& problem,
                   const SolveRunOptions& options);

/// Solve options tuned per builtin problem (node count and scheme from the
/// config; guesses, scaling and multistart per problem family).
SolveRunOptions default_solve_options(const std::string& problem,
                                      const RunConfig& config);

/// Control signal CSV: header "t, u1..uN_u", one row per node.
void write_control_csv(const std::string& path,
                       const ControlSolution& control);
ControlSolution read_control_csv(const std::string& path);

/// State/control trajectory CSV: header "t, x1..xN_x, u1..uN_u".
void write_trajectory_csv(const std::string& path, const Trajectory& traj,
                          const ControlSolution& control);

/// Solve outcome JSON: {problem, status, objective, infeasibility, tf,
/// nodes, scheme}.
std::string solve_summary_json(const std::string& problem,
                               const SolveRun& run);

/// Risk table CSV for one or two reports; with two, a relative-reduction
/// column is included.
void write_risk_csv(const std::string& path,
                    const std::vector<std::pair<double, double>>& base,
                    const std::vector<std::pair<double, double>>* other);

/// Risk curve(s) as an SVG line plot.
std::string risk_curve_svg(
    const std::vector<std::pair<double, double>>& base,
    const std::vector<std::pair<double, double>>* other);

/// FNV-1a of the config text; artifact names embed hash + seed so reruns
/// with identical inputs overwrite identical bytes.
std::uint64_t config_hash(const std::string& text);

}  // namespace utoc

#endif  // UTOC_PIPELINE_HPP
