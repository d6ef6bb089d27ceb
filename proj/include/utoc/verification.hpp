/**
 * @file verification.hpp
 * @brief A-posteriori validation: Monte-Carlo endpoint statistics under the
 *        optimized control, covariance ellipses, risk curves and feasibility
 *        re-propagation.
 */

#ifndef UTOC_VERIFICATION_HPP
#define UTOC_VERIFICATION_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "utoc/transcription.hpp"

namespace utoc {

/// Confidence ellipse of a 2x2 covariance: axes sqrt(lambda_i * q) with q the
/// chi-square(2) quantile of the confidence level.
struct EllipseGeometry {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    Eigen::Vector2d semi_axes = Eigen::Vector2d::Zero();  // major, minor
    double orientation = 0.0;  // radians, major axis from +x
    double confidence = 0.0;
};

struct MonteCarloReport {
    int n = 0;                  // requested sample count
    std::uint64_t seed = 0;
    Eigen::MatrixXd outputs;       // n_ok x N_out
    Eigen::MatrixXd final_states;  // n_ok x N_x
    Eigen::VectorXd mean;          // N_out, unbiased covariance below
    Eigen::MatrixXd covariance;    // N_out x N_out
    std::vector<int> excluded;     // failed sample indices
    std::vector<std::string> output_names;
    std::vector<std::pair<double, double>> risk_curve;  // (epsilon, risk)

    int n_ok() const { return static_cast<int>(outputs.rows()); }
};

struct FeasibilityReport {
    bool pass = false;
    double endpoint_violation = 0.0;
    double path_violation = 0.0;
    double tolerance = 0.0;
    Eigen::VectorXd final_state;
    double tf = 0.0;
};

struct EventProbability {
    double probability = 0.0;
    double standard_error = 0.0;
};

struct MonteCarloOptions {
    int workers = 1;
    double tol = 1e-8;  // integrator tolerance
};

/// Sample p (and x0 when random), propagate the tychastic ODE under the fixed
/// control, and collect endpoint outputs. Failed propagations are excluded
/// from statistics and recorded. Deterministic for a fixed seed, independent
/// of the worker count.
MonteCarloReport monte_carlo(const TychasticProblem& problem,
                             const ControlSolution& control, int n,
                             std::uint64_t seed, const OutputFn& outputs = {},
                             const MonteCarloOptions& options = {});

/// Empirical risk r(eps) = fraction of samples outside the closed ball of
/// radius eps around `target` (failed samples count as misses). The curve is
/// stored on the report and returned.
std::vector<std::pair<double, double>> risk_curve(
    MonteCarloReport& report, const Eigen::VectorXd& target,
    const Eigen::VectorXd& epsilons);

/// 50 log-spaced radii from 0.01 to 2.0.
Eigen::VectorXd default_epsilon_grid();

EllipseGeometry covariance_ellipse(const Eigen::Matrix2d& cov2,
                                   const Eigen::Vector2d& center,
                                   double confidence);

/// Re-propagate the nominal problem (p at the distribution mean) under the
/// control and check endpoint and path bounds.
FeasibilityReport feasibility_check(const TychasticProblem& problem,
                                    const ControlSolution& control,
                                    double tolerance);

/// Empirical probability of `event(output_row)` over the report samples with
/// a binomial standard error.
EventProbability estimate_event_probability(
    const MonteCarloReport& report,
    const std::function<bool(const Eigen::VectorXd&)>& event);

/// {n, seed, mean, cov, risk_curve, excluded} as JSON text.
std::string report_json(const MonteCarloReport& report);

/// Endpoint samples as CSV with one header row of output names.
void write_report_csv(const std::string& path, const MonteCarloReport& report);

/// Scatter of one output pair with its confidence ellipse, as an SVG
/// document (deterministic byte-for-byte for a fixed report).
std::string ellipse_scatter_svg(const MonteCarloReport& report, int i, int j,
                                double confidence);

}  // namespace utoc

#endif  // UTOC_VERIFICATION_HPP
