/**
 * @file uncertainty.hpp
 * @brief Gaussian parameter models, sigma-point sets and cubature rules.
 */

#ifndef UTOC_UNCERTAINTY_HPP
#define UTOC_UNCERTAINTY_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>

namespace utoc {

struct NotPSD : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonPositiveScaling : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RejectionBudgetExceeded : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InfeasibleSigmaPoint : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Gaussian distribution of the uncertain parameter vector p.
class GaussianSpec {
public:
    GaussianSpec() = default;  // empty (0-dimensional) placeholder
    GaussianSpec(Eigen::VectorXd mean, Eigen::MatrixXd covariance);

    /// Diagonal covariance from per-component standard deviations.
    static GaussianSpec from_sigmas(const Eigen::VectorXd& mean,
                                    const Eigen::VectorXd& sigmas);
    /// Point mass (zero covariance).
    static GaussianSpec point_mass(const Eigen::VectorXd& value);

    int dim() const { return static_cast<int>(mean_.size()); }
    const Eigen::VectorXd& mean() const { return mean_; }
    const Eigen::MatrixXd& covariance() const { return covariance_; }

    /// Symmetric PSD square root (eigendecomposition; small negative
    /// eigenvalues clamped to zero).
    Eigen::MatrixXd sqrt_covariance() const;

private:
    Eigen::VectorXd mean_;
    Eigen::MatrixXd covariance_;
};

using FeasibilityPredicate = std::function<bool(const Eigen::VectorXd&)>;

/// Gaussian restricted to a feasible region by rejection.
struct ConstrainedGaussianSpec {
    GaussianSpec base;
    FeasibilityPredicate feasible;
};

/// Cubature nodes and weights matching a distribution's first two moments.
struct SigmaSet {
    Eigen::MatrixXd points;   // N_p x N_sigma
    Eigen::VectorXd weights;  // N_sigma

    int count() const { return static_cast<int>(weights.size()); }
    Eigen::VectorXd weighted_mean() const;
    Eigen::MatrixXd weighted_covariance() const;
};

/// Classical heuristic kappa = 3 - N_p.
inline double default_kappa(int np) { return 3.0 - static_cast<double>(np); }

/// Symmetric 2*N_p+1 point set of Julier et al.
SigmaSet symmetric_sigma_points(const GaussianSpec& spec, double kappa);

/// Minimal-skew spherical simplex set with N_p+2 points.
SigmaSet simplex_sigma_points(const GaussianSpec& spec, double w0 = 0.5);

// Constrained variants generate from the unconstrained Gaussian and then
// check every node; an infeasible node is an error, never projected
// (projection would corrupt the moment matching).
SigmaSet symmetric_sigma_points(const ConstrainedGaussianSpec& spec,
                                double kappa);
SigmaSet simplex_sigma_points(const ConstrainedGaussianSpec& spec,
                              double w0 = 0.5);

/// Sum_i w_i g(p_i).
Eigen::VectorXd cubature_expectation(
    const SigmaSet& set,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g);

/// Sum_i w_i (g(p_i)-gbar)(g(p_i)-gbar)^T.
Eigen::MatrixXd cubature_covariance(
    const SigmaSet& set,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g);

/// n i.i.d. samples, one column each; per-sample counter substreams.
Eigen::MatrixXd sample(const GaussianSpec& spec, int n, std::uint64_t seed);
Eigen::MatrixXd sample(const ConstrainedGaussianSpec& spec, int n,
                       std::uint64_t seed);

double standard_normal_cdf(double x);

}  // namespace utoc

#endif  // UTOC_UNCERTAINTY_HPP
