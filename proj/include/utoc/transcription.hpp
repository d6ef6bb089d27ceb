/**
 * @file transcription.hpp
 * @brief Tychastic problem descriptions, unscented ensemble instantiation and
 *        direct-collocation transcription to sparse NLPs.
 */

#ifndef UTOC_TRANSCRIPTION_HPP
#define UTOC_TRANSCRIPTION_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "utoc/dynamics.hpp"
#include "utoc/nlp.hpp"
#include "utoc/uncertainty.hpp"

namespace utoc {

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidBounds : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownName : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// How an uncertain constraint is imposed in the ensemble problem: once per
/// sigma copy (transcendental) or on the cubature mean.
enum class ConstraintMode { PerCopy, CubatureMean };

struct EndpointConstraint {
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x0,
                                  const Eigen::VectorXd& xf, double t0,
                                  double tf, const Eigen::VectorXd& p)>
        e;
    Eigen::VectorXd lower, upper;
    ConstraintMode mode = ConstraintMode::PerCopy;
};

struct PathConstraint {
    std::function<Eigen::VectorXd(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u, double t,
                                  const Eigen::VectorXd& p)>
        h;
    Eigen::VectorXd lower, upper;
    ConstraintMode mode = ConstraintMode::PerCopy;
};

using OutputFn =
    std::function<Eigen::VectorXd(const Eigen::VectorXd& xf, double tf)>;

/// Cubature variance bound on endpoint outputs: diag Cov[g(x(tf))] <= bounds.
struct VarianceBound {
    OutputFn outputs;
    Eigen::VectorXd bounds;  // variances
};

enum class CostKind {
    MinTime,
    Average,
    Minimax,
    TraceCovariance,
    NonlinearOfMean
};

struct CostSelector {
    CostKind kind = CostKind::MinTime;
    // Average: cubature mean of a per-parameter Bolza cost
    std::function<double(const Eigen::VectorXd& x0, const Eigen::VectorXd& xf,
                         double t0, double tf, const Eigen::VectorXd& p)>
        mayer;
    std::function<double(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                         double t, const Eigen::VectorXd& p)>
        lagrange;
    // Minimax / NonlinearOfMean endpoint cost E
    std::function<double(const Eigen::VectorXd& xf, double tf)> endpoint;
    // TraceCovariance outputs; identity on the state when unset
    OutputFn outputs;
};

enum class ControlSet { Box, UnitCircle };
enum class SigmaScheme { Symmetric, Simplex };

struct DistributionChoice {
    GaussianSpec spec;
    FeasibilityPredicate constraint;  // null when unconstrained
    std::string constraint_name;
    SigmaScheme scheme = SigmaScheme::Symmetric;
    std::optional<double> kappa;  // default: 3 - N_p
};

/// Optimal-control problem under parametric uncertainty.
struct TychasticProblem {
    TychasticVectorField field;
    DistributionChoice distribution;
    Eigen::VectorXd x0;
    std::optional<GaussianSpec> x0_distribution;  // random initial state
    std::vector<EndpointConstraint> endpoint;
    std::vector<PathConstraint> path;
    std::vector<VarianceBound> variance_bounds;
    CostSelector cost;
    double t0 = 0.0;
    bool tf_free = true;
    double tf_fixed = 0.0;
    double tf_guess = 1.0;
    ControlSet control_set = ControlSet::Box;
    Eigen::VectorXd u_lower, u_upper;  // Box control set

    // reporting conveniences used by verification and the CLI
    OutputFn report_outputs;  // identity when unset
    std::vector<std::string> output_names;
    Eigen::VectorXd target_point;  // risk-ball center, empty if none
};

/// Sigma set over the joint uncertain vector (p [, x0]); degenerates to a
/// single node when the total covariance is zero.
SigmaSet make_sigma_set(const TychasticProblem& problem);

/// Deterministic ensemble problem: one state copy per sigma node, one shared
/// control.
struct EnsembleProblem {
    TychasticProblem problem;     // source data
    SigmaSet set;                 // joint sigma set
    int copies = 0;
    int nx = 0;                   // per-copy state dimension
    Eigen::MatrixXd params;       // np x copies
    Eigen::MatrixXd initial_states;  // nx x copies
};

EnsembleProblem instantiate_unscented(const TychasticProblem& problem,
                                      const SigmaSet& set);

enum class Scheme { Trapezoid, HermiteSimpson };

struct TranscribeOptions {
    double tf_floor = 1e-2;
    double tf_ceiling = 1e4;
    Eigen::VectorXd state_scale;   // per-component; auto when empty
    double tf_scale = 0.0;         // 0 => from tf guess
    double control_reg = 0.0;      // smoothing penalty on control differences
    std::optional<double> tf_guess;
    Eigen::VectorXd final_state_guess;  // straight-line interpolation target
    Eigen::VectorXd control_guess;      // constant control parameter guess
};

struct NlpLayout {
    int copies = 0, nx = 0, nodes = 0, ncu = 0;
    int control_base = 0;
    int tf_index = -1;
    int epigraph_index = -1;
    int n = 0;

    int state(int copy, int node, int comp) const {
        return (copy * nodes + node) * nx + comp;
    }
    int control(int node, int comp) const {
        return control_base + node * ncu + comp;
    }
};

struct TranscribedNLP {
    Nlp nlp;
    NlpLayout layout;
    Scheme scheme = Scheme::HermiteSimpson;
    Eigen::VectorXd scale;  // physical value = scale[i] * z[i]
    Eigen::VectorXd grid;   // normalized node times in [0,1]
    double t0 = 0.0;
    bool tf_free = true;
    double tf_fixed = 0.0;
    EnsembleProblem ensemble;
    std::vector<std::pair<int, int>> eq_sparsity;    // (constraint, variable)
    std::vector<std::pair<int, int>> ineq_sparsity;  // (constraint, variable)
};

TranscribedNLP transcribe(const EnsembleProblem& ensemble, int nodes,
                          Scheme scheme, const TranscribeOptions& options = {});

ControlSolution extract_control(const TranscribedNLP& nlp,
                                const Eigen::VectorXd& z);
double extract_tf(const TranscribedNLP& nlp, const Eigen::VectorXd& z);

/// States of one sigma copy on the collocation grid in physical time.
Trajectory extract_states(const TranscribedNLP& nlp, const Eigen::VectorXd& z,
                          int copy);

/// Overwrite the initial guess from a control signal and final time: control
/// parameters from the signal, states by RK4 propagation per copy.
void warm_start_from_control(TranscribedNLP& nlp,
                             const ControlSolution& control, double tf);

/// Layout, bounds and constraint residuals at a point, as JSON text.
std::string nlp_debug_json(const TranscribedNLP& nlp,
                           const Eigen::VectorXd& z);

/// Named problems with the data of the source study: Z0, Z1, Z2,
/// HST_baseline, HST_unscented.
TychasticProblem builtin_problem(const std::string& name);

/// 3-2-1 Euler angles of the rotation encoded by a scalar-last quaternion.
Eigen::Vector3d yaw_pitch_roll(const Eigen::Vector4d& q,
                               bool* gimbal_warning = nullptr);
Eigen::Vector4d quaternion_from_ypr(double yaw, double pitch, double roll);

constexpr double kArcsec = 4.84813681109536e-6;  // radians

}  // namespace utoc

#endif  // UTOC_TRANSCRIPTION_HPP
