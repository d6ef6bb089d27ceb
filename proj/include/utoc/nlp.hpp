/**
 * @file nlp.hpp
 * @brief Augmented-Lagrangian solver with a projected L-BFGS inner loop.
 *
 * Equalities enter through multipliers and a quadratic penalty, inequalities
 * through squared-hinge terms, and simple variable bounds through projection.
 */

#ifndef UTOC_NLP_HPP
#define UTOC_NLP_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace utoc {

struct NonFiniteEvaluation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Minimal problem description consumed by solve().
struct Nlp {
    int n = 0;
    std::function<double(const Eigen::VectorXd&)> objective;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> equality;    // c=0
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> inequality;  // g<=0
    Eigen::VectorXd lower_bounds;  // empty means unbounded
    Eigen::VectorXd upper_bounds;
    Eigen::VectorXd initial_guess;
    // optional analytic objective gradient; finite differences otherwise
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> objective_gradient;
    // optional complete (row, variable) dependency patterns of the constraint
    // functions; when present for every registered constraint block, solve()
    // obtains constraint Jacobians by color-grouped finite differences and
    // assembles merit gradients from them instead of differencing the scalar
    // merit, which is far cheaper on large structured problems
    std::vector<std::pair<int, int>> equality_sparsity;
    std::vector<std::pair<int, int>> inequality_sparsity;
};

struct SolverOptions {
    double outer_tol = 1e-6;   // constraint infinity norm
    double inner_tol = 1e-6;   // projected gradient infinity norm
    int max_outer = 30;
    int max_inner = 500;
    double rho0 = 10.0;
    double rho_growth = 10.0;
    double rho_max = 1e7;
    double fd_step = 1e-6;     // relative central-difference step
    std::uint64_t seed = 0;
    int workers = 1;           // parallel FD gradient entries
    bool verbose = false;
};

enum class SolveStatus { Converged, MaxIter, Stalled };

std::string to_string(SolveStatus status);

struct IterationRecord {
    int outer = 0;
    int inner = 0;
    double f = 0.0;
    double infeas = 0.0;
    double rho = 0.0;
    double grad_norm = 0.0;
    bool accepted = true;
    bool line_search_failure = false;
};

struct SolveResult {
    Eigen::VectorXd x;
    double objective = 0.0;
    double infeasibility = 0.0;
    Eigen::VectorXd lambda;  // equality multipliers
    Eigen::VectorXd mu;      // inequality multipliers
    SolveStatus status = SolveStatus::MaxIter;
    std::vector<IterationRecord> log;
};

SolveResult solve(const Nlp& nlp, const SolverOptions& options = {});

/// Objective gradient at a point: analytic when registered on the problem,
/// central differences otherwise.
Eigen::VectorXd gradient(const Nlp& nlp, const Eigen::VectorXd& x,
                         const SolverOptions& options = {});

/// Central-difference gradient with per-variable step fd_step*(1+|x_i|).
Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double fd_step = 1e-6,
                            int workers = 1);

/// Forward-difference Jacobian; used by tests and debug dumps.
Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double fd_step = 1e-6);

void write_iteration_log_csv(const std::vector<IterationRecord>& log,
                             const std::string& path);

}  // namespace utoc

#endif  // UTOC_NLP_HPP
