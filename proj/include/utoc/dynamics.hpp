/**
 * @file dynamics.hpp
 * @brief Parameterized vector fields, deterministic integrators and the
 *        Euler-Maruyama reference integrator.
 */

#ifndef UTOC_DYNAMICS_HPP
#define UTOC_DYNAMICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <stdexcept>

namespace utoc {

struct ZeroInertia : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StepUnderflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Conditionally deterministic dynamics xdot = f(x, u, t; p).
struct TychasticVectorField {
    int nx = 0;
    int nu = 0;
    int np = 0;
    // in-place evaluation; dx is pre-sized to nx
    std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       double t, const Eigen::VectorXd& p, Eigen::VectorXd& dx)>
        eval;

    Eigen::VectorXd operator()(const Eigen::VectorXd& x,
                               const Eigen::VectorXd& u, double t,
                               const Eigen::VectorXd& p) const {
        Eigen::VectorXd dx(nx);
        eval(x, u, t, p, dx);
        return dx;
    }
};

/// Ito SDE with deterministic drift and state/control dependent diffusion.
struct SDEModel {
    int nx = 0;
    int nu = 0;
    int nw = 0;
    std::function<void(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                       double t, Eigen::VectorXd& dx)>
        drift;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& u, double t)>
        diffusion;
};

/// Piecewise-linear control signal on a strictly increasing time grid,
/// clamped outside [t_front, t_back].
class ControlSolution {
public:
    ControlSolution() = default;
    ControlSolution(Eigen::VectorXd times, Eigen::MatrixXd values);

    const Eigen::VectorXd& times() const { return times_; }
    const Eigen::MatrixXd& values() const { return values_; }  // nu x M
    int nu() const { return static_cast<int>(values_.rows()); }
    double t_front() const { return times_[0]; }
    double t_back() const { return times_[times_.size() - 1]; }

    Eigen::VectorXd operator()(double t) const;

private:
    Eigen::VectorXd times_;
    Eigen::MatrixXd values_;
};

/// Zermelo navigation with linear cross-wind W(x,y) = (p*y, q*x).
TychasticVectorField zermelo_field();

/// HST quaternion kinematics and Euler rotational dynamics; state ordering
/// (q1,q2,q3,q4,w1,w2,w3), parameters are the principal inertias.
TychasticVectorField hst_field();

struct Trajectory {
    Eigen::VectorXd times;
    Eigen::MatrixXd states;  // nx x M
    Eigen::VectorXd final_state() const {
        return states.col(states.cols() - 1);
    }
};

/// One classical RK4 step of size h.
Eigen::VectorXd rk4_step(const TychasticVectorField& f,
                         const Eigen::VectorXd& x, const ControlSolution& u,
                         double t, double h, const Eigen::VectorXd& p);

/// Fixed-step RK4 over [t0, tf] with `steps` intervals.
Trajectory propagate_rk4(const TychasticVectorField& f,
                         const Eigen::VectorXd& x0, const ControlSolution& u,
                         const Eigen::VectorXd& p, double t0, double tf,
                         int steps);

/// Adaptive Dormand-Prince 5(4). Output at `output_times` when given
/// (fourth-order continuous extension), otherwise at the accepted steps.
Trajectory propagate_rk45(const TychasticVectorField& f,
                          const Eigen::VectorXd& x0, const ControlSolution& u,
                          const Eigen::VectorXd& p, double t0, double tf,
                          double tol,
                          const Eigen::VectorXd* output_times = nullptr);

/// Euler-Maruyama sample path with fixed step h, deterministic per seed.
Trajectory euler_maruyama(const SDEModel& model, const Eigen::VectorXd& x0,
                          const ControlSolution& u, double t0, double tf,
                          double h, std::uint64_t seed);

}  // namespace utoc

#endif  // UTOC_DYNAMICS_HPP
