#include "utoc/transcription.hpp"

#include <algorithm>
#include <cmath>

namespace utoc {

namespace {

// Zermelo navigation data: start (2.25, 1), target at the origin,
// wind parameters (p, q) ~ N((1, -1), diag(0.2^2, 0.1^2)).
GaussianSpec zermelo_wind_spec() {
    Eigen::Vector2d mean(1.0, -1.0);
    Eigen::Vector2d sigmas(0.2, 0.1);
    return GaussianSpec::from_sigmas(mean, sigmas);
}

EndpointConstraint zermelo_target(ConstraintMode mode) {
    EndpointConstraint con;
    con.e = [](const Eigen::VectorXd&, const Eigen::VectorXd& xf, double,
               double, const Eigen::VectorXd&) { return xf; };
    con.lower = Eigen::Vector2d::Zero();
    con.upper = Eigen::Vector2d::Zero();
    con.mode = mode;
    return con;
}

TychasticProblem zermelo_base() {
    TychasticProblem problem;
    problem.field = zermelo_field();
    problem.x0 = Eigen::Vector2d(2.25, 1.0);
    problem.t0 = 0.0;
    problem.tf_free = true;
    problem.tf_guess = 3.0;
    problem.control_set = ControlSet::UnitCircle;
    problem.output_names = {"x", "y"};
    problem.target_point = Eigen::Vector2d::Zero();
    return problem;
}

// Principal inertias of a rigid body must be positive and satisfy the
// triangle inequalities.
bool inertia_feasible(const Eigen::VectorXd& p) {
    return p[0] > 0.0 && p[1] > 0.0 && p[2] > 0.0 &&
           p[0] + p[1] >= p[2] && p[1] + p[2] >= p[0] && p[0] + p[2] >= p[1];
}

TychasticProblem hst_base() {
    TychasticProblem problem;
    problem.field = hst_field();
    problem.x0 = (Eigen::VectorXd(7) << 0, 0, 0, 1, 0, 0, 0).finished();
    problem.t0 = 0.0;
    problem.tf_free = false;
    problem.tf_fixed = 1200.0;  // slew duration, not from the source data
    problem.tf_guess = 1200.0;
    problem.control_set = ControlSet::Box;
    problem.u_lower = Eigen::Vector3d::Constant(-1.0);
    problem.u_upper = Eigen::Vector3d::Constant(1.0);
    problem.output_names = {"yaw_err", "pitch_err", "roll_err",
                            "w1",      "w2",        "w3"};
    // attitude/rate errors relative to the 90 deg yaw, 45 deg pitch target
    problem.report_outputs = [](const Eigen::VectorXd& xf, double) {
        Eigen::VectorXd out(6);
        const Eigen::Vector3d ypr = yaw_pitch_roll(xf.head<4>());
        out[0] = ypr[0] - M_PI / 2.0;
        out[1] = ypr[1] - M_PI / 4.0;
        out[2] = ypr[2];
        out.tail(3) = xf.tail(3);
        return out;
    };
    return problem;
}

Eigen::VectorXd hst_final_state() {
    Eigen::VectorXd xf(7);
    xf.head(4) = quaternion_from_ypr(M_PI / 2.0, M_PI / 4.0, 0.0);
    xf.tail(3).setZero();
    return xf;
}

GaussianSpec hst_inertia_spec() {
    Eigen::Vector3d mean(36.0e3, 87.0e3, 94.0e3);
    return GaussianSpec::from_sigmas(mean, 0.033 * mean);
}

// Table of admissible endpoint variances: attitude in arcsec^2, rates in
// (arcsec/s)^2, converted to radians.
Eigen::VectorXd hst_variance_bounds() {
    Eigen::VectorXd bounds(6);
    bounds << 1436.0, 153.0, 619.0, 0.341, 0.932, 0.130;
    return bounds * (kArcsec * kArcsec);
}

}  // namespace

TychasticProblem builtin_problem(const std::string& name) {
    if (name == "Z0") {
        TychasticProblem problem = zermelo_base();
        problem.distribution.spec =
            GaussianSpec::point_mass(Eigen::Vector2d(1.0, -1.0));
        problem.cost.kind = CostKind::MinTime;
        problem.endpoint.push_back(zermelo_target(ConstraintMode::PerCopy));
        return problem;
    }
    if (name == "Z1") {
        TychasticProblem problem = zermelo_base();
        problem.distribution.spec = zermelo_wind_spec();
        problem.cost.kind = CostKind::MinTime;
        problem.endpoint.push_back(
            zermelo_target(ConstraintMode::CubatureMean));
        return problem;
    }
    if (name == "Z2") {
        TychasticProblem problem = zermelo_base();
        problem.distribution.spec = zermelo_wind_spec();
        problem.cost.kind = CostKind::TraceCovariance;
        problem.endpoint.push_back(
            zermelo_target(ConstraintMode::CubatureMean));
        problem.tf_guess = 6.3;
        return problem;
    }
    if (name == "HST_baseline") {
        TychasticProblem problem = hst_base();
        problem.distribution.spec =
            GaussianSpec::point_mass(Eigen::Vector3d(36.0e3, 87.0e3, 94.0e3));
        // minimum-effort slew to the target attitude at rest
        problem.cost.kind = CostKind::Average;
        problem.cost.lagrange = [](const Eigen::VectorXd&,
                                   const Eigen::VectorXd& u, double,
                                   const Eigen::VectorXd&) {
            return u.squaredNorm();
        };
        EndpointConstraint con;
        const Eigen::VectorXd xf = hst_final_state();
        // rate rows weighted up to the quaternion rows' magnitude so the
        // equality block is uniformly conditioned (same constraint set)
        con.e = [xf](const Eigen::VectorXd&, const Eigen::VectorXd& x,
                     double, double, const Eigen::VectorXd&) {
            Eigen::VectorXd err = x - xf;
            err.tail(3) *= 1.0e3;
            return err;
        };
        con.lower = Eigen::VectorXd::Zero(7);
        con.upper = Eigen::VectorXd::Zero(7);
        con.mode = ConstraintMode::PerCopy;
        problem.endpoint.push_back(con);
        return problem;
    }
    if (name == "HST_unscented") {
        TychasticProblem problem = hst_base();
        problem.distribution.spec = hst_inertia_spec();
        problem.distribution.constraint = inertia_feasible;
        problem.distribution.constraint_name = "inertia_triangle";

        // zero mean attitude/rate error on the cubature average
        EndpointConstraint con;
        con.e = [outputs = problem.report_outputs](
                    const Eigen::VectorXd&, const Eigen::VectorXd& xf, double,
                    double tf, const Eigen::VectorXd&) {
            Eigen::VectorXd err = outputs(xf, tf);
            err.tail(3) *= 1.0e3;  // rate rows up to attitude-row magnitude
            return err;
        };
        con.lower = Eigen::VectorXd::Zero(6);
        con.upper = Eigen::VectorXd::Zero(6);
        con.mode = ConstraintMode::CubatureMean;
        problem.endpoint.push_back(con);

        // dispersion shaping: minimize the bound-normalized endpoint
        // covariance trace and keep every variance inside its bound
        const Eigen::VectorXd bounds = hst_variance_bounds();
        problem.cost.kind = CostKind::TraceCovariance;
        problem.cost.outputs = [outputs = problem.report_outputs,
                                inv = bounds.cwiseSqrt().cwiseInverse()](
                                   const Eigen::VectorXd& xf, double tf) {
            return inv.cwiseProduct(outputs(xf, tf)).eval();
        };
        VarianceBound vb;
        vb.outputs = problem.report_outputs;
        vb.bounds = bounds;
        problem.variance_bounds.push_back(vb);
        return problem;
    }
    throw UnknownName("unknown builtin problem: " + name);
}

Eigen::Vector3d yaw_pitch_roll(const Eigen::Vector4d& q,
                               bool* gimbal_warning) {
    const Eigen::Vector4d qn = q / q.norm();
    const double x = qn[0], y = qn[1], z = qn[2], w = qn[3];
    // body-to-inertial rotation matrix entries for the 3-2-1 sequence
    const double r00 = 1.0 - 2.0 * (y * y + z * z);
    const double r10 = 2.0 * (x * y + z * w);
    const double r20 = 2.0 * (x * z - y * w);
    const double r21 = 2.0 * (y * z + x * w);
    const double r22 = 1.0 - 2.0 * (x * x + y * y);

    const double sin_pitch = std::clamp(-r20, -1.0, 1.0);
    const double pitch = std::asin(sin_pitch);
    if (gimbal_warning) {
        *gimbal_warning = std::abs(std::abs(pitch) - M_PI / 2.0) < 1e-6;
    }
    return Eigen::Vector3d(std::atan2(r10, r00), pitch,
                           std::atan2(r21, r22));
}

Eigen::Vector4d quaternion_from_ypr(double yaw, double pitch, double roll) {
    const double cy = std::cos(0.5 * yaw), sy = std::sin(0.5 * yaw);
    const double cp = std::cos(0.5 * pitch), sp = std::sin(0.5 * pitch);
    const double cr = std::cos(0.5 * roll), sr = std::sin(0.5 * roll);
    Eigen::Vector4d q;
    q[0] = sr * cp * cy - cr * sp * sy;
    q[1] = cr * sp * cy + sr * cp * sy;
    q[2] = cr * cp * sy - sr * sp * cy;
    q[3] = cr * cp * cy + sr * sp * sy;
    return q;
}

}  // namespace utoc
