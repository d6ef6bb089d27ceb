#include "utoc/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "utoc/rng.hpp"

namespace utoc {

ControlSolution::ControlSolution(Eigen::VectorXd times, Eigen::MatrixXd values)
    : times_(std::move(times)), values_(std::move(values)) {
    if (times_.size() < 1 || values_.cols() != times_.size()) {
        throw std::invalid_argument("control grid/value shape mismatch");
    }
    for (Eigen::Index k = 1; k < times_.size(); ++k) {
        if (times_[k] <= times_[k - 1]) {
            throw std::invalid_argument("control grid must strictly increase");
        }
    }
}

Eigen::VectorXd ControlSolution::operator()(double t) const {
    const Eigen::Index m = times_.size();
    if (t <= times_[0]) return values_.col(0);
    if (t >= times_[m - 1]) return values_.col(m - 1);
    // binary search for the bracketing interval
    Eigen::Index lo = 0;
    Eigen::Index hi = m - 1;
    while (hi - lo > 1) {
        const Eigen::Index mid = (lo + hi) / 2;
        (times_[mid] <= t ? lo : hi) = mid;
    }
    const double w = (t - times_[lo]) / (times_[lo + 1] - times_[lo]);
    return (1.0 - w) * values_.col(lo) + w * values_.col(lo + 1);
}

TychasticVectorField zermelo_field() {
    TychasticVectorField f;
    f.nx = 2;
    f.nu = 2;
    f.np = 2;
    f.eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double,
                const Eigen::VectorXd& p, Eigen::VectorXd& dx) {
        dx[0] = p[0] * x[1] + u[0];
        dx[1] = p[1] * x[0] + u[1];
    };
    return f;
}

TychasticVectorField hst_field() {
    TychasticVectorField f;
    f.nx = 7;
    f.nu = 3;
    f.np = 3;
    f.eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd& u, double,
                const Eigen::VectorXd& p, Eigen::VectorXd& dx) {
        if (p[0] <= 0.0 || p[1] <= 0.0 || p[2] <= 0.0) {
            throw ZeroInertia("principal inertias must be positive");
        }
        const double q1 = x[0], q2 = x[1], q3 = x[2], q4 = x[3];
        const double w1 = x[4], w2 = x[5], w3 = x[6];
        dx[0] = 0.5 * (w1 * q4 - w2 * q3 + w3 * q2);
        dx[1] = 0.5 * (w1 * q3 + w2 * q4 - w3 * q1);
        dx[2] = 0.5 * (-w1 * q2 + w2 * q1 + w3 * q4);
        dx[3] = 0.5 * (-w1 * q1 - w2 * q2 - w3 * q3);
        dx[4] = u[0] / p[0] - ((p[2] - p[1]) / p[0]) * w2 * w3;
        dx[5] = u[1] / p[1] - ((p[0] - p[2]) / p[1]) * w1 * w3;
        dx[6] = u[2] / p[2] - ((p[0] - p[1]) / p[2]) * w1 * w2;
    };
    return f;
}

Eigen::VectorXd rk4_step(const TychasticVectorField& f,
                         const Eigen::VectorXd& x, const ControlSolution& u,
                         double t, double h, const Eigen::VectorXd& p) {
    Eigen::VectorXd k1(f.nx), k2(f.nx), k3(f.nx), k4(f.nx);
    f.eval(x, u(t), t, p, k1);
    f.eval(x + 0.5 * h * k1, u(t + 0.5 * h), t + 0.5 * h, p, k2);
    f.eval(x + 0.5 * h * k2, u(t + 0.5 * h), t + 0.5 * h, p, k3);
    f.eval(x + h * k3, u(t + h), t + h, p, k4);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory propagate_rk4(const TychasticVectorField& f,
                         const Eigen::VectorXd& x0, const ControlSolution& u,
                         const Eigen::VectorXd& p, double t0, double tf,
                         int steps) {
    const double h = (tf - t0) / steps;
    Trajectory traj;
    traj.times.resize(steps + 1);
    traj.states.resize(f.nx, steps + 1);
    traj.times[0] = t0;
    traj.states.col(0) = x0;
    Eigen::VectorXd x = x0;
    for (int k = 0; k < steps; ++k) {
        x = rk4_step(f, x, u, t0 + k * h, h, p);
        traj.times[k + 1] = t0 + (k + 1) * h;
        traj.states.col(k + 1) = x;
    }
    return traj;
}

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

// dense-output coefficients of the 4th-order continuous extension
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;

struct DenseSegment {
    double t0, t1;
    Eigen::VectorXd x0, x1;        // endpoint states
    Eigen::VectorXd r3, r4, r5;    // continuous-extension polynomials

    Eigen::VectorXd eval(double t) const {
        const double s = (t - t0) / (t1 - t0);
        const double s1 = 1.0 - s;
        return x0 + s * ((x1 - x0) + s1 * (r3 + s * (r4 + s1 * r5)));
    }
};

}  // namespace

Trajectory propagate_rk45(const TychasticVectorField& f,
                          const Eigen::VectorXd& x0, const ControlSolution& u,
                          const Eigen::VectorXd& p, double t0, double tf,
                          double tol, const Eigen::VectorXd* output_times) {
    if (tol <= 0.0) throw std::invalid_argument("tolerance must be positive");
    const double span = tf - t0;
    const double h_min = 1e-14 * std::abs(span);

    std::vector<DenseSegment> segments;
    Eigen::VectorXd x = x0;
    double t = t0;
    double h = std::min(std::abs(span), 0.01 * std::abs(span) + 1e-6);
    if (span < 0) h = -h;

    Eigen::VectorXd k1(f.nx), k2(f.nx), k3(f.nx), k4(f.nx), k5(f.nx),
        k6(f.nx), k7(f.nx);
    f.eval(x, u(t), t, p, k1);

    while ((span > 0 && t < tf) || (span < 0 && t > tf)) {
        if (std::abs(h) < h_min) {
            throw StepUnderflow("rk45 step size underflow at t=" +
                                std::to_string(t));
        }
        if ((span > 0 && t + h > tf) || (span < 0 && t + h < tf)) h = tf - t;

        f.eval(x + h * (a21 * k1), u(t + c2 * h), t + c2 * h, p, k2);
        f.eval(x + h * (a31 * k1 + a32 * k2), u(t + c3 * h), t + c3 * h, p, k3);
        f.eval(x + h * (a41 * k1 + a42 * k2 + a43 * k3), u(t + c4 * h),
               t + c4 * h, p, k4);
        f.eval(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4),
               u(t + c5 * h), t + c5 * h, p, k5);
        f.eval(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5),
               u(t + h), t + h, p, k6);
        const Eigen::VectorXd x_new =
            x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        f.eval(x_new, u(t + h), t + h, p, k7);

        const Eigen::VectorXd err_vec =
            h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        const Eigen::VectorXd scale =
            (Eigen::VectorXd::Constant(f.nx, 1.0).cwiseMax(x.cwiseAbs()))
                .cwiseMax(x_new.cwiseAbs());
        const double err = (err_vec.cwiseQuotient(scale)).norm() /
                           std::sqrt(static_cast<double>(f.nx));

        if (err <= tol) {
            const Eigen::VectorXd ydiff = x_new - x;
            const Eigen::VectorXd bspl = h * k1 - ydiff;
            segments.push_back(
                {t, t + h, x, x_new, bspl, ydiff - h * k7 - bspl,
                 h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 +
                      d7 * k7)});
            t += h;
            x = x_new;
            k1 = k7;  // FSAL
        }
        const double factor =
            err > 0.0 ? 0.9 * std::pow(tol / err, 0.2) : 5.0;
        h *= std::clamp(factor, 0.2, 5.0);
    }

    Trajectory traj;
    if (output_times == nullptr) {
        traj.times.resize(segments.size() + 1);
        traj.states.resize(f.nx, segments.size() + 1);
        traj.times[0] = segments.empty() ? t0 : segments.front().t0;
        traj.states.col(0) = segments.empty() ? x0 : segments.front().x0;
        for (std::size_t i = 0; i < segments.size(); ++i) {
            traj.times[i + 1] = segments[i].t1;
            traj.states.col(i + 1) = segments[i].x1;
        }
        if (segments.empty()) {
            traj.times.resize(1);
            traj.states.resize(f.nx, 1);
            traj.times[0] = t0;
            traj.states.col(0) = x0;
        }
    } else {
        const Eigen::VectorXd& ts = *output_times;
        traj.times = ts;
        traj.states.resize(f.nx, ts.size());
        std::size_t seg = 0;
        for (Eigen::Index i = 0; i < ts.size(); ++i) {
            const double tq = std::clamp(ts[i], std::min(t0, tf),
                                         std::max(t0, tf));
            if (segments.empty()) {
                traj.states.col(i) = x0;
                continue;
            }
            while (seg + 1 < segments.size() && segments[seg].t1 < tq) ++seg;
            traj.states.col(i) = segments[seg].eval(tq);
        }
    }
    return traj;
}

Trajectory euler_maruyama(const SDEModel& model, const Eigen::VectorXd& x0,
                          const ControlSolution& u, double t0, double tf,
                          double h, std::uint64_t seed) {
    if (h <= 0.0) throw std::invalid_argument("step size must be positive");
    const int steps = static_cast<int>(std::ceil((tf - t0) / h - 1e-12));
    NormalStream stream(seed, 0);
    Trajectory traj;
    traj.times.resize(steps + 1);
    traj.states.resize(model.nx, steps + 1);
    traj.times[0] = t0;
    traj.states.col(0) = x0;
    Eigen::VectorXd x = x0;
    Eigen::VectorXd drift(model.nx);
    const double sqrt_h = std::sqrt(h);
    for (int k = 0; k < steps; ++k) {
        const double t = t0 + k * h;
        const Eigen::VectorXd uk = u(t);
        model.drift(x, uk, t, drift);
        const Eigen::MatrixXd sigma = model.diffusion(x, uk, t);
        Eigen::VectorXd w(model.nw);
        for (int i = 0; i < model.nw; ++i) w[i] = stream.normal();
        x = x + drift * h + sigma * w * sqrt_h;
        traj.times[k + 1] = t0 + (k + 1) * h;
        traj.states.col(k + 1) = x;
    }
    return traj;
}

}  // namespace utoc
