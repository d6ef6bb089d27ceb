// Acceptance gate: every headline requirement exercised end to end, one
// PASS/FAIL line each. Exit code 0 iff all pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "utoc/pipeline.hpp"
#include "utoc/verification.hpp"

using namespace utoc;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
    std::cout << (ok ? "PASS" : "FAIL") << ": " << name;
    if (!detail.empty()) std::cout << "  [" << detail << "]";
    std::cout << std::endl;
    if (!ok) ++failures;
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

constexpr std::uint64_t kSeed = 20260815;

double trace2(const Eigen::MatrixXd& cov) { return cov.trace(); }

double risk_at(const MonteCarloReport& rep, const Eigen::VectorXd& target,
               double eps) {
    MonteCarloReport copy = rep;
    Eigen::VectorXd one(1);
    one << eps;
    return risk_curve(copy, target, one)[0].second;
}

}  // namespace

int main() {
    std::cout.setf(std::ios::unitbuf);
    const RunConfig cfg;  // library defaults: 50 nodes, compressed HS

    // ---------------------------------------------------------------- Z0
    const TychasticProblem z0p = builtin_problem("Z0");
    auto t0 = Clock::now();
    const SolveRun z0 = run_solve(z0p, default_solve_options("Z0", cfg));
    const double z0_time = seconds_since(t0);
    const FeasibilityReport z0f = feasibility_check(z0p, z0.control, 1e-3);
    report("Z0 baseline min-time t_f = 2.47 +- 0.03, miss <= 1e-3, <= 30 s",
           std::abs(z0.tf - 2.47) <= 0.03 &&
               z0f.endpoint_violation <= 1e-3 && z0_time <= 30.0,
           "t_f=" + fmt(z0.tf) + " miss=" + fmt(z0f.endpoint_violation) +
               " time=" + fmt(z0_time) + "s");

    // ------------------------------------------------- Z0 Monte Carlo
    const TychasticProblem z1p = builtin_problem("Z1");
    t0 = Clock::now();
    MonteCarloReport z0mc = monte_carlo(z1p, z0.control, 1000, kSeed);
    const double z0mc_time = seconds_since(t0);
    const EventProbability exact_hit = estimate_event_probability(
        z0mc, [](const Eigen::VectorXd& y) { return y.norm() == 0.0; });
    report(
        "Z0 Monte Carlo mean within +-0.015 of (0.03, 0.02), P{exact hit}=0,"
        " <= 10 s",
        std::abs(z0mc.mean[0] - 0.03) <= 0.015 &&
            std::abs(z0mc.mean[1] - 0.02) <= 0.015 &&
            exact_hit.probability == 0.0 && z0mc_time <= 10.0,
        "mean=(" + fmt(z0mc.mean[0]) + ", " + fmt(z0mc.mean[1]) +
            ") time=" + fmt(z0mc_time) + "s");

    // ---------------------------------------------------------------- Z1
    SolveRunOptions z1o = default_solve_options("Z1", cfg);
    z1o.warm_control = z0.control;
    z1o.warm_tf = z0.tf;
    const SolveRun z1 = run_solve(z1p, z1o);
    MonteCarloReport z1mc = monte_carlo(z1p, z1.control, 1000, kSeed);
    bool z1_mean_ok = true;
    for (int i = 0; i < 2; ++i) {
        const double se =
            std::sqrt(z1mc.covariance(i, i) / std::max(1, z1mc.n_ok()));
        z1_mean_ok = z1_mean_ok && std::abs(z1mc.mean[i]) <= 3.0 * se;
    }
    report("Z1 mean targeting t_f = 2.47 +- 0.25, MC mean within 3 SE of 0",
           std::abs(z1.tf - 2.47) <= 0.25 && z1_mean_ok,
           "t_f=" + fmt(z1.tf) + " mean=(" + fmt(z1mc.mean[0]) + ", " +
               fmt(z1mc.mean[1]) + ")");

    // ---------------------------------------------------------------- Z2
    const TychasticProblem z2p = builtin_problem("Z2");
    SolveRunOptions z2o = default_solve_options("Z2", cfg);
    z2o.warm_control = z1.control;
    z2o.warm_tf = z1.tf;
    const SolveRun z2 = run_solve(z2p, z2o);
    MonteCarloReport z2mc = monte_carlo(z1p, z2.control, 1000, kSeed);
    const double tr0 = trace2(z0mc.covariance);
    const double tr2 = trace2(z2mc.covariance);
    report("Z2 dispersion minimization t_f = 6.10 +- 0.6, trace-cov <= 0.25x",
           std::abs(z2.tf - 6.10) <= 0.6 && tr2 <= 0.25 * tr0,
           "t_f=" + fmt(z2.tf) + " trace=" + fmt(tr2) + " vs baseline " +
               fmt(tr0));

    // ---------------------------------------------------------- risk curve
    t0 = Clock::now();
    const Eigen::Vector2d target(0.0, 0.0);
    const Eigen::VectorXd grid = default_epsilon_grid();
    const auto c0 = risk_curve(z0mc, target, grid);
    const auto c2 = risk_curve(z2mc, target, grid);
    bool monotone = true;
    for (std::size_t i = 1; i < c0.size(); ++i) {
        monotone = monotone && c0[i].second <= c0[i - 1].second &&
                   c2[i].second <= c2[i - 1].second;
    }
    const double r0 = risk_at(z0mc, target, 0.2);
    const double r2 = risk_at(z2mc, target, 0.2);
    const double reduction = r0 > 0.0 ? (r0 - r2) / r0 : 0.0;
    const double risk_time = seconds_since(t0);
    report(
        "Risk frontier non-increasing, >= 60% reduction at eps = 0.2,"
        " <= 30 s",
        monotone && reduction >= 0.60 && risk_time <= 30.0,
        "r0=" + fmt(r0) + " r2=" + fmt(r2) + " reduction=" +
            fmt(100.0 * reduction) + "% time=" + fmt(risk_time) + "s");

    // --------------------------------------------------------------- HST
    t0 = Clock::now();
    const TychasticProblem hb = builtin_problem("HST_baseline");
    const TychasticProblem hu = builtin_problem("HST_unscented");
    const SolveRun hbase =
        run_solve(hb, default_solve_options("HST_baseline", cfg));
    SolveRunOptions huo = default_solve_options("HST_unscented", cfg);
    huo.warm_control = hbase.control;
    huo.warm_tf = hbase.tf;
    const SolveRun hunsc = run_solve(hu, huo);
    const MonteCarloReport hbmc =
        monte_carlo(hu, hbase.control, 500, kSeed, hu.report_outputs);
    const MonteCarloReport humc =
        monte_carlo(hu, hunsc.control, 500, kSeed, hu.report_outputs);
    bool mean_ok = true, var_ok = true;
    std::string worst;
    for (int i = 0; i < 6; ++i) {
        const double se_b =
            std::sqrt(hbmc.covariance(i, i) / std::max(1, hbmc.n_ok()));
        if (std::abs(hbmc.mean[i]) > se_b) {
            mean_ok = mean_ok &&
                      std::abs(humc.mean[i]) <= 0.2 * std::abs(hbmc.mean[i]);
        }
        const double ratio = humc.covariance(i, i) /
                             std::max(hbmc.covariance(i, i), 1e-300);
        var_ok = var_ok && ratio <= 0.33;
        worst += (i ? "," : "") + fmt(ratio);
    }
    const double hst_time = seconds_since(t0);
    report(
        "HST suite: unscented mean errors <= 0.2x and variances <= 0.33x"
        " baseline, <= 20 min",
        mean_ok && var_ok && hst_time <= 1200.0,
        "var ratios=(" + worst + ") time=" + fmt(hst_time) + "s");

    // ------------------------------------------------------- sigma points
    {
        bool ok = true;
        std::mt19937_64 gen(12345);
        std::normal_distribution<double> nd;
        for (int np = 1; np <= 6 && ok; ++np) {
            Eigen::VectorXd m(np);
            Eigen::MatrixXd a(np, np);
            for (int i = 0; i < np; ++i) {
                m[i] = nd(gen);
                for (int j = 0; j < np; ++j) a(i, j) = 0.5 * nd(gen);
            }
            const Eigen::MatrixXd cov =
                a * a.transpose() +
                0.2 * Eigen::MatrixXd::Identity(np, np);
            const GaussianSpec spec(m, cov);
            for (int scheme = 0; scheme < 2 && ok; ++scheme) {
                const SigmaSet set =
                    scheme == 0
                        ? symmetric_sigma_points(spec, default_kappa(np))
                        : simplex_sigma_points(spec, 0.4);
                const double tol =
                    1e-10 * std::max(1.0, cov.cwiseAbs().maxCoeff());
                ok = ok && std::abs(set.weights.sum() - 1.0) <= 1e-10;
                ok = ok && (set.weighted_mean() - m).cwiseAbs().maxCoeff() <=
                               tol;
                ok = ok && (set.weighted_covariance() - cov)
                                   .cwiseAbs()
                                   .maxCoeff() <= tol;
                // degree <= 2 monomial cubature exactness
                for (int i = 0; i < np && ok; ++i) {
                    for (int j = i; j < np && ok; ++j) {
                        double acc = 0.0;
                        for (int s = 0; s < set.count(); ++s) {
                            acc += set.weights[s] * set.points(i, s) *
                                   set.points(j, s);
                        }
                        ok = ok &&
                             std::abs(acc - (cov(i, j) + m[i] * m[j])) <= tol;
                    }
                }
            }
        }
        report(
            "Sigma-point suite: moment matching at 1e-10 for N_p in 1..6,"
            " both schemes; degree-2 cubature exact",
            ok, "");
    }

    // -------------------------------------------------------- integrators
    {
        TychasticVectorField osc;
        osc.nx = 2;
        osc.nu = 1;
        osc.np = 1;
        osc.eval = [](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                      double, const Eigen::VectorXd&, Eigen::VectorXd& dx) {
            dx[0] = x[1];
            dx[1] = -x[0];
        };
        Eigen::VectorXd ut(2), x0(2), p(1);
        ut << 0.0, 2.0 * M_PI;
        Eigen::MatrixXd uv = Eigen::MatrixXd::Zero(1, 2);
        const ControlSolution u(ut, uv);
        x0 << 1.0, 0.0;
        p << 0.0;

        auto rk4_err = [&](int steps) {
            const Trajectory t =
                propagate_rk4(osc, x0, u, p, 0.0, 2.0 * M_PI, steps);
            return (t.final_state() - x0).norm();
        };
        const double ratio = rk4_err(50) / rk4_err(100);
        const Trajectory round =
            propagate_rk45(osc, x0, u, p, 0.0, 2.0 * M_PI, 1e-10);
        const double round_err = (round.final_state() - x0).norm();

        const TychasticVectorField hst = hst_field();
        Eigen::VectorXd q0(7), inertia(3);
        q0 << 0, 0, 0, 1, 0, 0, 0;
        inertia << 36.0e3, 87.0e3, 94.0e3;
        Eigen::VectorXd ht(2);
        ht << 0.0, 1200.0;
        Eigen::MatrixXd hv(3, 2);
        hv << 0.5, -0.5, 0.3, -0.3, -0.2, 0.2;
        Eigen::VectorXd outs(201);
        for (int i = 0; i < 201; ++i) outs[i] = 1200.0 * i / 200.0;
        const Trajectory slew = propagate_rk45(
            hst, q0, ControlSolution(ht, hv), inertia, 0.0, 1200.0, 1e-10,
            &outs);
        double drift = 0.0;
        for (int i = 0; i < slew.states.cols(); ++i) {
            drift = std::max(
                drift,
                std::abs(slew.states.col(i).head(4).norm() - 1.0));
        }
        report(
            "Integrator suite: RK4 order 4 (ratio 16 +- 3), RK45 round trip"
            " <= 1e-8, quaternion norm drift <= 1e-7",
            ratio >= 13.0 && ratio <= 19.0 && round_err <= 1e-8 &&
                drift <= 1e-7,
            "ratio=" + fmt(ratio) + " round=" + fmt(round_err) +
                " drift=" + fmt(drift));
    }

    // ----------------------------------------------- Euler-Maruyama suite
    {
        SDEModel ou;
        ou.nx = 1;
        ou.nu = 1;
        ou.nw = 1;
        ou.drift = [](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                      double, Eigen::VectorXd& dx) { dx[0] = -x[0]; };
        ou.diffusion = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                          double) {
            return Eigen::MatrixXd::Constant(1, 1, 1.0);
        };
        Eigen::VectorXd t2(2);
        t2 << 0.0, 10.0;
        const ControlSolution u(t2, Eigen::MatrixXd::Zero(1, 2));
        const Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1);
        double sum = 0.0, sumsq = 0.0;
        const int paths = 10000;
        for (int i = 0; i < paths; ++i) {
            const Trajectory t =
                euler_maruyama(ou, x0, u, 0.0, 10.0, 0.01, 1000 + i);
            const double xf = t.final_state()[0];
            sum += xf;
            sumsq += xf * xf;
        }
        const double var =
            (sumsq - sum * sum / paths) / (paths - 1);

        // zero diffusion reduces exactly to explicit Euler
        ou.diffusion = [](const Eigen::VectorXd&, const Eigen::VectorXd&,
                          double) { return Eigen::MatrixXd::Zero(1, 1); };
        Eigen::VectorXd xs = Eigen::VectorXd::Constant(1, 1.0);
        const Trajectory det =
            euler_maruyama(ou, xs, u, 0.0, 1.0, 0.1, 7);
        double xe = 1.0;
        for (int k = 0; k < 10; ++k) xe += 0.1 * (-xe);
        const bool euler_exact =
            det.final_state()[0] == xe;
        report(
            "Euler-Maruyama suite: OU stationary variance 0.5 within 5%"
            " (1e4 paths), zero diffusion == explicit Euler",
            std::abs(var - 0.5) <= 0.025 && euler_exact,
            "var=" + fmt(var));
    }

    // -------------------------------------------------------- solver suite
    {
        Nlp qp;
        qp.n = 2;
        qp.objective = [](const Eigen::VectorXd& x) {
            return x.squaredNorm();
        };
        qp.equality = [](const Eigen::VectorXd& x) {
            return Eigen::VectorXd::Constant(1, x[0] + x[1] - 1.0);
        };
        qp.initial_guess = Eigen::Vector2d(3.0, -2.0);
        const SolveResult rq = solve(qp);
        const double kkt_qp =
            (2.0 * rq.x +
             rq.lambda[0] * Eigen::Vector2d::Ones())
                .cwiseAbs()
                .maxCoeff();
        const bool qp_ok = rq.status == SolveStatus::Converged &&
                           std::abs(rq.x[0] - 0.5) <= 1e-5 &&
                           std::abs(rq.x[1] - 0.5) <= 1e-5 &&
                           kkt_qp <= 1e-5;

        Nlp bound;
        bound.n = 1;
        bound.objective = [](const Eigen::VectorXd& x) { return -x[0]; };
        bound.lower_bounds = Eigen::VectorXd::Constant(1, 0.0);
        bound.upper_bounds = Eigen::VectorXd::Constant(1, 3.0);
        bound.initial_guess = Eigen::VectorXd::Constant(1, 1.0);
        const SolveResult rb = solve(bound);
        const bool bound_ok = rb.status == SolveStatus::Converged &&
                              std::abs(rb.x[0] - 3.0) <= 1e-9;

        Nlp rosen;
        rosen.n = 2;
        rosen.objective = [](const Eigen::VectorXd& x) {
            const double a = 1.0 - x[0];
            const double b = x[1] - x[0] * x[0];
            return a * a + 100.0 * b * b;
        };
        rosen.objective_gradient = [](const Eigen::VectorXd& x) {
            Eigen::VectorXd g(2);
            const double b = x[1] - x[0] * x[0];
            g[0] = -2.0 * (1.0 - x[0]) - 400.0 * x[0] * b;
            g[1] = 200.0 * b;
            return g;
        };
        rosen.initial_guess = Eigen::Vector2d(-1.2, 1.0);
        SolverOptions ro;
        ro.max_inner = 500;
        const SolveResult rr = solve(rosen, ro);
        const double kkt_r =
            rosen.objective_gradient(rr.x).cwiseAbs().maxCoeff();
        const bool rosen_ok = std::abs(rr.x[0] - 1.0) <= 1e-5 &&
                              std::abs(rr.x[1] - 1.0) <= 1e-5 &&
                              kkt_r <= 1e-5;
        report(
            "Solver suite: equality QP, active bound and Rosenbrock reach"
            " known optima, KKT residual <= 1e-5",
            qp_ok && bound_ok && rosen_ok,
            "kkt_qp=" + fmt(kkt_qp) + " x_bound=" + fmt(rb.x[0]) +
                " kkt_rosen=" + fmt(kkt_r));
    }

    std::cout << (failures == 0 ? "ALL PASS" : "FAILURES: ") << std::flush;
    if (failures != 0) std::cout << failures << std::endl;
    else std::cout << std::endl;
    return failures == 0 ? 0 : 1;
}
