#include "utoc/verification.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace utoc {

namespace {

// outputs default to the problem's reporting expressions, else the state
OutputFn resolve_outputs(const TychasticProblem& problem,
                         const OutputFn& outputs) {
    if (outputs) return outputs;
    if (problem.report_outputs) return problem.report_outputs;
    return [](const Eigen::VectorXd& xf, double) { return xf; };
}

}  // namespace

MonteCarloReport monte_carlo(const TychasticProblem& problem,
                             const ControlSolution& control, int n,
                             std::uint64_t seed, const OutputFn& outputs,
                             const MonteCarloOptions& options) {
    if (n < 2) throw std::invalid_argument("need at least 2 samples");
    const OutputFn out_fn = resolve_outputs(problem, outputs);
    const double t0 = problem.t0;
    const double tf = control.t_back();

    Eigen::MatrixXd params;
    if (problem.distribution.constraint) {
        ConstrainedGaussianSpec spec{problem.distribution.spec,
                                     problem.distribution.constraint};
        params = sample(spec, n, seed);
    } else {
        params = sample(problem.distribution.spec, n, seed);
    }
    Eigen::MatrixXd starts;
    if (problem.x0_distribution) {
        starts = sample(*problem.x0_distribution, n,
                        seed ^ 0xd1b54a32d192ed03ULL);
    }

    const int nx = problem.field.nx;
    Eigen::MatrixXd finals(n, nx);
    std::vector<char> ok(n, 0);

    auto run_chunk = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            const Eigen::VectorXd x0 =
                starts.size() ? starts.col(i).eval() : problem.x0;
            try {
                const Trajectory traj =
                    propagate_rk45(problem.field, x0, control, params.col(i),
                                   t0, tf, options.tol);
                const Eigen::VectorXd xf = traj.final_state();
                if (!xf.allFinite()) throw StepUnderflow("non-finite state");
                finals.row(i) = xf.transpose();
                ok[i] = 1;
            } catch (const std::runtime_error&) {
                ok[i] = 0;
            }
        }
    };

    const int workers = std::max(1, options.workers);
    if (workers == 1 || n < 4 * workers) {
        run_chunk(0, n);
    } else {
        std::vector<std::thread> pool;
        const int chunk = (n + workers - 1) / workers;
        for (int w = 0; w < workers; ++w) {
            const int begin = w * chunk;
            const int end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(run_chunk, begin, end);
        }
        for (auto& t : pool) t.join();
    }

    MonteCarloReport report;
    report.n = n;
    report.seed = seed;
    report.output_names = problem.output_names;

    int n_ok = 0;
    for (int i = 0; i < n; ++i) {
        if (ok[i]) {
            ++n_ok;
        } else {
            report.excluded.push_back(i);
        }
    }
    if (n_ok < 2) {
        throw std::runtime_error("fewer than 2 samples propagated");
    }

    const int n_out =
        static_cast<int>(out_fn(problem.x0.size() == nx
                                    ? problem.x0
                                    : Eigen::VectorXd::Zero(nx),
                                tf)
                             .size());
    report.outputs.resize(n_ok, n_out);
    report.final_states.resize(n_ok, nx);
    int row = 0;
    for (int i = 0; i < n; ++i) {
        if (!ok[i]) continue;
        report.final_states.row(row) = finals.row(i);
        report.outputs.row(row) =
            out_fn(finals.row(i).transpose(), tf).transpose();
        ++row;
    }

    report.mean = report.outputs.colwise().mean().transpose();
    const Eigen::MatrixXd centered =
        report.outputs.rowwise() - report.mean.transpose();
    report.covariance =
        centered.transpose() * centered / static_cast<double>(n_ok - 1);
    return report;
}

std::vector<std::pair<double, double>> risk_curve(
    MonteCarloReport& report, const Eigen::VectorXd& target,
    const Eigen::VectorXd& epsilons) {
    if (target.size() != report.outputs.cols()) {
        throw DimensionMismatch("target dimension does not match outputs");
    }
    Eigen::VectorXd dist(report.n_ok());
    for (int i = 0; i < report.n_ok(); ++i) {
        dist[i] = (report.outputs.row(i).transpose() - target).norm();
    }
    const double n = static_cast<double>(report.n);
    const double failed = static_cast<double>(report.excluded.size());
    report.risk_curve.clear();
    for (Eigen::Index k = 0; k < epsilons.size(); ++k) {
        const double eps = epsilons[k];
        const double outside =
            static_cast<double>((dist.array() > eps).count());
        report.risk_curve.emplace_back(eps, (outside + failed) / n);
    }
    return report.risk_curve;
}

Eigen::VectorXd default_epsilon_grid() {
    Eigen::VectorXd grid(50);
    const double lo = std::log(0.01), hi = std::log(2.0);
    for (int k = 0; k < 50; ++k) {
        grid[k] = std::exp(lo + (hi - lo) * k / 49.0);
    }
    return grid;
}

EllipseGeometry covariance_ellipse(const Eigen::Matrix2d& cov2,
                                   const Eigen::Vector2d& center,
                                   double confidence) {
    if (std::abs(cov2(0, 1) - cov2(1, 0)) >
        1e-10 * std::max(1.0, cov2.cwiseAbs().maxCoeff())) {
        throw NotPSD("covariance is not symmetric");
    }
    if (confidence <= 0.0 || confidence >= 1.0) {
        throw std::invalid_argument("confidence must lie in (0,1)");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(cov2);
    if (eig.eigenvalues()[0] < -1e-12 * std::max(1.0, cov2.trace())) {
        throw NotPSD("covariance has a negative eigenvalue");
    }
    const double quantile = -2.0 * std::log(1.0 - confidence);
    EllipseGeometry geom;
    geom.center = center;
    geom.confidence = confidence;
    // eigenvalues ascending: index 1 is the major axis
    geom.semi_axes[0] =
        std::sqrt(std::max(0.0, eig.eigenvalues()[1]) * quantile);
    geom.semi_axes[1] =
        std::sqrt(std::max(0.0, eig.eigenvalues()[0]) * quantile);
    const Eigen::Vector2d major = eig.eigenvectors().col(1);
    geom.orientation = std::atan2(major[1], major[0]);
    if (geom.orientation < 0.0) geom.orientation += M_PI;  // axis, not ray
    if (geom.orientation >= M_PI) geom.orientation -= M_PI;
    return geom;
}

FeasibilityReport feasibility_check(const TychasticProblem& problem,
                                    const ControlSolution& control,
                                    double tolerance) {
    FeasibilityReport rep;
    rep.tolerance = tolerance;
    rep.tf = control.t_back();
    const Eigen::VectorXd p = problem.distribution.spec.mean();

    const int path_samples = 201;
    Eigen::VectorXd grid = Eigen::VectorXd::LinSpaced(
        path_samples, problem.t0, rep.tf);
    const Trajectory traj = propagate_rk45(problem.field, problem.x0, control,
                                           p, problem.t0, rep.tf, 1e-10,
                                           &grid);
    rep.final_state = traj.final_state();

    auto violation = [](const Eigen::VectorXd& value,
                        const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper) {
        double v = 0.0;
        for (Eigen::Index i = 0; i < value.size(); ++i) {
            if (std::isfinite(lower[i])) v = std::max(v, lower[i] - value[i]);
            if (std::isfinite(upper[i])) v = std::max(v, value[i] - upper[i]);
        }
        return v;
    };

    for (const auto& con : problem.endpoint) {
        rep.endpoint_violation = std::max(
            rep.endpoint_violation,
            violation(con.e(problem.x0, rep.final_state, problem.t0, rep.tf,
                            p),
                      con.lower, con.upper));
    }
    for (const auto& con : problem.path) {
        for (int k = 0; k < path_samples; ++k) {
            rep.path_violation = std::max(
                rep.path_violation,
                violation(con.h(traj.states.col(k), control(traj.times[k]),
                                traj.times[k], p),
                          con.lower, con.upper));
        }
    }
    rep.pass = rep.endpoint_violation <= tolerance &&
               rep.path_violation <= tolerance;
    return rep;
}

EventProbability estimate_event_probability(
    const MonteCarloReport& report,
    const std::function<bool(const Eigen::VectorXd&)>& event) {
    int hits = 0;
    for (int i = 0; i < report.n_ok(); ++i) {
        if (event(report.outputs.row(i).transpose())) ++hits;
    }
    EventProbability out;
    const double n = static_cast<double>(report.n_ok());
    out.probability = hits / n;
    out.standard_error =
        std::sqrt(out.probability * (1.0 - out.probability) / n);
    return out;
}

std::string report_json(const MonteCarloReport& report) {
    nlohmann::json doc;
    doc["n"] = report.n;
    doc["seed"] = report.seed;
    doc["mean"] = std::vector<double>(report.mean.data(),
                                      report.mean.data() + report.mean.size());
    std::vector<std::vector<double>> cov(report.covariance.rows());
    for (Eigen::Index i = 0; i < report.covariance.rows(); ++i) {
        cov[i].assign(report.covariance.row(i).begin(),
                      report.covariance.row(i).end());
    }
    doc["cov"] = cov;
    std::vector<std::vector<double>> rc;
    for (const auto& [eps, r] : report.risk_curve) rc.push_back({eps, r});
    doc["risk_curve"] = rc;
    doc["excluded"] = report.excluded.size();
    doc["output_names"] = report.output_names;
    return doc.dump(2);
}

void write_report_csv(const std::string& path,
                      const MonteCarloReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    const int n_out = static_cast<int>(report.outputs.cols());
    for (int j = 0; j < n_out; ++j) {
        const std::string name =
            j < static_cast<int>(report.output_names.size())
                ? report.output_names[j]
                : "out" + std::to_string(j + 1);
        out << (j ? ", " : "") << name;
    }
    out << "\n";
    out.precision(17);
    for (int i = 0; i < report.n_ok(); ++i) {
        for (int j = 0; j < n_out; ++j) {
            out << (j ? ", " : "") << report.outputs(i, j);
        }
        out << "\n";
    }
}

std::string ellipse_scatter_svg(const MonteCarloReport& report, int i, int j,
                                double confidence) {
    if (i < 0 || j < 0 || i >= report.outputs.cols() ||
        j >= report.outputs.cols() || i == j) {
        throw std::invalid_argument("invalid output pair");
    }
    Eigen::Matrix2d cov2;
    cov2 << report.covariance(i, i), report.covariance(i, j),
        report.covariance(j, i), report.covariance(j, j);
    const Eigen::Vector2d center(report.mean[i], report.mean[j]);
    const EllipseGeometry geom = covariance_ellipse(cov2, center, confidence);

    const double xmin = report.outputs.col(i).minCoeff();
    const double xmax = report.outputs.col(i).maxCoeff();
    const double ymin = report.outputs.col(j).minCoeff();
    const double ymax = report.outputs.col(j).maxCoeff();
    const double padx = 0.1 * std::max(1e-12, xmax - xmin);
    const double pady = 0.1 * std::max(1e-12, ymax - ymin);
    const double x0 = xmin - padx, x1 = xmax + padx;
    const double y0 = ymin - pady, y1 = ymax + pady;
    const double W = 640.0, H = 480.0, margin = 56.0;

    auto px = [&](double x) {
        return margin + (x - x0) / (x1 - x0) * (W - 2.0 * margin);
    };
    auto py = [&](double y) {
        return H - margin - (y - y0) / (y1 - y0) * (H - 2.0 * margin);
    };
    auto name = [&](int k) {
        return k < static_cast<int>(report.output_names.size())
                   ? report.output_names[k]
                   : "out" + std::to_string(k + 1);
    };

    std::ostringstream svg;
    svg.precision(6);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H
        << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H
        << "\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\""
        << W - 2 * margin << "\" height=\"" << H - 2 * margin
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"14\">" << name(i)
        << "</text>\n";
    svg << "<text x=\"16\" y=\"" << H / 2
        << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 "
           "16 "
        << H / 2 << ")\">" << name(j) << "</text>\n";
    for (int k = 0; k < report.n_ok(); ++k) {
        svg << "<circle cx=\"" << px(report.outputs(k, i)) << "\" cy=\""
            << py(report.outputs(k, j))
            << "\" r=\"1.5\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
    }
    // ellipse in data units mapped through the axis scales
    const double sx = (W - 2.0 * margin) / (x1 - x0);
    const double sy = (H - 2.0 * margin) / (y1 - y0);
    svg << "<g transform=\"translate(" << px(geom.center[0]) << " "
        << py(geom.center[1]) << ")\">\n";
    const int segs = 128;
    svg << "<polygon fill=\"none\" stroke=\"crimson\" stroke-width=\"1.5\" "
           "points=\"";
    for (int k = 0; k < segs; ++k) {
        const double a = 2.0 * M_PI * k / segs;
        const double ex = geom.semi_axes[0] * std::cos(a);
        const double ey = geom.semi_axes[1] * std::sin(a);
        const double rx = ex * std::cos(geom.orientation) -
                          ey * std::sin(geom.orientation);
        const double ry = ex * std::sin(geom.orientation) +
                          ey * std::cos(geom.orientation);
        svg << rx * sx << "," << -ry * sy << " ";
    }
    svg << "\"/>\n</g>\n</svg>\n";
    return svg.str();
}

}  // namespace utoc
