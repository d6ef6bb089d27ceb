#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "utoc/verification.hpp"

using namespace utoc;

namespace {

ControlSolution constant_control(const Eigen::VectorXd& u, double tf) {
    Eigen::VectorXd times(2);
    times << 0.0, tf;
    Eigen::MatrixXd values(u.size(), 2);
    values.col(0) = u;
    values.col(1) = u;
    return ControlSolution(times, values);
}

/// xdot = p (constant drift), so x(tf) = x0 + p*tf exactly.
TychasticProblem drift_problem() {
    TychasticVectorField f;
    f.nx = 2;
    f.nu = 1;
    f.np = 2;
    f.eval = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double,
                const Eigen::VectorXd& p, Eigen::VectorXd& dx) { dx = p; };
    TychasticProblem problem;
    problem.field = f;
    problem.x0 = Eigen::Vector2d::Zero();
    problem.distribution.spec = GaussianSpec::from_sigmas(
        Eigen::Vector2d(1.0, -1.0), Eigen::Vector2d(0.2, 0.1));
    problem.tf_free = false;
    problem.tf_fixed = 1.0;
    return problem;
}

}  // namespace

TEST_CASE("monte carlo on a linear drift model") {
    TychasticProblem problem = drift_problem();
    const ControlSolution u = constant_control(Eigen::VectorXd::Zero(1), 1.0);

    SUBCASE("point mass gives a zero-covariance point") {
        problem.distribution.spec =
            GaussianSpec::point_mass(Eigen::Vector2d(1.0, -1.0));
        const MonteCarloReport rep = monte_carlo(problem, u, 100, 7);
        CHECK(rep.n_ok() == 100);
        CHECK(rep.excluded.empty());
        CHECK((rep.mean - Eigen::Vector2d(1.0, -1.0)).cwiseAbs().maxCoeff() <
              1e-7);
        CHECK(rep.covariance.cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("sample statistics approach the exact law") {
        // x(1) = p ~ N((1,-1), diag(0.04, 0.01))
        const MonteCarloReport rep = monte_carlo(problem, u, 4000, 11);
        CHECK(rep.mean[0] == doctest::Approx(1.0).epsilon(0.02));
        CHECK(rep.mean[1] == doctest::Approx(-1.0).epsilon(0.02));
        CHECK(rep.covariance(0, 0) == doctest::Approx(0.04).epsilon(0.1));
        CHECK(rep.covariance(1, 1) == doctest::Approx(0.01).epsilon(0.1));
        CHECK(std::abs(rep.covariance(0, 1)) < 0.005);
    }
    SUBCASE("same seed reproduces byte-identical reports") {
        const MonteCarloReport a = monte_carlo(problem, u, 200, 42);
        const MonteCarloReport b = monte_carlo(problem, u, 200, 42);
        CHECK((a.outputs - b.outputs).cwiseAbs().maxCoeff() == 0.0);
        CHECK(report_json(a) == report_json(b));
        const MonteCarloReport c = monte_carlo(problem, u, 200, 43);
        CHECK((a.outputs - c.outputs).cwiseAbs().maxCoeff() > 0.0);
    }
    SUBCASE("worker count does not change the samples") {
        MonteCarloOptions one, four;
        one.workers = 1;
        four.workers = 4;
        const MonteCarloReport a = monte_carlo(problem, u, 97, 5, {}, one);
        const MonteCarloReport b = monte_carlo(problem, u, 97, 5, {}, four);
        CHECK((a.outputs - b.outputs).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("standard error of the mean shrinks like 1/sqrt(n)") {
        // Var(mean over n) tracked by |mean - 1| averaged over seeds
        auto mean_abs_err = [&](int n) {
            double acc = 0.0;
            for (std::uint64_t s = 1; s <= 12; ++s) {
                acc += std::abs(monte_carlo(problem, u, n, s).mean[0] - 1.0);
            }
            return acc / 12.0;
        };
        const double e_small = mean_abs_err(100);
        const double e_big = mean_abs_err(1600);
        // expect a factor of about 4, allow a broad band
        CHECK(e_small / e_big > 2.0);
        CHECK(e_small / e_big < 8.0);
    }
    SUBCASE("custom output map applies to the final state") {
        const OutputFn g = [](const Eigen::VectorXd& xf, double) {
            return Eigen::VectorXd::Constant(1, xf.squaredNorm());
        };
        const MonteCarloReport rep = monte_carlo(problem, u, 500, 3, g);
        CHECK(rep.outputs.cols() == 1);
        // E[x^2 + y^2] = 1 + 0.04 + 1 + 0.01
        CHECK(rep.mean[0] == doctest::Approx(2.05).epsilon(0.03));
    }
}

TEST_CASE("risk curve") {
    MonteCarloReport rep;
    rep.n = 2;
    rep.outputs.resize(2, 2);
    rep.outputs << 1.0, 0.0, 3.0, 0.0;  // distances 1 and 3 from origin
    rep.mean = Eigen::Vector2d(2.0, 0.0);
    rep.covariance = Eigen::Matrix2d::Zero();

    SUBCASE("counting example") {
        Eigen::VectorXd eps(3);
        eps << 0.5, 2.0, 4.0;
        const auto curve = risk_curve(rep, Eigen::Vector2d::Zero(), eps);
        REQUIRE(curve.size() == 3);
        CHECK(curve[0].second == doctest::Approx(1.0));
        CHECK(curve[1].second == doctest::Approx(0.5));
        CHECK(curve[2].second == doctest::Approx(0.0));
        CHECK(rep.risk_curve.size() == 3);
    }
    SUBCASE("failed samples count as misses") {
        rep.n = 4;
        rep.excluded = {2, 3};
        Eigen::VectorXd eps(1);
        eps << 10.0;
        const auto curve = risk_curve(rep, Eigen::Vector2d::Zero(), eps);
        CHECK(curve[0].second == doctest::Approx(0.5));
    }
    SUBCASE("monotone non-increasing on the default grid") {
        const Eigen::VectorXd grid = default_epsilon_grid();
        REQUIRE(grid.size() == 50);
        CHECK(grid[0] == doctest::Approx(0.01));
        CHECK(grid[49] == doctest::Approx(2.0));
        const auto curve = risk_curve(rep, Eigen::Vector2d::Zero(), grid);
        for (std::size_t i = 1; i < curve.size(); ++i) {
            CHECK(curve[i].second <= curve[i - 1].second);
        }
    }
    SUBCASE("target dimension mismatch") {
        Eigen::VectorXd eps(1);
        eps << 1.0;
        CHECK_THROWS_AS(risk_curve(rep, Eigen::VectorXd::Zero(3), eps),
                        DimensionMismatch);
    }
}

TEST_CASE("covariance ellipse geometry") {
    SUBCASE("axis-aligned diagonal case at the unit quantile") {
        // chi2(2) quantile -2 ln(1-c) = 1 at c = 1 - exp(-1/2) = 0.39347
        const double c = 1.0 - std::exp(-0.5);
        Eigen::Matrix2d cov;
        cov << 4.0, 0.0, 0.0, 1.0;
        const EllipseGeometry e =
            covariance_ellipse(cov, Eigen::Vector2d(1.0, 2.0), c);
        CHECK(e.semi_axes[0] == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(e.semi_axes[1] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(e.orientation) < 1e-12);
        CHECK(e.center[0] == doctest::Approx(1.0));
    }
    SUBCASE("correlated case orients at 45 degrees") {
        const double c = 1.0 - std::exp(-0.5);
        Eigen::Matrix2d cov;
        cov << 2.0, 1.0, 1.0, 2.0;  // eigenvalues 3 and 1
        const EllipseGeometry e =
            covariance_ellipse(cov, Eigen::Vector2d::Zero(), c);
        CHECK(e.semi_axes[0] == doctest::Approx(std::sqrt(3.0)));
        CHECK(e.semi_axes[1] == doctest::Approx(1.0));
        CHECK(e.orientation == doctest::Approx(M_PI / 4.0));
    }
    SUBCASE("isotropic case is a circle of radius sqrt(q)") {
        // 95%: q = -2 ln(0.05) = 5.9915
        const EllipseGeometry e = covariance_ellipse(
            Eigen::Matrix2d::Identity(), Eigen::Vector2d::Zero(), 0.95);
        const double r = std::sqrt(-2.0 * std::log(0.05));
        CHECK(e.semi_axes[0] == doctest::Approx(r));
        CHECK(e.semi_axes[1] == doctest::Approx(r));
    }
    SUBCASE("rejects non-PSD input") {
        Eigen::Matrix2d bad;
        bad << 1.0, 0.0, 0.0, -1.0;
        CHECK_THROWS_AS(
            covariance_ellipse(bad, Eigen::Vector2d::Zero(), 0.95), NotPSD);
        Eigen::Matrix2d asym;
        asym << 1.0, 0.5, -0.5, 1.0;
        CHECK_THROWS_AS(
            covariance_ellipse(asym, Eigen::Vector2d::Zero(), 0.95), NotPSD);
    }
    SUBCASE("95 percent ellipse contains about 95 percent of samples") {
        TychasticProblem problem = drift_problem();
        const ControlSolution u =
            constant_control(Eigen::VectorXd::Zero(1), 1.0);
        const MonteCarloReport rep = monte_carlo(problem, u, 10000, 99);
        const EllipseGeometry e = covariance_ellipse(
            rep.covariance, rep.mean, 0.95);
        const double q = -2.0 * std::log(0.05);
        const Eigen::Matrix2d inv = rep.covariance.inverse();
        int inside = 0;
        for (int i = 0; i < rep.n_ok(); ++i) {
            const Eigen::Vector2d d =
                rep.outputs.row(i).transpose() - rep.mean;
            if (d.dot(inv * d) <= q) ++inside;
        }
        const double frac = static_cast<double>(inside) / rep.n_ok();
        CHECK(frac == doctest::Approx(0.95).epsilon(0.021));
        CHECK(e.confidence == doctest::Approx(0.95));
    }
}

TEST_CASE("event probability") {
    TychasticProblem problem = drift_problem();
    const ControlSolution u = constant_control(Eigen::VectorXd::Zero(1), 1.0);
    const MonteCarloReport rep = monte_carlo(problem, u, 2000, 17);

    SUBCASE("sure event") {
        const EventProbability p = estimate_event_probability(
            rep, [](const Eigen::VectorXd&) { return true; });
        CHECK(p.probability == doctest::Approx(1.0));
        CHECK(p.standard_error == doctest::Approx(0.0));
    }
    SUBCASE("half plane through the mean") {
        const EventProbability p = estimate_event_probability(
            rep, [](const Eigen::VectorXd& y) { return y[0] > 1.0; });
        CHECK(p.probability == doctest::Approx(0.5).epsilon(0.08));
        CHECK(p.standard_error ==
              doctest::Approx(std::sqrt(0.25 / 2000.0)).epsilon(0.1));
    }
}

TEST_CASE("feasibility re-propagation") {
    TychasticProblem problem = drift_problem();
    const ControlSolution u = constant_control(Eigen::VectorXd::Zero(1), 1.0);
    EndpointConstraint target;
    target.e = [](const Eigen::VectorXd&, const Eigen::VectorXd& xf, double,
                  double, const Eigen::VectorXd&) {
        return Eigen::VectorXd(xf - Eigen::Vector2d(1.0, -1.0));
    };
    target.lower = Eigen::Vector2d::Zero();
    target.upper = Eigen::Vector2d::Zero();
    problem.endpoint.push_back(target);

    SUBCASE("nominal endpoint is reached") {
        const FeasibilityReport rep = feasibility_check(problem, u, 1e-6);
        CHECK(rep.pass);
        CHECK(rep.endpoint_violation < 1e-6);
        CHECK(rep.tf == doctest::Approx(1.0));
        CHECK(rep.final_state[0] == doctest::Approx(1.0));
    }
    SUBCASE("violated endpoint is reported") {
        problem.endpoint[0].lower = Eigen::Vector2d::Constant(0.5);
        problem.endpoint[0].upper = Eigen::Vector2d::Constant(0.5);
        const FeasibilityReport rep = feasibility_check(problem, u, 1e-6);
        CHECK_FALSE(rep.pass);
        CHECK(rep.endpoint_violation == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("path bound violation is detected") {
        PathConstraint keep_low;
        keep_low.h = [](const Eigen::VectorXd& x, const Eigen::VectorXd&,
                        double, const Eigen::VectorXd&) {
            return Eigen::VectorXd::Constant(1, x[0]);
        };
        keep_low.lower = Eigen::VectorXd::Constant(
            1, -std::numeric_limits<double>::infinity());
        keep_low.upper = Eigen::VectorXd::Constant(1, 0.5);
        problem.path.push_back(keep_low);
        const FeasibilityReport rep = feasibility_check(problem, u, 1e-6);
        CHECK_FALSE(rep.pass);
        // x1(t) = t peaks at 1, exceeding the 0.5 bound by 0.5
        CHECK(rep.path_violation == doctest::Approx(0.5).epsilon(1e-4));
    }
}

TEST_CASE("artifact emission") {
    TychasticProblem problem = drift_problem();
    problem.output_names = {"east", "north"};
    const ControlSolution u = constant_control(Eigen::VectorXd::Zero(1), 1.0);
    MonteCarloReport rep = monte_carlo(problem, u, 60, 21);
    rep.output_names = problem.output_names;
    risk_curve(rep, Eigen::Vector2d(1.0, -1.0), default_epsilon_grid());

    SUBCASE("json carries the headline fields") {
        const std::string doc = report_json(rep);
        CHECK(doc.find("\"n\"") != std::string::npos);
        CHECK(doc.find("\"seed\"") != std::string::npos);
        CHECK(doc.find("\"mean\"") != std::string::npos);
        CHECK(doc.find("\"cov\"") != std::string::npos);
        CHECK(doc.find("\"risk_curve\"") != std::string::npos);
    }
    SUBCASE("csv has a name header and one row per sample") {
        const std::string path = "/tmp/utoc_test_report.csv";
        write_report_csv(path, rep);
        std::ifstream in(path);
        REQUIRE(in.good());
        std::string line;
        std::getline(in, line);
        CHECK(line.find("east") != std::string::npos);
        CHECK(line.find("north") != std::string::npos);
        int rows = 0;
        while (std::getline(in, line)) {
            if (!line.empty()) ++rows;
        }
        CHECK(rows == rep.n_ok());
        std::remove(path.c_str());
    }
    SUBCASE("svg is valid-looking and deterministic") {
        const std::string a = ellipse_scatter_svg(rep, 0, 1, 0.95);
        const std::string b = ellipse_scatter_svg(rep, 0, 1, 0.95);
        CHECK(a == b);
        CHECK(a.find("<svg") != std::string::npos);
        CHECK(a.find("</svg>") != std::string::npos);
        CHECK(a.find("circle") != std::string::npos);
    }
}
