#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "utoc/nlp.hpp"

using namespace utoc;

TEST_CASE("unconstrained quadratic") {
    Nlp nlp;
    nlp.n = 2;
    nlp.objective = [](const Eigen::VectorXd& x) {
        return (x[0] - 1.0) * (x[0] - 1.0) + 2.0 * (x[1] + 2.0) * (x[1] + 2.0);
    };
    nlp.initial_guess = Eigen::Vector2d(5.0, 5.0);
    const SolveResult res = solve(nlp);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(res.x[1] == doctest::Approx(-2.0).epsilon(1e-5));
}

TEST_CASE("equality-constrained quadratic with KKT residual below 1e-5") {
    // min x^2 + y^2  s.t. x + y = 2 -> (1,1), lambda = -2
    Nlp nlp;
    nlp.n = 2;
    nlp.objective = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    nlp.equality = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, x[0] + x[1] - 2.0).eval();
    };
    nlp.initial_guess = Eigen::Vector2d(3.0, -1.0);
    const SolveResult res = solve(nlp);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(res.infeasibility < 1e-6);

    // stationarity: grad f + J^T lambda = 0 with grad f = 2x, J = [1 1]
    REQUIRE(res.lambda.size() == 1);
    const Eigen::Vector2d kkt =
        2.0 * res.x + Eigen::Vector2d::Ones() * res.lambda[0];
    CHECK(kkt.lpNorm<Eigen::Infinity>() < 1e-5);
}

TEST_CASE("active bound") {
    // min (x-3)^2 with x <= 1 (upper bound) -> x = 1
    Nlp nlp;
    nlp.n = 1;
    nlp.objective = [](const Eigen::VectorXd& x) {
        return (x[0] - 3.0) * (x[0] - 3.0);
    };
    nlp.lower_bounds = Eigen::VectorXd::Constant(1, -10.0);
    nlp.upper_bounds = Eigen::VectorXd::Constant(1, 1.0);
    nlp.initial_guess = Eigen::VectorXd::Constant(1, -5.0);
    const SolveResult res = solve(nlp);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("rosenbrock") {
    Nlp nlp;
    nlp.n = 2;
    nlp.objective = [](const Eigen::VectorXd& x) {
        const double a = 1.0 - x[0];
        const double b = x[1] - x[0] * x[0];
        return a * a + 100.0 * b * b;
    };
    nlp.initial_guess = Eigen::Vector2d(-1.2, 1.0);
    SolverOptions opt;
    opt.max_inner = 2000;
    const SolveResult res = solve(nlp, opt);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.x[0] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(res.x[1] == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("inequality constraint with complementarity") {
    // min (x+2)^2  s.t. x >= 0  (g = -x <= 0) -> x = 0, mu = 4
    Nlp nlp;
    nlp.n = 1;
    nlp.objective = [](const Eigen::VectorXd& x) {
        return (x[0] + 2.0) * (x[0] + 2.0);
    };
    nlp.inequality = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, -x[0]).eval();
    };
    nlp.initial_guess = Eigen::VectorXd::Constant(1, 3.0);
    const SolveResult res = solve(nlp);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.x[0] == doctest::Approx(0.0).epsilon(1e-4));
    REQUIRE(res.mu.size() == 1);
    CHECK(res.mu[0] == doctest::Approx(4.0).epsilon(1e-2));

    SUBCASE("inactive inequality leaves the unconstrained optimum") {
        Nlp free = nlp;
        free.objective = [](const Eigen::VectorXd& x) {
            return (x[0] - 2.0) * (x[0] - 2.0);
        };
        const SolveResult res2 = solve(free);
        CHECK(res2.x[0] == doctest::Approx(2.0).epsilon(1e-5));
        CHECK(res2.mu[0] == doctest::Approx(0.0));
    }
}

TEST_CASE("analytic gradient is used when registered") {
    Nlp nlp;
    nlp.n = 2;
    int calls = 0;
    nlp.objective = [](const Eigen::VectorXd& x) { return x.squaredNorm(); };
    nlp.objective_gradient = [&calls](const Eigen::VectorXd& x) {
        ++calls;
        return (2.0 * x).eval();
    };
    const Eigen::VectorXd g =
        gradient(nlp, Eigen::Vector2d(1.0, -3.0), SolverOptions{});
    CHECK(calls == 1);
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(-6.0));
}

TEST_CASE("finite-difference derivatives") {
    auto f = [](const Eigen::VectorXd& x) {
        return std::sin(x[0]) + x[0] * x[1];
    };
    const Eigen::Vector2d x(0.7, -1.3);
    const Eigen::VectorXd g = fd_gradient(f, x);
    CHECK(g[0] == doctest::Approx(std::cos(0.7) - 1.3).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx(0.7).epsilon(1e-7));

    SUBCASE("worker count does not change the result") {
        Eigen::VectorXd big = Eigen::VectorXd::LinSpaced(64, -1.0, 1.0);
        auto sum = [](const Eigen::VectorXd& z) {
            return std::sin(z.sum()) + z.squaredNorm();
        };
        const Eigen::VectorXd g1 = fd_gradient(sum, big, 1e-6, 1);
        const Eigen::VectorXd g4 = fd_gradient(sum, big, 1e-6, 4);
        CHECK((g1 - g4).cwiseAbs().maxCoeff() == 0.0);
    }

    SUBCASE("jacobian of a linear map") {
        Eigen::MatrixXd a(2, 3);
        a << 1, 2, 3, 4, 5, 6;
        const Eigen::MatrixXd jac = fd_jacobian(
            [&a](const Eigen::VectorXd& z) { return (a * z).eval(); },
            Eigen::Vector3d(0.1, 0.2, 0.3));
        CHECK((jac - a).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("infeasibility decreases over accepted iterations") {
    // feasible set is a circle; start far away
    Nlp nlp;
    nlp.n = 2;
    nlp.objective = [](const Eigen::VectorXd& x) { return x[0]; };
    nlp.equality = [](const Eigen::VectorXd& x) {
        return Eigen::VectorXd::Constant(1, x.squaredNorm() - 1.0).eval();
    };
    nlp.initial_guess = Eigen::Vector2d(4.0, 3.0);
    const SolveResult res = solve(nlp);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.x[0] == doctest::Approx(-1.0).epsilon(1e-4));

    double last = std::numeric_limits<double>::infinity();
    for (const auto& rec : res.log) {
        if (!rec.accepted) continue;
        CHECK(rec.infeas <= last + 1e-12);
        last = rec.infeas;
    }
}

TEST_CASE("non-finite evaluation raises") {
    Nlp nlp;
    nlp.n = 1;
    nlp.objective = [](const Eigen::VectorXd&) {
        return std::numeric_limits<double>::quiet_NaN();
    };
    nlp.initial_guess = Eigen::VectorXd::Zero(1);
    CHECK_THROWS_AS(solve(nlp), NonFiniteEvaluation);
}

TEST_CASE("iteration log csv round trip") {
    Nlp nlp;
    nlp.n = 1;
    nlp.objective = [](const Eigen::VectorXd& x) { return x[0] * x[0]; };
    nlp.initial_guess = Eigen::VectorXd::Constant(1, 2.0);
    const SolveResult res = solve(nlp);
    REQUIRE(!res.log.empty());
    const std::string path = "/tmp/utoc_test_iterations.csv";
    write_iteration_log_csv(res.log, path);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "outer, inner, f, infeas, rho, grad_norm");
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == static_cast<int>(res.log.size()));
    std::remove(path.c_str());
}
