#include "utoc/nlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <thread>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

namespace utoc {

std::string to_string(SolveStatus status) {
    switch (status) {
        case SolveStatus::Converged: return "Converged";
        case SolveStatus::MaxIter: return "MaxIter";
        case SolveStatus::Stalled: return "Stalled";
    }
    return "Unknown";
}

Eigen::VectorXd gradient(const Nlp& nlp, const Eigen::VectorXd& x,
                         const SolverOptions& options) {
    if (nlp.objective_gradient) return nlp.objective_gradient(x);
    return fd_gradient(nlp.objective, x, options.fd_step, options.workers);
}

Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& x, double fd_step,
                            int workers) {
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd grad(n);
    auto worker = [&](int begin, int end) {
        Eigen::VectorXd probe = x;
        for (int i = begin; i < end; ++i) {
            const double h = fd_step * (1.0 + std::abs(x[i]));
            probe[i] = x[i] + h;
            const double fp = f(probe);
            probe[i] = x[i] - h;
            const double fm = f(probe);
            probe[i] = x[i];
            grad[i] = (fp - fm) / (2.0 * h);
        }
    };
    if (workers <= 1 || n < 32) {
        worker(0, n);
    } else {
        const int nthreads = std::min(workers, n);
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        const int chunk = (n + nthreads - 1) / nthreads;
        for (int t = 0; t < nthreads; ++t) {
            const int begin = t * chunk;
            const int end = std::min(n, begin + chunk);
            if (begin < end) pool.emplace_back(worker, begin, end);
        }
        for (auto& th : pool) th.join();
    }
    if (!grad.allFinite()) {
        throw NonFiniteEvaluation("non-finite value in FD gradient");
    }
    return grad;
}

Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
    const Eigen::VectorXd& x, double fd_step) {
    const Eigen::VectorXd f0 = f(x);
    Eigen::MatrixXd jac(f0.size(), x.size());
    Eigen::VectorXd probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double h = fd_step * (1.0 + std::abs(x[i]));
        probe[i] = x[i] + h;
        const Eigen::VectorXd fp = f(probe);
        probe[i] = x[i] - h;
        const Eigen::VectorXd fm = f(probe);
        probe[i] = x[i];
        jac.col(i) = (fp - fm) / (2.0 * h);
    }
    return jac;
}

namespace {

/// Column grouping for structured finite-difference Jacobians.  Columns that
/// never share a constraint row can be perturbed simultaneously, so the full
/// Jacobian costs two stacked constraint evaluations per color instead of two
/// per variable.
struct ColorPlan {
    int m_eq = 0;
    int m_ineq = 0;
    std::vector<std::vector<int>> col_rows;     // per column: stacked row ids
    std::vector<std::vector<int>> color_cols;   // per color: member columns
};

ColorPlan build_color_plan(const Nlp& nlp, int m_eq, int m_ineq) {
    ColorPlan plan;
    plan.m_eq = m_eq;
    plan.m_ineq = m_ineq;
    plan.col_rows.assign(nlp.n, {});
    auto ingest = [&](const std::vector<std::pair<int, int>>& pattern,
                      int row_offset, int rows) {
        for (const auto& [r, col] : pattern) {
            if (r < 0 || r >= rows || col < 0 || col >= nlp.n) {
                throw std::invalid_argument(
                    "constraint sparsity entry out of range");
            }
            plan.col_rows[col].push_back(row_offset + r);
        }
    };
    ingest(nlp.equality_sparsity, 0, m_eq);
    ingest(nlp.inequality_sparsity, m_eq, m_ineq);
    for (auto& rows : plan.col_rows) {
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }

    // greedy coloring: a column takes the smallest color absent from all of
    // its rows, so two columns sharing a row never share a color
    std::vector<std::vector<int>> row_colors(m_eq + m_ineq);
    std::vector<char> forbidden;
    for (int col = 0; col < nlp.n; ++col) {
        const auto& rows = plan.col_rows[col];
        if (rows.empty()) continue;
        forbidden.assign(plan.color_cols.size(), 0);
        for (int r : rows) {
            for (int used : row_colors[r]) forbidden[used] = 1;
        }
        int color = 0;
        while (color < static_cast<int>(forbidden.size()) && forbidden[color]) {
            ++color;
        }
        if (color == static_cast<int>(plan.color_cols.size())) {
            plan.color_cols.emplace_back();
        }
        plan.color_cols[color].push_back(col);
        for (int r : rows) row_colors[r].push_back(color);
    }
    return plan;
}

/// Central-difference Jacobian of the stacked (equality, inequality)
/// constraints, evaluated one color group at a time.  values[col] lines up
/// with plan.col_rows[col].
void colored_jacobian(const Nlp& nlp, const ColorPlan& plan,
                      const Eigen::VectorXd& x, double fd_step,
                      std::vector<std::vector<double>>& values) {
    values.assign(nlp.n, {});
    const int m = plan.m_eq + plan.m_ineq;
    auto stacked = [&](const Eigen::VectorXd& z) {
        Eigen::VectorXd out(m);
        if (plan.m_eq > 0) out.head(plan.m_eq) = nlp.equality(z);
        if (plan.m_ineq > 0) out.tail(plan.m_ineq) = nlp.inequality(z);
        return out;
    };
    Eigen::VectorXd probe = x;
    for (const auto& cols : plan.color_cols) {
        for (int col : cols) {
            probe[col] = x[col] + fd_step * (1.0 + std::abs(x[col]));
        }
        const Eigen::VectorXd fp = stacked(probe);
        for (int col : cols) {
            probe[col] = x[col] - fd_step * (1.0 + std::abs(x[col]));
        }
        const Eigen::VectorXd fm = stacked(probe);
        for (int col : cols) probe[col] = x[col];
        for (int col : cols) {
            const double h = fd_step * (1.0 + std::abs(x[col]));
            auto& vals = values[col];
            vals.reserve(plan.col_rows[col].size());
            for (int r : plan.col_rows[col]) {
                const double v = (fp[r] - fm[r]) / (2.0 * h);
                if (!std::isfinite(v)) {
                    throw NonFiniteEvaluation(
                        "non-finite value in constraint Jacobian");
                }
                vals.push_back(v);
            }
        }
    }
}

Eigen::VectorXd project(const Nlp& nlp, Eigen::VectorXd x) {
    if (nlp.lower_bounds.size() == x.size()) {
        x = x.cwiseMax(nlp.lower_bounds);
    }
    if (nlp.upper_bounds.size() == x.size()) {
        x = x.cwiseMin(nlp.upper_bounds);
    }
    return x;
}

struct LbfgsMemory {
    std::deque<Eigen::VectorXd> s, y;
    std::deque<double> rho;
    int capacity = 10;

    void push(const Eigen::VectorXd& si, const Eigen::VectorXd& yi) {
        const double sy = si.dot(yi);
        if (sy <= 1e-12 * si.norm() * yi.norm()) return;
        s.push_back(si);
        y.push_back(yi);
        rho.push_back(1.0 / sy);
        if (static_cast<int>(s.size()) > capacity) {
            s.pop_front();
            y.pop_front();
            rho.pop_front();
        }
    }

    void clear() {
        s.clear();
        y.clear();
        rho.clear();
    }

    Eigen::VectorXd direction(const Eigen::VectorXd& grad) const {
        Eigen::VectorXd q = -grad;
        const int m = static_cast<int>(s.size());
        if (m == 0) return q;
        std::vector<double> alpha(m);
        for (int i = m - 1; i >= 0; --i) {
            alpha[i] = rho[i] * s[i].dot(q);
            q -= alpha[i] * y[i];
        }
        const double gamma = s.back().dot(y.back()) / y.back().squaredNorm();
        q *= gamma;
        for (int i = 0; i < m; ++i) {
            const double beta = rho[i] * y[i].dot(q);
            q += (alpha[i] - beta) * s[i];
        }
        return q;
    }
};

struct InnerResult {
    Eigen::VectorXd x;
    double merit = 0.0;
    double proj_grad_norm = 0.0;
    int iterations = 0;
    bool line_search_failure = false;
};

/// Projected L-BFGS with Armijo backtracking on the projected path.
InnerResult minimize_bounded(
    const Nlp& nlp, const std::function<double(const Eigen::VectorXd&)>& merit,
    const Eigen::VectorXd& start, const SolverOptions& opt) {
    InnerResult result;
    Eigen::VectorXd x = project(nlp, start);
    double fx = merit(x);
    if (!std::isfinite(fx)) {
        throw NonFiniteEvaluation("merit function non-finite at start point");
    }
    LbfgsMemory memory;
    Eigen::VectorXd grad = fd_gradient(merit, x, opt.fd_step, opt.workers);

    int iter = 0;
    double f_checkpoint = fx;
    for (; iter < opt.max_inner; ++iter) {
        const Eigen::VectorXd proj_step = project(nlp, x - grad) - x;
        result.proj_grad_norm = proj_step.lpNorm<Eigen::Infinity>();
        if (result.proj_grad_norm <= opt.inner_tol) break;
        // cut losses when ten iterations barely move the merit; at large
        // penalty the FD gradient noise floor makes further work useless
        if (iter > 0 && iter % 10 == 0) {
            if (f_checkpoint - fx <= 1e-10 * (1.0 + std::abs(fx))) break;
            f_checkpoint = fx;
        }

        Eigen::VectorXd dir = memory.direction(grad);
        if (dir.dot(grad) > -1e-14 * dir.norm() * grad.norm()) {
            memory.clear();
            dir = -grad;
        }

        bool accepted = false;
        double alpha = 1.0;
        Eigen::VectorXd x_new;
        double f_new = fx;
        for (int ls = 0; ls < 50; ++ls) {
            x_new = project(nlp, x + alpha * dir);
            const Eigen::VectorXd step = x_new - x;
            const double slope = grad.dot(step);
            if (step.lpNorm<Eigen::Infinity>() < 1e-16) break;
            f_new = merit(x_new);
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * slope) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) {
            if (!memory.s.empty()) {
                // retry from steepest descent before giving up
                memory.clear();
                continue;
            }
            result.line_search_failure = true;
            break;
        }

        const Eigen::VectorXd grad_new =
            fd_gradient(merit, x_new, opt.fd_step, opt.workers);
        memory.push(x_new - x, grad_new - grad);
        x = x_new;
        fx = f_new;
        grad = grad_new;
    }

    result.x = x;
    result.merit = fx;
    result.iterations = iter;
    return result;
}

/// First- and second-order merit model at a point: the exact merit gradient
/// and the Gauss-Newton Hessian J' W J of the penalty term, the latter as
/// sqrt(weight)-scaled Jacobian triplets.
struct MeritModel {
    Eigen::VectorXd grad;
    std::vector<Eigen::Triplet<double>> jac_scaled;  // rows x n
    int rows = 0;
};

/// Projected Gauss-Newton with Levenberg damping for structured problems.
/// Each iteration factors the (sparse) penalty Hessian restricted to the
/// inactive bounds, which handles the severe conditioning an augmented
/// Lagrangian develops as the penalty grows.
InnerResult minimize_newton(
    const Nlp& nlp, const std::function<double(const Eigen::VectorXd&)>& merit,
    const std::function<MeritModel(const Eigen::VectorXd&)>& model_fn,
    const Eigen::VectorXd& start, const SolverOptions& opt) {
    InnerResult result;
    Eigen::VectorXd x = project(nlp, start);
    double fx = merit(x);
    if (!std::isfinite(fx)) {
        throw NonFiniteEvaluation("merit function non-finite at start point");
    }
    const int n = nlp.n;
    const bool has_lb = nlp.lower_bounds.size() == n;
    const bool has_ub = nlp.upper_bounds.size() == n;
    double damping = 0.0;  // relative Levenberg shift carried across iterations

    int iter = 0;
    double f_checkpoint = fx;
    for (; iter < opt.max_inner; ++iter) {
        const MeritModel mm = model_fn(x);
        const Eigen::VectorXd proj_step = project(nlp, x - mm.grad) - x;
        result.proj_grad_norm = proj_step.lpNorm<Eigen::Infinity>();
        if (result.proj_grad_norm <= opt.inner_tol) break;
        if (iter > 0 && iter % 5 == 0) {
            if (f_checkpoint - fx <= 1e-12 * (1.0 + std::abs(fx))) break;
            f_checkpoint = fx;
        }

        // variables pinned or pressed against a bound by the gradient stay
        // out of the Newton system
        std::vector<char> fixed(n, 0);
        for (int i = 0; i < n; ++i) {
            const bool at_lo =
                has_lb &&
                x[i] <= nlp.lower_bounds[i] +
                            1e-12 * (1.0 + std::abs(nlp.lower_bounds[i]));
            const bool at_hi =
                has_ub &&
                x[i] >= nlp.upper_bounds[i] -
                            1e-12 * (1.0 + std::abs(nlp.upper_bounds[i]));
            if ((at_lo && at_hi) || (at_lo && mm.grad[i] > 0.0) ||
                (at_hi && mm.grad[i] < 0.0)) {
                fixed[i] = 1;
            }
        }

        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(mm.jac_scaled.size());
        for (const auto& t : mm.jac_scaled) {
            if (!fixed[t.col()]) trips.push_back(t);
        }
        Eigen::SparseMatrix<double> js(mm.rows, n);
        js.setFromTriplets(trips.begin(), trips.end());
        const Eigen::SparseMatrix<double> base = js.transpose() * js;
        Eigen::VectorXd diag_h = base.diagonal();
        const double dscale = std::max(1e-12, diag_h.maxCoeff());
        Eigen::VectorXd rhs = mm.grad;
        for (int i = 0; i < n; ++i) {
            if (fixed[i]) rhs[i] = 0.0;
        }

        bool accepted = false;
        Eigen::VectorXd x_new;
        double f_new = fx;
        double shift = std::max(damping, 1e-10) * dscale;
        for (int attempt = 0; attempt < 10 && !accepted; ++attempt) {
            std::vector<Eigen::Triplet<double>> diag_trips;
            diag_trips.reserve(n);
            for (int i = 0; i < n; ++i) {
                diag_trips.emplace_back(i, i, fixed[i] ? 1.0 : shift);
            }
            Eigen::SparseMatrix<double> id(n, n);
            id.setFromTriplets(diag_trips.begin(), diag_trips.end());
            const Eigen::SparseMatrix<double> h = base + id;

            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(h);
            if (ldlt.info() != Eigen::Success) {
                shift = std::max(shift * 100.0, 1e-8 * dscale);
                continue;
            }
            Eigen::VectorXd dir = ldlt.solve(-rhs);
            if (!dir.allFinite()) {
                shift = std::max(shift * 100.0, 1e-8 * dscale);
                continue;
            }

            double alpha = 1.0;
            for (int ls = 0; ls < 20; ++ls) {
                x_new = project(nlp, x + alpha * dir);
                const Eigen::VectorXd step = x_new - x;
                if (step.lpNorm<Eigen::Infinity>() < 1e-16) break;
                const double slope = mm.grad.dot(step);
                if (slope >= 0.0) break;  // projection deflected uphill
                f_new = merit(x_new);
                if (std::isfinite(f_new) && f_new <= fx + 1e-4 * slope) {
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) shift *= 100.0;
        }
        if (!accepted) {
            result.line_search_failure = true;
            break;
        }
        damping = shift / dscale / 3.0;
        if (damping < 1e-10) damping = 0.0;
        x = x_new;
        fx = f_new;
    }

    result.x = x;
    result.merit = fx;
    result.iterations = iter;
    return result;
}

double infeasibility(const Eigen::VectorXd& c, const Eigen::VectorXd& g) {
    double v = 0.0;
    if (c.size() > 0) v = c.lpNorm<Eigen::Infinity>();
    if (g.size() > 0) v = std::max(v, g.cwiseMax(0.0).lpNorm<Eigen::Infinity>());
    return v;
}

}  // namespace

SolveResult solve(const Nlp& nlp, const SolverOptions& options) {
    SolveResult result;
    Eigen::VectorXd x = project(nlp, nlp.initial_guess);

    const bool has_eq = static_cast<bool>(nlp.equality);
    const bool has_ineq = static_cast<bool>(nlp.inequality);
    Eigen::VectorXd c = has_eq ? nlp.equality(x) : Eigen::VectorXd();
    Eigen::VectorXd g = has_ineq ? nlp.inequality(x) : Eigen::VectorXd();
    if (!std::isfinite(nlp.objective(x)) || (c.size() && !c.allFinite()) ||
        (g.size() && !g.allFinite())) {
        throw NonFiniteEvaluation("NLP non-finite at the initial guess");
    }

    Eigen::VectorXd lambda = Eigen::VectorXd::Zero(c.size());
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(g.size());
    // balance the initial penalty against the objective so the first
    // subproblem cannot profitably trade a large constraint violation for a
    // lower objective (which would destroy a warm start)
    double rho = options.rho0;
    if (has_eq || has_ineq) {
        double viol2 = c.squaredNorm();
        if (g.size() > 0) viol2 += g.cwiseMax(0.0).squaredNorm();
        const double f0 = std::abs(nlp.objective(x));
        rho = std::clamp(20.0 * f0 / std::max(viol2, 1e-8), options.rho0,
                         std::min(1e4, options.rho_max));
    }

    // structured merit gradients are available when every registered
    // constraint block comes with a (complete) sparsity pattern
    const bool structured =
        (has_eq || has_ineq) &&
        (!has_eq || !nlp.equality_sparsity.empty()) &&
        (!has_ineq || !nlp.inequality_sparsity.empty());
    ColorPlan plan;
    if (structured) {
        plan = build_color_plan(nlp, static_cast<int>(c.size()),
                                static_cast<int>(g.size()));
    }

    double prev_infeas = infeasibility(c, g);
    double best_infeas = prev_infeas;
    int stall_count = 0;
    double prev_f = std::numeric_limits<double>::infinity();
    bool prev_feasible = false;
    double proj_grad_norm = std::numeric_limits<double>::infinity();
    bool unconstrained = !has_eq && !has_ineq;

    for (int outer = 0; outer < options.max_outer; ++outer) {
        auto merit = [&](const Eigen::VectorXd& z) {
            double value = nlp.objective(z);
            if (has_eq) {
                const Eigen::VectorXd cz = nlp.equality(z);
                value += lambda.dot(cz) + 0.5 * rho * cz.squaredNorm();
            }
            if (has_ineq) {
                const Eigen::VectorXd gz = nlp.inequality(z);
                for (Eigen::Index i = 0; i < gz.size(); ++i) {
                    const double shifted = std::max(0.0, mu[i] / rho + gz[i]);
                    value += 0.5 * rho * shifted * shifted -
                             0.5 * mu[i] * mu[i] / rho;
                }
            }
            return value;
        };

        InnerResult inner;
        if (structured) {
            // d(merit)/dz = df/dz + J_eq' (lambda + rho c)
            //             + J_ineq' max(0, mu + rho g), assembled from the
            // color-grouped constraint Jacobian; the Gauss-Newton model of
            // the penalty term is rho J' J over equalities and active
            // inequality rows
            auto model_fn = [&](const Eigen::VectorXd& z) {
                MeritModel mm;
                mm.rows = plan.m_eq + plan.m_ineq;
                mm.grad = gradient(nlp, z, options);
                Eigen::VectorXd w(mm.rows);
                if (has_eq) {
                    w.head(plan.m_eq) = lambda + rho * nlp.equality(z);
                }
                if (has_ineq) {
                    w.tail(plan.m_ineq) =
                        (mu + rho * nlp.inequality(z)).cwiseMax(0.0);
                }
                std::vector<std::vector<double>> jac;
                colored_jacobian(nlp, plan, z, options.fd_step, jac);
                const double sqrt_rho = std::sqrt(rho);
                for (int col = 0; col < nlp.n; ++col) {
                    const auto& rows = plan.col_rows[col];
                    for (std::size_t i = 0; i < rows.size(); ++i) {
                        const int r = rows[i];
                        mm.grad[col] += jac[col][i] * w[r];
                        const bool active = r < plan.m_eq || w[r] > 0.0;
                        if (active && jac[col][i] != 0.0) {
                            mm.jac_scaled.emplace_back(
                                r, col, sqrt_rho * jac[col][i]);
                        }
                    }
                }
                if (!mm.grad.allFinite()) {
                    throw NonFiniteEvaluation(
                        "non-finite value in merit gradient");
                }
                return mm;
            };
            inner = minimize_newton(nlp, merit, model_fn, x, options);
        } else {
            inner = minimize_bounded(nlp, merit, x, options);
        }
        x = inner.x;
        proj_grad_norm = inner.proj_grad_norm;
        c = has_eq ? nlp.equality(x) : Eigen::VectorXd();
        g = has_ineq ? nlp.inequality(x) : Eigen::VectorXd();
        const double infeas = infeasibility(c, g);

        IterationRecord rec;
        rec.outer = outer;
        rec.inner = inner.iterations;
        rec.f = nlp.objective(x);
        rec.infeas = infeas;
        rec.rho = rho;
        rec.grad_norm = proj_grad_norm;
        rec.accepted = infeas <= best_infeas + 1e-15;
        rec.line_search_failure = inner.line_search_failure;
        result.log.push_back(rec);
        if (rec.accepted) best_infeas = infeas;
        if (options.verbose) {
            std::fprintf(stderr,
                         "[al] outer=%d inner=%d f=%.6e infeas=%.3e rho=%.1e "
                         "pg=%.3e\n",
                         outer, inner.iterations, rec.f, infeas, rho,
                         proj_grad_norm);
        }

        // safeguarded multiplier update, applied after every successful
        // subproblem (including the final one, so the reported duals are
        // fresh): first-order updates are trustworthy only while
        // infeasibility keeps shrinking; otherwise grow the penalty and
        // leave the multipliers alone, so one deeply infeasible subproblem
        // cannot poison the dual estimates
        const bool residual_improved =
            infeas <= std::max(options.outer_tol, 0.5 * prev_infeas);
        if (residual_improved) {
            if (has_eq) lambda += rho * c;
            if (has_ineq) mu = (mu + rho * g).cwiseMax(0.0);
            stall_count = 0;
        } else {
            rho = std::min(rho * options.rho_growth, options.rho_max);
            if (infeas > 0.9 * prev_infeas) {
                ++stall_count;
            } else {
                stall_count = 0;
            }
        }

        if (infeas <= options.outer_tol &&
            proj_grad_norm <= 10.0 * options.inner_tol) {
            result.status = SolveStatus::Converged;
            break;
        }
        if (unconstrained && proj_grad_norm <= options.inner_tol) {
            result.status = SolveStatus::Converged;
            break;
        }
        // feasible and the objective has stopped moving between outer
        // iterations: converged for practical purposes even when the merit
        // gradient is dominated by finite-difference noise at large rho
        if (infeas <= options.outer_tol && prev_feasible &&
            std::abs(rec.f - prev_f) <= 1e-6 * (1.0 + std::abs(rec.f))) {
            result.status = SolveStatus::Converged;
            break;
        }
        prev_feasible = infeas <= options.outer_tol;
        prev_f = rec.f;

        // a stall is only final once the penalty continuation is exhausted
        if (stall_count >= 3 && rho >= options.rho_max) {
            result.status = SolveStatus::Stalled;
            break;
        }
        prev_infeas = infeas;
    }

    result.x = x;
    result.objective = nlp.objective(x);
    result.infeasibility = infeasibility(c, g);
    result.lambda = lambda;
    result.mu = mu;
    if (result.status == SolveStatus::MaxIter &&
        result.infeasibility <= options.outer_tol &&
        proj_grad_norm <= 10.0 * options.inner_tol) {
        result.status = SolveStatus::Converged;
    }
    return result;
}

void write_iteration_log_csv(const std::vector<IterationRecord>& log,
                             const std::string& path) {
    std::ofstream out(path);
    out << "outer, inner, f, infeas, rho, grad_norm\n";
    out << std::setprecision(17);
    for (const auto& rec : log) {
        out << rec.outer << ", " << rec.inner << ", " << rec.f << ", "
            << rec.infeas << ", " << rec.rho << ", " << rec.grad_norm << "\n";
    }
}

}  // namespace utoc
