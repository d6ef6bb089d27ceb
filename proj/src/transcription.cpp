#include "utoc/transcription.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace utoc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

SigmaSet make_sigma_set(const TychasticProblem& problem) {
    // joint uncertain vector (p [, x0])
    GaussianSpec joint = problem.distribution.spec;
    if (problem.x0_distribution) {
        const auto& xs = *problem.x0_distribution;
        const int np = joint.dim();
        const int nx = xs.dim();
        Eigen::VectorXd mean(np + nx);
        mean << joint.mean(), xs.mean();
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(np + nx, np + nx);
        cov.topLeftCorner(np, np) = joint.covariance();
        cov.bottomRightCorner(nx, nx) = xs.covariance();
        joint = GaussianSpec(mean, cov);
    }

    if (joint.covariance().cwiseAbs().maxCoeff() == 0.0) {
        SigmaSet set;
        set.points = joint.mean();
        set.weights = Eigen::VectorXd::Ones(1);
        return set;
    }

    SigmaSet set;
    if (problem.distribution.scheme == SigmaScheme::Symmetric) {
        const double kappa = problem.distribution.kappa
                                 ? *problem.distribution.kappa
                                 : default_kappa(joint.dim());
        set = symmetric_sigma_points(joint, kappa);
    } else {
        set = simplex_sigma_points(joint);
    }
    if (problem.distribution.constraint) {
        for (int i = 0; i < set.count(); ++i) {
            const Eigen::VectorXd p =
                set.points.col(i).head(problem.distribution.spec.dim());
            if (!problem.distribution.constraint(p)) {
                throw InfeasibleSigmaPoint(
                    "sigma point violates the parameter feasibility predicate");
            }
        }
    }
    return set;
}

EnsembleProblem instantiate_unscented(const TychasticProblem& problem,
                                      const SigmaSet& set) {
    const int np = problem.distribution.spec.dim();
    const int nx = problem.field.nx;
    const int expected = np + (problem.x0_distribution ? nx : 0);
    if (set.points.rows() != expected) {
        throw DimensionMismatch("sigma set dimension does not match problem");
    }
    EnsembleProblem ens;
    ens.problem = problem;
    ens.set = set;
    ens.copies = set.count();
    ens.nx = nx;
    ens.params = set.points.topRows(np);
    ens.initial_states.resize(nx, ens.copies);
    for (int c = 0; c < ens.copies; ++c) {
        ens.initial_states.col(c) = problem.x0_distribution
                                        ? set.points.col(c).tail(nx)
                                        : problem.x0;
    }
    return ens;
}

namespace {

/// Per-constraint split of components into equality rows (lower == upper)
/// and one-sided inequality rows.
struct BoundPlan {
    std::vector<int> eq;  // component indices with lower == upper
    std::vector<int> lo;  // finite lower, lower < upper
    std::vector<int> hi;  // finite upper, lower < upper
};

BoundPlan plan_bounds(const Eigen::VectorXd& lower,
                      const Eigen::VectorXd& upper) {
    BoundPlan plan;
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (lower[i] == upper[i]) {
            plan.eq.push_back(static_cast<int>(i));
        } else {
            if (std::isfinite(lower[i])) plan.lo.push_back(static_cast<int>(i));
            if (std::isfinite(upper[i])) plan.hi.push_back(static_cast<int>(i));
        }
    }
    return plan;
}

struct Evaluator {
    EnsembleProblem ens;
    NlpLayout lay;
    Scheme scheme = Scheme::HermiteSimpson;
    Eigen::VectorXd scale;
    Eigen::VectorXd grid;
    double t0 = 0.0;
    bool tf_free = true;
    double tf_fixed = 0.0;
    Eigen::VectorXd defect_scale;
    double control_reg = 0.0;
    std::vector<BoundPlan> endpoint_plans;
    std::vector<BoundPlan> path_plans;
    int n_eq = 0;
    int n_ineq = 0;

    double tf(const Eigen::VectorXd& z) const {
        return tf_free ? z[lay.tf_index] * scale[lay.tf_index] : tf_fixed;
    }

    double node_time(const Eigen::VectorXd& z, int k) const {
        return t0 + grid[k] * (tf(z) - t0);
    }

    Eigen::VectorXd raw_control(const Eigen::VectorXd& z, int k) const {
        Eigen::VectorXd c(lay.ncu);
        for (int m = 0; m < lay.ncu; ++m) {
            const int idx = lay.control(k, m);
            c[m] = z[idx] * scale[idx];
        }
        return c;
    }

    Eigen::VectorXd map_control(const Eigen::VectorXd& raw) const {
        if (ens.problem.control_set == ControlSet::UnitCircle) {
            Eigen::VectorXd u(2);
            u << std::cos(raw[0]), std::sin(raw[0]);
            return u;
        }
        return raw;
    }

    Eigen::VectorXd state_at(const Eigen::VectorXd& z, int copy,
                             int node) const {
        Eigen::VectorXd x(lay.nx);
        for (int j = 0; j < lay.nx; ++j) {
            const int idx = lay.state(copy, node, j);
            x[j] = z[idx] * scale[idx];
        }
        return x;
    }

    Eigen::VectorXd equality(const Eigen::VectorXd& z) const {
        const auto& field = ens.problem.field;
        const double T = tf(z) - t0;
        Eigen::VectorXd out(n_eq);
        int row = 0;

        std::vector<Eigen::VectorXd> raw(lay.nodes), u(lay.nodes);
        for (int k = 0; k < lay.nodes; ++k) {
            raw[k] = raw_control(z, k);
            u[k] = map_control(raw[k]);
        }

        Eigen::VectorXd xk(lay.nx), xk1(lay.nx), fk(lay.nx), fk1(lay.nx),
            xm(lay.nx), fm(lay.nx);
        for (int c = 0; c < lay.copies; ++c) {
            const Eigen::VectorXd p = ens.params.col(c);
            xk = state_at(z, c, 0);
            field.eval(xk, u[0], node_time(z, 0), p, fk);
            for (int k = 0; k + 1 < lay.nodes; ++k) {
                xk1 = state_at(z, c, k + 1);
                const double tk = node_time(z, k);
                const double tk1 = node_time(z, k + 1);
                field.eval(xk1, u[k + 1], tk1, p, fk1);
                const double h = (grid[k + 1] - grid[k]) * T;
                Eigen::VectorXd defect;
                if (scheme == Scheme::Trapezoid) {
                    defect = xk1 - xk - (0.5 * h) * (fk + fk1);
                } else {
                    xm = 0.5 * (xk + xk1) + (h / 8.0) * (fk - fk1);
                    const Eigen::VectorXd um =
                        map_control(0.5 * (raw[k] + raw[k + 1]));
                    field.eval(xm, um, 0.5 * (tk + tk1), p, fm);
                    defect = xk1 - xk - (h / 6.0) * (fk + 4.0 * fm + fk1);
                }
                out.segment(row, lay.nx) = defect.cwiseQuotient(defect_scale);
                row += lay.nx;
                xk.swap(xk1);
                fk.swap(fk1);
            }
        }

        // endpoint equality rows
        const double tfv = tf(z);
        for (std::size_t ci = 0; ci < ens.problem.endpoint.size(); ++ci) {
            const auto& con = ens.problem.endpoint[ci];
            const auto& plan = endpoint_plans[ci];
            if (plan.eq.empty()) continue;
            if (con.mode == ConstraintMode::PerCopy) {
                for (int c = 0; c < lay.copies; ++c) {
                    const Eigen::VectorXd value = con.e(
                        state_at(z, c, 0), state_at(z, c, lay.nodes - 1), t0,
                        tfv, ens.params.col(c));
                    for (int comp : plan.eq) {
                        out[row++] = value[comp] - con.lower[comp];
                    }
                }
            } else {
                Eigen::VectorXd value = Eigen::VectorXd::Zero(con.lower.size());
                for (int c = 0; c < lay.copies; ++c) {
                    value += ens.set.weights[c] *
                             con.e(state_at(z, c, 0),
                                   state_at(z, c, lay.nodes - 1), t0, tfv,
                                   ens.params.col(c));
                }
                for (int comp : plan.eq) {
                    out[row++] = value[comp] - con.lower[comp];
                }
            }
        }

        // path equality rows at every node
        for (std::size_t ci = 0; ci < ens.problem.path.size(); ++ci) {
            const auto& con = ens.problem.path[ci];
            const auto& plan = path_plans[ci];
            if (plan.eq.empty()) continue;
            for (int k = 0; k < lay.nodes; ++k) {
                const double t = node_time(z, k);
                if (con.mode == ConstraintMode::PerCopy) {
                    for (int c = 0; c < lay.copies; ++c) {
                        const Eigen::VectorXd value =
                            con.h(state_at(z, c, k), u[k], t, ens.params.col(c));
                        for (int comp : plan.eq) {
                            out[row++] = value[comp] - con.lower[comp];
                        }
                    }
                } else {
                    Eigen::VectorXd value =
                        Eigen::VectorXd::Zero(con.lower.size());
                    for (int c = 0; c < lay.copies; ++c) {
                        value += ens.set.weights[c] *
                                 con.h(state_at(z, c, k), u[k], t,
                                       ens.params.col(c));
                    }
                    for (int comp : plan.eq) {
                        out[row++] = value[comp] - con.lower[comp];
                    }
                }
            }
        }
        return out;
    }

    Eigen::VectorXd inequality(const Eigen::VectorXd& z) const {
        Eigen::VectorXd out(n_ineq);
        int row = 0;
        const double tfv = tf(z);

        std::vector<Eigen::VectorXd> u(lay.nodes);
        const bool need_path = !ens.problem.path.empty();
        if (need_path) {
            for (int k = 0; k < lay.nodes; ++k) {
                u[k] = map_control(raw_control(z, k));
            }
        }

        auto emit = [&](const Eigen::VectorXd& value, const BoundPlan& plan,
                        const Eigen::VectorXd& lower,
                        const Eigen::VectorXd& upper) {
            for (int comp : plan.lo) out[row++] = lower[comp] - value[comp];
            for (int comp : plan.hi) out[row++] = value[comp] - upper[comp];
        };

        for (std::size_t ci = 0; ci < ens.problem.endpoint.size(); ++ci) {
            const auto& con = ens.problem.endpoint[ci];
            const auto& plan = endpoint_plans[ci];
            if (plan.lo.empty() && plan.hi.empty()) continue;
            if (con.mode == ConstraintMode::PerCopy) {
                for (int c = 0; c < lay.copies; ++c) {
                    emit(con.e(state_at(z, c, 0), state_at(z, c, lay.nodes - 1),
                               t0, tfv, ens.params.col(c)),
                         plan, con.lower, con.upper);
                }
            } else {
                Eigen::VectorXd value = Eigen::VectorXd::Zero(con.lower.size());
                for (int c = 0; c < lay.copies; ++c) {
                    value += ens.set.weights[c] *
                             con.e(state_at(z, c, 0),
                                   state_at(z, c, lay.nodes - 1), t0, tfv,
                                   ens.params.col(c));
                }
                emit(value, plan, con.lower, con.upper);
            }
        }

        for (std::size_t ci = 0; ci < ens.problem.path.size(); ++ci) {
            const auto& con = ens.problem.path[ci];
            const auto& plan = path_plans[ci];
            if (plan.lo.empty() && plan.hi.empty()) continue;
            for (int k = 0; k < lay.nodes; ++k) {
                const double t = node_time(z, k);
                if (con.mode == ConstraintMode::PerCopy) {
                    for (int c = 0; c < lay.copies; ++c) {
                        emit(con.h(state_at(z, c, k), u[k], t,
                                   ens.params.col(c)),
                             plan, con.lower, con.upper);
                    }
                } else {
                    Eigen::VectorXd value =
                        Eigen::VectorXd::Zero(con.lower.size());
                    for (int c = 0; c < lay.copies; ++c) {
                        value += ens.set.weights[c] *
                                 con.h(state_at(z, c, k), u[k], t,
                                       ens.params.col(c));
                    }
                    emit(value, plan, con.lower, con.upper);
                }
            }
        }

        // cubature variance bounds, normalized by the bound
        for (const auto& vb : ens.problem.variance_bounds) {
            std::vector<Eigen::VectorXd> g(lay.copies);
            Eigen::VectorXd mean = Eigen::VectorXd::Zero(vb.bounds.size());
            for (int c = 0; c < lay.copies; ++c) {
                g[c] = vb.outputs(state_at(z, c, lay.nodes - 1), tfv);
                mean += ens.set.weights[c] * g[c];
            }
            Eigen::VectorXd var = Eigen::VectorXd::Zero(vb.bounds.size());
            for (int c = 0; c < lay.copies; ++c) {
                var += ens.set.weights[c] *
                       (g[c] - mean).cwiseProduct(g[c] - mean);
            }
            for (Eigen::Index j = 0; j < vb.bounds.size(); ++j) {
                out[row++] = var[j] / vb.bounds[j] - 1.0;
            }
        }

        // minimax epigraph rows
        if (ens.problem.cost.kind == CostKind::Minimax) {
            const double eta = z[lay.epigraph_index] * scale[lay.epigraph_index];
            for (int c = 0; c < lay.copies; ++c) {
                out[row++] = ens.problem.cost.endpoint(
                                 state_at(z, c, lay.nodes - 1), tfv) -
                             eta;
            }
        }
        return out;
    }

    double objective(const Eigen::VectorXd& z) const {
        const auto& cost = ens.problem.cost;
        const double tfv = tf(z);
        double value = 0.0;

        switch (cost.kind) {
            case CostKind::MinTime:
                value = tfv;
                break;
            case CostKind::Minimax:
                value = z[lay.epigraph_index] * scale[lay.epigraph_index];
                break;
            case CostKind::Average: {
                for (int c = 0; c < lay.copies; ++c) {
                    double bolza = 0.0;
                    if (cost.mayer) {
                        bolza += cost.mayer(state_at(z, c, 0),
                                            state_at(z, c, lay.nodes - 1), t0,
                                            tfv, ens.params.col(c));
                    }
                    if (cost.lagrange) {
                        // trapezoid quadrature of the running cost
                        double quad = 0.0;
                        double prev = 0.0;
                        for (int k = 0; k < lay.nodes; ++k) {
                            const double lk = cost.lagrange(
                                state_at(z, c, k),
                                map_control(raw_control(z, k)),
                                node_time(z, k), ens.params.col(c));
                            if (k > 0) {
                                quad += 0.5 * (grid[k] - grid[k - 1]) *
                                        (tfv - t0) * (prev + lk);
                            }
                            prev = lk;
                        }
                        bolza += quad;
                    }
                    value += ens.set.weights[c] * bolza;
                }
                break;
            }
            case CostKind::TraceCovariance: {
                std::vector<Eigen::VectorXd> g(lay.copies);
                for (int c = 0; c < lay.copies; ++c) {
                    const Eigen::VectorXd xf = state_at(z, c, lay.nodes - 1);
                    g[c] = cost.outputs ? cost.outputs(xf, tfv) : xf;
                }
                Eigen::VectorXd mean = Eigen::VectorXd::Zero(g[0].size());
                for (int c = 0; c < lay.copies; ++c) {
                    mean += ens.set.weights[c] * g[c];
                }
                for (int c = 0; c < lay.copies; ++c) {
                    value += ens.set.weights[c] * (g[c] - mean).squaredNorm();
                }
                break;
            }
            case CostKind::NonlinearOfMean: {
                Eigen::VectorXd xf_mean = Eigen::VectorXd::Zero(lay.nx);
                for (int c = 0; c < lay.copies; ++c) {
                    xf_mean += ens.set.weights[c] *
                               state_at(z, c, lay.nodes - 1);
                }
                value = cost.endpoint(xf_mean, tfv);
                break;
            }
        }

        if (control_reg > 0.0) {
            double reg = 0.0;
            Eigen::VectorXd prev = raw_control(z, 0);
            for (int k = 1; k < lay.nodes; ++k) {
                const Eigen::VectorXd cur = raw_control(z, k);
                reg += (cur - prev).squaredNorm();
                prev = cur;
            }
            value += control_reg * reg;
        }
        return value;
    }
};

}  // namespace

TranscribedNLP transcribe(const EnsembleProblem& ensemble, int nodes,
                          Scheme scheme, const TranscribeOptions& options) {
    if (nodes < 5) throw std::invalid_argument("need at least 5 nodes");
    if (options.tf_floor >= options.tf_ceiling) {
        throw InvalidBounds("tf floor must be below the ceiling");
    }
    const auto& problem = ensemble.problem;
    const int copies = ensemble.copies;
    const int nx = ensemble.nx;
    const int ncu =
        problem.control_set == ControlSet::UnitCircle ? 1 : problem.field.nu;

    auto ev = std::make_shared<Evaluator>();
    ev->ens = ensemble;
    ev->scheme = scheme;
    ev->t0 = problem.t0;
    ev->tf_free = problem.tf_free;
    ev->tf_fixed = problem.tf_fixed;
    ev->control_reg = options.control_reg;

    NlpLayout& lay = ev->lay;
    lay.copies = copies;
    lay.nx = nx;
    lay.nodes = nodes;
    lay.ncu = ncu;
    lay.control_base = copies * nodes * nx;
    int n = lay.control_base + nodes * ncu;
    if (problem.tf_free) lay.tf_index = n++;
    if (problem.cost.kind == CostKind::Minimax) lay.epigraph_index = n++;
    lay.n = n;

    ev->grid = Eigen::VectorXd::LinSpaced(nodes, 0.0, 1.0);

    const double tf_guess =
        options.tf_guess.value_or(problem.tf_free ? problem.tf_guess
                                                  : problem.tf_fixed);

    // variable scaling: states to O(1), tf by its guess
    Eigen::VectorXd state_scale;
    if (options.state_scale.size() == nx) {
        state_scale = options.state_scale;
    } else {
        state_scale.resize(nx);
        const Eigen::VectorXd xfg = options.final_state_guess.size() == nx
                                        ? options.final_state_guess
                                        : problem.x0;
        for (int j = 0; j < nx; ++j) {
            state_scale[j] = std::max(
                {1.0, std::abs(problem.x0[j]), std::abs(xfg[j])});
        }
    }
    ev->defect_scale = state_scale;

    Eigen::VectorXd scale = Eigen::VectorXd::Ones(n);
    for (int c = 0; c < copies; ++c) {
        for (int k = 0; k < nodes; ++k) {
            for (int j = 0; j < nx; ++j) {
                scale[lay.state(c, k, j)] = state_scale[j];
            }
        }
    }
    if (lay.tf_index >= 0) {
        scale[lay.tf_index] =
            options.tf_scale > 0.0 ? options.tf_scale : std::max(tf_guess, 1e-3);
    }
    ev->scale = scale;

    // constraint row plans and counts
    int n_eq = copies * (nodes - 1) * nx;
    int n_ineq = 0;
    for (const auto& con : problem.endpoint) {
        ev->endpoint_plans.push_back(plan_bounds(con.lower, con.upper));
        const auto& plan = ev->endpoint_plans.back();
        const int mult = con.mode == ConstraintMode::PerCopy ? copies : 1;
        n_eq += mult * static_cast<int>(plan.eq.size());
        n_ineq += mult * static_cast<int>(plan.lo.size() + plan.hi.size());
    }
    for (const auto& con : problem.path) {
        ev->path_plans.push_back(plan_bounds(con.lower, con.upper));
        const auto& plan = ev->path_plans.back();
        const int mult =
            (con.mode == ConstraintMode::PerCopy ? copies : 1) * nodes;
        n_eq += mult * static_cast<int>(plan.eq.size());
        n_ineq += mult * static_cast<int>(plan.lo.size() + plan.hi.size());
    }
    for (const auto& vb : problem.variance_bounds) {
        n_ineq += static_cast<int>(vb.bounds.size());
    }
    if (problem.cost.kind == CostKind::Minimax) n_ineq += copies;
    ev->n_eq = n_eq;
    ev->n_ineq = n_ineq;

    TranscribedNLP out;
    out.layout = lay;
    out.scheme = scheme;
    out.scale = scale;
    out.grid = ev->grid;
    out.t0 = problem.t0;
    out.tf_free = problem.tf_free;
    out.tf_fixed = problem.tf_fixed;
    out.ensemble = ensemble;

    out.nlp.n = n;
    out.nlp.objective = [ev](const Eigen::VectorXd& z) {
        return ev->objective(z);
    };
    if (n_eq > 0) {
        out.nlp.equality = [ev](const Eigen::VectorXd& z) {
            return ev->equality(z);
        };
    }
    if (n_ineq > 0) {
        out.nlp.inequality = [ev](const Eigen::VectorXd& z) {
            return ev->inequality(z);
        };
    }

    // bounds; initial states pinned, controls boxed, tf floored
    Eigen::VectorXd lb = Eigen::VectorXd::Constant(n, -kInf);
    Eigen::VectorXd ub = Eigen::VectorXd::Constant(n, kInf);
    for (int c = 0; c < copies; ++c) {
        for (int j = 0; j < nx; ++j) {
            const int idx = lay.state(c, 0, j);
            lb[idx] = ub[idx] = ensemble.initial_states(j, c) / scale[idx];
        }
    }
    if (problem.control_set == ControlSet::Box) {
        for (int k = 0; k < nodes; ++k) {
            for (int m = 0; m < ncu; ++m) {
                const int idx = lay.control(k, m);
                if (problem.u_lower.size() == ncu) {
                    lb[idx] = problem.u_lower[m] / scale[idx];
                }
                if (problem.u_upper.size() == ncu) {
                    ub[idx] = problem.u_upper[m] / scale[idx];
                }
            }
        }
    }
    if (lay.tf_index >= 0) {
        lb[lay.tf_index] = options.tf_floor / scale[lay.tf_index];
        ub[lay.tf_index] = options.tf_ceiling / scale[lay.tf_index];
    }
    out.nlp.lower_bounds = lb;
    out.nlp.upper_bounds = ub;

    // initial guess: straight-line states, constant controls, tf guess
    Eigen::VectorXd guess = Eigen::VectorXd::Zero(n);
    for (int c = 0; c < copies; ++c) {
        const Eigen::VectorXd xa = ensemble.initial_states.col(c);
        const Eigen::VectorXd xb = options.final_state_guess.size() == nx
                                       ? options.final_state_guess
                                       : xa;
        for (int k = 0; k < nodes; ++k) {
            const double w = ev->grid[k];
            for (int j = 0; j < nx; ++j) {
                const int idx = lay.state(c, k, j);
                guess[idx] = ((1.0 - w) * xa[j] + w * xb[j]) / scale[idx];
            }
        }
    }
    for (int k = 0; k < nodes; ++k) {
        for (int m = 0; m < ncu; ++m) {
            const int idx = lay.control(k, m);
            double g = 0.0;
            if (options.control_guess.size() == ncu) {
                g = options.control_guess[m];
            } else if (problem.control_set == ControlSet::Box &&
                       std::isfinite(lb[idx]) && std::isfinite(ub[idx])) {
                g = 0.5 * (lb[idx] + ub[idx]) * scale[idx];
            }
            guess[idx] = g / scale[idx];
        }
    }
    if (lay.tf_index >= 0) {
        guess[lay.tf_index] = tf_guess / scale[lay.tf_index];
    }
    if (lay.epigraph_index >= 0) {
        double eta = -kInf;
        for (int c = 0; c < copies; ++c) {
            Eigen::VectorXd xf(nx);
            for (int j = 0; j < nx; ++j) {
                const int idx = lay.state(c, nodes - 1, j);
                xf[j] = guess[idx] * scale[idx];
            }
            eta = std::max(eta, problem.cost.endpoint(xf, tf_guess));
        }
        guess[lay.epigraph_index] = eta + 1.0;
    }
    out.nlp.initial_guess = guess;

    // constraint dependency patterns, mirroring the row order of equality()
    // and inequality() exactly; they feed the solver's color-grouped FD
    // Jacobians, so every variable a row can touch must be listed

    // dependency column sets shared by endpoint and path rows
    auto endpoint_cols = [&](bool all_copies, int c) {
        std::vector<int> cols;
        const int first = all_copies ? 0 : c;
        const int last = all_copies ? copies - 1 : c;
        for (int cc = first; cc <= last; ++cc) {
            for (int j = 0; j < nx; ++j) {
                cols.push_back(lay.state(cc, 0, j));
                cols.push_back(lay.state(cc, nodes - 1, j));
            }
        }
        if (lay.tf_index >= 0) cols.push_back(lay.tf_index);
        return cols;
    };
    auto path_cols = [&](bool all_copies, int c, int k) {
        std::vector<int> cols;
        const int first = all_copies ? 0 : c;
        const int last = all_copies ? copies - 1 : c;
        for (int cc = first; cc <= last; ++cc) {
            for (int j = 0; j < nx; ++j) cols.push_back(lay.state(cc, k, j));
        }
        for (int m = 0; m < ncu; ++m) cols.push_back(lay.control(k, m));
        if (lay.tf_index >= 0) cols.push_back(lay.tf_index);
        return cols;
    };

    // defect rows touch both node states, both node controls and tf;
    // conservative for the trapezoid scheme but complete for both
    out.eq_sparsity.reserve(
        static_cast<std::size_t>(copies) * (nodes - 1) * nx *
        (2 * nx + 2 * ncu + 1));
    int row = 0;
    for (int c = 0; c < copies; ++c) {
        for (int k = 0; k + 1 < nodes; ++k) {
            for (int j = 0; j < nx; ++j, ++row) {
                for (int jj = 0; jj < nx; ++jj) {
                    out.eq_sparsity.emplace_back(row, lay.state(c, k, jj));
                    out.eq_sparsity.emplace_back(row, lay.state(c, k + 1, jj));
                }
                for (int m = 0; m < ncu; ++m) {
                    out.eq_sparsity.emplace_back(row, lay.control(k, m));
                    out.eq_sparsity.emplace_back(row, lay.control(k + 1, m));
                }
                if (lay.tf_index >= 0) {
                    out.eq_sparsity.emplace_back(row, lay.tf_index);
                }
            }
        }
    }

    // endpoint equality rows
    for (std::size_t ci = 0; ci < problem.endpoint.size(); ++ci) {
        const auto& plan = ev->endpoint_plans[ci];
        if (plan.eq.empty()) continue;
        const bool mean =
            problem.endpoint[ci].mode == ConstraintMode::CubatureMean;
        const int mult = mean ? 1 : copies;
        for (int c = 0; c < mult; ++c) {
            const auto cols = endpoint_cols(mean, c);
            for (std::size_t comp = 0; comp < plan.eq.size(); ++comp, ++row) {
                for (int col : cols) out.eq_sparsity.emplace_back(row, col);
            }
        }
    }

    // path equality rows at every node
    for (std::size_t ci = 0; ci < problem.path.size(); ++ci) {
        const auto& plan = ev->path_plans[ci];
        if (plan.eq.empty()) continue;
        const bool mean = problem.path[ci].mode == ConstraintMode::CubatureMean;
        const int mult = mean ? 1 : copies;
        for (int k = 0; k < nodes; ++k) {
            for (int c = 0; c < mult; ++c) {
                const auto cols = path_cols(mean, c, k);
                for (std::size_t comp = 0; comp < plan.eq.size();
                     ++comp, ++row) {
                    for (int col : cols) out.eq_sparsity.emplace_back(row, col);
                }
            }
        }
    }

    // endpoint bound rows
    int irow = 0;
    for (std::size_t ci = 0; ci < problem.endpoint.size(); ++ci) {
        const auto& plan = ev->endpoint_plans[ci];
        const int nb = static_cast<int>(plan.lo.size() + plan.hi.size());
        if (nb == 0) continue;
        const bool mean =
            problem.endpoint[ci].mode == ConstraintMode::CubatureMean;
        const int mult = mean ? 1 : copies;
        for (int c = 0; c < mult; ++c) {
            const auto cols = endpoint_cols(mean, c);
            for (int comp = 0; comp < nb; ++comp, ++irow) {
                for (int col : cols) out.ineq_sparsity.emplace_back(irow, col);
            }
        }
    }

    // path bound rows at every node
    for (std::size_t ci = 0; ci < problem.path.size(); ++ci) {
        const auto& plan = ev->path_plans[ci];
        const int nb = static_cast<int>(plan.lo.size() + plan.hi.size());
        if (nb == 0) continue;
        const bool mean = problem.path[ci].mode == ConstraintMode::CubatureMean;
        const int mult = mean ? 1 : copies;
        for (int k = 0; k < nodes; ++k) {
            for (int c = 0; c < mult; ++c) {
                const auto cols = path_cols(mean, c, k);
                for (int comp = 0; comp < nb; ++comp, ++irow) {
                    for (int col : cols) {
                        out.ineq_sparsity.emplace_back(irow, col);
                    }
                }
            }
        }
    }

    // variance-bound rows mix the final states of every copy
    if (!problem.variance_bounds.empty()) {
        std::vector<int> cols;
        for (int c = 0; c < copies; ++c) {
            for (int j = 0; j < nx; ++j) {
                cols.push_back(lay.state(c, nodes - 1, j));
            }
        }
        if (lay.tf_index >= 0) cols.push_back(lay.tf_index);
        for (const auto& vb : problem.variance_bounds) {
            for (Eigen::Index j = 0; j < vb.bounds.size(); ++j, ++irow) {
                for (int col : cols) out.ineq_sparsity.emplace_back(irow, col);
            }
        }
    }

    // minimax epigraph rows
    if (problem.cost.kind == CostKind::Minimax) {
        for (int c = 0; c < copies; ++c, ++irow) {
            for (int j = 0; j < nx; ++j) {
                out.ineq_sparsity.emplace_back(irow, lay.state(c, nodes - 1, j));
            }
            if (lay.tf_index >= 0) {
                out.ineq_sparsity.emplace_back(irow, lay.tf_index);
            }
            out.ineq_sparsity.emplace_back(irow, lay.epigraph_index);
        }
    }

    if (row != n_eq || irow != n_ineq) {
        throw std::logic_error("constraint sparsity row count mismatch");
    }
    out.nlp.equality_sparsity = out.eq_sparsity;
    out.nlp.inequality_sparsity = out.ineq_sparsity;
    return out;
}

double extract_tf(const TranscribedNLP& nlp, const Eigen::VectorXd& z) {
    return nlp.tf_free
               ? z[nlp.layout.tf_index] * nlp.scale[nlp.layout.tf_index]
               : nlp.tf_fixed;
}

ControlSolution extract_control(const TranscribedNLP& nlp,
                                const Eigen::VectorXd& z) {
    const auto& lay = nlp.layout;
    const double tf = extract_tf(nlp, z);
    Eigen::VectorXd times(lay.nodes);
    const int nu = nlp.ensemble.problem.field.nu;
    Eigen::MatrixXd values(nu, lay.nodes);
    for (int k = 0; k < lay.nodes; ++k) {
        times[k] = nlp.t0 + nlp.grid[k] * (tf - nlp.t0);
        Eigen::VectorXd raw(lay.ncu);
        for (int m = 0; m < lay.ncu; ++m) {
            const int idx = lay.control(k, m);
            raw[m] = z[idx] * nlp.scale[idx];
        }
        if (nlp.ensemble.problem.control_set == ControlSet::UnitCircle) {
            values(0, k) = std::cos(raw[0]);
            values(1, k) = std::sin(raw[0]);
        } else {
            values.col(k) = raw;
        }
    }
    return ControlSolution(times, values);
}

Trajectory extract_states(const TranscribedNLP& nlp, const Eigen::VectorXd& z,
                          int copy) {
    const auto& lay = nlp.layout;
    const double tf = extract_tf(nlp, z);
    Trajectory traj;
    traj.times.resize(lay.nodes);
    traj.states.resize(lay.nx, lay.nodes);
    for (int k = 0; k < lay.nodes; ++k) {
        traj.times[k] = nlp.t0 + nlp.grid[k] * (tf - nlp.t0);
        for (int j = 0; j < lay.nx; ++j) {
            const int idx = lay.state(copy, k, j);
            traj.states(j, k) = z[idx] * nlp.scale[idx];
        }
    }
    return traj;
}

void warm_start_from_control(TranscribedNLP& nlp,
                             const ControlSolution& control, double tf) {
    const auto& lay = nlp.layout;
    Eigen::VectorXd& guess = nlp.nlp.initial_guess;
    const double t0 = nlp.t0;
    if (lay.tf_index >= 0) {
        guess[lay.tf_index] = tf / nlp.scale[lay.tf_index];
    }

    // control parameters from the signal; angles unwrapped to stay continuous
    double prev_angle = 0.0;
    for (int k = 0; k < lay.nodes; ++k) {
        const double t = t0 + nlp.grid[k] * (tf - t0);
        const Eigen::VectorXd u = control(t);
        if (nlp.ensemble.problem.control_set == ControlSet::UnitCircle) {
            double angle = std::atan2(u[1], u[0]);
            if (k > 0) {
                while (angle - prev_angle > M_PI) angle -= 2.0 * M_PI;
                while (angle - prev_angle < -M_PI) angle += 2.0 * M_PI;
            }
            prev_angle = angle;
            const int idx = lay.control(k, 0);
            guess[idx] = angle / nlp.scale[idx];
        } else {
            for (int m = 0; m < lay.ncu; ++m) {
                const int idx = lay.control(k, m);
                guess[idx] = u[m] / nlp.scale[idx];
            }
        }
    }

    // states by RK4 propagation of each copy under the given control
    const auto& ens = nlp.ensemble;
    for (int c = 0; c < lay.copies; ++c) {
        Eigen::VectorXd x = ens.initial_states.col(c);
        for (int k = 0; k < lay.nodes; ++k) {
            for (int j = 0; j < lay.nx; ++j) {
                const int idx = lay.state(c, k, j);
                guess[idx] = x[j] / nlp.scale[idx];
            }
            if (k + 1 < lay.nodes) {
                const double ta = t0 + nlp.grid[k] * (tf - t0);
                const double tb = t0 + nlp.grid[k + 1] * (tf - t0);
                const int sub = 4;
                const double h = (tb - ta) / sub;
                for (int s = 0; s < sub; ++s) {
                    x = rk4_step(ens.problem.field, x, control, ta + s * h, h,
                                 ens.params.col(c));
                }
            }
        }
    }
}

std::string nlp_debug_json(const TranscribedNLP& nlp,
                           const Eigen::VectorXd& z) {
    nlohmann::json doc;
    doc["layout"] = {{"variables", nlp.layout.n},
                     {"copies", nlp.layout.copies},
                     {"nx", nlp.layout.nx},
                     {"nodes", nlp.layout.nodes},
                     {"controls_per_node", nlp.layout.ncu},
                     {"tf_index", nlp.layout.tf_index},
                     {"epigraph_index", nlp.layout.epigraph_index}};
    doc["scheme"] =
        nlp.scheme == Scheme::Trapezoid ? "trapezoid" : "hermite_simpson";
    doc["objective"] = nlp.nlp.objective(z);
    if (nlp.nlp.equality) {
        const Eigen::VectorXd c = nlp.nlp.equality(z);
        doc["equality"] = {{"count", c.size()},
                           {"inf_norm", c.lpNorm<Eigen::Infinity>()}};
    }
    if (nlp.nlp.inequality) {
        const Eigen::VectorXd g = nlp.nlp.inequality(z);
        doc["inequality"] = {
            {"count", g.size()},
            {"max_violation", g.size() ? g.maxCoeff() : 0.0}};
    }
    std::vector<double> lb(nlp.nlp.lower_bounds.data(),
                           nlp.nlp.lower_bounds.data() + nlp.nlp.n);
    std::vector<double> ub(nlp.nlp.upper_bounds.data(),
                           nlp.nlp.upper_bounds.data() + nlp.nlp.n);
    for (auto& v : lb) v = std::isfinite(v) ? v : -1e308;
    for (auto& v : ub) v = std::isfinite(v) ? v : 1e308;
    doc["bounds"] = {{"lower", lb}, {"upper", ub}};
    doc["sparsity_entries"] = nlp.eq_sparsity.size();
    return doc.dump(2);
}

}  // namespace utoc
