#include "utoc/uncertainty.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "utoc/rng.hpp"

namespace utoc {

GaussianSpec::GaussianSpec(Eigen::VectorXd mean, Eigen::MatrixXd covariance)
    : mean_(std::move(mean)), covariance_(std::move(covariance)) {
    if (covariance_.rows() != mean_.size() ||
        covariance_.cols() != mean_.size()) {
        throw std::invalid_argument("covariance shape does not match mean");
    }
    const double asym =
        (covariance_ - covariance_.transpose()).cwiseAbs().maxCoeff();
    if (asym > 0.0) {
        throw NotPSD("covariance must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance_);
    const double floor = -1e-12 * std::max(covariance_.trace(), 1.0);
    if (es.eigenvalues().minCoeff() < floor) {
        throw NotPSD("covariance has a significantly negative eigenvalue");
    }
}

GaussianSpec GaussianSpec::from_sigmas(const Eigen::VectorXd& mean,
                                       const Eigen::VectorXd& sigmas) {
    return GaussianSpec(mean, sigmas.cwiseProduct(sigmas).asDiagonal());
}

GaussianSpec GaussianSpec::point_mass(const Eigen::VectorXd& value) {
    return GaussianSpec(value,
                        Eigen::MatrixXd::Zero(value.size(), value.size()));
}

Eigen::MatrixXd GaussianSpec::sqrt_covariance() const {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance_);
    if (es.info() != Eigen::Success) {
        throw NotPSD("eigendecomposition of covariance failed");
    }
    const double clamp = 1e-14 * std::max(covariance_.trace(), 0.0);
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        ev[i] = ev[i] < clamp ? 0.0 : ev[i];
    }
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
           es.eigenvectors().transpose();
}

Eigen::VectorXd SigmaSet::weighted_mean() const { return points * weights; }

Eigen::MatrixXd SigmaSet::weighted_covariance() const {
    const Eigen::VectorXd mu = weighted_mean();
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(points.rows(), points.rows());
    for (int i = 0; i < count(); ++i) {
        const Eigen::VectorXd d = points.col(i) - mu;
        cov += weights[i] * d * d.transpose();
    }
    return cov;
}

SigmaSet symmetric_sigma_points(const GaussianSpec& spec, double kappa) {
    const int np = spec.dim();
    const double scale = static_cast<double>(np) + kappa;
    if (scale <= 0.0) {
        throw NonPositiveScaling("N_p + kappa must be positive");
    }
    const Eigen::MatrixXd root = std::sqrt(scale) * spec.sqrt_covariance();

    SigmaSet set;
    set.points.resize(np, 2 * np + 1);
    set.weights.resize(2 * np + 1);
    set.points.col(0) = spec.mean();
    set.weights[0] = kappa / scale;
    for (int i = 0; i < np; ++i) {
        set.points.col(1 + i) = spec.mean() + root.col(i);
        set.points.col(1 + np + i) = spec.mean() - root.col(i);
        set.weights[1 + i] = 0.5 / scale;
        set.weights[1 + np + i] = 0.5 / scale;
    }
    return set;
}

SigmaSet simplex_sigma_points(const GaussianSpec& spec, double w0) {
    const int np = spec.dim();
    if (np < 1) {
        throw std::invalid_argument("parameter dimension must be >= 1");
    }
    if (w0 <= 0.0 || w0 >= 1.0) {
        throw NonPositiveScaling("w0 must lie strictly between 0 and 1");
    }
    const double w = (1.0 - w0) / static_cast<double>(np + 1);

    // Spherical simplex construction, built up one dimension at a time.
    Eigen::MatrixXd unit = Eigen::MatrixXd::Zero(np, np + 2);
    unit(0, 1) = -1.0 / std::sqrt(2.0 * w);
    unit(0, 2) = 1.0 / std::sqrt(2.0 * w);
    for (int j = 2; j <= np; ++j) {
        const double a = 1.0 / std::sqrt(static_cast<double>(j) * (j + 1) * w);
        for (int i = 1; i <= j; ++i) {
            unit(j - 1, i) = -a;
        }
        unit(j - 1, j + 1) = static_cast<double>(j) * a;
    }

    SigmaSet set;
    set.points.resize(np, np + 2);
    set.weights.resize(np + 2);
    set.weights[0] = w0;
    const Eigen::MatrixXd root = spec.sqrt_covariance();
    set.points.col(0) = spec.mean();
    for (int i = 1; i < np + 2; ++i) {
        set.points.col(i) = spec.mean() + root * unit.col(i);
        set.weights[i] = w;
    }
    return set;
}

namespace {

void check_feasible(const SigmaSet& set, const FeasibilityPredicate& pred) {
    for (int i = 0; i < set.count(); ++i) {
        if (!pred(set.points.col(i))) {
            throw InfeasibleSigmaPoint("sigma point " + std::to_string(i) +
                                       " violates the feasibility predicate");
        }
    }
}

}  // namespace

SigmaSet symmetric_sigma_points(const ConstrainedGaussianSpec& spec,
                                double kappa) {
    SigmaSet set = symmetric_sigma_points(spec.base, kappa);
    check_feasible(set, spec.feasible);
    return set;
}

SigmaSet simplex_sigma_points(const ConstrainedGaussianSpec& spec, double w0) {
    SigmaSet set = simplex_sigma_points(spec.base, w0);
    check_feasible(set, spec.feasible);
    return set;
}

Eigen::VectorXd cubature_expectation(
    const SigmaSet& set,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g) {
    Eigen::VectorXd acc = set.weights[0] * g(set.points.col(0));
    for (int i = 1; i < set.count(); ++i) {
        acc += set.weights[i] * g(set.points.col(i));
    }
    return acc;
}

Eigen::MatrixXd cubature_covariance(
    const SigmaSet& set,
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& g) {
    std::vector<Eigen::VectorXd> values(set.count());
    for (int i = 0; i < set.count(); ++i) {
        values[i] = g(set.points.col(i));
    }
    Eigen::VectorXd mean = set.weights[0] * values[0];
    for (int i = 1; i < set.count(); ++i) {
        mean += set.weights[i] * values[i];
    }
    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(mean.size(), mean.size());
    for (int i = 0; i < set.count(); ++i) {
        const Eigen::VectorXd d = values[i] - mean;
        cov += set.weights[i] * d * d.transpose();
    }
    return cov;
}

namespace {

Eigen::VectorXd draw_standard(NormalStream& stream, int dim) {
    Eigen::VectorXd z(dim);
    for (int i = 0; i < dim; ++i) {
        z[i] = stream.normal();
    }
    return z;
}

}  // namespace

Eigen::MatrixXd sample(const GaussianSpec& spec, int n, std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample count must be >= 1");
    }
    const Eigen::MatrixXd root = spec.sqrt_covariance();
    Eigen::MatrixXd out(spec.dim(), n);
    for (int j = 0; j < n; ++j) {
        NormalStream stream(seed, static_cast<std::uint64_t>(j));
        out.col(j) = spec.mean() + root * draw_standard(stream, spec.dim());
    }
    return out;
}

Eigen::MatrixXd sample(const ConstrainedGaussianSpec& spec, int n,
                       std::uint64_t seed) {
    if (n < 1) {
        throw std::invalid_argument("sample count must be >= 1");
    }
    constexpr int kMaxAttempts = 50000;  // acceptance rates below ~1e-4 abort
    const Eigen::MatrixXd root = spec.base.sqrt_covariance();
    Eigen::MatrixXd out(spec.base.dim(), n);
    for (int j = 0; j < n; ++j) {
        NormalStream stream(seed, static_cast<std::uint64_t>(j));
        bool accepted = false;
        for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
            const Eigen::VectorXd candidate =
                spec.base.mean() + root * draw_standard(stream, spec.base.dim());
            if (spec.feasible(candidate)) {
                out.col(j) = candidate;
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            throw RejectionBudgetExceeded(
                "constrained Gaussian acceptance rate too low");
        }
    }
    return out;
}

double standard_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

}  // namespace utoc
