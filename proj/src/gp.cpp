#include "sbo/gp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sbo {

void Dataset::add(Point point, double value) {
    if (!x.empty() && point.size() != dim()) {
        throw std::invalid_argument("dataset: point dimension " + std::to_string(point.size()) +
                                    " does not match " + std::to_string(dim()));
    }
    x.push_back(std::move(point));
    y.push_back(value);
}

void Dataset::validate() const {
    if (x.size() != y.size()) throw std::invalid_argument("dataset: x and y lengths differ");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) {
        throw std::invalid_argument("dataset: noise variance must be non-negative");
    }
    for (const auto& p : x) {
        if (p.size() != dim() || p.empty()) throw std::invalid_argument("dataset: inconsistent point dimensions");
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite target");
    }
}

GradPosterior GradPosterior::from_moments(unsigned order, Eigen::VectorXd mean, const Eigen::MatrixXd& raw_cov) {
    GradPosterior out;
    out.order = order;
    out.mean = std::move(mean);
    const Eigen::MatrixXd sym = 0.5 * (raw_cov + raw_cov.transpose());
    if (sym.rows() == 1) {
        const double v = std::max(0.0, sym(0, 0));
        out.cov = Eigen::MatrixXd::Constant(1, 1, v);
        out.factor = Eigen::MatrixXd::Constant(1, 1, std::sqrt(v));
        return out;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
    const Eigen::VectorXd vals = eig.eigenvalues().cwiseMax(0.0);
    out.factor = eig.eigenvectors() * vals.cwiseSqrt().asDiagonal();
    out.cov = out.factor * out.factor.transpose();
    return out;
}

Posterior::Posterior(Dataset data, KernelSpec kernel, std::size_t dim)
    : data_(std::move(data)), kernel_(kernel), dim_(dim) {
    data_.validate();
    const auto verdict = validate_kernel(kernel_);
    if (!verdict.accepted) throw std::invalid_argument(verdict.reason);
    if (dim_ == 0) throw std::invalid_argument("posterior: dimension must be positive");
    if (!data_.empty() && data_.dim() != dim_) throw std::invalid_argument("posterior: dataset dimension mismatch");

    const std::size_t N = data_.size();
    if (N == 0) {
        weights_.resize(0);
        chol_.resize(0, 0);
        return;
    }
    Eigen::MatrixXd gram(N, N);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            gram(i, j) = gram(j, i) = kernel_eval(kernel_, data_.x[i], data_.x[j]);
        }
    }
    gram.diagonal().array() += data_.noise_var;

    const double k0 = kappa(kernel_, 0.0);
    const double max_jitter = 1e-4 * k0;
    double jitter = 1e-10 * k0 * static_cast<double>(N);
    for (;;) {
        Eigen::MatrixXd trial = gram;
        trial.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(trial);
        if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0) {
            chol_ = llt.matrixL();
            jitter_ = jitter;
            break;
        }
        if (jitter >= max_jitter) {
            throw std::runtime_error("posterior: Gram matrix not positive definite after maximum jitter");
        }
        jitter = std::min(max_jitter, jitter * 10.0);
    }
    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data_.y.data(), static_cast<Eigen::Index>(N));
    weights_ = chol_.triangularView<Eigen::Lower>().solve(y);
    chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(weights_);
}

void Posterior::require_dim(std::span<const double> x) const {
    if (x.size() != dim_) {
        throw std::invalid_argument("posterior: point dimension " + std::to_string(x.size()) +
                                    " does not match " + std::to_string(dim_));
    }
}

Eigen::VectorXd Posterior::cross_cov(std::span<const double> x) const {
    Eigen::VectorXd k(static_cast<Eigen::Index>(data_.size()));
    for (std::size_t i = 0; i < data_.size(); ++i) k(static_cast<Eigen::Index>(i)) = kernel_eval(kernel_, x, data_.x[i]);
    return k;
}

Prediction Posterior::predict(std::span<const double> x) const {
    require_dim(x);
    const double prior = kappa(kernel_, 0.0);
    if (data_.empty()) return {0.0, prior};
    const Eigen::VectorXd k = cross_cov(x);
    const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
    return {k.dot(weights_), std::max(0.0, prior - v.squaredNorm())};
}

double Posterior::covariance(std::span<const double> x, std::span<const double> x2) const {
    require_dim(x);
    require_dim(x2);
    const double prior = kernel_eval(kernel_, x, x2);
    if (data_.empty()) return prior;
    const Eigen::VectorXd a = chol_.triangularView<Eigen::Lower>().solve(cross_cov(x));
    const Eigen::VectorXd b = chol_.triangularView<Eigen::Lower>().solve(cross_cov(x2));
    return prior - a.dot(b);
}

GradPosterior Posterior::grad_posterior(std::span<const double> x, unsigned q) const {
    require_dim(x);
    if (q == 0) throw std::invalid_argument("grad_posterior: order must be positive");
    if (kernel_.finite_smoothness() && q > kernel_.smoothness()) {
        throw std::domain_error("grad_posterior: order " + std::to_string(q) + " exceeds kernel smoothness " +
                                std::to_string(kernel_.smoothness()));
    }
    const auto prior_tensor = kron_deriv(kernel_, x, x, 2 * q, q);
    Eigen::Index width = 1;
    for (unsigned k = 0; k < q; ++k) width *= static_cast<Eigen::Index>(dim_);
    // Row-major: the first q Kronecker positions index rows.
    Eigen::MatrixXd cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        prior_tensor.values.data(), width, width);

    const std::size_t N = data_.size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(width);
    if (N > 0) {
        Eigen::MatrixXd V(static_cast<Eigen::Index>(N), width);
        for (std::size_t i = 0; i < N; ++i) {
            const auto t = kron_deriv(kernel_, x, data_.x[i], q, 0);
            V.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(t.values.data(), width);
        }
        mean = V.transpose() * weights_;
        const Eigen::MatrixXd W = chol_.triangularView<Eigen::Lower>().solve(V);
        cov.noalias() -= W.transpose() * W;
    }
    return GradPosterior::from_moments(q, std::move(mean), cov);
}

Posterior fit(const Dataset& data, const KernelSpec& kernel) {
    if (data.empty()) throw std::invalid_argument("fit: dataset is empty; construct a prior Posterior explicitly");
    return Posterior(data, kernel, data.dim());
}

std::vector<Eigen::VectorXd> sample_grad(const GradPosterior& gp, std::size_t count, Rng& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    const auto k = gp.factor.cols();
    Eigen::VectorXd z(k);
    for (std::size_t s = 0; s < count; ++s) {
        for (Eigen::Index j = 0; j < k; ++j) z(j) = normal(rng);
        out.emplace_back(gp.mean + gp.factor * z);
    }
    return out;
}

}  // namespace sbo
