#pragma once

#include "sbo/kernels.hpp"

#include <Eigen/Dense>
#include <cstddef>
#include <span>
#include <vector>

namespace sbo {

using Point = std::vector<double>;

/// Ordered observations (x_i, y_i) with homoscedastic noise variance.
struct Dataset {
    std::vector<Point> x;
    std::vector<double> y;
    double noise_var = 0.0;

    [[nodiscard]] std::size_t size() const { return y.size(); }
    [[nodiscard]] bool empty() const { return y.empty(); }
    /// Input dimension, or 0 for an empty dataset.
    [[nodiscard]] std::size_t dim() const { return x.empty() ? 0 : x.front().size(); }

    void add(Point point, double value);
    /// Throws std::invalid_argument on length or dimension inconsistencies.
    void validate() const;

    bool operator==(const Dataset&) const = default;
};

struct Prediction {
    double mean = 0.0;
    double var = 0.0;
};

/// Posterior of the order-q Kronecker gradient at one point.
struct GradPosterior {
    unsigned order = 0;
    Eigen::VectorXd mean;
    Eigen::MatrixXd cov;     // symmetrised, eigenvalues clamped at zero
    Eigen::MatrixXd factor;  // factor * factor^T == cov

    /// Builds the repaired covariance and its eigen-factor.
    static GradPosterior from_moments(unsigned order, Eigen::VectorXd mean, const Eigen::MatrixXd& raw_cov);
};

/// Zero-mean GP posterior. Immutable once constructed.
class Posterior {
public:
    /// Fits with escalating diagonal jitter; throws std::runtime_error if the
    /// Gram matrix stays indefinite. An empty dataset yields the prior.
    Posterior(Dataset data, KernelSpec kernel, std::size_t dim);

    [[nodiscard]] Prediction predict(std::span<const double> x) const;
    /// Posterior covariance lambda(x, x2).
    [[nodiscard]] double covariance(std::span<const double> x, std::span<const double> x2) const;
    [[nodiscard]] GradPosterior grad_posterior(std::span<const double> x, unsigned q) const;

    [[nodiscard]] const Dataset& dataset() const { return data_; }
    [[nodiscard]] const KernelSpec& kernel() const { return kernel_; }
    [[nodiscard]] const Eigen::VectorXd& weights() const { return weights_; }
    [[nodiscard]] double jitter() const { return jitter_; }
    [[nodiscard]] std::size_t dim() const { return dim_; }

private:
    void require_dim(std::span<const double> x) const;
    [[nodiscard]] Eigen::VectorXd cross_cov(std::span<const double> x) const;

    Dataset data_;
    KernelSpec kernel_;
    std::size_t dim_;
    Eigen::MatrixXd chol_;  // lower factor of K + (noise + jitter) I
    Eigen::VectorXd weights_;
    double jitter_ = 0.0;
};

Posterior fit(const Dataset& data, const KernelSpec& kernel);

/// Draws mean + factor * z with z standard normal.
std::vector<Eigen::VectorXd> sample_grad(const GradPosterior& gp, std::size_t count, Rng& rng);

}  // namespace sbo
