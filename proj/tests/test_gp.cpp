#include "doctest.h"
#include "sbo/gp.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

using namespace sbo;

namespace {

Dataset single(double x, double y, double noise = 0.0) {
    Dataset d;
    d.noise_var = noise;
    d.add({x}, y);
    return d;
}

Dataset random_2d(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset d;
    for (std::size_t i = 0; i < count; ++i) {
        const double a = u(rng), b = u(rng);
        d.add({a, b}, std::sin(3 * a) + std::cos(2 * b));
    }
    return d;
}

}  // namespace

TEST_CASE("single point interpolation") {
    const auto post = fit(single(0.0, 1.0), KernelSpec::rbf(1.0));
    CHECK(post.weights().size() == 1);
    CHECK(post.weights()(0) == doctest::Approx(1.0).epsilon(1e-8));
    for (double x : {-1.0, 0.3, 2.0}) {
        CHECK(post.predict(std::vector{x}).mean == doctest::Approx(std::exp(-x * x / 2)).epsilon(1e-8));
    }
    const auto p = post.predict(std::vector{1.0});
    CHECK(p.mean == doctest::Approx(0.6065306597).epsilon(1e-8));
    CHECK(p.var == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-8));
}

TEST_CASE("noisy single point") {
    const auto post = fit(single(0.0, 2.0, 1.0), KernelSpec::rbf(1.0));
    CHECK(post.predict(std::vector{0.0}).mean == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("duplicate noiseless points resolve through jitter") {
    Dataset d;
    d.add({0.5}, 1.0);
    d.add({0.5}, 1.0);
    d.add({0.7}, 0.2);
    const auto post = fit(d, KernelSpec::rbf(0.3));
    CHECK(post.jitter() > 0.0);
    CHECK(post.predict(std::vector{0.5}).mean == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("prediction limits") {
    const auto d = random_2d(8, 3);
    const auto post = fit(d, KernelSpec::rbf(0.4));
    for (std::size_t i = 0; i < d.size(); ++i) {
        const auto p = post.predict(d.x[i]);
        CHECK(p.mean == doctest::Approx(d.y[i]).epsilon(1e-6));
        CHECK(p.var <= 1e-6);
    }
    const auto far = post.predict(std::vector{50.0, 50.0});
    CHECK(std::abs(far.mean) < 1e-12);
    CHECK(far.var == doctest::Approx(1.0));
    CHECK_THROWS_AS((void)post.predict(std::vector{0.1}), std::invalid_argument);
}

TEST_CASE("weights reproduce targets without noise") {
    const auto d = random_2d(6, 17);
    const auto post = fit(d, KernelSpec::matern52(0.6));
    for (std::size_t i = 0; i < d.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < d.size(); ++j) s += kernel_eval(post.kernel(), d.x[i], d.x[j]) * post.weights()(j);
        CHECK(std::abs(s - d.y[i]) <= 1e-8);
    }
}

TEST_CASE("fit rejects bad input") {
    Dataset bad;
    bad.x = {{0.0}, {1.0}};
    bad.y = {1.0};
    CHECK_THROWS_AS(fit(bad, KernelSpec::rbf(1.0)), std::invalid_argument);
    CHECK_THROWS_AS(fit(single(0.0, 1.0), KernelSpec::rational_quadratic(1.0)), std::invalid_argument);
    CHECK_THROWS_AS(fit(Dataset{}, KernelSpec::rbf(1.0)), std::invalid_argument);
}

TEST_CASE("gradient posterior examples") {
    const Posterior prior(Dataset{}, KernelSpec::rbf(1.0), 1);
    const auto g0 = prior.grad_posterior(std::vector{0.3}, 1);
    CHECK(g0.mean(0) == 0.0);
    CHECK(g0.cov(0, 0) == doctest::Approx(1.0));
    CHECK(Posterior(Dataset{}, KernelSpec::rbf(0.5), 1).grad_posterior(std::vector{0.0}, 1).cov(0, 0) ==
          doctest::Approx(4.0));

    const auto post = fit(single(0.0, 1.0), KernelSpec::rbf(1.0));
    CHECK(std::abs(post.grad_posterior(std::vector{0.0}, 1).mean(0)) < 1e-14);
    const double h = 1e-5;
    const double fd = (post.predict(std::vector{1.0 + h}).mean - post.predict(std::vector{1.0 - h}).mean) / (2 * h);
    CHECK(post.grad_posterior(std::vector{1.0}, 1).mean(0) == doctest::Approx(fd).epsilon(1e-8));
    CHECK(post.grad_posterior(std::vector{1.0}, 1).mean(0) == doctest::Approx(-0.6065306597).epsilon(1e-8));

    CHECK_THROWS_AS((void)fit(single(0.0, 1.0), KernelSpec::matern32(1.0)).grad_posterior(std::vector{0.1}, 2),
                    std::domain_error);
}

TEST_CASE("gradient mean matches finite differences of the predictive mean") {
    for (auto kernel : {KernelSpec::rbf(0.5), KernelSpec::matern52(1.0)}) {
        const auto post = fit(random_2d(8, 99), kernel);
        Rng rng(4);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (int t = 0; t < 10; ++t) {
            std::vector<double> x{u(rng), u(rng)};
            const auto g = post.grad_posterior(x, 1);
            for (std::size_t k = 0; k < 2; ++k) {
                auto xp = x, xm = x;
                xp[k] += 1e-4;
                xm[k] -= 1e-4;
                const double fd = (post.predict(xp).mean - post.predict(xm).mean) / 2e-4;
                CHECK(g.mean(static_cast<Eigen::Index>(k)) == doctest::Approx(fd).epsilon(1e-3));
            }
        }
    }
}

TEST_CASE("higher-order gradient means match finite differences") {
    const auto post = fit(random_2d(8, 5), KernelSpec::rbf(0.5));
    const std::vector<double> x{0.4, 0.6};
    const auto g1 = post.grad_posterior(x, 1);
    const auto g2 = post.grad_posterior(x, 2);
    for (std::size_t a = 0; a < 2; ++a) {
        auto xp = x, xm = x;
        xp[a] += 1e-4;
        xm[a] -= 1e-4;
        const auto gp = post.grad_posterior(xp, 1);
        const auto gm = post.grad_posterior(xm, 1);
        for (std::size_t b = 0; b < 2; ++b) {
            const double fd = (gp.mean(static_cast<Eigen::Index>(b)) - gm.mean(static_cast<Eigen::Index>(b))) / 2e-4;
            CHECK(g2.mean(static_cast<Eigen::Index>(a * 2 + b)) == doctest::Approx(fd).epsilon(1e-4));
        }
    }
    CHECK(g1.cov.rows() == 2);
    CHECK(g2.cov.rows() == 4);
}

TEST_CASE("gradient covariance matches mixed differences of the posterior covariance") {
    Dataset d;
    d.noise_var = 0.01;
    d.add({0.1}, 0.5);
    d.add({0.45}, -0.2);
    d.add({0.8}, 0.9);
    const auto post = fit(d, KernelSpec::rbf(0.3));
    for (double x : {0.2, 0.5, 0.95}) {
        const double h = 1e-3;
        auto c = [&](double a, double b) { return post.covariance(std::vector{a}, std::vector{b}); };
        const double mixed = (c(x + h, x + h) - c(x + h, x - h) - c(x - h, x + h) + c(x - h, x - h)) / (4 * h * h);
        CHECK(post.grad_posterior(std::vector{x}, 1).cov(0, 0) == doctest::Approx(mixed).epsilon(1e-2));
    }
}

TEST_CASE("variance is non-increasing as data arrive") {
    Rng rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Dataset d;
    d.noise_var = 0.05;
    const std::vector<double> probe{0.5, 0.5};
    double prev = Posterior(d, KernelSpec::matern52(0.3), 2).predict(probe).var;
    for (int k = 0; k < 15; ++k) {
        d.add({u(rng), u(rng)}, u(rng));
        const double v = fit(d, KernelSpec::matern52(0.3)).predict(probe).var;
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("concurrent predictions are bitwise identical") {
    const auto post = fit(random_2d(20, 8), KernelSpec::rbf(0.3));
    std::vector<std::vector<double>> pts;
    for (int k = 0; k < 200; ++k) pts.push_back({k / 200.0, 1.0 - k / 200.0});
    std::vector<double> seq, a(pts.size()), b(pts.size());
    for (const auto& p : pts) seq.push_back(post.predict(p).mean + post.predict(p).var);
    auto work = [&](std::vector<double>& out) {
        for (std::size_t k = 0; k < pts.size(); ++k) out[k] = post.predict(pts[k]).mean + post.predict(pts[k]).var;
    };
    std::thread t1(work, std::ref(a)), t2(work, std::ref(b));
    t1.join();
    t2.join();
    CHECK(a == seq);
    CHECK(b == seq);
}

TEST_CASE("gradient sampling") {
    auto zero = GradPosterior::from_moments(1, Eigen::VectorXd::Constant(2, 0.7), Eigen::MatrixXd::Zero(2, 2));
    Rng rng(1);
    for (const auto& s : sample_grad(zero, 10, rng)) CHECK(s == zero.mean);

    auto std1 = GradPosterior::from_moments(1, Eigen::VectorXd::Zero(1), Eigen::MatrixXd::Identity(1, 1));
    const auto samples = sample_grad(std1, 100000, rng);
    double m = 0.0, v = 0.0;
    for (const auto& s : samples) m += s(0);
    m /= samples.size();
    for (const auto& s : samples) v += (s(0) - m) * (s(0) - m);
    v /= samples.size() - 1;
    CHECK(std::abs(m) < 0.01);
    CHECK(std::abs(v - 1.0) < 0.05);

    Rng r1(77), r2(77);
    CHECK(sample_grad(std1, 5, r1) == sample_grad(std1, 5, r2));
}

TEST_CASE("sample covariance converges to the repaired covariance") {
    Eigen::MatrixXd c(2, 2);
    c << 2.0, 0.6, 0.6, 1.0;
    auto gp = GradPosterior::from_moments(1, Eigen::Vector2d(1.0, -1.0), c);
    Rng rng(21);
    const std::size_t count = 200000;
    const auto samples = sample_grad(gp, count, rng);
    Eigen::Vector2d m = Eigen::Vector2d::Zero();
    for (const auto& s : samples) m += s;
    m /= count;
    Eigen::Matrix2d emp = Eigen::Matrix2d::Zero();
    for (const auto& s : samples) emp += (s - m) * (s - m).transpose();
    emp /= count - 1;
    for (int i = 0; i < 2; ++i) {
        CHECK(std::abs(m(i) - gp.mean(i)) <= 3 * std::sqrt(c(i, i) / count));
        for (int j = 0; j < 2; ++j) {
            const double se = std::sqrt((c(i, i) * c(j, j) + c(i, j) * c(i, j)) / count);
            CHECK(std::abs(emp(i, j) - c(i, j)) <= 3 * se);
        }
    }
}

TEST_CASE("indefinite covariance is repaired") {
    Eigen::MatrixXd c(2, 2);
    c << 1.0, 2.0, 2.0, 1.0;
    auto gp = GradPosterior::from_moments(1, Eigen::VectorXd::Zero(2), c);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gp.cov);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
    CHECK((gp.cov - gp.cov.transpose()).norm() < 1e-14);
}
