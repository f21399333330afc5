#include "sbo/mathcore.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sbo::math {

double std_normal_pdf(double z) {
    return kInvSqrt2Pi * std::exp(-0.5 * z * z);
}

double std_normal_cdf(double z) {
    // erfc keeps full relative precision in the lower tail, unlike 1 + erf.
    return 0.5 * std::erfc(-z / kSqrt2);
}

double lambert_w0(double x) {
    constexpr double kBranch = -0.36787944117144232160;  // -1/e
    if (std::isnan(x) || x < kBranch) {
        throw std::domain_error("lambert_w0: argument below -1/e: " + std::to_string(x));
    }
    if (x == 0.0) return 0.0;
    if (std::isinf(x)) return x;

    double w;
    if (x < -0.3) {
        // Series about the branch point in p = sqrt(2(ex + 1)).
        const double p = std::sqrt(std::max(0.0, 2.0 * (std::exp(1.0) * x + 1.0)));
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    } else if (x < 3.0) {
        w = std::log1p(x);
        if (x > 0.0) w *= 1.0 - 0.25 * w / (1.0 + w);  // damp the log1p overshoot
    } else {
        const double l1 = std::log(x);
        const double l2 = std::log(l1);
        w = l1 - l2 + l2 / l1;
    }
    if (w <= -1.0) return -1.0;

    for (int iter = 0; iter < 50; ++iter) {
        const double ew = std::exp(w);
        const double f = w * ew - x;
        const double wp1 = w + 1.0;
        if (wp1 == 0.0) break;
        // Halley step
        const double denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        const double step = f / denom;
        w -= step;
        if (w < -1.0) w = -1.0;
        if (std::abs(step) <= 1e-15 * (1.0 + std::abs(w))) break;
    }
    return w;
}

std::uint64_t hermite_term_count(unsigned i, unsigned q) {
    if (2 * i > q) {
        throw std::domain_error("hermite_term_count: need 2i <= q (i=" + std::to_string(i) +
                                ", q=" + std::to_string(q) + ")");
    }
    // C(q, 2i) * (2i - 1)!!, both built incrementally in exact integers.
    std::uint64_t binom = 1;
    for (unsigned k = 1; k <= 2 * i; ++k) {
        binom = binom * (q - 2 * i + k) / k;
    }
    std::uint64_t double_fact = 1;
    for (unsigned k = 1; k < 2 * i; k += 2) {
        double_fact *= k;
    }
    return binom * double_fact;
}

double inverse_mills_ratio(double a) {
    const double tail = std_normal_cdf(-a);
    if (a < 25.0 && tail > 0.0) {
        return std_normal_pdf(a) / tail;
    }
    // Continued fraction a + 1/(a + 2/(a + 3/(a + ...))) for the far upper tail.
    double cf = a;
    for (int k = 40; k >= 1; --k) {
        cf = a + k / cf;
    }
    return cf;
}

TruncGainMoments trunc_gain_moments(double mean, double variance, double lower) {
    if (!(variance > 0.0)) {
        throw std::domain_error("trunc_gain_moments: variance must be positive");
    }
    const double sd = std::sqrt(variance);
    const double alpha = (lower - mean) / sd;
    if (alpha < -38.0) {
        return {mean, variance};
    }
    const double lam = inverse_mills_ratio(alpha);
    TruncGainMoments out;
    out.mean = mean + sd * lam;
    out.variance = std::max(0.0, variance * (1.0 + alpha * lam - lam * lam));
    return out;
}

}  // namespace sbo::math
