#pragma once

#include <cstdint>

namespace sbo::math {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

/// Standard normal density.
double std_normal_pdf(double z);

/// Standard normal distribution function, accurate in both tails.
double std_normal_cdf(double z);

/// Principal branch W0 of the Lambert W function, defined for x >= -1/e.
/// Throws std::domain_error below the branch point.
double lambert_w0(double x);

/// Number of pair/singleton placements q!/(2^i i! (q-2i)!) -- the magnitude of
/// the x^{q-2i} coefficient of the probabilists' Hermite polynomial He_q.
/// Exact for q <= 20. Throws std::domain_error when 2i > q.
std::uint64_t hermite_term_count(unsigned i, unsigned q);

/// Moments of N(mean, variance) truncated to (lower, inf).
struct TruncGainMoments {
    double mean = 0.0;
    double variance = 0.0;
};

TruncGainMoments trunc_gain_moments(double mean, double variance, double lower);

/// Inverse Mills ratio phi(a) / (1 - Phi(a)), stable for large a.
double inverse_mills_ratio(double a);

}  // namespace sbo::math
