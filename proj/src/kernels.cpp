#include "sbo/kernels.hpp"

#include "sbo/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sbo {
namespace {

// Length-scale ratio constants beta_d scaled as in the Matern lower bounds.
constexpr double kMaternLowerFactor[] = {0.3764, 0.7528, 0.5018};

double matern_nu(unsigned d) { return d + 0.5; }

// Normalised half-integer Matern profile g_{d+1/2}(z), g(0) = 1.
double matern_profile(unsigned d, double z) {
    // d!/(2d)! sum_i (d+i)!/(i!(d-i)!) (2z)^{d-i}
    double poly = 0.0;
    for (unsigned i = 0; i <= d; ++i) {
        double coeff = 1.0;
        for (unsigned k = d - i + 1; k <= d + i; ++k) coeff *= k;  // (d+i)!/(d-i)!
        for (unsigned k = 2; k <= i; ++k) coeff /= k;
        poly += coeff * std::pow(2.0 * z, static_cast<double>(d - i));
    }
    double norm = 1.0;
    for (unsigned k = d + 1; k <= 2 * d; ++k) norm /= k;  // d!/(2d)!
    return std::exp(-z) * norm * poly;
}

// Argument of the Matern profile for smoothness nu at radius r = |x-x'|^2/2.
double matern_arg(double nu, double rho, double r) {
    return std::sqrt(2.0 * nu) * std::sqrt(2.0 * r) / rho;
}

double factorial(unsigned q) {
    double f = 1.0;
    for (unsigned k = 2; k <= q; ++k) f *= k;
    return f;
}

void require_dims(std::span<const double> x, std::span<const double> x2) {
    if (x.size() != x2.size()) {
        throw std::invalid_argument("kernel: dimension mismatch (" + std::to_string(x.size()) +
                                    " vs " + std::to_string(x2.size()) + ")");
    }
}

void place_pairs(unsigned q, unsigned pairs_left, PairPlacement& labels, unsigned next_label,
                 unsigned zeros_left, std::size_t pos, std::vector<PairPlacement>& out) {
    // Walk slots left to right; a slot is a d-slot, closes an open pair, or opens a new pair.
    while (pos < q && labels[pos] != 0 && labels[pos] != static_cast<unsigned>(-1)) ++pos;
    if (pos == q) {
        out.push_back(labels);
        return;
    }
    if (zeros_left > 0) {
        labels[pos] = 0;
        place_pairs(q, pairs_left, labels, next_label, zeros_left - 1, pos + 1, out);
        labels[pos] = static_cast<unsigned>(-1);
    }
    if (pairs_left > 0) {
        labels[pos] = next_label;
        for (std::size_t partner = pos + 1; partner < q; ++partner) {
            if (labels[partner] != static_cast<unsigned>(-1)) continue;
            labels[partner] = next_label;
            place_pairs(q, pairs_left - 1, labels, next_label + 1, zeros_left, pos + 1, out);
            labels[partner] = static_cast<unsigned>(-1);
        }
        labels[pos] = static_cast<unsigned>(-1);
    }
}

}  // namespace

unsigned KernelSpec::smoothness() const {
    switch (family) {
        case KernelFamily::matern12: return 0;
        case KernelFamily::matern32: return 1;
        case KernelFamily::matern52: return 2;
        case KernelFamily::rbf:
        case KernelFamily::rational_quadratic: return kUnboundedSmoothness;
    }
    return kUnboundedSmoothness;
}

bool KernelSpec::is_matern() const {
    return family == KernelFamily::matern12 || family == KernelFamily::matern32 ||
           family == KernelFamily::matern52;
}

unsigned KernelSpec::matern_order() const {
    if (!is_matern()) throw std::logic_error("matern_order on a non-Matern kernel");
    return smoothness();
}

std::string KernelSpec::family_name() const {
    switch (family) {
        case KernelFamily::rbf: return "rbf";
        case KernelFamily::matern12: return "matern12";
        case KernelFamily::matern32: return "matern32";
        case KernelFamily::matern52: return "matern52";
        case KernelFamily::rational_quadratic: return "rational_quadratic";
    }
    return "unknown";
}

KernelFamily parse_kernel_family(const std::string& name) {
    if (name == "rbf") return KernelFamily::rbf;
    if (name == "matern12" || name == "matern1/2") return KernelFamily::matern12;
    if (name == "matern32" || name == "matern3/2") return KernelFamily::matern32;
    if (name == "matern52" || name == "matern5/2") return KernelFamily::matern52;
    if (name == "rational_quadratic" || name == "rq") return KernelFamily::rational_quadratic;
    throw std::invalid_argument("unknown kernel family '" + name + "'");
}

KernelVerdict validate_kernel(const KernelSpec& spec) {
    if (!(spec.param > 0.0) || !std::isfinite(spec.param)) {
        return {false, "kernel length parameter must be positive and finite"};
    }
    if (spec.family == KernelFamily::rational_quadratic) {
        return {false,
                "rational quadratic kernel rejected: (q!)^(1/q) * 2/(2r + theta) grows without "
                "bound in q, so no finite L_up/L_down exist and the remainder bound diverges"};
    }
    return {true, "accepted"};
}

double kappa(const KernelSpec& spec, double r) {
    if (r < 0.0) throw std::domain_error("kappa: r must be non-negative");
    const double p = spec.param;
    switch (spec.family) {
        case KernelFamily::rbf: return std::exp(-r / (p * p));
        case KernelFamily::rational_quadratic: return p / (2.0 * r + p);
        default: {
            const unsigned d = spec.matern_order();
            return matern_profile(d, matern_arg(matern_nu(d), p, r));
        }
    }
}

double kappa_deriv(const KernelSpec& spec, double r, unsigned q) {
    if (r < 0.0) throw std::domain_error("kappa_deriv: r must be non-negative");
    if (spec.finite_smoothness() && q > spec.smoothness()) {
        throw std::domain_error("kappa_deriv: order " + std::to_string(q) +
                                " exceeds kernel smoothness " + std::to_string(spec.smoothness()));
    }
    if (q == 0) return kappa(spec, r);
    const double p = spec.param;
    const double sign = (q % 2 == 0) ? 1.0 : -1.0;
    switch (spec.family) {
        case KernelFamily::rbf: return sign * std::pow(p * p, -static_cast<double>(q)) * kappa(spec, r);
        case KernelFamily::rational_quadratic:
            return sign * std::pow(2.0, q) * factorial(q) * p / std::pow(2.0 * r + p, q + 1.0);
        default: {
            // kappa^{(q)} = (-nu/rho^2)^q Gamma(nu-q)/Gamma(nu) g_{nu-q}(z), z fixed by nu.
            const unsigned d = spec.matern_order();
            const double nu = matern_nu(d);
            double coeff = sign;
            for (unsigned k = 1; k <= q; ++k) coeff *= (nu / (p * p)) / (nu - k);
            return coeff * matern_profile(d - q, matern_arg(nu, p, r));
        }
    }
}

double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x2) {
    require_dims(x, x2);
    double sq = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double diff = x[k] - x2[k];
        sq += diff * diff;
    }
    return kappa(spec, 0.5 * sq);
}

double DerivTensor::at(std::span<const std::size_t> multi_index) const {
    if (multi_index.size() != order) throw std::invalid_argument("DerivTensor::at: wrong rank");
    std::size_t flat = 0;
    for (std::size_t idx : multi_index) flat = flat * dim + idx;
    return values.at(flat);
}

std::vector<PairPlacement> pair_placements(unsigned i, unsigned q) {
    if (2 * i > q) throw std::domain_error("pair_placements: need 2i <= q");
    std::vector<PairPlacement> out;
    PairPlacement labels(q, static_cast<unsigned>(-1));
    place_pairs(q, i, labels, 1, q - 2 * i, 0, out);
    return out;
}

DerivTensor kron_deriv(const KernelSpec& spec, std::span<const double> x,
                       std::span<const double> x2, unsigned q, unsigned alpha) {
    require_dims(x, x2);
    if (alpha > q) throw std::invalid_argument("kron_deriv: alpha must lie in [0, q]");
    const std::size_t n = x.size();

    std::vector<double> diff(n);
    double sq = 0.0;
    bool coincident = true;
    for (std::size_t k = 0; k < n; ++k) {
        diff[k] = x[k] - x2[k];
        sq += diff[k] * diff[k];
        coincident = coincident && diff[k] == 0.0;
    }
    const double r = 0.5 * sq;

    const unsigned s = spec.smoothness();
    if (spec.finite_smoothness()) {
        const bool ok = coincident ? (q / 2 <= s) : (q <= s);
        if (!ok) {
            throw std::domain_error("kron_deriv: order " + std::to_string(q) +
                                    " exceeds kernel smoothness " + std::to_string(s));
        }
    }

    DerivTensor out;
    out.order = q;
    out.dim = n;
    std::size_t total = 1;
    for (unsigned k = 0; k < q; ++k) total *= n;
    out.values.assign(total, 0.0);

    const double sign = (alpha % 2 == 0) ? 1.0 : -1.0;
    if (n == 1) {
        double acc = 0.0;
        for (unsigned i = 0; i <= q / 2; ++i) {
            if (coincident && 2 * i != q) continue;
            acc += static_cast<double>(math::hermite_term_count(i, q)) *
                   std::pow(diff[0], static_cast<int>(q - 2 * i)) * kappa_deriv(spec, r, q - i);
        }
        out.values[0] = sign * acc;
        return out;
    }
    std::vector<std::size_t> index(q, 0);
    for (unsigned i = 0; i <= q / 2; ++i) {
        // Terms carrying a difference-vector factor vanish at coincident points.
        if (coincident && 2 * i != q) continue;
        const double kd = kappa_deriv(spec, r, q - i);
        if (kd == 0.0) continue;
        const auto placements = pair_placements(i, q);
        std::fill(index.begin(), index.end(), 0);
        for (std::size_t flat = 0; flat < total; ++flat) {
            double acc = 0.0;
            for (const auto& labels : placements) {
                double term = 1.0;
                for (unsigned k = 0; k < q && term != 0.0; ++k) {
                    if (labels[k] == 0) {
                        term *= diff[index[k]];
                    } else {
                        // first slot of the pair checks its partner
                        for (unsigned m = k + 1; m < q; ++m) {
                            if (labels[m] == labels[k]) {
                                if (index[m] != index[k]) term = 0.0;
                                break;
                            }
                        }
                    }
                }
                acc += term;
            }
            out.values[flat] += sign * kd * acc;
            for (std::size_t pos = q; pos-- > 0;) {
                if (++index[pos] < n) break;
                index[pos] = 0;
            }
        }
    }

    // Copy each entry from its sorted multi-index so permuted entries agree bitwise.
    std::vector<std::size_t> sorted(q);
    std::fill(index.begin(), index.end(), 0);
    for (std::size_t flat = 0; flat < total; ++flat) {
        sorted = index;
        std::sort(sorted.begin(), sorted.end());
        std::size_t canonical = 0;
        for (std::size_t idx : sorted) canonical = canonical * n + idx;
        out.values[flat] = out.values[canonical];
        for (std::size_t pos = q; pos-- > 0;) {
            if (++index[pos] < n) break;
            index[pos] = 0;
        }
    }
    return out;
}

double taylor_remainder(const KernelSpec& spec, double r, double dr) {
    const unsigned s = spec.smoothness();
    if (!spec.finite_smoothness()) return 0.0;
    double series = 0.0;
    double power = 1.0;
    for (unsigned q = 0; q <= s; ++q) {
        series += power / factorial(q) * kappa_deriv(spec, r, q);
        power *= dr;
    }
    return std::abs(kappa(spec, r + dr) - series);
}

double estimate_delta_r(const KernelSpec& spec, double r, double dr, std::size_t samples, Rng& rng) {
    if (r < 0.0 || dr < 0.0) throw std::domain_error("estimate_delta_r: r and dr must be non-negative");
    if (!spec.finite_smoothness() || dr == 0.0) return 0.0;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double best = taylor_remainder(spec, r, dr);
    for (std::size_t k = 0; k < samples; ++k) {
        best = std::max(best, taylor_remainder(spec, r, unit(rng) * dr));
    }
    return best;
}

double estimate_delta(const KernelSpec& spec, double M, double dr, std::size_t samples_a,
                      std::size_t samples_b, Rng& rng) {
    if (!(M > 0.0)) throw std::domain_error("estimate_delta: M must be positive");
    if (!spec.finite_smoothness() || dr == 0.0) return 0.0;
    const double r_max = 0.5 * M * M;
    std::uniform_real_distribution<double> radius(0.0, r_max);
    // The sampled radii are drawn first so that the R_A pool per radius is
    // independent of R_B.
    std::vector<double> radii(samples_b);
    for (auto& rr : radii) rr = radius(rng);
    radii.push_back(0.0);
    radii.push_back(r_max);
    double best = 0.0;
    for (double rr : radii) {
        best = std::max(best, estimate_delta_r(spec, rr, dr, samples_a, rng) / kappa(spec, rr));
    }
    return best;
}

KernelConstants kernel_constants(const KernelSpec& spec, double M, const DeltaEstimation& estimation) {
    const auto verdict = validate_kernel(spec);
    if (!verdict.accepted) throw std::invalid_argument(verdict.reason);
    if (!(M > 0.0)) throw std::invalid_argument("kernel_constants: M must be positive");

    KernelConstants out;
    const double p = spec.param;
    if (spec.family == KernelFamily::rbf) {
        out.l_up = out.l_down = 1.0 / (p * p);
        out.delta_of = [](double) { return 0.0; };
        return out;
    }

    const unsigned d = spec.matern_order();
    const double nu = matern_nu(d);
    const double r_far = 0.5 * M * M;

    // Tabulated constants: each profile kappa_{nu-c} carries its own sqrt(2(nu-c)) scaling.
    double ratio_max = 1.0;
    for (unsigned c = 0; c <= d; ++c) {
        const double lower = matern_profile(d - c, matern_arg(matern_nu(d - c), p, r_far));
        const double upper = matern_profile(d, matern_arg(nu, p, r_far));
        ratio_max = std::max(ratio_max, lower / upper);
    }
    const double scale = std::sqrt(nu) / (2.0 * p);
    out.l_up = scale * ratio_max;
    out.l_down = kMaternLowerFactor[d] * scale;

    // Widen to the exact derivative ratios |kappa^{(q)}|/kappa over [0, M^2/2].
    constexpr int kGrid = 512;
    for (unsigned q = 1; q <= d; ++q) {
        for (int g = 0; g <= kGrid; ++g) {
            const double r = r_far * g / kGrid;
            const double ratio = std::abs(kappa_deriv(spec, r, q)) / kappa(spec, r);
            const double root = std::pow(ratio, 1.0 / q);
            out.l_up = std::max(out.l_up, root);
            out.l_down = std::min(out.l_down, root);
        }
    }

    out.delta_of = [spec, M, estimation](double dr) {
        Rng rng(estimation.seed);
        return estimate_delta(spec, M, dr, estimation.samples_a, estimation.samples_b, rng);
    };
    return out;
}

}  // namespace sbo
