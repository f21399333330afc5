#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace sbo {

using Rng = std::mt19937_64;

enum class KernelFamily { rbf, matern12, matern32, matern52, rational_quadratic };

/// Marker for kernels whose radial profile is differentiable to every order.
inline constexpr unsigned kUnboundedSmoothness = std::numeric_limits<unsigned>::max();

/// Isotropic kernel K(x, x') = kappa(0.5 * |x - x'|^2).
///
/// `param` is the length parameter: gamma for RBF, rho for Matern, theta for
/// the rational quadratic kernel.
struct KernelSpec {
    KernelFamily family = KernelFamily::rbf;
    double param = 1.0;

    static KernelSpec rbf(double gamma) { return {KernelFamily::rbf, gamma}; }
    static KernelSpec matern12(double rho) { return {KernelFamily::matern12, rho}; }
    static KernelSpec matern32(double rho) { return {KernelFamily::matern32, rho}; }
    static KernelSpec matern52(double rho) { return {KernelFamily::matern52, rho}; }
    static KernelSpec rational_quadratic(double theta) {
        return {KernelFamily::rational_quadratic, theta};
    }

    /// Effective differentiability s of kappa (kUnboundedSmoothness for RBF and RQ).
    [[nodiscard]] unsigned smoothness() const;
    [[nodiscard]] bool finite_smoothness() const { return smoothness() != kUnboundedSmoothness; }
    /// Matern order d for nu = d + 1/2; throws for non-Matern families.
    [[nodiscard]] unsigned matern_order() const;
    [[nodiscard]] bool is_matern() const;
    [[nodiscard]] std::string family_name() const;

    bool operator==(const KernelSpec&) const = default;
};

KernelFamily parse_kernel_family(const std::string& name);

struct KernelVerdict {
    bool accepted = false;
    std::string reason;
};

/// Decides whether a kernel admits the finite length-scale constants the
/// stability bounds need.
KernelVerdict validate_kernel(const KernelSpec& spec);

/// kappa(r).
double kappa(const KernelSpec& spec, double r);

/// q-th derivative of kappa at r. Throws std::domain_error for r < 0 or q > s.
double kappa_deriv(const KernelSpec& spec, double r, unsigned q);

/// K(x, x2). Throws std::invalid_argument on dimension mismatch.
double kernel_eval(const KernelSpec& spec, std::span<const double> x, std::span<const double> x2);

/// Order-q derivative tensor in vectorised Kronecker layout: multi-index
/// (i_0, ..., i_{q-1}) lives at sum_k i_k n^{q-1-k}.
struct DerivTensor {
    unsigned order = 0;
    std::size_t dim = 1;
    std::vector<double> values;

    [[nodiscard]] double at(std::span<const std::size_t> multi_index) const;
};

/// One summand of a_{(i,q)}: `labels[k] == 0` puts the difference vector in
/// slot k, equal positive labels mark the two slots of a Kronecker-delta pair.
/// Pairs are numbered in order of their first slot.
using PairPlacement = std::vector<unsigned>;

/// All canonical placements of i delta pairs among q slots.
std::vector<PairPlacement> pair_placements(unsigned i, unsigned q);

/// Mixed Kronecker derivative of K(x, x2) of total order q, of which `alpha`
/// factors differentiate with respect to x2.
///
/// At coincident points only the all-pairs term survives, so there the order
/// may go up to 2s; this is what the gradient-posterior prior block needs.
DerivTensor kron_deriv(const KernelSpec& spec, std::span<const double> x,
                       std::span<const double> x2, unsigned q, unsigned alpha);

struct DeltaEstimation {
    std::size_t samples_a = 1000;  // R_A
    std::size_t samples_b = 100;   // R_B
    std::uint64_t seed = 0x5eed'de17aULL;
};

/// L_up, L_down and the intrinsic Taylor-remainder bound Delta(dr).
struct KernelConstants {
    double l_up = 0.0;
    double l_down = 0.0;
    std::function<double(double)> delta_of;
};

/// Throws std::invalid_argument for kernels validate_kernel rejects or M <= 0.
KernelConstants kernel_constants(const KernelSpec& spec, double M,
                                 const DeltaEstimation& estimation = {});

/// |kappa(r + dr) - sum_{q<=s} dr^q/q! kappa^{(q)}(r)|.
double taylor_remainder(const KernelSpec& spec, double r, double dr);

/// Monte-Carlo estimate of Delta_r(dr): max of the Taylor remainder over dr
/// and `samples` uniform points in [0, dr]. Zero for kernels with unbounded s.
double estimate_delta_r(const KernelSpec& spec, double r, double dr, std::size_t samples, Rng& rng);

/// Monte-Carlo estimate of Delta(dr) = sup_{r in [0, M^2/2]} Delta_r(dr) / kappa(r).
double estimate_delta(const KernelSpec& spec, double M, double dr, std::size_t samples_a,
                      std::size_t samples_b, Rng& rng);

}  // namespace sbo
