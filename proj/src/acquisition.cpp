#include "sbo/acquisition.hpp"

#include "sbo/mathcore.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sbo {

AcqKind parse_acq_kind(const std::string& name) {
    if (name == "ei") return AcqKind::ei;
    if (name == "ucb") return AcqKind::ucb;
    if (name == "eisg") return AcqKind::eisg;
    if (name == "ucbsg") return AcqKind::ucbsg;
    throw std::invalid_argument("unknown acquisition kind '" + name + "' (expected ei, ucb, eisg or ucbsg)");
}

std::string acq_kind_name(AcqKind kind) {
    switch (kind) {
        case AcqKind::ei: return "ei";
        case AcqKind::ucb: return "ucb";
        case AcqKind::eisg: return "eisg";
        case AcqKind::ucbsg: return "ucbsg";
    }
    return "unknown";
}

bool is_stability_aware(AcqKind kind) { return kind == AcqKind::eisg || kind == AcqKind::ucbsg; }

double BetaSchedule::operator()(std::size_t t) const {
    if (constant) return *constant;
    const double tp1 = static_cast<double>(t) + 1.0;
    return std::max(0.0, 2.0 * std::log(tp1 * tp1 * math::kPi * math::kPi / (6.0 * delta)));
}

ScoredDataset make_scored_dataset(std::span<const double> y, std::span<const double> scores, double lower) {
    if (y.size() != scores.size()) throw std::invalid_argument("scored dataset: y and scores lengths differ");
    for (double s : scores) {
        if (!(s >= 0.0 && s <= 1.0)) throw std::invalid_argument("scored dataset: scores must lie in [0, 1]");
    }
    ScoredDataset sd;
    sd.lower = lower;
    sd.order.resize(y.size());
    std::iota(sd.order.begin(), sd.order.end(), std::size_t{0});
    std::stable_sort(sd.order.begin(), sd.order.end(), [&](std::size_t a, std::size_t b) { return y[a] < y[b]; });
    for (std::size_t idx : sd.order) {
        sd.y.push_back(y[idx]);
        sd.scores.push_back(scores[idx]);
    }
    return sd;
}

double gain(const ScoredDataset& sd) {
    double best = sd.lower;
    for (double v : sd.y) best = std::max(best, v);
    return best - sd.lower;
}

std::vector<double> eisg_weights(const ScoredDataset& sd) {
    const std::size_t N = sd.y.size();
    std::vector<double> w(N + 1);
    w[N] = 1.0;
    for (std::size_t i = N; i-- > 0;) w[i] = w[i + 1] * (1.0 - sd.scores[i]);
    return w;
}

double expected_stable_gain(const ScoredDataset& sd) {
    const auto w = eisg_weights(sd);
    double total = 0.0;
    double prev = sd.lower;
    for (std::size_t i = 0; i < sd.y.size(); ++i) {
        const double yi = std::max(sd.y[i], sd.lower);
        total += (yi - prev) * (1.0 - w[i]);
        prev = yi;
    }
    return total;
}

double ei_value(double mean, double var, double y_plus) {
    if (!(var > 0.0)) return std::max(0.0, mean - y_plus);
    const double sd = std::sqrt(var);
    const double z = (mean - y_plus) / sd;
    return std::max(0.0, sd * (z * math::std_normal_cdf(z) + math::std_normal_pdf(z)));
}

double ucb_value(double mean, double var, double beta) {
    return mean + std::sqrt(std::max(0.0, beta)) * std::sqrt(std::max(0.0, var));
}

double eisg_value(double mean, double var, const ScoredDataset& sd, double score_x) {
    if (score_x <= 0.0) return 0.0;
    const std::size_t N = sd.y.size();
    const auto w = eisg_weights(sd);
    std::vector<double> y(N);
    for (std::size_t i = 0; i < N; ++i) y[i] = std::max(sd.y[i], sd.lower);

    if (!(var > 0.0)) {
        // Point mass at the mean: integrate the improvement directly.
        double improvement = 0.0;
        double prev = sd.lower;
        for (std::size_t k = 0; k <= N && mean > prev; ++k) {
            const double top = k < N ? y[k] : std::numeric_limits<double>::infinity();
            improvement += w[k] * (std::min(mean, top) - prev);
            prev = top;
        }
        return score_x * improvement;
    }

    const double sd_f = std::sqrt(var);
    // z_{k-1} for the lower edge of bin k; z_N = -inf closes the last bin.
    double z_prev = (mean - sd.lower) / sd_f;
    double cdf_prev = math::std_normal_cdf(z_prev);
    double pdf_prev = math::std_normal_pdf(z_prev);
    double below = 0.0;  // sum_{i<k} omega_i dy_i, in units of sd_f
    double total = 0.0;
    double prev_y = sd.lower;
    for (std::size_t k = 0; k <= N; ++k) {
        double cdf_k = 0.0, pdf_k = 0.0, z_k = -std::numeric_limits<double>::infinity();
        if (k < N) {
            z_k = (mean - y[k]) / sd_f;
            cdf_k = math::std_normal_cdf(z_k);
            pdf_k = math::std_normal_pdf(z_k);
        }
        const double dcdf = cdf_prev - cdf_k;
        const double dpdf = pdf_prev - pdf_k;
        const double term = dcdf * below + w[k] * (z_prev * dcdf + dpdf);
        total += std::max(0.0, term);
        if (k < N) {
            below += w[k] * (y[k] - prev_y) / sd_f;
            prev_y = y[k];
        }
        z_prev = z_k;
        cdf_prev = cdf_k;
        pdf_prev = pdf_k;
    }
    return sd_f * score_x * total;
}

double acq_ei(const Posterior& post, std::span<const double> x, double y_plus) {
    const auto p = post.predict(x);
    return ei_value(p.mean, p.var, y_plus);
}

double acq_ucb(const Posterior& post, std::span<const double> x, double beta) {
    const auto p = post.predict(x);
    return ucb_value(p.mean, p.var, beta);
}

double acq_eisg(const Posterior& post, const ScoredDataset& sd, std::span<const double> x, double score_x) {
    const auto p = post.predict(x);
    return eisg_value(p.mean, p.var, sd, score_x);
}

double acq_ucbsg(const Posterior& post, std::span<const double> x, double beta, double score_x) {
    return score_x * acq_ucb(post, x, beta);
}

}  // namespace sbo
