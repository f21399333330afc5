#include "sbo/bench.hpp"

#include "sbo/sampling.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sbo {

namespace {

constexpr double kBumpWidth = 0.03535;
constexpr double kHeights[6] = {1.0, 4.0, 1.0, 1.0, 0.7, 1.05};
constexpr double kCentres[6] = {1.0 / 8, 1.0 / 4, 3.0 / 8, 1.0 / 2, 5.0 / 8, 4.0 / 5};

double quantile(std::vector<double> v, double p) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace

double synthetic_objective(double x) {
    double total = 0.0;
    for (int i = 0; i < 6; ++i) {
        const double d = x - kCentres[i];
        total += kHeights[i] * std::exp(-d * d / (2.0 * kBumpWidth * kBumpWidth));
    }
    return total;
}

double synthetic_objective(std::span<const double> x) {
    if (x.size() != 1) throw std::invalid_argument("synthetic1d is one-dimensional");
    return synthetic_objective(x[0]);
}

std::optional<Objective> builtin_objective(const std::string& name) {
    if (name == "synthetic1d") {
        return Objective([](std::span<const double> x) { return synthetic_objective(x); });
    }
    return std::nullopt;
}

OptConfig synthetic_config(AcqKind kind, std::uint64_t seed) {
    OptConfig c;
    c.bounds = Bounds{{0.0}, {1.0}};
    c.kernel = KernelSpec::rbf(kBumpWidth);
    c.noise_var = 1e-4;
    c.observation_noise = 0.01;
    c.stability.A = 0.2;
    c.stability.B = 0.0125;
    c.stability.policy_gamma = 0.0;
    c.stability.p_max = 3;
    c.stability.G = 1.0;
    c.stability.eps = 0.1867;
    c.acq.kind = kind;
    c.budget = 50;
    c.seed = seed;
    c.objective = "synthetic1d";
    return c;
}

MapMode parse_map_mode(const std::string& name) {
    if (name == "oracle") return MapMode::oracle;
    if (name == "gp_score" || name == "gp") return MapMode::gp_score;
    throw std::invalid_argument("unknown map mode '" + name + "' (expected oracle or gp_score)");
}

std::string map_mode_name(MapMode mode) { return mode == MapMode::oracle ? "oracle" : "gp_score"; }

std::vector<Point> linear_grid(double lo, double hi, std::size_t count) {
    std::vector<Point> out;
    for (std::size_t k = 0; k < count; ++k) {
        const double t = count == 1 ? 0.0 : static_cast<double>(k) / static_cast<double>(count - 1);
        out.push_back({k + 1 == count && count > 1 ? hi : lo + t * (hi - lo)});
    }
    return out;
}

std::vector<MapRow> stability_map_oracle(const Objective& f, const std::vector<Point>& grid, double A, double B,
                                         std::size_t perturbations) {
    std::vector<MapRow> rows;
    rows.reserve(grid.size());
    for (const auto& x : grid) {
        MapRow r;
        r.x = x;
        r.stable = ab_stability_oracle(f, x, A, B, perturbations);
        r.score = r.stable ? 1.0 : 0.0;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<MapRow> stability_map_scores(const Posterior& post, const std::vector<Point>& grid,
                                         const StabilityScorer& scorer) {
    std::vector<MapRow> rows;
    rows.reserve(grid.size());
    for (const auto& x : grid) {
        MapRow r;
        r.x = x;
        r.per_order = scorer.per_order(post, x);
        r.score = 1.0;
        for (double s : r.per_order) r.score *= s;
        r.stable = r.score >= 0.5;
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<MapRow> stability_map_dense(const Objective& f, const Bounds& bounds, std::size_t count,
                                        const std::vector<Point>& grid, const StabilityParams& params,
                                        const KernelSpec& kernel, std::size_t n_samples, std::uint64_t seed) {
    if (bounds.dim() != 1) throw std::invalid_argument("dense maps are one-dimensional");
    Dataset data;
    for (const auto& x : linear_grid(bounds.lower[0], bounds.upper[0], count)) data.add(x, f(x));
    const Posterior post(data, kernel, 1);
    const StabilityScorer scorer(params, 1, n_samples, seed);
    return stability_map_scores(post, grid, scorer);
}

std::string map_csv(const std::vector<MapRow>& rows, std::size_t dim, std::size_t orders) {
    std::ostringstream out;
    for (std::size_t k = 0; k < dim; ++k) out << (k ? "," : "") << 'x' << k;
    out << ",score,stable";
    for (std::size_t q = 1; q <= orders; ++q) out << ",score_q" << q;
    out << '\n';
    for (const auto& r : rows) {
        for (std::size_t k = 0; k < dim; ++k) out << (k ? "," : "") << format_double(r.x[k]);
        out << ',' << format_double(r.score) << ',' << (r.stable ? 1 : 0);
        for (std::size_t q = 0; q < orders; ++q) {
            out << ',' << (q < r.per_order.size() ? format_double(r.per_order[q]) : std::string());
        }
        out << '\n';
    }
    return out.str();
}

std::uint64_t repeat_seed(std::uint64_t master, std::size_t r) { return derive_seed(master, 0x52455045ULL + r); }

std::vector<KindSummary> run_experiment(const ExperimentConfig& cfg) {
    if (cfg.repeats < 1) throw std::invalid_argument("repeats must be at least 1");
    if (cfg.budget < 1) throw std::invalid_argument("budget must be at least 1");
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<KindSummary> summaries;
    nlohmann::json summary_json;
    summary_json["repeats"] = cfg.repeats;
    summary_json["budget"] = cfg.budget;
    summary_json["seed"] = cfg.seed;
    summary_json["target"] = cfg.target;
    summary_json["tolerance"] = cfg.tolerance;
    summary_json["min_value"] = cfg.min_value;
    summary_json["kinds"] = nlohmann::json::object();

    for (AcqKind kind : cfg.kinds) {
        KindSummary ks;
        ks.kind = kind;
        std::ostringstream conv, recs;
        conv << "repeat,iter,f_rec\n";
        recs << "repeat,seed,x_star,f_star,oracle_stable,no_stable_point,success\n";
        std::vector<double> xs, fs;
        for (std::size_t r = 0; r < cfg.repeats; ++r) {
            OptConfig oc = synthetic_config(kind, repeat_seed(cfg.seed, r));
            oc.budget = cfg.budget;
            const RunResult res = run(oc, *builtin_objective("synthetic1d"));

            RepeatOutcome out;
            out.repeat = r;
            out.seed = oc.seed;
            out.x_star = res.recommendation.x;
            out.f_star = synthetic_objective(out.x_star);
            out.no_stable_point = res.recommendation.no_stable_point;
            out.oracle_stable = ab_stability_oracle(*builtin_objective("synthetic1d"), out.x_star, oc.stability.A,
                                                    oc.stability.B, 401);
            for (const auto& row : res.trace) out.convergence.push_back(synthetic_objective(row.rec_x));
            const bool success =
                std::abs(out.x_star[0] - cfg.target) <= cfg.tolerance && out.f_star >= cfg.min_value;
            if (success) ++ks.successes;

            for (std::size_t t = 0; t < out.convergence.size(); ++t) {
                conv << r << ',' << t + 1 << ',' << format_double(out.convergence[t]) << '\n';
            }
            recs << r << ',' << out.seed << ',' << format_double(out.x_star[0]) << ',' << format_double(out.f_star)
                 << ',' << (out.oracle_stable ? 1 : 0) << ',' << (out.no_stable_point ? 1 : 0) << ','
                 << (success ? 1 : 0) << '\n';
            xs.push_back(out.x_star[0]);
            fs.push_back(out.f_star);
            ks.repeats.push_back(std::move(out));
        }
        ks.median_x = quantile(xs, 0.5);
        ks.median_f = quantile(fs, 0.5);

        std::ostringstream box;
        box << "statistic,x_star,f_star\n";
        const std::pair<const char*, double> stats[] = {
            {"min", 0.0}, {"q1", 0.25}, {"median", 0.5}, {"q3", 0.75}, {"max", 1.0}};
        for (const auto& [name, p] : stats) {
            box << name << ',' << format_double(quantile(xs, p)) << ',' << format_double(quantile(fs, p)) << '\n';
        }

        const std::string name = acq_kind_name(kind);
        write_file(cfg.out_dir / (name + "_convergence.csv"), conv.str());
        write_file(cfg.out_dir / (name + "_recommendations.csv"), recs.str());
        write_file(cfg.out_dir / (name + "_boxplot.csv"), box.str());
        summary_json["kinds"][name] = {{"successes", ks.successes},
                                       {"repeats", cfg.repeats},
                                       {"median_x_star", ks.median_x},
                                       {"median_f_star", ks.median_f}};
        summaries.push_back(std::move(ks));
    }
    write_file(cfg.out_dir / "summary.json", summary_json.dump(2) + "\n");
    return summaries;
}

}  // namespace sbo
