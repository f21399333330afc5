#include "sbo/optimizer.hpp"

#include "sbo/sampling.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

namespace sbo {

namespace {

constexpr std::uint64_t kScorerStream = 0x53434f5245ULL;
constexpr std::uint64_t kDesignStream = 0x44455349474eULL;
constexpr std::uint64_t kStartsStream = 0x5354415254ULL;
constexpr std::uint64_t kNoiseStream = 0x4e4f495345ULL;

Point to_box(const Bounds& b, const std::vector<double>& unit) {
    Point x(unit.size());
    for (std::size_t k = 0; k < unit.size(); ++k) x[k] = b.lower[k] + unit[k] * (b.upper[k] - b.lower[k]);
    return x;
}

}  // namespace

double Bounds::diameter() const {
    double s = 0.0;
    for (std::size_t k = 0; k < lower.size(); ++k) s += (upper[k] - lower[k]) * (upper[k] - lower[k]);
    return std::sqrt(s);
}

bool Bounds::contains(std::span<const double> x) const {
    if (x.size() != dim()) return false;
    for (std::size_t k = 0; k < x.size(); ++k) {
        if (!(x[k] >= lower[k] && x[k] <= upper[k])) return false;
    }
    return true;
}

void Bounds::validate() const {
    if (lower.empty()) throw ConfigError("bounds required");
    if (lower.size() != upper.size()) throw ConfigError("bounds: lower and upper lengths differ");
    for (std::size_t k = 0; k < lower.size(); ++k) {
        if (!std::isfinite(lower[k]) || !std::isfinite(upper[k]) || !(upper[k] > lower[k])) {
            throw ConfigError("bounds: axis " + std::to_string(k) + " must satisfy lower < upper");
        }
    }
}

std::size_t AcqOptConfig::resolution_for(std::size_t dim) const {
    if (grid_resolution) return *grid_resolution;
    return dim == 1 ? 1001 : 101;
}

void OptConfig::validate() const {
    bounds.validate();
    if (!(kernel.param > 0.0) || !std::isfinite(kernel.param)) throw ConfigError("kernel param must be positive");
    if (!(noise_var >= 0.0) || !std::isfinite(noise_var)) throw ConfigError("noise_var must be non-negative");
    if (budget < 1) throw ConfigError("budget must be at least 1");
    if (!(stability.G > 0.0) || !std::isfinite(stability.G)) throw ConfigError("G required (positive RKHS norm bound)");
    if (acq_opt.grid_resolution && *acq_opt.grid_resolution < 2) throw ConfigError("grid_resolution must be >= 2");
    if (acq_opt.multistart_count < 1) throw ConfigError("multistart_count must be positive");
    if (mc.n_samples < 1 || mc.R_A < 1 || mc.R_B < 1) throw ConfigError("mc sample counts must be positive");
    if (!(observation_noise >= 0.0)) throw ConfigError("observation_noise must be non-negative");
    if (acq.beta.constant && !(*acq.beta.constant >= 0.0)) throw ConfigError("beta must be non-negative");
    if (!(acq.beta.delta > 0.0 && acq.beta.delta < 1.0)) throw ConfigError("beta delta must lie in (0, 1)");
    if (!std::isfinite(lower_bound)) throw ConfigError("lower_bound must be finite");
}

ParamSelection plan(const OptConfig& config) {
    config.validate();
    DeltaEstimation est;
    est.samples_a = config.mc.R_A;
    est.samples_b = config.mc.R_B;
    try {
        return select_params(config.stability, config.kernel, config.bounds.dim(), config.bounds.diameter(), est);
    } catch (const InadmissibleError&) {
        throw;
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

std::vector<Point> candidate_grid(const Bounds& bounds, std::size_t resolution) {
    const std::size_t n = bounds.dim();
    std::size_t total = 1;
    for (std::size_t k = 0; k < n; ++k) total *= resolution;
    std::vector<Point> out;
    out.reserve(total);
    std::vector<std::size_t> idx(n, 0);
    for (std::size_t c = 0; c < total; ++c) {
        Point x(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double t = static_cast<double>(idx[k]) / static_cast<double>(resolution - 1);
            x[k] = idx[k] + 1 == resolution ? bounds.upper[k] : bounds.lower[k] + t * (bounds.upper[k] - bounds.lower[k]);
        }
        out.push_back(std::move(x));
        // Last axis varies fastest.
        for (std::size_t k = n; k-- > 0;) {
            if (++idx[k] < resolution) break;
            idx[k] = 0;
        }
    }
    return out;
}

struct AskTellState::Context {
    const Posterior* post = nullptr;
    const StabilityScorer* scorer = nullptr;
    ScoredDataset sd;
    double beta = 0.0;
    double y_plus = 0.0;
    AcqKind kind = AcqKind::ucbsg;
};

AskTellState::AskTellState(OptConfig config) : config_(std::move(config)), selection_(plan(config_)) {
    data_.noise_var = config_.noise_var;
    refresh();
}

AskTellState::AskTellState(OptConfig config, Dataset data, std::vector<TraceRow> trace,
                           std::optional<Suggestion> pending)
    : config_(std::move(config)), selection_(plan(config_)), data_(std::move(data)), trace_(std::move(trace)),
      pending_(std::move(pending)) {
    data_.noise_var = config_.noise_var;
    data_.validate();
    if (!data_.empty() && data_.dim() != config_.bounds.dim()) {
        throw ConfigError("dataset dimension does not match bounds");
    }
    refresh();
}

void AskTellState::refresh() {
    const std::size_t dim = config_.bounds.dim();
    posterior_ = std::make_shared<const Posterior>(data_, config_.kernel, dim);
    scorer_ = std::make_shared<const StabilityScorer>(selection_.params, dim, config_.mc.n_samples,
                                                       derive_seed(config_.seed, kScorerStream + data_.size()));
    obs_scores_.clear();
    for (const auto& x : data_.x) obs_scores_.push_back(scorer_->score(*posterior_, x));
}

const std::vector<double>& AskTellState::observation_scores() const { return obs_scores_; }

const StabilityScorer& AskTellState::scorer() const { return *scorer_; }

AskTellState::Context AskTellState::context() const {
    Context ctx;
    ctx.post = posterior_.get();
    ctx.scorer = scorer_.get();
    ctx.sd = make_scored_dataset(data_.y, obs_scores_, config_.lower_bound);
    ctx.beta = config_.acq.beta(data_.size());
    ctx.y_plus = config_.lower_bound + gain(ctx.sd);
    ctx.kind = config_.acq.kind;
    return ctx;
}

double AskTellState::acquire(const Context& ctx, std::span<const double> x, double* score) const {
    const Prediction p = ctx.post->predict(x);
    switch (ctx.kind) {
        case AcqKind::ei:
            return ei_value(p.mean, p.var, ctx.y_plus);
        case AcqKind::ucb:
            return ucb_value(p.mean, p.var, ctx.beta);
        case AcqKind::eisg: {
            const double s = ctx.scorer->score(*ctx.post, x);
            if (score) *score = s;
            return eisg_value(p.mean, p.var, ctx.sd, s);
        }
        case AcqKind::ucbsg: {
            const double s = ctx.scorer->score(*ctx.post, x);
            if (score) *score = s;
            return s * ucb_value(p.mean, p.var, ctx.beta);
        }
    }
    return 0.0;
}

AcqEvaluation AskTellState::evaluate(std::span<const double> x) const {
    const Context ctx = context();
    AcqEvaluation out;
    out.score = -1.0;
    out.value = acquire(ctx, x, &out.score);
    if (out.score < 0.0) out.score = scorer_->score(*posterior_, x);
    const Prediction p = posterior_->predict(x);
    out.mean = p.mean;
    out.var = p.var;
    return out;
}

Suggestion AskTellState::maximise(const Context& ctx) const {
    const Bounds& b = config_.bounds;
    const std::size_t n = b.dim();
    Suggestion best;
    best.acq_value = -std::numeric_limits<double>::infinity();

    if (n <= 2) {
        for (const auto& x : candidate_grid(b, config_.acq_opt.resolution_for(n))) {
            const double v = acquire(ctx, x, nullptr);
            if (v > best.acq_value) {
                best.acq_value = v;
                best.x = x;
            }
        }
        return best;
    }

    const auto shift = random_shift(n, derive_seed(config_.seed, kStartsStream + data_.size()));
    std::vector<Point> starts;
    std::vector<double> values;
    for (std::size_t i = 0; i < config_.acq_opt.multistart_count; ++i) {
        starts.push_back(to_box(b, halton_point(i + 1, n, shift)));
        values.push_back(acquire(ctx, starts.back(), nullptr));
    }
    std::vector<std::size_t> order(starts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) { return values[a] > values[c]; });

    const std::size_t refine = std::min(config_.acq_opt.refine_starts, order.size());
    for (std::size_t r = 0; r < refine; ++r) {
        Point x = starts[order[r]];
        double v = values[order[r]];
        std::vector<double> step(n);
        for (std::size_t k = 0; k < n; ++k) step[k] = 0.1 * (b.upper[k] - b.lower[k]);
        for (std::size_t it = 0; it < config_.acq_opt.refine_steps; ++it) {
            bool moved = false;
            for (std::size_t k = 0; k < n; ++k) {
                for (double dir : {1.0, -1.0}) {
                    Point y = x;
                    y[k] = std::clamp(x[k] + dir * step[k], b.lower[k], b.upper[k]);
                    if (y[k] == x[k]) continue;
                    const double vy = acquire(ctx, y, nullptr);
                    if (vy > v) {
                        x = std::move(y);
                        v = vy;
                        moved = true;
                        break;
                    }
                }
            }
            if (!moved) {
                for (double& s : step) s *= 0.5;
            }
        }
        if (v > best.acq_value) {
            best.acq_value = v;
            best.x = x;
        }
    }
    return best;
}

Suggestion AskTellState::suggest() {
    if (pending_) throw ProtocolError("a suggestion is already pending; tell its outcome first");
    const Context ctx = context();
    Suggestion s;
    if (data_.size() < config_.initial_design) {
        const auto shift = random_shift(config_.bounds.dim(), derive_seed(config_.seed, kDesignStream));
        s.x = to_box(config_.bounds, halton_point(data_.size() + 1, config_.bounds.dim(), shift));
        s.acq_value = acquire(ctx, s.x, nullptr);
        s.initial_design = true;
    } else {
        s = maximise(ctx);
    }
    s.score = ctx.scorer->score(*ctx.post, s.x);
    pending_ = s;
    return s;
}

TraceRow AskTellState::tell(const Point& x, double y) {
    if (!pending_) throw ProtocolError("no pending suggestion; call suggest first");
    if (!std::isfinite(y)) throw std::invalid_argument("observation y must be finite");
    if (x.size() != config_.bounds.dim()) throw std::invalid_argument("x has the wrong dimension");
    if (!config_.bounds.contains(x)) throw std::invalid_argument("x lies outside the bounds");

    TraceRow row;
    row.iter = trace_.size() + 1;
    row.x = x;
    row.y = y;
    row.manual_override = x != pending_->x;
    if (row.manual_override) {
        const AcqEvaluation e = evaluate(x);
        row.acq = e.value;
        row.score = e.score;
    } else {
        row.acq = pending_->acq_value;
        row.score = pending_->score;
    }

    Dataset next = data_;
    next.add(x, y);
    std::swap(data_, next);
    try {
        refresh();
    } catch (...) {
        std::swap(data_, next);
        refresh();
        throw;
    }
    pending_.reset();

    const Recommendation rec = recommend();
    row.rec_x = rec.x;
    row.stable_gain = rec.stable_gain;
    trace_.push_back(row);
    return row;
}

Recommendation recommend_from(const Dataset& data, const std::vector<double>& scores, double lower, AcqKind kind) {
    if (data.empty()) throw ProtocolError("cannot recommend from an empty dataset");
    Recommendation rec;
    rec.scores = scores;
    const std::size_t N = data.size();
    const bool any_stable = std::any_of(scores.begin(), scores.end(), [](double s) { return s > 0.0; });

    std::size_t best = 0;
    if (!is_stability_aware(kind) || !any_stable) {
        for (std::size_t i = 1; i < N; ++i) {
            if (data.y[i] > data.y[best]) best = i;
        }
        rec.no_stable_point = !any_stable;
    } else {
        auto value = [&](std::size_t i) { return scores[i] * (data.y[i] - lower); };
        for (std::size_t i = 1; i < N; ++i) {
            const double vi = value(i), vb = value(best);
            if (vi > vb || (vi == vb && data.y[i] > data.y[best])) best = i;
        }
    }
    rec.index = best;
    rec.x = data.x[best];
    rec.y = data.y[best];
    rec.score = scores[best];
    rec.stable_gain = expected_stable_gain(make_scored_dataset(data.y, scores, lower));
    return rec;
}

Recommendation AskTellState::recommend() const {
    return recommend_from(data_, obs_scores_, config_.lower_bound, config_.acq.kind);
}

RunResult run(const OptConfig& config, const Objective& objective) {
    AskTellState state(config);
    Rng noise_rng(derive_seed(config.seed, kNoiseStream));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t t = 0; t < config.budget; ++t) {
        const Suggestion s = state.suggest();
        double y = objective(s.x);
        if (config.observation_noise > 0.0) y += config.observation_noise * normal(noise_rng);
        state.tell(s.x, y);
    }
    return RunResult{state.trace(), state.recommend(), state.dataset()};
}

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string trace_csv_header(std::size_t dim) {
    std::string h = "iter";
    for (std::size_t k = 0; k < dim; ++k) h += ",x" + std::to_string(k);
    h += ",y,acq,score";
    for (std::size_t k = 0; k < dim; ++k) h += ",rec_x" + std::to_string(k);
    h += ",stable_gain,manual_override\n";
    return h;
}

std::string trace_csv(const std::vector<TraceRow>& trace, std::size_t dim) {
    std::ostringstream out;
    out << trace_csv_header(dim);
    for (const auto& r : trace) {
        out << r.iter;
        for (double v : r.x) out << ',' << format_double(v);
        out << ',' << format_double(r.y) << ',' << format_double(r.acq) << ',' << format_double(r.score);
        for (double v : r.rec_x) out << ',' << format_double(v);
        out << ',' << format_double(r.stable_gain) << ',' << (r.manual_override ? 1 : 0) << '\n';
    }
    return out.str();
}

}  // namespace sbo
