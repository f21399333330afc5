#include "sbo/json_io.hpp"

#include <cmath>
#include <limits>

namespace sbo {

namespace {

Json vector_json(const std::vector<double>& v) {
    Json out = Json::array();
    for (double x : v) out.push_back(number_json(x));
    return out;
}

std::vector<double> vector_from_json(const Json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : j) out.push_back(number_from_json(e));
    return out;
}

const Json& require(const Json& j, const char* key, const std::string& context) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string(key) + " required" + context);
    return j.at(key);
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    return j.at(key).get<T>();
}

double number_or(const Json& j, const char* key, double fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    return number_from_json(j.at(key));
}

Bounds bounds_from_json(const Json& j) {
    Bounds b;
    if (j.is_object()) {
        b.lower = vector_from_json(require(j, "lower", " in bounds"));
        b.upper = vector_from_json(require(j, "upper", " in bounds"));
        return b;
    }
    if (!j.is_array()) throw ConfigError("bounds must be a list of [lower, upper] pairs");
    for (const auto& axis : j) {
        if (!axis.is_array() || axis.size() != 2) throw ConfigError("bounds must be a list of [lower, upper] pairs");
        b.lower.push_back(number_from_json(axis[0]));
        b.upper.push_back(number_from_json(axis[1]));
    }
    return b;
}

std::size_t count_from_json(const Json& j, const char* key, std::size_t fallback) {
    if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
    const Json& v = j.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
        throw ConfigError(std::string(key) + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

Json number_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_from_json(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw ConfigError("expected a number, got " + j.dump());
}

Json to_json(const KernelSpec& k) { return {{"family", k.family_name()}, {"param", k.param}}; }

KernelSpec kernel_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("kernel must be an object with family and param");
    const auto& fam = require(j, "family", " in kernel");
    if (!fam.is_string()) throw ConfigError("kernel family must be a string");
    KernelSpec k;
    try {
        k.family = parse_kernel_family(fam.get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    k.param = number_from_json(require(j, "param", " in kernel"));
    return k;
}

Json to_json(const Dataset& d) {
    Json xs = Json::array();
    for (const auto& x : d.x) xs.push_back(vector_json(x));
    return {{"x", xs}, {"y", vector_json(d.y)}, {"noise_var", d.noise_var}};
}

Dataset dataset_from_json(const Json& j) {
    Dataset d;
    for (const auto& x : require(j, "x", " in dataset")) d.x.push_back(vector_from_json(x));
    d.y = vector_from_json(require(j, "y", " in dataset"));
    d.noise_var = number_or(j, "noise_var", 0.0);
    try {
        d.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return d;
}

Json to_json(const StabilityParams& p) {
    return {{"A", p.A},
            {"B", p.B},
            {"policy_gamma", p.policy_gamma},
            {"p_max", p.p_max},
            {"resolved_p", p.resolved_p},
            {"eps", vector_json(p.eps)},
            {"G", p.G},
            {"M", p.M}};
}

Json to_json(const BoundReport& r) {
    return {{"F", number_json(r.F)},
            {"D", number_json(r.D)},
            {"log_D", number_json(r.log_D)},
            {"D_up", number_json(r.D_up)},
            {"D_updown", number_json(r.D_updown)},
            {"L_up", number_json(r.L_up)},
            {"L_down", number_json(r.L_down)},
            {"delta_half_B2", number_json(r.delta_half_B2)},
            {"U", vector_json(r.U)},
            {"p_min", r.p_min},
            {"p_rec", r.p_rec},
            {"eps_minus", vector_json(r.eps_minus)},
            {"eps_plus", vector_json(r.eps_plus)}};
}

Json to_json(const OptConfig& c) {
    Json bounds = Json::array();
    for (std::size_t k = 0; k < c.bounds.dim(); ++k) bounds.push_back({c.bounds.lower[k], c.bounds.upper[k]});
    Json stab = {{"A", c.stability.A},
                 {"B", c.stability.B},
                 {"policy_gamma", c.stability.policy_gamma},
                 {"p_max", c.stability.p_max},
                 {"G", c.stability.G}};
    if (c.stability.eps) stab["eps"] = *c.stability.eps;
    Json acq = {{"kind", acq_kind_name(c.acq.kind)}, {"beta_delta", c.acq.beta.delta}};
    if (c.acq.beta.constant) acq["beta"] = *c.acq.beta.constant;
    Json acq_opt = {{"multistart_count", c.acq_opt.multistart_count},
                    {"refine_steps", c.acq_opt.refine_steps},
                    {"refine_starts", c.acq_opt.refine_starts}};
    if (c.acq_opt.grid_resolution) acq_opt["grid_resolution"] = *c.acq_opt.grid_resolution;
    Json out = {{"bounds", bounds},
                {"kernel", to_json(c.kernel)},
                {"noise_var", c.noise_var},
                {"stability", stab},
                {"acq", acq},
                {"budget", c.budget},
                {"seed", c.seed},
                {"lower_bound", c.lower_bound},
                {"acq_opt", acq_opt},
                {"mc", {{"n_samples", c.mc.n_samples}, {"R_A", c.mc.R_A}, {"R_B", c.mc.R_B}}},
                {"initial_design", c.initial_design},
                {"observation_noise", c.observation_noise}};
    if (c.objective) out["objective"] = *c.objective;
    return out;
}

OptConfig config_from_json(const Json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    OptConfig c;
    try {
        c.bounds = bounds_from_json(require(j, "bounds", ""));
        if (j.contains("kernel")) c.kernel = kernel_from_json(j.at("kernel"));
        c.noise_var = number_or(j, "noise_var", c.noise_var);

        const Json& s = require(j, "stability", "");
        c.stability.A = number_from_json(require(s, "A", " in stability"));
        c.stability.B = number_from_json(require(s, "B", " in stability"));
        c.stability.G = number_from_json(require(s, "G", " in stability"));
        c.stability.policy_gamma = number_or(s, "policy_gamma", 0.0);
        c.stability.p_max = get_or<unsigned>(s, "p_max", 3);
        if (s.contains("eps") && !s.at("eps").is_null()) c.stability.eps = number_from_json(s.at("eps"));

        if (j.contains("acq")) {
            const Json& a = j.at("acq");
            try {
                if (a.is_string()) {
                    c.acq.kind = parse_acq_kind(a.get<std::string>());
                } else {
                    if (a.contains("kind")) c.acq.kind = parse_acq_kind(a.at("kind").get<std::string>());
                    c.acq.beta.delta = number_or(a, "beta_delta", c.acq.beta.delta);
                    if (a.contains("beta") && !a.at("beta").is_null()) c.acq.beta.constant = number_from_json(a.at("beta"));
                }
            } catch (const ConfigError&) {
                throw;
            } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
            }
        }
        c.budget = count_from_json(j, "budget", c.budget);
        if (j.contains("seed") && !j.at("seed").is_null()) {
            if (!j.at("seed").is_number_unsigned()) {
                throw ConfigError("seed must be a non-negative integer");
            }
            c.seed = j.at("seed").get<std::uint64_t>();
        }
        c.lower_bound = number_or(j, "lower_bound", c.lower_bound);
        if (j.contains("acq_opt")) {
            const Json& o = j.at("acq_opt");
            if (o.contains("grid_resolution") && !o.at("grid_resolution").is_null()) {
                c.acq_opt.grid_resolution = count_from_json(o, "grid_resolution", 0);
            }
            c.acq_opt.multistart_count = count_from_json(o, "multistart_count", c.acq_opt.multistart_count);
            c.acq_opt.refine_steps = count_from_json(o, "refine_steps", c.acq_opt.refine_steps);
            c.acq_opt.refine_starts = count_from_json(o, "refine_starts", c.acq_opt.refine_starts);
        }
        if (j.contains("mc")) {
            const Json& m = j.at("mc");
            c.mc.n_samples = count_from_json(m, "n_samples", c.mc.n_samples);
            c.mc.R_A = count_from_json(m, "R_A", c.mc.R_A);
            c.mc.R_B = count_from_json(m, "R_B", c.mc.R_B);
        }
        c.initial_design = count_from_json(j, "initial_design", c.initial_design);
        c.observation_noise = number_or(j, "observation_noise", c.observation_noise);
        if (j.contains("objective") && !j.at("objective").is_null()) c.objective = j.at("objective").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
}

Json to_json(const TraceRow& r) {
    return {{"iter", r.iter},
            {"x", vector_json(r.x)},
            {"y", number_json(r.y)},
            {"acq", number_json(r.acq)},
            {"score", number_json(r.score)},
            {"rec_x", vector_json(r.rec_x)},
            {"stable_gain", number_json(r.stable_gain)},
            {"manual_override", r.manual_override}};
}

TraceRow trace_row_from_json(const Json& j) {
    TraceRow r;
    r.iter = j.at("iter").get<std::size_t>();
    r.x = vector_from_json(j.at("x"));
    r.y = number_from_json(j.at("y"));
    r.acq = number_from_json(j.at("acq"));
    r.score = number_from_json(j.at("score"));
    r.rec_x = vector_from_json(j.at("rec_x"));
    r.stable_gain = number_from_json(j.at("stable_gain"));
    r.manual_override = j.at("manual_override").get<bool>();
    return r;
}

Json to_json(const Suggestion& s) {
    return {{"x", vector_json(s.x)},
            {"acq_value", number_json(s.acq_value)},
            {"score", number_json(s.score)},
            {"initial_design", s.initial_design}};
}

Suggestion suggestion_from_json(const Json& j) {
    Suggestion s;
    s.x = vector_from_json(j.at("x"));
    s.acq_value = number_from_json(j.at("acq_value"));
    s.score = number_from_json(j.at("score"));
    s.initial_design = get_or<bool>(j, "initial_design", false);
    return s;
}

Json to_json(const Recommendation& r) {
    return {{"x", vector_json(r.x)},
            {"index", r.index},
            {"y", number_json(r.y)},
            {"score", number_json(r.score)},
            {"stable_gain", number_json(r.stable_gain)},
            {"no_stable_point", r.no_stable_point},
            {"scores", vector_json(r.scores)}};
}

Json to_json(const AskTellState& s) {
    Json trace = Json::array();
    for (const auto& r : s.trace()) trace.push_back(to_json(r));
    Json out = {{"schema_version", kStateSchemaVersion},
                {"config", to_json(s.config())},
                {"params", to_json(s.selection().params)},
                {"dataset", to_json(s.dataset())},
                {"trace", trace},
                {"pending", s.pending() ? to_json(*s.pending()) : Json(nullptr)}};
    return out;
}

std::unique_ptr<AskTellState> state_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("schema_version")) throw ConfigError("session document lacks schema_version");
    if (j.at("schema_version") != kStateSchemaVersion) {
        throw ConfigError("unsupported session schema_version " + j.at("schema_version").dump());
    }
    try {
        OptConfig config = config_from_json(j.at("config"));
        Dataset data = dataset_from_json(j.at("dataset"));
        std::vector<TraceRow> trace;
        for (const auto& r : j.at("trace")) trace.push_back(trace_row_from_json(r));
        std::optional<Suggestion> pending;
        if (j.contains("pending") && !j.at("pending").is_null()) pending = suggestion_from_json(j.at("pending"));
        return std::make_unique<AskTellState>(std::move(config), std::move(data), std::move(trace), std::move(pending));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("session document: ") + e.what());
    }
}

}  // namespace sbo
