#include "sbo/bench.hpp"
#include "sbo/json_io.hpp"
#include "sbo/optimizer.hpp"
#include "sbo/sampling.hpp"
#include "sbo/service.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace sbo;

namespace {

enum Exit { kOk = 0, kIo = 1, kConfig = 2, kProtocol = 3 };

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const std::string& path) {
    const std::string text = read_text(path);
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": malformed JSON: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed for " + path);
}

/// Advisory lock held for the lifetime of a session mutation.
class SessionLock {
public:
    explicit SessionLock(const std::string& session) {
        const std::string path = session + ".lock";
        fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
        if (fd_ < 0) throw IoError("cannot open lock file " + path);
        if (::flock(fd_, LOCK_EX) != 0) {
            ::close(fd_);
            throw IoError("cannot lock " + path);
        }
    }
    ~SessionLock() {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
    SessionLock(const SessionLock&) = delete;
    SessionLock& operator=(const SessionLock&) = delete;

private:
    int fd_ = -1;
};

std::unique_ptr<AskTellState> load_session(const std::string& path) { return state_from_json(read_json(path)); }

void save_session(const std::string& path, const AskTellState& st) {
    try {
        atomic_write(path, to_json(st).dump(1) + "\n");
    } catch (const std::exception& e) {
        throw IoError(e.what());
    }
}

OptConfig load_config(const std::string& path, const std::optional<std::uint64_t>& seed, const std::string& acq) {
    Json j = read_json(path);
    if (seed && j.is_object()) j["seed"] = *seed;
    if (!acq.empty() && j.is_object()) {
        if (j.contains("acq") && j["acq"].is_object()) j["acq"]["kind"] = acq;
        else j["acq"] = {{"kind", acq}};
    }
    return config_from_json(j);
}

std::string fmt(double v) { return format_double(v); }

std::string point_text(const Point& x) {
    std::string s;
    for (std::size_t k = 0; k < x.size(); ++k) s += (k ? "," : "") + fmt(x[k]);
    return s;
}

void print_plan(const OptConfig& c, const ParamSelection& sel) {
    const auto& r = sel.report;
    const auto& p = sel.params;
    std::cout << "kernel        " << c.kernel.family_name() << " (param " << fmt(c.kernel.param) << ")\n"
              << "dimension     " << c.bounds.dim() << "\n"
              << "M             " << fmt(p.M) << "\n"
              << "A, B          " << fmt(p.A) << ", " << fmt(p.B) << "\n"
              << "G             " << fmt(p.G) << "\n"
              << "F             " << fmt(r.F) << "\n"
              << "D             " << fmt(r.D) << " (log " << fmt(r.log_D) << ")\n"
              << "L_up, L_down  " << fmt(r.L_up) << ", " << fmt(r.L_down) << "\n"
              << "Delta(B^2/2)  " << fmt(r.delta_half_B2) << "\n"
              << "p_min         " << r.p_min << "\n"
              << "resolved p    " << p.resolved_p << " (p_max " << p.p_max << ")\n"
              << "q  U_q(B)  eps_q  eps_minus  eps_plus\n";
    for (unsigned q = 1; q <= p.resolved_p; ++q) {
        std::cout << q << "  " << fmt(r.U.at(q - 1)) << "  " << fmt(p.eps.at(q - 1)) << "  "
                  << fmt(r.eps_minus.at(q - 1)) << "  " << fmt(r.eps_plus.at(q - 1)) << "\n";
    }
}

std::vector<Point> map_grid(const Bounds& b, std::size_t count) {
    if (count == 1) return {b.lower};
    return candidate_grid(b, count);
}

Point parse_point(const std::vector<std::string>& parts) {
    Point x;
    for (const auto& item : parts) {
        std::stringstream ss(item);
        for (std::string tok; std::getline(ss, tok, ',');) {
            std::size_t pos = 0;
            double v = 0.0;
            try {
                v = std::stod(tok, &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            if (pos == 0 || pos != tok.size()) throw ConfigError("cannot parse x component '" + tok + "'");
            x.push_back(v);
        }
    }
    return x;
}

double parse_y(const std::string& text) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != text.size()) throw ConfigError("cannot parse y '" + text + "'");
    return v;
}

template <class F>
int guarded(F&& body) {
    try {
        return body();
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kProtocol;
    } catch (const InadmissibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stable Bayesian optimisation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_path, session_path, mode = "oracle", acq, objective_name, y_text;
    std::string data_dir = "sessions", host = "127.0.0.1", kinds_text = "ucbsg,ucb";
    std::optional<std::uint64_t> seed;
    std::vector<std::string> x_parts;
    std::size_t grid = 101, repeats = 10, budget = 50;
    std::optional<std::size_t> budget_override;
    int port = 8080;
    bool as_json = false;

    auto add_seed = [&](CLI::App* c) { c->add_option("--seed", seed, "Master seed (overrides the config)"); };

    auto* plan_cmd = app.add_subcommand("plan", "Resolve stability parameters and print the bound report");
    plan_cmd->add_option("--config", config_path, "Campaign config JSON")->required();
    plan_cmd->add_flag("--json", as_json, "Print the report as JSON");
    add_seed(plan_cmd);

    auto* run_cmd = app.add_subcommand("run", "Run an autonomous campaign against a builtin objective");
    run_cmd->add_option("--config", config_path, "Campaign config JSON")->required();
    run_cmd->add_option("--objective", objective_name, "Builtin objective (default: config objective)");
    run_cmd->add_option("--out", out_path, "Trace CSV path")->required();
    run_cmd->add_option("--acq", acq, "Acquisition kind override");
    run_cmd->add_option("--budget", budget_override, "Budget override");
    add_seed(run_cmd);

    auto* session_cmd = app.add_subcommand("session", "Ask-tell campaign stored in a session file");
    session_cmd->require_subcommand(1);
    auto* s_new = session_cmd->add_subcommand("new", "Create a session from a config");
    s_new->add_option("--config", config_path, "Campaign config JSON")->required();
    s_new->add_option("--session", session_path, "Session file")->required();
    s_new->add_option("--acq", acq, "Acquisition kind override");
    add_seed(s_new);
    auto* s_suggest = session_cmd->add_subcommand("suggest", "Print the next point to evaluate");
    s_suggest->add_option("--session", session_path, "Session file")->required();
    auto* s_tell = session_cmd->add_subcommand("tell", "Record an observation");
    s_tell->add_option("--session", session_path, "Session file")->required();
    s_tell->add_option("--x", x_parts, "Observed point (comma separated or repeated)")->required();
    s_tell->add_option("--y", y_text, "Observed value")->required();
    auto* s_rec = session_cmd->add_subcommand("recommend", "Print the current stable recommendation");
    s_rec->add_option("--session", session_path, "Session file")->required();
    auto* s_status = session_cmd->add_subcommand("status", "Print a session summary");
    s_status->add_option("--session", session_path, "Session file")->required();
    auto* s_trace = session_cmd->add_subcommand("trace", "Write the trace CSV");
    s_trace->add_option("--session", session_path, "Session file")->required();
    s_trace->add_option("--out", out_path, "Output path (default stdout)");

    auto* map_cmd = app.add_subcommand("map", "Write a stability map CSV");
    map_cmd->add_option("--config", config_path, "Campaign config JSON");
    map_cmd->add_option("--session", session_path, "Score against this session's posterior");
    map_cmd->add_option("--mode", mode, "oracle or gp_score");
    map_cmd->add_option("--grid", grid, "Grid points per axis")->check(CLI::PositiveNumber);
    map_cmd->add_option("--out", out_path, "Output CSV path")->required();
    add_seed(map_cmd);

    auto* exp_cmd = app.add_subcommand("experiment", "Reproduce the six-bump experiment");
    exp_cmd->add_option("--out", out_path, "Output directory")->required();
    exp_cmd->add_option("--repeats", repeats, "Repeats per acquisition kind")->check(CLI::PositiveNumber);
    exp_cmd->add_option("--budget", budget, "Evaluations per run")->check(CLI::PositiveNumber);
    exp_cmd->add_option("--acq", kinds_text, "Comma separated acquisition kinds");
    add_seed(exp_cmd);

    auto* serve_cmd = app.add_subcommand("serve", "Serve the HTTP session API (no authentication)");
    serve_cmd->add_option("--data", data_dir, "Session directory");
    serve_cmd->add_option("--host", host, "Bind address");
    serve_cmd->add_option("--port", port, "Port");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    if (*plan_cmd) {
        return guarded([&] {
            const OptConfig c = load_config(config_path, seed, "");
            const ParamSelection sel = plan(c);
            if (as_json) {
                std::cout << Json{{"params", to_json(sel.params)}, {"report", to_json(sel.report)}}.dump(2) << "\n";
            } else {
                print_plan(c, sel);
            }
            return int{kOk};
        });
    }

    if (*run_cmd) {
        return guarded([&] {
            OptConfig c = load_config(config_path, seed, acq);
            if (budget_override) c.budget = *budget_override;
            const std::string name = !objective_name.empty() ? objective_name : c.objective.value_or("");
            if (name.empty()) throw ConfigError("no objective given (use --objective or the config objective)");
            const auto f = builtin_objective(name);
            if (!f) throw ConfigError("unknown objective '" + name + "'");
            c.validate();
            const RunResult res = run(c, *f);
            write_text(out_path, trace_csv(res.trace, c.bounds.dim()));
            std::cout << Json{{"recommendation", to_json(res.recommendation)}, {"config", to_json(c)}}.dump(2)
                      << "\n";
            return int{kOk};
        });
    }

    if (*s_new) {
        return guarded([&] {
            const OptConfig c = load_config(config_path, seed, acq);
            AskTellState st(c);
            SessionLock lock(session_path);
            save_session(session_path, st);
            std::cout << Json{{"session", session_path}, {"params", to_json(st.selection().params)}}.dump(2) << "\n";
            return int{kOk};
        });
    }
    if (*s_suggest) {
        return guarded([&] {
            SessionLock lock(session_path);
            auto st = load_session(session_path);
            const Suggestion s = st->suggest();
            save_session(session_path, *st);
            std::cout << to_json(s).dump() << "\n";
            return int{kOk};
        });
    }
    if (*s_tell) {
        return guarded([&] {
            const Point x = parse_point(x_parts);
            const double y = parse_y(y_text);
            SessionLock lock(session_path);
            auto st = load_session(session_path);
            const TraceRow row = st->tell(x, y);
            save_session(session_path, *st);
            if (row.manual_override) std::cerr << "warning: x differs from the pending suggestion\n";
            std::cout << to_json(row).dump() << "\n";
            return int{kOk};
        });
    }
    if (*s_rec) {
        return guarded([&] {
            auto st = load_session(session_path);
            const Recommendation r = st->recommend();
            std::cout << "x* = " << point_text(r.x) << "\nstable_gain = " << fmt(r.stable_gain) << "\n";
            if (r.no_stable_point) std::cout << "no stable point found\n";
            std::cout << to_json(r).dump() << "\n";
            return int{kOk};
        });
    }
    if (*s_status) {
        return guarded([&] {
            auto st = load_session(session_path);
            Json out = {{"observations", st->dataset().size()},
                        {"budget", st->config().budget},
                        {"acq", acq_kind_name(st->config().acq.kind)},
                        {"pending", st->pending() ? to_json(*st->pending()) : Json(nullptr)},
                        {"params", to_json(st->selection().params)}};
            if (!st->dataset().empty()) out["recommendation"] = to_json(st->recommend());
            std::cout << out.dump(2) << "\n";
            return int{kOk};
        });
    }
    if (*s_trace) {
        return guarded([&] {
            auto st = load_session(session_path);
            const std::string csv = trace_csv(st->trace(), st->config().bounds.dim());
            if (out_path.empty()) std::cout << csv;
            else write_text(out_path, csv);
            return int{kOk};
        });
    }

    if (*map_cmd) {
        return guarded([&] {
            const MapMode m = parse_map_mode(mode);
            std::unique_ptr<AskTellState> st;
            OptConfig c;
            if (!session_path.empty()) {
                st = load_session(session_path);
                c = st->config();
            } else if (!config_path.empty()) {
                c = load_config(config_path, seed, "");
            } else {
                throw ConfigError("map needs --config or --session");
            }
            const auto points = map_grid(c.bounds, grid);
            std::vector<MapRow> rows;
            std::size_t orders = 0;
            if (m == MapMode::oracle) {
                const auto f = c.objective ? builtin_objective(*c.objective) : std::nullopt;
                if (!f) throw ConfigError("oracle maps need a builtin objective in the config");
                rows = stability_map_oracle(*f, points, c.stability.A, c.stability.B);
            } else if (st) {
                rows = stability_map_scores(st->posterior(), points, st->scorer());
                orders = st->selection().params.resolved_p;
            } else {
                const auto sel = plan(c);
                orders = sel.params.resolved_p;
                const auto f = c.objective ? builtin_objective(*c.objective) : std::nullopt;
                const std::uint64_t map_seed = derive_seed(c.seed, 0x4d4150ULL);
                if (f && c.bounds.dim() == 1) {
                    rows = stability_map_dense(*f, c.bounds, 200, points, sel.params, c.kernel, c.mc.n_samples,
                                               map_seed);
                } else {
                    const Posterior prior(Dataset{}, c.kernel, c.bounds.dim());
                    const StabilityScorer scorer(sel.params, c.bounds.dim(), c.mc.n_samples, map_seed);
                    rows = stability_map_scores(prior, points, scorer);
                }
            }
            write_text(out_path, map_csv(rows, c.bounds.dim(), orders));
            std::size_t stable = 0;
            for (const auto& r : rows) stable += r.stable;
            std::cout << rows.size() << " points, " << stable << " stable\n";
            return int{kOk};
        });
    }

    if (*exp_cmd) {
        return guarded([&] {
            ExperimentConfig cfg;
            cfg.repeats = repeats;
            cfg.budget = budget;
            cfg.seed = seed.value_or(1);
            cfg.out_dir = out_path;
            cfg.kinds.clear();
            std::stringstream ss(kinds_text);
            for (std::string k; std::getline(ss, k, ',');) cfg.kinds.push_back(parse_acq_kind(k));
            if (cfg.kinds.empty()) throw ConfigError("no acquisition kinds given");
            const auto summaries = run_experiment(cfg);
            for (const auto& s : summaries) {
                std::cout << acq_kind_name(s.kind) << ": " << s.successes << "/" << cfg.repeats
                          << " within tolerance of the stable optimum, median x* " << fmt(s.median_x) << "\n";
            }
            return int{kOk};
        });
    }

    if (*serve_cmd) {
        return guarded([&] {
            SessionService service(data_dir);
            httplib::Server server;
            service.mount(server);
            std::cerr << "serving sessions from " << data_dir << " on http://" << host << ":" << port
                      << " (no authentication)\n";
            if (!server.listen(host, port)) throw IoError("cannot listen on " + host + ":" + std::to_string(port));
            return int{kOk};
        });
    }
    return kConfig;
}
