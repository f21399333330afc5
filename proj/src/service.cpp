#include "sbo/service.hpp"

#include "sbo/bench.hpp"
#include "sbo/sampling.hpp"

#include <httplib.h>

#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

namespace sbo {

namespace {

constexpr std::size_t kProfilePoints = 201;
constexpr std::size_t kMaxMapPoints = 100000;

ApiResponse json_response(int status, const Json& body) { return {status, body.dump(), "application/json"}; }

ApiResponse error_response(int status, const std::string& message) {
    return json_response(status, Json{{"error", message}});
}

std::string now_iso8601() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

bool valid_id(const std::string& id) {
    if (id.empty() || id.size() > 64) return false;
    for (char c : id) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') return false;
    }
    return true;
}

Json profile_json(const AskTellState& st) {
    const Bounds& b = st.config().bounds;
    Json xs = Json::array(), acq = Json::array(), score = Json::array(), mean = Json::array(),
         lower = Json::array(), upper = Json::array();
    for (const auto& p : linear_grid(b.lower[0], b.upper[0], kProfilePoints)) {
        const AcqEvaluation e = st.evaluate(p);
        const double band = 2.0 * std::sqrt(std::max(0.0, e.var));
        xs.push_back(p[0]);
        acq.push_back(number_json(e.value));
        score.push_back(number_json(e.score));
        mean.push_back(number_json(e.mean));
        lower.push_back(number_json(e.mean - band));
        upper.push_back(number_json(e.mean + band));
    }
    return {{"x", xs}, {"acq", acq}, {"score", score}, {"mean", mean}, {"lower", lower}, {"upper", upper}};
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::shared_ptr<const Json> SessionService::Entry::view() const {
    std::lock_guard lock(snapshot_mutex);
    return snapshot;
}

SessionService::SessionService(std::filesystem::path data_dir) : dir_(std::move(data_dir)) {
    std::filesystem::create_directories(dir_);
    for (const auto& f : std::filesystem::directory_iterator(dir_)) {
        if (f.path().extension() != ".json") continue;
        std::ifstream in(f.path());
        const Json doc = Json::parse(in);
        auto e = std::make_shared<Entry>();
        e->id = doc.at("id").get<std::string>();
        e->created = doc.at("created").get<std::string>();
        e->updated = doc.at("updated").get<std::string>();
        e->revision = doc.at("revision").get<std::uint64_t>();
        e->state = state_from_json(doc.at("state"));
        Json snap = doc;
        if (!e->state->dataset().empty()) snap["recommendation"] = to_json(e->state->recommend());
        else snap["recommendation"] = nullptr;
        e->snapshot = std::make_shared<const Json>(std::move(snap));
        sessions_[e->id] = std::move(e);
    }
}

std::string SessionService::new_id() {
    static thread_local std::random_device rd;
    const std::uint64_t r = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(splitmix64(r + ++id_counter_)));
    return buf;
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
    std::shared_lock lock(registry_mutex_);
    const auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

void SessionService::commit(Entry& e) {
    Json doc = {{"id", e.id},
                {"created", e.created},
                {"updated", e.updated},
                {"revision", e.revision},
                {"state", to_json(*e.state)}};
    atomic_write(dir_ / (e.id + ".json"), doc.dump(1));
    doc["recommendation"] = e.state->dataset().empty() ? Json(nullptr) : to_json(e.state->recommend());
    auto snap = std::make_shared<const Json>(std::move(doc));
    std::lock_guard lock(e.snapshot_mutex);
    e.snapshot = std::move(snap);
}

ApiResponse SessionService::create_session(const std::string& body) {
    Json j;
    try {
        j = Json::parse(body);
    } catch (const nlohmann::json::exception& ex) {
        return error_response(400, std::string("malformed JSON: ") + ex.what());
    }
    auto e = std::make_shared<Entry>();
    try {
        e->state = std::make_unique<AskTellState>(config_from_json(j));
    } catch (const InadmissibleError& ex) {
        return error_response(422, ex.what());
    } catch (const std::invalid_argument& ex) {
        return error_response(400, ex.what());
    }
    e->created = e->updated = now_iso8601();
    {
        std::unique_lock lock(registry_mutex_);
        do {
            e->id = new_id();
        } while (sessions_.count(e->id));
        sessions_[e->id] = e;
    }
    {
        std::lock_guard lock(e->write_mutex);
        commit(*e);
    }
    const auto& sel = e->state->selection();
    return json_response(201, {{"id", e->id},
                               {"revision", e->revision},
                               {"plan", {{"params", to_json(sel.params)}, {"report", to_json(sel.report)}}}});
}

ApiResponse SessionService::list_sessions() const {
    std::vector<std::shared_ptr<const Json>> views;
    {
        std::shared_lock lock(registry_mutex_);
        for (const auto& [id, e] : sessions_) views.push_back(e->view());
    }
    std::sort(views.begin(), views.end(), [](const auto& a, const auto& b) {
        return std::tie((*a)["created"], (*a)["id"]) < std::tie((*b)["created"], (*b)["id"]);
    });
    Json out = Json::array();
    for (const auto& v : views) {
        out.push_back({{"id", (*v)["id"]},
                       {"created", (*v)["created"]},
                       {"updated", (*v)["updated"]},
                       {"revision", (*v)["revision"]},
                       {"observations", (*v)["state"]["dataset"]["y"].size()},
                       {"acq", (*v)["state"]["config"]["acq"]["kind"]}});
    }
    return json_response(200, out);
}

ApiResponse SessionService::get_session(const std::string& id) const {
    const auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    return json_response(200, *e->view());
}

ApiResponse SessionService::suggest(const std::string& id) {
    const auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    std::lock_guard lock(e->write_mutex);
    Suggestion s;
    try {
        s = e->state->suggest();
    } catch (const ProtocolError& ex) {
        return error_response(409, ex.what());
    }
    ++e->revision;
    e->updated = now_iso8601();
    commit(*e);
    Json out = to_json(s);
    out["revision"] = e->revision;
    if (e->state->config().bounds.dim() == 1) out["acq_profile"] = profile_json(*e->state);
    return json_response(200, out);
}

ApiResponse SessionService::tell(const std::string& id, const std::string& body) {
    const auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    Point x;
    double y = 0.0;
    std::uint64_t revision = 0;
    try {
        const Json j = Json::parse(body);
        if (!j.is_object() || !j.contains("x") || !j.contains("y") || !j.contains("revision")) {
            return error_response(400, "tell body needs x, y and revision");
        }
        const Json& jx = j.at("x");
        if (jx.is_array()) {
            for (const auto& v : jx) x.push_back(number_from_json(v));
        } else {
            x.push_back(number_from_json(jx));
        }
        y = number_from_json(j.at("y"));
        if (!j.at("revision").is_number_unsigned()) return error_response(400, "revision must be a non-negative integer");
        revision = j.at("revision").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& ex) {
        return error_response(400, std::string("malformed JSON: ") + ex.what());
    } catch (const ConfigError& ex) {
        return error_response(400, ex.what());
    }
    if (!std::isfinite(y)) return error_response(400, "y must be a finite number");

    std::lock_guard lock(e->write_mutex);
    if (revision != e->revision) {
        return error_response(409, "stale revision " + std::to_string(revision) + ", current is " +
                                       std::to_string(e->revision));
    }
    TraceRow row;
    try {
        row = e->state->tell(x, y);
    } catch (const ProtocolError& ex) {
        return error_response(409, ex.what());
    } catch (const std::invalid_argument& ex) {
        return error_response(400, ex.what());
    }
    ++e->revision;
    e->updated = now_iso8601();
    commit(*e);
    return json_response(200, {{"trace_row", to_json(row)},
                               {"recommendation", to_json(e->state->recommend())},
                               {"revision", e->revision}});
}

ApiResponse SessionService::map(const std::string& id, const std::string& grid, const std::string& mode) const {
    const auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    std::size_t count = 101;
    if (!grid.empty()) {
        std::size_t pos = 0;
        long long v = 0;
        try {
            v = std::stoll(grid, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != grid.size() || v < 1) return error_response(400, "grid must be a positive integer");
        count = static_cast<std::size_t>(v);
    }
    MapMode m = MapMode::gp_score;
    try {
        if (!mode.empty()) m = parse_map_mode(mode);
    } catch (const std::invalid_argument& ex) {
        return error_response(400, ex.what());
    }

    std::lock_guard lock(e->write_mutex);
    const AskTellState& st = *e->state;
    const Bounds& b = st.config().bounds;
    std::size_t total = 1;
    for (std::size_t k = 0; k < b.dim(); ++k) {
        total *= count;
        if (total > kMaxMapPoints) return error_response(400, "map grid too large");
    }
    const std::vector<Point> points = count == 1 ? std::vector<Point>{b.lower} : candidate_grid(b, count);

    std::vector<MapRow> rows;
    if (m == MapMode::oracle) {
        const auto f = st.config().objective ? builtin_objective(*st.config().objective) : std::nullopt;
        if (!f) return error_response(422, "oracle maps need a builtin objective");
        rows = stability_map_oracle(*f, points, st.config().stability.A, st.config().stability.B);
    } else {
        rows = stability_map_scores(st.posterior(), points, st.scorer());
    }
    Json entries = Json::array();
    for (const auto& r : rows) {
        Json per = Json::array();
        for (double s : r.per_order) per.push_back(number_json(s));
        entries.push_back({{"x", r.x}, {"score", number_json(r.score)}, {"stable", r.stable}, {"per_order", per}});
    }
    return json_response(200, {{"mode", map_mode_name(m)},
                               {"grid", count},
                               {"revision", e->revision},
                               {"observations", st.dataset().size()},
                               {"entries", entries}});
}

ApiResponse SessionService::trace_csv(const std::string& id) const {
    const auto e = find(id);
    if (!e) return error_response(404, "unknown session " + id);
    const auto v = e->view();
    std::vector<TraceRow> rows;
    for (const auto& r : (*v)["state"]["trace"]) rows.push_back(trace_row_from_json(r));
    const std::size_t dim = (*v)["state"]["config"]["bounds"].size();
    return {200, sbo::trace_csv(rows, dim), "text/csv"};
}

void SessionService::mount(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    auto reply = [](httplib::Response& res, const ApiResponse& r) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    };
    auto checked_id = [](const httplib::Request& req, httplib::Response& res) -> std::optional<std::string> {
        std::string id = req.matches[1];
        if (!valid_id(id)) {
            res.status = 404;
            res.set_content(Json{{"error", "unknown session " + id}}.dump(), "application/json");
            return std::nullopt;
        }
        return id;
    };

    server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Post("/sessions", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, create_session(req.body));
    });
    server.Get("/sessions", [this, reply](const httplib::Request&, httplib::Response& res) {
        reply(res, list_sessions());
    });
    server.Get(R"(/sessions/([^/]+))", [this, reply, checked_id](const httplib::Request& req, httplib::Response& res) {
        if (auto id = checked_id(req, res)) reply(res, get_session(*id));
    });
    server.Post(R"(/sessions/([^/]+)/suggest)",
                [this, reply, checked_id](const httplib::Request& req, httplib::Response& res) {
                    if (auto id = checked_id(req, res)) reply(res, suggest(*id));
                });
    server.Post(R"(/sessions/([^/]+)/tell)",
                [this, reply, checked_id](const httplib::Request& req, httplib::Response& res) {
                    if (auto id = checked_id(req, res)) reply(res, tell(*id, req.body));
                });
    server.Get(R"(/sessions/([^/]+)/map)", [this, reply, checked_id](const httplib::Request& req, httplib::Response& res) {
        if (auto id = checked_id(req, res)) {
            reply(res, map(*id, req.get_param_value("grid"), req.get_param_value("mode")));
        }
    });
    server.Get(R"(/sessions/([^/]+)/trace\.csv)",
               [this, reply, checked_id](const httplib::Request& req, httplib::Response& res) {
                   if (auto id = checked_id(req, res)) reply(res, trace_csv(*id));
               });
}

}  // namespace sbo
