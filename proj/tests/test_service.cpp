#include "doctest.h"
#include "cli_runner.hpp"
#include "sbo/bench.hpp"
#include "sbo/service.hpp"

#include <httplib.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

using namespace sbo;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / name) {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

Json campaign_config(std::uint64_t seed = 5) {
    OptConfig c = synthetic_config(AcqKind::ucbsg, seed);
    c.acq_opt.grid_resolution = 201;
    c.mc.n_samples = 300;
    c.budget = 6;
    return to_json(c);
}

std::string create(SessionService& svc, const Json& cfg = campaign_config()) {
    const auto r = svc.create_session(cfg.dump());
    REQUIRE(r.status == 201);
    return r.json().at("id").get<std::string>();
}

Json tell_body(const Json& x, double y, std::uint64_t revision) {
    return {{"x", x}, {"y", y}, {"revision", revision}};
}

}  // namespace

TEST_CASE("create session validates the config") {
    TempDir dir("sbo_svc_create");
    SessionService svc(dir.path);
    const auto ok = svc.create_session(campaign_config().dump());
    CHECK(ok.status == 201);
    const auto body = ok.json();
    CHECK(body.at("plan").at("params").at("eps").size() == body.at("plan").at("params").at("resolved_p"));
    CHECK(body.at("plan").at("params").at("eps")[0] == 0.1867);
    CHECK(std::filesystem::exists(dir.path / (body.at("id").get<std::string>() + ".json")));

    CHECK(svc.create_session("{not json").status == 400);
    Json bad = campaign_config();
    bad["stability"].erase("G");
    const auto missing = svc.create_session(bad.dump());
    CHECK(missing.status == 400);
    CHECK(missing.json().at("error").get<std::string>().find("G required") != std::string::npos);

    Json big = campaign_config();
    big["stability"]["B"] = 0.5;
    const auto inadmissible = svc.create_session(big.dump());
    CHECK(inadmissible.status == 422);
    CHECK(inadmissible.json().at("error").get<std::string>().find("length-scale") != std::string::npos);
}

TEST_CASE("list and get sessions") {
    TempDir dir("sbo_svc_list");
    SessionService svc(dir.path);
    const auto empty = svc.list_sessions();
    CHECK(empty.status == 200);
    CHECK(empty.json() == Json::array());
    const auto id = create(svc);
    CHECK(svc.list_sessions().json().size() == 1);
    CHECK(svc.get_session(id).json().at("revision") == 0);
    CHECK(svc.get_session("nope").status == 404);
}

TEST_CASE("suggest and tell protocol") {
    TempDir dir("sbo_svc_protocol");
    SessionService svc(dir.path);
    const auto id = create(svc);
    CHECK(svc.suggest("missing").status == 404);

    const auto s = svc.suggest(id);
    REQUIRE(s.status == 200);
    const auto sj = s.json();
    const double x = sj.at("x")[0].get<double>();
    CHECK(x >= 0.0);
    CHECK(x <= 1.0);
    CHECK(sj.at("revision") == 1);
    REQUIRE(sj.contains("acq_profile"));
    for (const char* key : {"x", "acq", "score", "mean", "lower", "upper"}) {
        CHECK(sj.at("acq_profile").at(key).size() == 201);
    }
    CHECK(svc.suggest(id).status == 409);

    CHECK(svc.tell(id, tell_body(sj.at("x"), 1.0, 0).dump()).status == 409);
    CHECK(svc.tell(id, Json{{"x", sj.at("x")}, {"y", "NaN"}, {"revision", 1}}.dump()).status == 400);
    CHECK(svc.tell(id, Json{{"x", sj.at("x")}, {"y", "nan"}, {"revision", 1}}.dump()).status == 400);
    CHECK(svc.tell(id, Json{{"x", sj.at("x")}, {"revision", 1}}.dump()).status == 400);
    CHECK(svc.tell(id, "{").status == 400);
    CHECK(svc.tell("missing", tell_body(sj.at("x"), 1.0, 1).dump()).status == 404);
    CHECK(svc.get_session(id).json().at("revision") == 1);

    const auto t = svc.tell(id, tell_body(sj.at("x"), synthetic_objective(x), 1).dump());
    REQUIRE(t.status == 200);
    CHECK(t.json().at("revision") == 2);
    CHECK(t.json().at("trace_row").at("iter") == 1);
    CHECK(t.json().at("recommendation").at("x") == sj.at("x"));
    CHECK(svc.tell(id, tell_body(sj.at("x"), 1.0, 2).dump()).status == 409);
}

TEST_CASE("session snapshot tracks the trace") {
    TempDir dir("sbo_svc_trace");
    SessionService svc(dir.path);
    const auto id = create(svc);
    std::uint64_t rev = 0;
    for (int t = 0; t < 3; ++t) {
        const auto s = svc.suggest(id).json();
        rev = s.at("revision").get<std::uint64_t>();
        const double x = s.at("x")[0].get<double>();
        const auto r = svc.tell(id, tell_body(s.at("x"), synthetic_objective(x), rev).dump());
        REQUIRE(r.status == 200);
        rev = r.json().at("revision").get<std::uint64_t>();
    }
    const auto snap = svc.get_session(id).json();
    CHECK(snap.at("state").at("trace").size() == 3);
    CHECK(snap.at("revision") == rev);
    CHECK(snap.at("recommendation").at("x").size() == 1);
    const auto csv = svc.trace_csv(id);
    CHECK(csv.content_type == "text/csv");
    CHECK(std::count(csv.body.begin(), csv.body.end(), '\n') == 4);
}

TEST_CASE("stability maps") {
    TempDir dir("sbo_svc_map");
    SessionService svc(dir.path);
    const auto id = create(svc);
    const auto prior = svc.map(id, "101", "gp_score");
    REQUIRE(prior.status == 200);
    const auto pj = prior.json();
    CHECK(pj.at("entries").size() == 101);
    CHECK(pj.at("observations") == 0);
    for (const auto& e : pj.at("entries")) {
        CHECK(e.at("score").get<double>() >= 0.0);
        CHECK(e.at("score").get<double>() <= 1.0);
        CHECK(e.at("per_order").size() == 3);
    }

    const auto oracle = svc.map(id, "721", "oracle").json();
    CHECK(oracle.at("entries").size() == 721);

    Json no_objective = campaign_config();
    no_objective.erase("objective");
    const auto id2 = create(svc, no_objective);
    CHECK(svc.map(id2, "11", "oracle").status == 422);
    CHECK(svc.map(id2, "11", "gp_score").status == 200);
    CHECK(svc.map(id2, "abc", "gp_score").status == 400);
    CHECK(svc.map(id2, "11", "bogus").status == 400);
    CHECK(svc.map("missing", "11", "gp_score").status == 404);
}

TEST_CASE("sessions survive a restart") {
    TempDir dir("sbo_svc_restart");
    std::string id;
    std::string csv_before;
    Json pending;
    {
        SessionService svc(dir.path);
        id = create(svc);
        for (int t = 0; t < 2; ++t) {
            const auto s = svc.suggest(id).json();
            const double x = s.at("x")[0].get<double>();
            REQUIRE(svc.tell(id, tell_body(s.at("x"), synthetic_objective(x), s.at("revision")).dump()).status ==
                    200);
        }
        pending = svc.suggest(id).json();
        csv_before = svc.trace_csv(id).body;
    }
    SessionService svc(dir.path);
    CHECK(svc.trace_csv(id).body == csv_before);
    const auto snap = svc.get_session(id).json();
    CHECK(snap.at("revision") == 5);
    CHECK(snap.at("state").at("pending").at("x") == pending.at("x"));
    CHECK(svc.suggest(id).status == 409);
    const double x = pending.at("x")[0].get<double>();
    CHECK(svc.tell(id, tell_body(pending.at("x"), synthetic_objective(x), 5).dump()).status == 200);
}

TEST_CASE("concurrent tells with one revision: exactly one wins") {
    TempDir dir("sbo_svc_race");
    SessionService svc(dir.path);
    const auto id = create(svc);
    for (int round = 0; round < 4; ++round) {
        const auto s = svc.suggest(id).json();
        const auto body = tell_body(s.at("x"), 0.5, s.at("revision")).dump();
        std::atomic<int> ok{0}, conflict{0};
        std::vector<std::thread> threads;
        for (int k = 0; k < 4; ++k) {
            threads.emplace_back([&] {
                const int status = svc.tell(id, body).status;
                if (status == 200) ++ok;
                if (status == 409) ++conflict;
            });
        }
        for (auto& t : threads) t.join();
        CHECK(ok == 1);
        CHECK(conflict == 3);
    }
    CHECK(svc.get_session(id).json().at("state").at("trace").size() == 4);
}

TEST_CASE("http routes and cors") {
    TempDir dir("sbo_svc_http");
    SessionService svc(dir.path);
    httplib::Server server;
    svc.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client cli("127.0.0.1", port);
    auto list = cli.Get("/sessions");
    REQUIRE(list);
    CHECK(list->status == 200);
    CHECK(list->get_header_value("Access-Control-Allow-Origin") == "*");
    CHECK(Json::parse(list->body) == Json::array());

    auto created = cli.Post("/sessions", campaign_config().dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const auto id = Json::parse(created->body).at("id").get<std::string>();
    CHECK(cli.Post("/sessions", "{oops", "application/json")->status == 400);

    auto sug = cli.Post("/sessions/" + id + "/suggest", "", "application/json");
    REQUIRE(sug);
    CHECK(sug->status == 200);
    const auto sj = Json::parse(sug->body);
    CHECK(cli.Post("/sessions/" + id + "/suggest", "", "application/json")->status == 409);
    CHECK(cli.Post("/sessions/unknown/suggest", "", "application/json")->status == 404);
    auto told = cli.Post("/sessions/" + id + "/tell", tell_body(sj.at("x"), 0.3, sj.at("revision")).dump(),
                         "application/json");
    REQUIRE(told);
    CHECK(told->status == 200);
    auto map = cli.Get("/sessions/" + id + "/map?grid=101&mode=gp_score");
    REQUIRE(map);
    CHECK(Json::parse(map->body).at("entries").size() == 101);
    auto csv = cli.Get("/sessions/" + id + "/trace.csv");
    REQUIRE(csv);
    CHECK(csv->status == 200);
    CHECK(csv->body.rfind("iter,x0,y,acq,score,rec_x0,stable_gain,manual_override\n", 0) == 0);
    CHECK(cli.Get("/sessions/" + id)->status == 200);
    CHECK(cli.Get("/sessions/zzz")->status == 404);
    auto pre = cli.Options("/sessions");
    REQUIRE(pre);
    CHECK(pre->status == 204);
    CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

    server.stop();
    th.join();
}

TEST_CASE("cli and http campaigns with equal seeds produce identical traces") {
    TempDir dir("sbo_svc_equiv");
    const Json cfg = campaign_config(17);
    const auto cfg_path = dir.path / "cfg.json";
    std::ofstream(cfg_path) << cfg.dump();
    const auto session = (dir.path / "s.json").string();

    SessionService svc(dir.path / "store");
    const auto id = create(svc, cfg);
    REQUIRE(clitest::run({"session", "new", "--config", cfg_path.string(), "--session", session}).code == 0);

    for (int t = 0; t < 6; ++t) {
        const auto http = svc.suggest(id).json();
        const auto cli = clitest::run({"session", "suggest", "--session", session});
        REQUIRE(cli.code == 0);
        const auto cj = Json::parse(cli.out);
        CHECK(cj.at("x") == http.at("x"));
        const double x = http.at("x")[0].get<double>();
        const double y = synthetic_objective(x);
        REQUIRE(svc.tell(id, tell_body(http.at("x"), y, http.at("revision")).dump()).status == 200);
        REQUIRE(clitest::run({"session", "tell", "--session", session, "--x", format_double(cj.at("x")[0].get<double>()),
                              "--y", format_double(y)})
                    .code == 0);
    }
    const auto cli_csv = clitest::run({"session", "trace", "--session", session});
    REQUIRE(cli_csv.code == 0);
    CHECK(cli_csv.out == svc.trace_csv(id).body);
    CHECK(std::count(cli_csv.out.begin(), cli_csv.out.end(), '\n') == 7);
}
