#include "doctest.h"
#include "cli_runner.hpp"
#include "sbo/bench.hpp"
#include "sbo/json_io.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sbo;
namespace fs = std::filesystem;

namespace {

struct Workspace {
    fs::path dir;
    explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / name) {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }

    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(dir / name) << text;
        return (dir / name).string();
    }
    std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json small_config() {
    OptConfig c = synthetic_config(AcqKind::ucbsg, 3);
    c.acq_opt.grid_resolution = 201;
    c.mc.n_samples = 300;
    c.budget = 8;
    return to_json(c);
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("plan prints the resolved parameters") {
    Workspace ws("sbo_cli_plan");
    const auto cfg = ws.write("cfg.json", small_config().dump());
    const auto r = clitest::run({"plan", "--config", cfg, "--json"});
    REQUIRE(r.code == 0);
    const auto j = Json::parse(r.out);
    CHECK(j.at("params").at("resolved_p") == 3);
    CHECK(j.at("params").at("eps")[0] == 0.1867);

    Json no_g = small_config();
    no_g["stability"].erase("G");
    CHECK(clitest::run({"plan", "--config", ws.write("nog.json", no_g.dump())}).code == 2);
    Json big_b = small_config();
    big_b["stability"]["B"] = 0.5;
    CHECK(clitest::run({"plan", "--config", ws.write("bigb.json", big_b.dump())}).code == 2);
    CHECK(clitest::run({"plan", "--config", ws.path("missing.json")}).code == 1);
    CHECK(clitest::run({"plan", "--config", ws.write("broken.json", "{")}).code == 2);
    CHECK(clitest::run({"plan"}).code == 2);
    CHECK(clitest::run({"frobnicate"}).code == 2);
}

TEST_CASE("run is deterministic and writes the trace") {
    Workspace ws("sbo_cli_run");
    const auto cfg = ws.write("cfg.json", small_config().dump());
    const auto a = clitest::run({"run", "--config", cfg, "--out", ws.path("a.csv")});
    const auto b = clitest::run({"run", "--config", cfg, "--out", ws.path("b.csv")});
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    const auto ta = slurp(ws.path("a.csv"));
    CHECK(ta == slurp(ws.path("b.csv")));
    CHECK(a.out == b.out);
    CHECK(lines(ta) == 9);
    CHECK(ta.rfind("iter,x0,y,acq,score,rec_x0,stable_gain,manual_override\n", 0) == 0);
    const auto j = Json::parse(a.out);
    CHECK(j.at("recommendation").at("x").size() == 1);

    const auto c = clitest::run({"run", "--config", cfg, "--out", ws.path("c.csv"), "--seed", "4"});
    REQUIRE(c.code == 0);
    CHECK(slurp(ws.path("c.csv")) != ta);
    REQUIRE(clitest::run({"run", "--config", cfg, "--out", ws.path("d.csv"), "--acq", "ucb", "--budget", "4"}).code ==
            0);
    CHECK(lines(slurp(ws.path("d.csv"))) == 5);
    CHECK(clitest::run({"run", "--config", cfg, "--out", ws.path("e.csv"), "--objective", "nosuch"}).code == 2);
    CHECK(clitest::run({"run", "--config", cfg, "--out", ws.path("nodir/x/y.csv")}).code == 1);
    CHECK(clitest::run({"run", "--config", cfg, "--out", ws.path("f.csv"), "--acq", "pi"}).code == 2);
}

TEST_CASE("session workflow and exit codes") {
    Workspace ws("sbo_cli_session");
    const auto cfg = ws.write("cfg.json", small_config().dump());
    const auto s = ws.path("s.json");
    REQUIRE(clitest::run({"session", "new", "--config", cfg, "--session", s}).code == 0);
    CHECK(clitest::run({"session", "tell", "--session", s, "--x", "0.5", "--y", "1"}).code == 3);

    for (int t = 0; t < 3; ++t) {
        const auto sug = clitest::run({"session", "suggest", "--session", s});
        REQUIRE(sug.code == 0);
        const double x = Json::parse(sug.out).at("x")[0].get<double>();
        if (t == 0) CHECK(clitest::run({"session", "suggest", "--session", s}).code == 3);
        CHECK(clitest::run({"session", "tell", "--session", s, "--x", format_double(x), "--y", "abc"}).code == 2);
        CHECK(clitest::run({"session", "tell", "--session", s, "--x", "1.5", "--y", "1"}).code == 2);
        CHECK(clitest::run({"session", "tell", "--session", s, "--x", "0.1,0.2", "--y", "1"}).code == 2);
        const double xt = t == 2 ? 0.8 : x;
        REQUIRE(clitest::run({"session", "tell", "--session", s, "--x", format_double(xt), "--y",
                              format_double(synthetic_objective(xt))})
                    .code == 0);
    }
    const auto trace = clitest::run({"session", "trace", "--session", s});
    REQUIRE(trace.code == 0);
    CHECK(lines(trace.out) == 4);
    CHECK(trace.out.substr(trace.out.rfind(',') + 1) == "1\n");

    const auto rec = clitest::run({"session", "recommend", "--session", s});
    REQUIRE(rec.code == 0);
    CHECK(rec.out.find("x* = ") != std::string::npos);
    CHECK(rec.out.find("stable_gain = ") != std::string::npos);

    const auto status = clitest::run({"session", "status", "--session", s});
    REQUIRE(status.code == 0);
    CHECK(clitest::run({"session", "suggest", "--session", ws.path("none.json")}).code == 1);
    CHECK(clitest::run({"session", "trace", "--session", s, "--out", ws.path("t.csv")}).code == 0);
    CHECK(slurp(ws.path("t.csv")) == trace.out);
}

TEST_CASE("map writes one row per grid point") {
    Workspace ws("sbo_cli_map");
    const auto cfg = ws.write("cfg.json", small_config().dump());
    REQUIRE(clitest::run({"map", "--config", cfg, "--grid", "101", "--out", ws.path("o.csv")}).code == 0);
    const auto oracle = slurp(ws.path("o.csv"));
    CHECK(lines(oracle) == 102);
    CHECK(oracle.rfind("x0,score,stable\n", 0) == 0);

    REQUIRE(clitest::run({"map", "--config", cfg, "--mode", "gp_score", "--grid", "51", "--out", ws.path("g.csv")})
                .code == 0);
    const auto gp = slurp(ws.path("g.csv"));
    CHECK(lines(gp) == 52);
    CHECK(gp.rfind("x0,score,stable,score_q1,score_q2,score_q3\n", 0) == 0);
    CHECK(clitest::run({"map", "--config", cfg, "--mode", "weird", "--out", ws.path("w.csv")}).code == 2);
    CHECK(clitest::run({"map", "--config", cfg, "--grid", "0", "--out", ws.path("z.csv")}).code == 2);
}

TEST_CASE("experiment writes summaries") {
    Workspace ws("sbo_cli_experiment");
    const auto out = ws.path("exp");
    REQUIRE(clitest::run({"experiment", "--out", out, "--repeats", "1", "--budget", "5"}).code == 0);
    for (const char* f : {"ucbsg_convergence.csv", "ucbsg_recommendations.csv", "ucbsg_boxplot.csv",
                          "ucb_convergence.csv", "ucb_recommendations.csv", "ucb_boxplot.csv", "summary.json"}) {
        CHECK(fs::exists(fs::path(out) / f));
    }
    const auto summary = Json::parse(slurp((fs::path(out) / "summary.json").string()));
    CHECK(summary.dump().find("ucbsg") != std::string::npos);
}
