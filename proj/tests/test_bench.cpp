#include "doctest.h"
#include "sbo/bench.hpp"
#include "sbo/json_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sbo;

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::vector<std::string> out;
    for (std::string line; std::getline(in, line);) out.push_back(line);
    return out;
}

std::size_t count_fields(const std::string& line) {
    return static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

TEST_CASE("six-bump objective values") {
    CHECK(std::abs(synthetic_objective(0.25) - 4.0) <= 0.01);
    CHECK(std::abs(synthetic_objective(0.8) - 1.05) <= 0.01);
    CHECK(synthetic_objective(10.0) < 1e-12);
    const double g = 0.03535;
    const double direct = std::exp(-std::pow(0.3 - 0.125, 2) / (2 * g * g)) +
                          4 * std::exp(-std::pow(0.3 - 0.25, 2) / (2 * g * g)) +
                          std::exp(-std::pow(0.3 - 0.375, 2) / (2 * g * g)) +
                          std::exp(-std::pow(0.3 - 0.5, 2) / (2 * g * g)) +
                          0.7 * std::exp(-std::pow(0.3 - 0.625, 2) / (2 * g * g)) +
                          1.05 * std::exp(-std::pow(0.3 - 0.8, 2) / (2 * g * g));
    CHECK(synthetic_objective(0.3) == doctest::Approx(direct).epsilon(1e-14));
    CHECK(builtin_objective("synthetic1d").has_value());
    CHECK_FALSE(builtin_objective("branin").has_value());
}

TEST_CASE("oracle map marks the tall bump unstable and the broad one stable") {
    const auto f = *builtin_objective("synthetic1d");
    const auto rows = stability_map_oracle(f, {{0.25}, {0.8}}, 0.2, 0.0125);
    CHECK_FALSE(rows[0].stable);
    CHECK(rows[1].stable);
}

TEST_CASE("oracle map has one contiguous unstable band around the tall bump") {
    const auto f = *builtin_objective("synthetic1d");
    const auto grid = linear_grid(0.05, 0.95, 721);
    REQUIRE(grid.size() == 721);
    const auto rows = stability_map_oracle(f, grid, 0.2, 0.0125);
    std::size_t centre = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i][0] - 0.25) < std::abs(grid[centre][0] - 0.25)) centre = i;
    }
    REQUIRE_FALSE(rows[centre].stable);
    std::size_t lo = centre, hi = centre;
    while (lo > 0 && !rows[lo - 1].stable) --lo;
    while (hi + 1 < rows.size() && !rows[hi + 1].stable) ++hi;
    CHECK(lo > 0);
    CHECK(hi + 1 < rows.size());
    CHECK(grid[lo][0] < 0.25);
    CHECK(grid[hi][0] > 0.25);
    // The band is an interval, and the whole unstable set is a finite union of runs.
    std::size_t runs = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].stable && (i == 0 || rows[i - 1].stable)) ++runs;
    }
    CHECK(runs >= 1);
    CHECK(runs < 20);
    std::size_t near_08 = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i][0] - 0.8) < std::abs(grid[near_08][0] - 0.8)) near_08 = i;
    }
    CHECK(rows[near_08].stable);
}

TEST_CASE("dense gp score map agrees with the oracle map") {
    const auto f = *builtin_objective("synthetic1d");
    const auto grid = linear_grid(0.05, 0.95, 721);
    const auto oracle = stability_map_oracle(f, grid, 0.2, 0.0125);
    const auto sel = plan(synthetic_config(AcqKind::ucbsg, 1));
    REQUIRE(sel.params.resolved_p == 3);
    const auto rows = stability_map_dense(f, Bounds{{0.0}, {1.0}}, 200, grid, sel.params, KernelSpec::rbf(0.03535),
                                          2000, 7);
    std::size_t agree = 0, third_only = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        agree += rows[i].stable == oracle[i].stable;
        REQUIRE(rows[i].per_order.size() == 3);
        for (double s : rows[i].per_order) {
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
        }
        if (!rows[i].stable && rows[i].per_order[0] >= 0.5 && rows[i].per_order[1] >= 0.5) ++third_only;
    }
    CHECK(static_cast<double>(agree) / grid.size() >= 0.95);
    CHECK(third_only == 0);
}

TEST_CASE("constant functions are stable in both map modes") {
    const Objective flat = [](std::span<const double>) { return 0.5; };
    const auto grid = linear_grid(0.0, 1.0, 21);
    for (const auto& r : stability_map_oracle(flat, grid, 0.2, 0.0125)) CHECK(r.stable);
    const auto sel = plan(synthetic_config(AcqKind::ucbsg, 1));
    const auto rows =
        stability_map_dense(flat, Bounds{{0.0}, {1.0}}, 200, grid, sel.params, KernelSpec::rbf(0.03535), 2000, 3);
    for (const auto& r : rows) CHECK(r.score >= 0.99);
}

TEST_CASE("map csv layout") {
    MapRow r;
    r.x = {0.5};
    r.score = 0.25;
    r.per_order = {0.5, 0.5};
    const auto csv = map_csv({r, r}, 1, 2);
    CHECK(csv == "x0,score,stable,score_q1,score_q2\n0.5,0.25,0,0.5,0.5\n0.5,0.25,0,0.5,0.5\n");
    CHECK(parse_map_mode("oracle") == MapMode::oracle);
    CHECK(parse_map_mode("gp_score") == MapMode::gp_score);
    CHECK_THROWS_AS(parse_map_mode("x"), std::invalid_argument);
}

TEST_CASE("experiment smoke run writes well-formed files") {
    const auto dir = std::filesystem::temp_directory_path() / "sbo_bench_smoke";
    std::filesystem::remove_all(dir);
    ExperimentConfig cfg;
    cfg.repeats = 1;
    cfg.budget = 2;
    cfg.out_dir = dir;
    const auto res = run_experiment(cfg);
    REQUIRE(res.size() == 2);
    for (const char* kind : {"ucbsg", "ucb"}) {
        const auto conv = read_lines(dir / (std::string(kind) + "_convergence.csv"));
        REQUIRE(conv.size() == 3);
        CHECK(conv[0] == "repeat,iter,f_rec");
        for (const auto& l : conv) CHECK(count_fields(l) == 3);
        const auto recs = read_lines(dir / (std::string(kind) + "_recommendations.csv"));
        REQUIRE(recs.size() == 2);
        CHECK(count_fields(recs[1]) == count_fields(recs[0]));
        const auto box = read_lines(dir / (std::string(kind) + "_boxplot.csv"));
        CHECK(box.size() == 6);
    }
    std::ifstream in(dir / "summary.json");
    const auto summary = Json::parse(in);
    CHECK(summary.at("kinds").at("ucbsg").at("repeats") == 1);
    CHECK(summary.at("kinds").contains("ucb"));

    // Same master seed gives the same files.
    const auto first = read_lines(dir / "ucbsg_convergence.csv");
    (void)run_experiment(cfg);
    CHECK(read_lines(dir / "ucbsg_convergence.csv") == first);
    std::filesystem::remove_all(dir);
}

TEST_CASE("repeat seeds are distinct") {
    CHECK(repeat_seed(1, 0) != repeat_seed(1, 1));
    CHECK(repeat_seed(1, 0) != repeat_seed(2, 0));
    CHECK(repeat_seed(5, 3) == repeat_seed(5, 3));
}
