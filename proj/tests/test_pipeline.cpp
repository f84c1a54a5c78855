#include <doctest.h>

#include <fstream>
#include <sstream>

#include "dataens/pipeline.hpp"

using namespace dataens;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("dataens_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RunConfig small_synth(const fs::path& out) {
    RunConfig c;
    c.output_dir = out;
    c.seed = 11;
    c.target_length = 576;
    c.synth.n_sites = 6;
    c.synth.held_out = {"S05", "S06"};
    c.max_iterations = 25;
    c.ensemble_count = 5;
    return c;
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("config defaults and strict keys") {
    const RunConfig c = config_from_json(json::object());
    CHECK(c.block == 5);
    CHECK(c.target_length == 8640);
    CHECK(c.ensemble_count == 99);
    CHECK(SpectralModel(c.knots.knot_set()).layout().total() == 28);
    CHECK_FALSE(c.seed.has_value());
    CHECK_THROWS_AS(config_from_json(json{{"windw", json::object()}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"window", {{"blok", 2}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"window", {{"block", "five"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json{{"preprocess", {{"diurnal_harmonics", 144}}}}), ConfigError);

    // round trip, and relative paths resolve against the config location
    RunConfig d;
    d.stations = "st.csv";
    d.seed = 5;
    d.held_out = {"X"};
    const RunConfig back = config_from_json(json(d), "/base");
    CHECK(back.stations == fs::path("/base/st.csv"));
    CHECK(back.seed == 5u);
    CHECK(back.held_out == std::vector<std::string>{"X"});
}

TEST_CASE("stochastic stages need a seed") {
    RunConfig c;
    c.output_dir = scratch("noseed");
    const auto msg = message_of([&] { cmd_synth(c); });
    CHECK(msg.find("seed") != std::string::npos);
    CHECK(msg.find("[synth]") == 0);
}

TEST_CASE("generator is deterministic in the seed") {
    const RunConfig c = small_synth("unused");
    const auto a = synthesize(c, 3);
    const auto b = synthesize(c, 3);
    const auto d = synthesize(c, 4);
    CHECK(a.grid.values == b.grid.values);
    CHECK(a.grid.values.rows() == 6);
    CHECK(a.grid.values.cols() == 577);
    CHECK_FALSE(a.grid.values == d.grid.values);
    CHECK(a.grid.stations.back().id == "S06");
}

TEST_CASE("fit, simulate and evaluate on a small generated network") {
    const fs::path dir = scratch("e2e");
    cmd_synth(small_synth(dir));
    REQUIRE(fs::exists(dir / "config.json"));
    RunConfig c = load_config(dir / "config.json");
    CHECK(c.held_out == std::vector<std::string>{"S05", "S06"});
    CHECK(c.output_dir == dir / "run");

    const fs::path report = cmd_fit(c);
    const FitReport r = read_json(report).get<FitReport>();
    CHECK(r.stations.size() == 4);
    CHECK(r.length == 576);
    CHECK(std::isfinite(r.fit.loglik));

    const fs::path ens = cmd_simulate(c, report);
    const auto members = read_ensemble(ens);
    CHECK(members.members.size() == 5);

    // same seed, same ensemble
    RunConfig again = c;
    again.output_dir = dir / "run2";
    fs::create_directories(again.output_dir);
    fs::copy_file(report, again.output_dir / "fit_report.json");
    const auto twin = read_ensemble(cmd_simulate(again, again.output_dir / "fit_report.json"));
    CHECK(twin.members.front().pressure == members.members.front().pressure);

    const fs::path eval = cmd_evaluate(c, ens);
    const json metrics = read_json(eval / "metrics.json");
    REQUIRE(metrics["targets"].size() == 2);
    CHECK(metrics["targets"][0].contains("rank_histograms"));
    CHECK(fs::exists(eval / "scores.csv"));
    CHECK(fs::exists(eval / "rank_histograms.csv"));

    SUBCASE("moved stations are rejected") {
        std::ifstream in(c.stations);
        std::stringstream buf;
        buf << in.rdbuf();
        in.close();
        auto stations = parse_stations(buf);
        stations[0].latitude += 0.5;
        std::ofstream out(c.stations);
        write_stations(out, stations);
        out.close();
        const auto msg = message_of([&] { cmd_simulate(c, report); });
        CHECK(msg.find("geometry hash mismatch") != std::string::npos);
    }
    SUBCASE("missing observation files are named") {
        RunConfig bad = c;
        bad.observations.push_back(dir / "observations" / "nowhere.csv");
        const auto msg = message_of([&] { cmd_fit(bad); });
        CHECK(msg.find("nowhere.csv") != std::string::npos);
        CHECK(msg.find("[ingest]") == 0);
    }
}
