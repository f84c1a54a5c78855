#include <doctest.h>

#include <sstream>

#include "dataens/errors.hpp"
#include "dataens/ingest.hpp"

using namespace dataens;

namespace {

const char* kStations =
    "id,latitude_deg,longitude_deg,elevation_m\n"
    "E1,36.6,-97.5,315\n"
    "E2,36.9,-97.1,290.5\n";

std::vector<StationMeta> stations() {
    std::istringstream in(kStations);
    return parse_stations(in);
}

RawSeries series_of(std::vector<std::optional<double>> v, Timestamp start = 0, std::int64_t step = 60) {
    RawSeries s;
    s.station = {"E1", 36.6, -97.5, 315};
    s.start_time = start;
    s.step = step;
    s.values = std::move(v);
    return s;
}

}  // namespace

TEST_CASE("timestamps round trip through the UTC format") {
    CHECK(parse_timestamp("1970-01-01T00:00:00Z") == 0);
    CHECK(parse_timestamp("2005-10-01T00:00:00Z") == 1128124800);
    CHECK(format_timestamp(1128124800 + 300) == "2005-10-01T00:05:00Z");
    CHECK(parse_timestamp(format_timestamp(1234567890)) == 1234567890);
    CHECK_THROWS_AS(parse_timestamp("2005-13-01T00:00:00Z"), FormatError);
    CHECK_THROWS_AS(parse_timestamp("2005-10-01 00:00:00"), FormatError);
}

TEST_CASE("station file parsing") {
    const auto s = stations();
    REQUIRE(s.size() == 2);
    CHECK(s[1].id == "E2");
    CHECK(s[1].elevation == doctest::Approx(290.5));

    std::istringstream bad_header("id,lat,lon,elev\nE1,1,2,3\n");
    CHECK_THROWS_AS(parse_stations(bad_header), FormatError);
    std::istringstream dup("id,latitude_deg,longitude_deg,elevation_m\nE1,1,2,3\nE1,1,2,3\n");
    CHECK_THROWS_AS(parse_stations(dup), ValidationError);
    std::istringstream lat("id,latitude_deg,longitude_deg,elevation_m\nE1,91,2,3\n");
    CHECK_THROWS_AS(parse_stations(lat), ValidationError);

    std::ostringstream out;
    write_stations(out, s);
    std::istringstream back(out.str());
    const auto again = parse_stations(back);
    CHECK(again[0].latitude == doctest::Approx(36.6));
}

TEST_CASE("observation parsing handles interleaving and missing values") {
    std::istringstream in(
        "timestamp,station_id,pressure_kPa\n"
        "2005-10-01T00:00:00Z,E1,97.1\n"
        "2005-10-01T00:00:00Z,E2,97.5\n"
        "2005-10-01T00:01:00Z,E1,\n"
        "2005-10-01T00:02:00Z,E1,97.3\n");
    const auto obs = parse_observations(in, stations());
    REQUIRE(obs.size() == 2);
    CHECK(obs[0].step == 60);
    REQUIRE(obs[0].values.size() == 3);
    CHECK_FALSE(obs[0].values[1].has_value());
    CHECK(obs[0].missing_count() == 1);

    std::istringstream unknown("timestamp,station_id,pressure_kPa\n2005-10-01T00:00:00Z,ZZ,97.1\n");
    CHECK_THROWS_AS(parse_observations(unknown, stations()), ValidationError);
    std::istringstream garbage("timestamp,station_id,pressure_kPa\n2005-10-01T00:00:00Z,E1,abc\n");
    CHECK_THROWS_AS(parse_observations(garbage, stations()), FormatError);
}

TEST_CASE("missing files are reported by path") {
    try {
        load_observations({"/nonexistent/obs.csv"}, stations());
        FAIL("expected an error");
    } catch (const IoError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/obs.csv") != std::string::npos);
    }
}

TEST_CASE("gap filling") {
    const auto filled = fill_missing(series_of({1.0, std::nullopt, std::nullopt, 4.0}), 2);
    CHECK(*filled.values[1] == doctest::Approx(2.0));
    CHECK(*filled.values[2] == doctest::Approx(3.0));

    const auto edges = fill_missing(series_of({std::nullopt, 2.0, 3.0, std::nullopt}), 1);
    CHECK(*edges.values[0] == 2.0);
    CHECK(*edges.values[3] == 3.0);

    try {
        fill_missing(series_of({1.0, std::nullopt, std::nullopt, std::nullopt, 5.0}), 2);
        FAIL("expected a data quality error");
    } catch (const DataQualityError& e) {
        CHECK(std::string(e.what()).find("E1") != std::string::npos);
    }
}

TEST_CASE("missing fraction check") {
    CHECK_NOTHROW(check_missing_fraction(series_of({1.0, std::nullopt, 3.0, 4.0}), 0.25));
    CHECK_THROWS_AS(check_missing_fraction(series_of({1.0, std::nullopt, 3.0, 4.0}), 0.2), DataQualityError);
}

TEST_CASE("block averaging") {
    std::vector<std::optional<double>> v;
    for (int i = 1; i <= 12; ++i) v.emplace_back(i);
    const auto b = block_average(series_of(v, 0, 60), 5);
    REQUIRE(b.values.size() == 2);
    CHECK(*b.values[0] == doctest::Approx(3.0));
    CHECK(*b.values[1] == doctest::Approx(8.0));
    CHECK(b.step == 300);
    CHECK(b.start_time == 0);
    CHECK_THROWS_AS(block_average(series_of(v), 0), std::invalid_argument);
    // width 1 is the identity
    const auto same = block_average(series_of(v), 1);
    CHECK(same.values.size() == 12);
}

TEST_CASE("windowing and grid assembly") {
    const auto s = series_of({1.0, 2.0, 3.0, 4.0, 5.0}, 600, 60);
    const auto w = window(s, 540, 4);
    REQUIRE(w.values.size() == 4);
    CHECK_FALSE(w.values[0].has_value());
    CHECK(*w.values[1] == 1.0);
    CHECK_THROWS_AS(window(s, 630, 2), AlignmentError);

    auto a = series_of({1.0, 2.0, 3.0, 4.0});
    auto b = series_of({5.0, 6.0, 7.0, 8.0});
    b.station.id = "E2";
    const auto g = assemble_grid({a, b}, 2);
    CHECK(g.values.rows() == 2);
    CHECK(g.values.cols() == 3);
    CHECK(g.values(1, 2) == 7.0);
    CHECK(g.select({"E2"}).values(0, 0) == 5.0);
    CHECK_THROWS_AS(assemble_grid({a, b}, 4), AlignmentError);
    b.start_time = 60;
    CHECK_THROWS_AS(assemble_grid({a, b}, 2), AlignmentError);
}
