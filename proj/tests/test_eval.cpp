#include <doctest.h>

#include <numeric>

#include "dataens/eval.hpp"
#include "dataens/preprocess.hpp"

using namespace dataens;

namespace {

Eigen::MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, Rng& rng) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = standard_normal(rng);
    return m;
}

}  // namespace

TEST_CASE("rank of a truth beyond every member") {
    Rng rng(1);
    const Eigen::MatrixXd members = normal_matrix(9, 50, rng);
    const auto above = rank_histogram(Eigen::VectorXd::Constant(50, 100.0), members, rng);
    REQUIRE(above.counts.size() == 10);
    CHECK(above.counts.back() == 50);
    const auto below = rank_histogram(Eigen::VectorXd::Constant(50, -100.0), members, rng);
    CHECK(below.counts.front() == 50);
    CHECK(below.n_times == 50);
    CHECK(below.degrees_of_freedom() == 9);
    // all mass in one bin: statistic is (K+1) n - n
    CHECK(below.chi_square() == doctest::Approx(9.0 * 50.0));
}

TEST_CASE("ties are spread uniformly over the tied ranks") {
    Rng rng(2);
    const std::size_t n = 50000;
    const Eigen::MatrixXd members = Eigen::MatrixXd::Zero(4, n);
    const auto h = rank_histogram(Eigen::VectorXd::Zero(n), members, rng);
    for (auto c : h.counts) CHECK(static_cast<double>(c) == doctest::Approx(n / 5.0).epsilon(0.03));
}

TEST_CASE("subsetting times") {
    Rng rng(3);
    Eigen::VectorXd truth(4);
    truth << 10, -10, 10, -10;
    const Eigen::MatrixXd members = Eigen::MatrixXd::Zero(3, 4);
    const auto h = rank_histogram(truth, members, {0, 2}, "even", rng);
    CHECK(h.n_times == 2);
    CHECK(h.counts.back() == 2);
    CHECK(h.selector == "even");
    CHECK_THROWS(rank_histogram(truth, members, {4}, "bad", rng));
}

TEST_CASE("rank histograms of exchangeable draws pass the chi-square test at the nominal rate") {
    Rng rng(4);
    const double q = chi_square_quantile(0.99, 99.0);
    CHECK(q == doctest::Approx(134.642).epsilon(1e-4));
    int rejections = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        const Eigen::MatrixXd all = normal_matrix(100, 1000, rng);
        const auto h = rank_histogram(all.row(0).transpose(), all.bottomRows(99), rng);
        if (h.chi_square() > q) ++rejections;
    }
    CHECK(rejections <= 8);
}

TEST_CASE("envelope coverage") {
    Rng rng(5);
    const Eigen::MatrixXd members = normal_matrix(19, 200, rng);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(200);
    truth[3] = 50.0;
    truth[7] = -50.0;
    truth[8] = -50.0;
    const auto c = envelope_coverage(truth, members);
    CHECK(c.n_above >= 1);
    CHECK(c.n_below >= 2);
    CHECK(c.expected_outside == doctest::Approx(200.0 * 2.0 / 20.0));
    CHECK(c.mean_width > 0.0);

    Eigen::MatrixXd wide(2, 200);
    wide.row(0).setConstant(-1e300);
    wide.row(1).setConstant(1e300);
    CHECK(envelope_coverage(truth, wide).n_outside() == 0);
}

TEST_CASE("min/max diagnostic") {
    // with two series one is always the min and the other the max
    Eigen::VectorXd truth(3);
    truth << 1, 2, 3;
    Eigen::MatrixXd one(1, 3);
    one << 0, 5, 1;
    const auto d = min_max_rank_diagnostic(truth, one);
    CHECK(d.n_series == 2);
    CHECK(d.never_extreme == 0);
    CHECK_FALSE(d.truth_never_extreme);
    CHECK(d.truth_extreme_times == 3);

    Eigen::MatrixXd three(3, 3);
    three << -1, -1, -1, 0, 0, 0, 5, 5, 5;
    const auto e = min_max_rank_diagnostic(truth, three);
    CHECK(e.truth_never_extreme);
    CHECK(e.never_extreme == 2);
}

TEST_CASE("score identities") {
    Rng rng(6);
    Eigen::VectorXd truth(300), pred(300);
    for (int i = 0; i < 300; ++i) {
        truth[i] = standard_normal(rng);
        pred[i] = truth[i] - 0.3 + 0.1 * standard_normal(rng);
    }
    const auto s = score(truth, pred, "X", "m");
    const double n = 300;
    CHECK(s.rmse * s.rmse == doctest::Approx(s.mean_error * s.mean_error + s.sd_error * s.sd_error * (n - 1) / n));
    CHECK(s.n == 300);
    const auto bias = score(truth, (truth.array() - 0.25).matrix(), "X", "m");
    CHECK(bias.mean_error == doctest::Approx(0.25));
    CHECK(std::abs(bias.sd_error) < 1e-12);
    CHECK(bias.rmse == doctest::Approx(0.25));

    Eigen::MatrixXd m(2, 2);
    m << 1, 2, 3, 6;
    CHECK(ensemble_mean(m) == Eigen::Vector2d(2, 4));
}

TEST_CASE("aggregated differences") {
    Eigen::VectorXd x(8641);
    std::iota(x.data(), x.data() + x.size(), 0.0);
    const auto d = aggregate_diffs(x, 12);
    CHECK(d.size() == 719);
    CHECK((d.array() - 12.0).abs().maxCoeff() < 1e-9);

    Eigen::VectorXd y(5);
    y << 1, 4, 2, 8, 3;
    Eigen::VectorXd dy(4);
    dy << 3, -2, 6, -5;
    CHECK(aggregate_diffs(y, 1) == dy);

    Eigen::MatrixXd rows(2, 6);
    rows << 0, 2, 4, 6, 8, 10, 1, 1, 1, 1, 1, 1;
    const auto r = aggregate_diffs(rows, 2);
    CHECK(r.rows() == 2);
    CHECK(r.cols() == 2);
    CHECK(r(0, 0) == doctest::Approx(4.0));
    CHECK(r(1, 1) == doctest::Approx(0.0));
    CHECK_THROWS(aggregate_diffs(y, 0));
}

TEST_CASE("nearest station and the nearest-neighbour baseline") {
    std::vector<StationMeta> obs{{"B", 36.0, -97.0, 300}, {"A", 36.0, -97.0, 300}, {"C", 37.0, -97.0, 400}};
    // coincident A and B: the smaller id wins
    CHECK(obs[nearest_station(obs, {"T", 36.1, -97.0, 0})].id == "A");
    // equidistant north/south neighbours
    std::vector<StationMeta> pair{{"N2", 36.5, -97.0, 0}, {"N1", 35.5, -97.0, 0}};
    CHECK(pair[nearest_station(pair, {"T", 36.0, -97.0, 0})].id == "N1");

    DataGrid grid;
    grid.stations = {obs[1], obs[2]};
    grid.values.resize(2, 4);
    grid.values << 97.0, 97.1, 97.2, 97.05, 96.0, 96.1, 96.2, 96.3;
    const SeaLevelModel sl{std::log(101.3), 8000.0};

    // a target co-located with a station at the same elevation copies it exactly
    auto same = nearest_neighbor_baseline(grid, {{"T", 37.0, -97.0, 400}}, sl);
    CHECK(same.row(0) == grid.values.row(1));

    // a lower target gets the elevation factor exp((a_obs - a_target) / H)
    auto lower = nearest_neighbor_baseline(grid, {{"T", 36.01, -97.0, 100}}, sl);
    const double factor = std::exp((300.0 - 100.0) / 8000.0);
    CHECK((lower.row(0) - grid.values.row(0) * factor).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("top fraction of times") {
    Eigen::VectorXd v(10);
    v << 1, 9, 3, 9, 5, 0, 7, 2, 8, 4;
    CHECK(top_fraction_times(v, 0.3) == std::vector<std::size_t>{1, 3, 8});
    CHECK(top_fraction_times(v, 0.2) == std::vector<std::size_t>{1, 3});
    CHECK(top_fraction_times(v, 0.1) == std::vector<std::size_t>{1});
    CHECK(top_fraction_times(v, 1.0).size() == 10);
}
