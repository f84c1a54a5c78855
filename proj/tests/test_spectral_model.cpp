#include <doctest.h>

#include <numbers>

#include "dataens/errors.hpp"
#include "dataens/spectral_model.hpp"
#include "support.hpp"

using namespace dataens;

TEST_CASE("default knots reproduce the published layout") {
    const KnotSet k = KnotSet::defaults();
    CHECK(k.s.size() == 7);
    CHECK(k.delta.size() == 13);
    CHECK(k.beta.back() == doctest::Approx(std::numbers::pi / 6.0));
    CHECK(k.s.back() == doctest::Approx(std::numbers::pi));
    const SpectralModel m(k);
    const auto l = m.layout();
    CHECK(l.n_s == 8);
    CHECK(l.n_beta == 4);
    CHECK(l.n_delta == 12);
    CHECK(l.n_theta == 3);
    CHECK(l.total() == 28);

    // a cutoff above the hourly frequency is appended as a knot
    const KnotSet wide = KnotSet::defaults(std::numbers::pi);
    CHECK(wide.delta.back() == doctest::Approx(std::numbers::pi));
    CHECK(SpectralModel(wide).layout().total() == 31);
}

TEST_CASE("invalid knot sets are rejected") {
    KnotSet k = KnotSet::defaults();
    k.delta.back() = 0.4;
    CHECK_THROWS_AS(k.validate(), ConfigError);
    k = KnotSet::defaults();
    k.cutoff = 4.0;
    CHECK_THROWS_AS(k.validate(), ConfigError);
}

TEST_CASE("parameter packing round trips") {
    const SpectralModel m(KnotSet::defaults());
    Rng rng(5);
    const auto p = testing::random_params(m, rng);
    const auto v = p.pack();
    CHECK(v.size() == 28);
    const auto q = SpectralParams::unpack(v, m.layout());
    CHECK(q.pack() == v);
    CHECK_THROWS(SpectralParams::unpack(Eigen::VectorXd::Zero(5), m.layout()));
}

TEST_CASE("Matern 3/2 correlation") {
    CHECK(matern32(0.0) == 1.0);
    CHECK(matern32(1.0) == doctest::Approx(2.0 / std::numbers::e).epsilon(1e-15));
    CHECK(matern32(3.0) == doctest::Approx(4.0 * std::exp(-3.0)));
    CHECK_THROWS(matern32(-0.1));
}

TEST_CASE("cross-spectrum structure") {
    const SpectralModel m(KnotSet::defaults());
    const SiteGeometry g(testing::small_network(5));
    Rng rng(11);
    const auto p = testing::random_params(m, rng);
    for (double w : {0.0, 0.01, 0.2, 0.5, 1.0, 3.0}) {
        const auto f = m.cross_spectrum(p, g, w);
        CHECK((f - f.adjoint()).cwiseAbs().maxCoeff() < 1e-14 * f.cwiseAbs().maxCoeff());
        CHECK(f.diagonal().real().isApprox(Eigen::VectorXd::Constant(5, m.eval_S(p, w))));
        const auto [s0, s1] = m.split_S(p, w);
        CHECK(s0 + s1 == doctest::Approx(m.eval_S(p, w)).epsilon(1e-14));
        const auto fm = m.cross_spectrum(p, g, -w);
        CHECK((fm - f.conjugate()).cwiseAbs().maxCoeff() < 1e-14 * f.cwiseAbs().maxCoeff());
    }
    // above the cutoff the matrix is S I
    const auto hi = m.cross_spectrum(p, g, 1.0);
    CHECK((hi - Eigen::MatrixXcd::Identity(5, 5) * m.eval_S(p, 1.0)).cwiseAbs().maxCoeff() == 0.0);
    // coherence is bounded by S1 / S
    const double w = 0.1;
    const auto [s0, s1] = m.split_S(p, w);
    CHECK(std::abs(m.coherence(p, g, w, 0, 1)) <= s1 / (s0 + s1) + 1e-14);
}

TEST_CASE("zero range removes all cross-site dependence") {
    SpectralValues v{2.0, 0.5, 1.5, 0.0, 0.3};
    const SiteGeometry g(testing::small_network(3));
    const auto f = assemble_cross_spectrum(v, 0.2, g);
    CHECK(f.isApprox(Eigen::MatrixXcd::Identity(3, 3) * 2.0));
}

TEST_CASE("phase term follows the projected displacement") {
    const SiteGeometry g(std::vector<LatLon>{{36.0, -97.0}, {36.0, -96.0}});
    SpectralValues v{1.0, 0.0, 1.0, 1e9, 0.01};
    const auto f = assemble_cross_spectrum(v, 0.0, g);  // u points east
    const double dx = g.displacement(0, 1)[0];
    CHECK(std::arg(f(0, 1)) == doctest::Approx(std::remainder(0.01 * dx, 2 * std::numbers::pi)).epsilon(1e-9));
}

TEST_CASE("tabulated evaluation equals direct evaluation") {
    const SpectralModel m(KnotSet::defaults());
    Rng rng(2);
    const auto p = testing::random_params(m, rng);
    std::vector<double> omegas{0.0, 0.003, 0.1, 0.5, 0.6, 2.0, std::numbers::pi};
    const SpectralTable t(m, omegas);
    const auto vals = t.values(p);
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        const auto d = m.evaluate(p, omegas[i]);
        CHECK(vals[i].S == doctest::Approx(d.S).epsilon(1e-13));
        CHECK(vals[i].S1 == doctest::Approx(d.S1).epsilon(1e-13));
        CHECK(vals[i].delta == doctest::Approx(d.delta).epsilon(1e-13));
        CHECK(vals[i].theta == doctest::Approx(d.theta).epsilon(1e-13));
    }
}
