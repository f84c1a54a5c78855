#include <doctest.h>

#include <numbers>

#include "dataens/geometry.hpp"

using namespace dataens;

TEST_CASE("great-circle distances") {
    // one degree of latitude on a 6371 km sphere
    CHECK(great_circle({0.0, 0.0}, {1.0, 0.0}) == doctest::Approx(111.19492664).epsilon(1e-9));
    CHECK(great_circle({36.0, -97.0}, {36.0, -97.0}) == 0.0);
    CHECK(great_circle({0.0, 0.0}, {0.0, 180.0}) == doctest::Approx(std::numbers::pi * kEarthRadiusKm));
    const LatLon a{36.6, -97.5}, b{37.1, -96.9};
    CHECK(great_circle(a, b) == doctest::Approx(great_circle(b, a)));
}

TEST_CASE("site geometry") {
    const std::vector<LatLon> sites{{36.0, -97.0}, {36.5, -97.0}, {36.0, -96.5}};
    const SiteGeometry g(sites);
    CHECK(g.size() == 3);
    CHECK(g.distance(0, 1) == doctest::Approx(great_circle(sites[0], sites[1])));
    CHECK(g.distances().isApprox(g.distances().transpose()));
    CHECK(g.distances().diagonal().isZero());
    CHECK(g.diameter() == doctest::Approx(g.distances().maxCoeff()));

    // north displacement of half a degree, no east component
    const auto d = g.displacement(1, 0);
    CHECK(d[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.5 * 111.19492664).epsilon(1e-6));
    // east displacement shrinks with cos(latitude of the origin)
    const auto e = g.displacement(2, 0);
    CHECK(e[0] > 0.0);
    CHECK(e[0] < 0.5 * 111.2);
    CHECK(g.displacement(0, 2).isApprox(-e));
}

TEST_CASE("subsets and extensions keep the projection origin") {
    const std::vector<LatLon> sites{{36.0, -97.0}, {36.5, -97.0}, {36.0, -96.5}, {36.2, -96.8}};
    const SiteGeometry g(sites);
    const auto s = g.subset({2, 0});
    CHECK(s.size() == 2);
    CHECK(s.displacement(0, 1).isApprox(g.displacement(2, 0)));

    const SiteGeometry extra(std::vector<LatLon>{{36.9, -97.3}}, g.origin());
    const auto c = g.concat(extra);
    CHECK(c.size() == 5);
    CHECK(c.displacement(1, 0).isApprox(g.displacement(1, 0)));
    CHECK(c.distance(4, 0) == doctest::Approx(great_circle(sites[0], {36.9, -97.3})));
}
