#include "dataens/geometry.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

namespace dataens {

namespace {
constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
}  // namespace

double great_circle(const LatLon& p, const LatLon& q) {
    const double phi1 = deg2rad(p.lat);
    const double phi2 = deg2rad(q.lat);
    const double dphi = phi2 - phi1;
    const double dlambda = deg2rad(q.lon - p.lon);
    const double s1 = std::sin(0.5 * dphi);
    const double s2 = std::sin(0.5 * dlambda);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

LatLon centroid(const std::vector<LatLon>& sites) {
    LatLon c;
    if (sites.empty()) return c;
    for (const auto& s : sites) {
        c.lat += s.lat;
        c.lon += s.lon;
    }
    c.lat /= static_cast<double>(sites.size());
    c.lon /= static_cast<double>(sites.size());
    return c;
}

Eigen::MatrixX2d local_plane(const std::vector<LatLon>& sites) { return local_plane(sites, centroid(sites)); }

Eigen::MatrixX2d local_plane(const std::vector<LatLon>& sites, const LatLon& origin) {
    const auto n = static_cast<Eigen::Index>(sites.size());
    Eigen::MatrixX2d pos(n, 2);
    const double c = std::cos(deg2rad(origin.lat));
    for (Eigen::Index i = 0; i < n; ++i) {
        pos(i, 0) = kEarthRadiusKm * c * deg2rad(sites[i].lon - origin.lon);
        pos(i, 1) = kEarthRadiusKm * deg2rad(sites[i].lat - origin.lat);
    }
    return pos;
}

SiteGeometry::SiteGeometry(std::vector<LatLon> sites) : SiteGeometry(sites, centroid(sites)) {}

SiteGeometry::SiteGeometry(std::vector<LatLon> sites, LatLon origin) : sites_(std::move(sites)), origin_(origin) {
    const auto n = static_cast<Eigen::Index>(sites_.size());
    dist_ = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index k = j + 1; k < n; ++k) dist_(j, k) = dist_(k, j) = great_circle(sites_[j], sites_[k]);
    pos_ = local_plane(sites_, origin_);
    if (diameter() > 1000.0)
        std::cerr << "warning: site domain spans " << diameter()
                  << " km; the flat-plane phase geometry is only accurate for small domains\n";
}

double SiteGeometry::diameter() const { return dist_.size() ? dist_.maxCoeff() : 0.0; }

SiteGeometry SiteGeometry::subset(const std::vector<std::size_t>& idx) const {
    std::vector<LatLon> s;
    s.reserve(idx.size());
    for (auto i : idx) s.push_back(sites_.at(i));
    return SiteGeometry(std::move(s), origin_);
}

SiteGeometry SiteGeometry::concat(const SiteGeometry& other) const {
    std::vector<LatLon> s = sites_;
    s.insert(s.end(), other.sites_.begin(), other.sites_.end());
    return SiteGeometry(std::move(s), origin_);
}

}  // namespace dataens
