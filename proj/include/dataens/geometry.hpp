#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dataens {

inline constexpr double kEarthRadiusKm = 6371.0;

struct LatLon {
    double lat = 0.0;  // degrees
    double lon = 0.0;  // degrees
};

/// Haversine distance on a sphere of radius kEarthRadiusKm.
double great_circle(const LatLon& p, const LatLon& q);

/// Pairwise spatial quantities for a fixed list of sites.
///
/// Distances are great-circle; displacements come from an equirectangular
/// projection about the centroid and are used only for the phase term of the
/// cross-spectrum, where the domain is treated as flat.
class SiteGeometry {
public:
    SiteGeometry() = default;
    /// Projects about the centroid of `sites`.
    explicit SiteGeometry(std::vector<LatLon> sites);
    /// Projects about a fixed origin, so subsets and extensions keep identical displacements.
    SiteGeometry(std::vector<LatLon> sites, LatLon origin);

    std::size_t size() const { return sites_.size(); }
    const std::vector<LatLon>& sites() const { return sites_; }
    const Eigen::MatrixXd& distances() const { return dist_; }
    double distance(std::size_t j, std::size_t k) const { return dist_(j, k); }

    /// Planar coordinates (east, north) in km, one row per site.
    const Eigen::MatrixX2d& positions() const { return pos_; }
    /// x_j - x_k in the local plane, km.
    Eigen::Vector2d displacement(std::size_t j, std::size_t k) const {
        return (pos_.row(j) - pos_.row(k)).transpose();
    }

    /// Largest pairwise distance, km.
    double diameter() const;

    /// Geometry restricted to / reordered by the given indices.
    SiteGeometry subset(const std::vector<std::size_t>& idx) const;
    /// Concatenation: this geometry's sites followed by `other`'s.
    SiteGeometry concat(const SiteGeometry& other) const;

    const LatLon& origin() const { return origin_; }

private:
    std::vector<LatLon> sites_;
    LatLon origin_;
    Eigen::MatrixXd dist_;
    Eigen::MatrixX2d pos_;
};

LatLon centroid(const std::vector<LatLon>& sites);

/// Equirectangular projection about `origin` (the centroid by default):
/// east = R cos(lat0) dlon, north = R dlat (angles in radians).
Eigen::MatrixX2d local_plane(const std::vector<LatLon>& sites);
Eigen::MatrixX2d local_plane(const std::vector<LatLon>& sites, const LatLon& origin);

}  // namespace dataens
