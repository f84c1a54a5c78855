#pragma once

// Shared fixtures and brute-force oracles for the tests.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "dataens/geometry.hpp"
#include "dataens/rng.hpp"
#include "dataens/spectral_model.hpp"

namespace testing {

using namespace dataens;

inline std::vector<LatLon> small_network(std::size_t n, std::uint64_t seed = 1) {
    Rng rng = substream(seed, {stream_tag("network")});
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<LatLon> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back({36.5 + u(rng), -97.5 + 1.2 * u(rng)});
    return out;
}

/// Random parameters that keep S, delta and theta in physically sensible ranges.
inline SpectralParams random_params(const SpectralModel& model, Rng& rng) {
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
    SpectralParams p = SpectralParams::zeros(model.layout());
    for (auto& v : p.s) v = -2.0 + 0.6 * z(rng);
    for (auto& v : p.beta) v = 0.8 * z(rng);
    for (auto& v : p.delta) v = 40.0 + 60.0 * std::abs(z(rng));
    for (auto& v : p.theta) v = 0.02 * z(rng);
    p.u_angle = u(rng);
    return p;
}

/// Knots for short series: every function has a few interior knots below the cutoff.
inline KnotSet coarse_knots(double cutoff = std::numbers::pi / 2.0) {
    KnotSet k;
    k.s = {0.4, 1.2, std::numbers::pi};
    k.beta = {cutoff / 2.0, cutoff};
    k.delta = {cutoff / 3.0, 2.0 * cutoff / 3.0, cutoff};
    k.theta = {cutoff / 2.0, cutoff};
    k.cutoff = cutoff;
    return k;
}

/// O(T^2) transform with the library's sign and index conventions.
inline Eigen::MatrixXcd naive_dft(const Eigen::MatrixXd& a) {
    const auto T = a.cols();
    Eigen::MatrixXcd out(a.rows(), T);
    for (Eigen::Index j = 0; j < T; ++j) {
        const double w = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(T);
        for (Eigen::Index x = 0; x < a.rows(); ++x) {
            std::complex<double> s = 0.0;
            for (Eigen::Index t = 1; t <= T; ++t) s += a(x, t - 1) * std::polar(1.0, w * static_cast<double>(t));
            out(x, j) = s;
        }
    }
    return out;
}

/// Exact log-density of the stacked real series (n*T) of a stationary periodic
/// Gaussian process with lag covariance Cov(A_t, A_s) = (2 pi / T) sum_m f(w_m) e^{-i w_m (t - s)}.
inline double exact_periodic_loglik(const SpectralModel& model, const SpectralParams& p, const SiteGeometry& g,
                                    const Eigen::MatrixXd& a) {
    const auto n = a.rows();
    const auto T = a.cols();
    std::vector<Eigen::MatrixXcd> f(static_cast<std::size_t>(T));
    for (Eigen::Index m = 0; m < T; ++m) {
        double w = 2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(T);
        if (m > T / 2) w -= 2.0 * std::numbers::pi;
        f[static_cast<std::size_t>(m)] = model.cross_spectrum(p, g, w);
    }
    Eigen::MatrixXd cov(n * T, n * T);
    for (Eigen::Index lag = 0; lag < T; ++lag) {
        Eigen::MatrixXcd c = Eigen::MatrixXcd::Zero(n, n);
        for (Eigen::Index m = 0; m < T; ++m)
            c += f[static_cast<std::size_t>(m)] *
                 std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(m * lag) / static_cast<double>(T));
        c *= 2.0 * std::numbers::pi / static_cast<double>(T);
        for (Eigen::Index t = 0; t < T; ++t) {
            const Eigen::Index s = (t + T - lag) % T;  // t - s = lag (mod T)
            cov.block(t * n, s * n, n, n) = c.real();
        }
    }
    Eigen::VectorXd y(n * T);
    for (Eigen::Index t = 0; t < T; ++t) y.segment(t * n, n) = a.col(t);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    const Eigen::MatrixXd l = llt.matrixL();
    const double logdet = 2.0 * l.diagonal().array().log().sum();
    const double quad = y.dot(llt.solve(y));
    return -0.5 * (static_cast<double>(n * T) * std::log(2.0 * std::numbers::pi) + logdet + quad);
}

}  // namespace testing
