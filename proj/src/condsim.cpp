#include "dataens/condsim.hpp"

#include <cmath>
#include <numbers>

#include "dataens/errors.hpp"
#include "dataens/parallel.hpp"

namespace dataens {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<LatLon> latlons(const std::vector<StationMeta>& s) {
    std::vector<LatLon> out;
    for (const auto& m : s) out.push_back({m.latitude, m.longitude});
    return out;
}

bool is_real_frequency(std::size_t j, std::size_t length) { return j == 0 || (length % 2 == 0 && j == length / 2); }

// Factor m with m m^* = cov for a Hermitian positive semidefinite matrix.
Eigen::MatrixXcd psd_factor(const Eigen::MatrixXcd& cov) {
    if (cov.rows() == 0) return cov;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (cov + cov.adjoint()));
    const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * lam.asDiagonal();
}

Eigen::VectorXcd draw(const Eigen::VectorXcd& mean, const Eigen::MatrixXcd& cov, bool real, Rng& rng) {
    const auto m = mean.size();
    if (real) {
        const Eigen::MatrixXd re = cov.real();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (re + re.transpose()));
        const Eigen::MatrixXd factor = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
        Eigen::VectorXd z(m);
        for (Eigen::Index i = 0; i < m; ++i) z[i] = standard_normal(rng);
        return (mean.real() + factor * z).cast<std::complex<double>>();
    }
    const Eigen::MatrixXcd factor = psd_factor(cov);
    Eigen::VectorXcd z(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double a = standard_normal(rng);
        const double b = standard_normal(rng);
        z[i] = std::complex<double>(a, b) * std::sqrt(0.5);
    }
    return mean + factor * z;
}

}  // namespace

PredictionSetup PredictionSetup::make(const SiteGeometry& observed, std::vector<StationMeta> targets) {
    PredictionSetup s;
    s.observed = observed;
    s.targets = std::move(targets);
    s.combined = observed.concat(SiteGeometry(latlons(s.targets), observed.origin()));
    for (std::size_t t = 0; t < s.targets.size(); ++t) {
        bool hit = false;
        for (std::size_t o = 0; o < observed.size(); ++o)
            if (s.combined.distance(o, observed.size() + t) == 0.0) hit = true;
        s.coincident.push_back(hit);
    }
    return s;
}

ConditionalMoments conditional_moments(const SpectralModel& model, const SpectralParams& params,
                                       const PredictionSetup& setup, const SpectralField& observed, std::size_t j) {
    const auto n = static_cast<Eigen::Index>(setup.n_observed());
    const auto m = static_cast<Eigen::Index>(setup.n_targets());
    const std::size_t length = observed.length();
    const double scale = kTwoPi * static_cast<double>(length);
    const double w = SpectralField::frequency(j, length);
    const double w_signed = j > length / 2 ? w - kTwoPi : w;
    ConditionalMoments out;
    const Eigen::MatrixXcd f = model.cross_spectrum(params, setup.combined, w_signed);
    if (n == 0) {
        out.mean = Eigen::VectorXcd::Zero(m);
        out.covariance = scale * f;
        return out;
    }
    Eigen::MatrixXcd foo = f.topLeftCorner(n, n);
    const Eigen::MatrixXcd fpo = f.bottomLeftCorner(m, n);
    const Eigen::MatrixXcd fpp = f.bottomRightCorner(m, m);
    Eigen::LLT<Eigen::MatrixXcd> llt(foo);
    if (llt.info() != Eigen::Success) {
        const double ridge = 1e-10 * foo.trace().real() / static_cast<double>(n);
        foo.diagonal().array() += ridge;
        llt.compute(foo);
        out.ridged = true;
        if (llt.info() != Eigen::Success)
            throw NumericalError("observed cross-spectrum is singular at Fourier index " + std::to_string(j));
    }
    const Eigen::MatrixXcd gain = llt.solve(fpo.adjoint()).adjoint();  // f_po f_oo^{-1}
    out.mean = gain * observed.coeffs.col(static_cast<Eigen::Index>(j));
    out.covariance = scale * (fpp - gain * fpo.adjoint());
    out.covariance = 0.5 * (out.covariance + out.covariance.adjoint()).eval();
    return out;
}

SpectralField conditional_draw(const SpectralModel& model, const SpectralParams& params, const PredictionSetup& setup,
                               const SpectralField& observed, std::uint64_t seed, std::uint64_t member,
                               DrawInfo* info) {
    if (observed.n_sites() != setup.n_observed())
        throw ValidationError("observed field has " + std::to_string(observed.n_sites()) + " sites, setup has " +
                              std::to_string(setup.n_observed()));
    const std::size_t length = observed.length();
    const auto m = static_cast<Eigen::Index>(setup.n_targets());
    const double scale = kTwoPi * static_cast<double>(length);
    SpectralField out;
    out.coeffs = Eigen::MatrixXcd::Zero(m, static_cast<Eigen::Index>(length));
    const std::size_t half = length / 2;
    std::vector<char> ridged(half + 1, 0);
    constexpr std::uint64_t tag = stream_tag("condsim");

    parallel_for(half + 1, [&](std::size_t j) {
        Rng rng = substream(seed, {tag, member, j});
        const bool real = is_real_frequency(j, length);
        const double w = SpectralField::frequency(j, length);
        Eigen::VectorXcd value;
        if (std::abs(w) > model.cutoff()) {
            // no coherence: independent of the observed sites
            const double s = model.eval_S(params, w);
            const Eigen::MatrixXcd cov = Eigen::MatrixXcd::Identity(m, m) * (scale * s);
            value = draw(Eigen::VectorXcd::Zero(m), cov, real, rng);
        } else {
            const auto mom = conditional_moments(model, params, setup, observed, j);
            ridged[j] = mom.ridged;
            value = draw(mom.mean, mom.covariance, real, rng);
        }
        out.coeffs.col(static_cast<Eigen::Index>(j)) = value;
        if (j != 0 && !(length % 2 == 0 && j == half))
            out.coeffs.col(static_cast<Eigen::Index>(length - j)) = value.conjugate();
    });
    if (info) {
        info->ridged_frequencies = 0;
        for (char r : ridged) info->ridged_frequencies += r ? 1 : 0;
    }
    return out;
}

SpectralField unconditional_draw(const SpectralModel& model, const SpectralParams& params,
                                 const SiteGeometry& geometry, std::size_t length, std::uint64_t seed,
                                 std::uint64_t member) {
    std::vector<StationMeta> targets;
    for (const auto& s : geometry.sites()) targets.push_back({"", s.lat, s.lon, 0.0});
    PredictionSetup setup;
    setup.observed = SiteGeometry(std::vector<LatLon>{}, geometry.origin());
    setup.targets = targets;
    setup.combined = geometry;
    setup.coincident.assign(targets.size(), false);
    SpectralField empty;
    empty.coeffs.resize(0, static_cast<Eigen::Index>(length));
    return conditional_draw(model, params, setup, empty, seed, member);
}

Ensemble run_ensemble(const FitResult& fit, const TransformStack& stack, const PredictionSetup& setup,
                      const DataGrid& observed, const MeanFieldModel& mean_field, const EnsembleOptions& options) {
    if (observed.n_sites() != setup.n_observed())
        throw GeometryError("observed grid has " + std::to_string(observed.n_sites()) +
                            " stations, prediction setup has " + std::to_string(setup.n_observed()));
    for (std::size_t i = 0; i < observed.n_sites(); ++i) {
        const auto& s = observed.stations[i];
        const auto& g = setup.observed.sites()[i];
        if (s.latitude != g.lat || s.longitude != g.lon)
            throw GeometryError("observed station " + s.id + " does not match the prediction setup geometry");
    }
    const SpectralModel model(fit.knots);
    const SpectralField field = forward_dft(apply_stack(observed, stack));

    Ensemble ens;
    ens.targets = setup.targets;
    ens.start_time = observed.start_time;
    ens.step = observed.step;
    ens.seed = options.seed;
    ens.vary_params = options.vary_params;
    ens.provenance = options.provenance;

    std::vector<SpectralParams> draws;
    if (options.vary_params) {
        Rng prng = substream(options.seed, {stream_tag("params")});
        auto samples = sample_params(fit, options.count, prng);
        draws = std::move(samples.draws);
        ens.hessian_fallback = samples.fallback_used;
    }

    MeanFieldModel mf = mean_field;
    std::vector<LatLon> target_sites;
    Eigen::VectorXd elevations(static_cast<Eigen::Index>(setup.n_targets()));
    for (std::size_t t = 0; t < setup.n_targets(); ++t) {
        target_sites.push_back({setup.targets[t].latitude, setup.targets[t].longitude});
        elevations[static_cast<Eigen::Index>(t)] = setup.targets[t].elevation;
    }
    const KrigingPrediction pred = krige(mf, target_sites);

    for (std::size_t k = 0; k < options.count; ++k) {
        EnsembleMember member;
        const SpectralParams& p = options.vary_params ? draws[k] : fit.params;
        if (options.vary_params) member.param_draw_id = k;
        DrawInfo info;
        const SpectralField sim = conditional_draw(model, p, setup, field, options.seed, k, &info);
        ens.ridged_frequencies += info.ridged_frequencies;
        const Eigen::MatrixXd adjusted = inverse_dft(sim);

        Rng mrng = substream(options.seed, {stream_tag("meanfield"), k});
        const Eigen::VectorXd m_draw = sample_t(pred, static_cast<double>(mf.degrees_of_freedom()), mrng);
        member.mean_field_draw.resize(m_draw.size());
        for (Eigen::Index t = 0; t < m_draw.size(); ++t)
            member.mean_field_draw[t] = from_sea_level(m_draw[t], elevations[t], stack.sea_level);

        auto rec = invert_stack(adjusted, stack, elevations, member.mean_field_draw);
        member.pressure = std::move(rec.pressure);
        member.diffs = std::move(rec.diffs);
        ens.members.push_back(std::move(member));
    }
    return ens;
}

}  // namespace dataens
