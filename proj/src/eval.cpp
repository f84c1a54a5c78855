#include "dataens/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>

#include "dataens/errors.hpp"
#include "dataens/geometry.hpp"

namespace dataens {

namespace {

void check_shapes(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members) {
    if (members.rows() < 1) throw ValidationError("ensemble has no members");
    if (members.cols() != truth.size())
        throw AlignmentError("truth has " + std::to_string(truth.size()) + " times, members have " +
                             std::to_string(members.cols()));
}

}  // namespace

double RankHistogram::chi_square() const {
    if (counts.empty() || n_times == 0) return 0.0;
    const double expected = static_cast<double>(n_times) / static_cast<double>(counts.size());
    double x = 0.0;
    for (auto c : counts) {
        const double d = static_cast<double>(c) - expected;
        x += d * d / expected;
    }
    return x;
}

double chi_square_quantile(double probability, double df) {
    boost::math::chi_squared dist(df);
    return boost::math::quantile(dist, probability);
}

RankHistogram rank_histogram(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members, Rng& rng) {
    std::vector<std::size_t> all(static_cast<std::size_t>(truth.size()));
    std::iota(all.begin(), all.end(), std::size_t{0});
    return rank_histogram(truth, members, all, "all", rng);
}

RankHistogram rank_histogram(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members,
                             const std::vector<std::size_t>& times, const std::string& selector, Rng& rng) {
    check_shapes(truth, members);
    RankHistogram h;
    h.selector = selector;
    h.counts.assign(static_cast<std::size_t>(members.rows()) + 1, 0);
    for (auto t : times) {
        if (t >= static_cast<std::size_t>(truth.size())) throw std::out_of_range("rank_histogram: time index");
        const double x = truth[static_cast<Eigen::Index>(t)];
        std::size_t below = 0, ties = 0;
        for (Eigen::Index k = 0; k < members.rows(); ++k) {
            const double y = members(k, static_cast<Eigen::Index>(t));
            if (y < x) ++below;
            else if (y == x) ++ties;
        }
        std::size_t extra = 0;
        if (ties > 0) extra = std::uniform_int_distribution<std::size_t>(0, ties)(rng);
        ++h.counts[below + extra];
        ++h.n_times;
    }
    return h;
}

Coverage envelope_coverage(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members) {
    check_shapes(truth, members);
    Coverage c;
    c.n_times = static_cast<std::size_t>(truth.size());
    double width = 0.0;
    for (Eigen::Index t = 0; t < truth.size(); ++t) {
        const double lo = members.col(t).minCoeff();
        const double hi = members.col(t).maxCoeff();
        if (truth[t] < lo) ++c.n_below;
        if (truth[t] > hi) ++c.n_above;
        if (std::isfinite(hi - lo)) width += hi - lo;
    }
    c.expected_outside = static_cast<double>(c.n_times) * 2.0 / static_cast<double>(members.rows() + 1);
    c.mean_width = c.n_times ? width / static_cast<double>(c.n_times) : 0.0;
    return c;
}

ExtremeDiagnostic min_max_rank_diagnostic(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members) {
    check_shapes(truth, members);
    Eigen::MatrixXd all(members.rows() + 1, members.cols());
    all.row(0) = truth.transpose();
    all.bottomRows(members.rows()) = members;
    std::vector<bool> extreme(static_cast<std::size_t>(all.rows()), false);
    ExtremeDiagnostic d;
    d.n_series = static_cast<std::size_t>(all.rows());
    for (Eigen::Index t = 0; t < all.cols(); ++t) {
        const double lo = all.col(t).minCoeff();
        const double hi = all.col(t).maxCoeff();
        for (Eigen::Index k = 0; k < all.rows(); ++k)
            if (all(k, t) == lo || all(k, t) == hi) extreme[static_cast<std::size_t>(k)] = true;
        if (all(0, t) == lo || all(0, t) == hi) ++d.truth_extreme_times;
    }
    d.never_extreme = static_cast<std::size_t>(std::count(extreme.begin(), extreme.end(), false));
    d.truth_never_extreme = !extreme[0];
    return d;
}

ScoreRow score(const Eigen::VectorXd& truth, const Eigen::VectorXd& predictor, std::string target,
               std::string method) {
    if (truth.size() != predictor.size())
        throw AlignmentError("score: truth has " + std::to_string(truth.size()) + " values, predictor has " +
                             std::to_string(predictor.size()));
    if (truth.size() < 2) throw ValidationError("score needs at least two values");
    ScoreRow r;
    r.target = std::move(target);
    r.method = std::move(method);
    r.n = static_cast<std::size_t>(truth.size());
    const Eigen::VectorXd e = truth - predictor;
    const double n = static_cast<double>(r.n);
    r.mean_error = e.mean();
    r.sd_error = std::sqrt((e.array() - r.mean_error).square().sum() / (n - 1.0));
    r.rmse = std::sqrt(e.squaredNorm() / n);
    return r;
}

Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& members) {
    if (members.rows() < 1) throw ValidationError("ensemble has no members");
    return members.colwise().mean().transpose();
}

std::size_t nearest_station(const std::vector<StationMeta>& observed, const StationMeta& target) {
    if (observed.empty()) throw ValidationError("nearest neighbour needs at least one observed station");
    const LatLon p{target.latitude, target.longitude};
    std::size_t best = 0;
    double best_d = great_circle(p, {observed[0].latitude, observed[0].longitude});
    for (std::size_t i = 1; i < observed.size(); ++i) {
        const double d = great_circle(p, {observed[i].latitude, observed[i].longitude});
        if (d < best_d || (d == best_d && observed[i].id < observed[best].id)) {
            best = i;
            best_d = d;
        }
    }
    return best;
}

Eigen::MatrixXd nearest_neighbor_baseline(const DataGrid& observed, const std::vector<StationMeta>& targets,
                                          const SeaLevelModel& sea_level) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(targets.size()), observed.values.cols());
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const std::size_t i = nearest_station(observed.stations, targets[k]);
        const double factor =
            std::exp((observed.stations[i].elevation - targets[k].elevation) / sea_level.scale_height);
        out.row(static_cast<Eigen::Index>(k)) = observed.values.row(static_cast<Eigen::Index>(i)) * factor;
    }
    return out;
}

Eigen::VectorXd aggregate_diffs(const Eigen::VectorXd& series, std::size_t width) {
    if (width < 1) throw std::invalid_argument("aggregate_diffs: width must be at least 1");
    const auto blocks = static_cast<Eigen::Index>(static_cast<std::size_t>(series.size()) / width);
    if (blocks < 2) return Eigen::VectorXd(0);
    const auto w = static_cast<Eigen::Index>(width);
    Eigen::VectorXd means(blocks);
    for (Eigen::Index b = 0; b < blocks; ++b) means[b] = series.segment(b * w, w).mean();
    return means.tail(blocks - 1) - means.head(blocks - 1);
}

Eigen::MatrixXd aggregate_diffs(const Eigen::MatrixXd& series, std::size_t width) {
    if (width < 1) throw std::invalid_argument("aggregate_diffs: width must be at least 1");
    const auto blocks = static_cast<Eigen::Index>(static_cast<std::size_t>(series.cols()) / width);
    Eigen::MatrixXd out(series.rows(), std::max<Eigen::Index>(blocks - 1, 0));
    for (Eigen::Index r = 0; r < series.rows(); ++r)
        out.row(r) = aggregate_diffs(Eigen::VectorXd(series.row(r).transpose()), width).transpose();
    return out;
}

std::vector<std::size_t> top_fraction_times(const Eigen::VectorXd& values, double fraction) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("fraction must be in (0, 1]");
    const auto n = static_cast<std::size_t>(values.size());
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return values[static_cast<Eigen::Index>(a)] > values[static_cast<Eigen::Index>(b)];
    });
    const auto keep = std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace dataens
