#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dataens/ingest.hpp"
#include "dataens/preprocess.hpp"
#include "dataens/rng.hpp"

namespace dataens {

/// Counts of the rank of the truth among {truth} and the members; rank r is
/// stored at counts[r - 1], so there are members + 1 bins.
struct RankHistogram {
    std::vector<std::size_t> counts;
    std::size_t n_times = 0;
    std::string selector = "all";

    /// Pearson statistic against the uniform distribution; df = counts.size() - 1.
    double chi_square() const;
    std::size_t degrees_of_freedom() const { return counts.empty() ? 0 : counts.size() - 1; }
};

/// Upper quantile of the chi-square distribution.
double chi_square_quantile(double probability, double df);

/// `members` holds one series per row; ties are broken uniformly at random.
RankHistogram rank_histogram(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members, Rng& rng);
/// Restricted to the listed time indices.
RankHistogram rank_histogram(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members,
                             const std::vector<std::size_t>& times, const std::string& selector, Rng& rng);

struct Coverage {
    std::size_t n_times = 0;
    std::size_t n_below = 0;  // truth < min over members
    std::size_t n_above = 0;  // truth > max over members
    std::size_t n_outside() const { return n_below + n_above; }
    double expected_outside = 0.0;  // n_times * 2 / (members + 1)
    double mean_width = 0.0;        // mean of max - min
};

Coverage envelope_coverage(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members);

struct ExtremeDiagnostic {
    std::size_t n_series = 0;
    std::size_t never_extreme = 0;   // series (truth included) never the pointwise min or max
    bool truth_never_extreme = false;
    std::size_t truth_extreme_times = 0;
};

ExtremeDiagnostic min_max_rank_diagnostic(const Eigen::VectorXd& truth, const Eigen::MatrixXd& members);

/// error = truth - predictor. The SD uses the n - 1 divisor, so
/// rmse^2 = mean^2 + sd^2 (n - 1) / n.
struct ScoreRow {
    std::string target;
    std::string method;
    double mean_error = 0.0;
    double sd_error = 0.0;
    double rmse = 0.0;
    std::size_t n = 0;
};

ScoreRow score(const Eigen::VectorXd& truth, const Eigen::VectorXd& predictor, std::string target,
               std::string method);

/// Pointwise mean of the rows.
Eigen::VectorXd ensemble_mean(const Eigen::MatrixXd& members);

/// Index of the observed station nearest to `target` by great-circle distance;
/// equidistant stations resolve to the smallest id.
std::size_t nearest_station(const std::vector<StationMeta>& observed, const StationMeta& target);

/// Each target copies its nearest observed series, moved to sea level at that
/// station and back down to the target elevation. Rows follow `targets`.
Eigen::MatrixXd nearest_neighbor_baseline(const DataGrid& observed, const std::vector<StationMeta>& targets,
                                          const SeaLevelModel& sea_level);

/// Block means of `width` consecutive values (trailing partial block dropped),
/// then first differences.
Eigen::VectorXd aggregate_diffs(const Eigen::VectorXd& series, std::size_t width);
/// Row-wise version.
Eigen::MatrixXd aggregate_diffs(const Eigen::MatrixXd& series, std::size_t width);

/// Indices of the largest round(fraction * n) values, ascending; ties favour
/// the earlier index.
std::vector<std::size_t> top_fraction_times(const Eigen::VectorXd& values, double fraction);

}  // namespace dataens
