#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dataens/condsim.hpp"
#include "dataens/errors.hpp"
#include "dataens/ingest.hpp"
#include "dataens/meanfield.hpp"
#include "dataens/preprocess.hpp"
#include "dataens/serialize.hpp"
#include "dataens/spectral_model.hpp"
#include "dataens/whittle.hpp"

namespace dataens {

/// Knot locations as integer multiples of pi / denominator.
struct KnotConfig {
    int denominator = 4320;
    std::vector<int> s{0, 10, 30, 60, 120, 400, 720, 4320};
    std::vector<int> beta{0, 40, 120, 360, 720};
    std::vector<int> delta{0, 5, 10, 15, 25, 40, 60, 90, 150, 240, 360, 480, 600, 720};
    std::vector<int> theta{0, 40, 120, 360, 720};
    double cutoff = KnotSet::kHourlyCutoff;

    KnotSet knot_set() const;
};

/// Generator settings for `synth`.
struct SynthConfig {
    std::size_t n_sites = 13;
    std::vector<std::string> held_out{"S12", "S13"};
    double center_lat = 36.6;
    double center_lon = -97.5;
    double radius_km = 150.0;
    double elevation_min_m = 250.0;
    double elevation_max_m = 450.0;
    double p0_kPa = 101.89;
    double scale_height_m = 8310.0;
    double mean_field_kPa = 101.5;       // M(x) level
    double mean_field_sd_kPa = 0.05;     // nugget scatter of M(x)
    double volatility_kPa = 0.012;       // geometric mean of V(t)
    double volatility_log_amplitude = 0.9;
    double diurnal_scale = 1.0;          // multiplies the built-in diurnal coefficients
    std::optional<SpectralParams> true_params;  // defaults to synth_true_params()
    std::string start_time = "2005-10-01T00:00:00Z";
};

struct RunConfig {
    std::filesystem::path stations;
    std::vector<std::filesystem::path> observations;
    std::vector<std::filesystem::path> truth;  // defaults to `observations`
    std::filesystem::path output_dir = "out";

    std::optional<std::string> start_time;  // default: latest first timestamp over the stations used
    int block = 5;                          // raw samples per average
    std::size_t target_length = 8640;       // T, number of differences
    std::size_t max_gap = 10;               // raw samples
    double max_missing_fraction = 0.05;

    KnotConfig knots;
    int diurnal_period = 288;
    int diurnal_harmonics = 15;
    double volatility_df = 72.0;
    double sd_floor = 0.005;

    int max_iterations = 500;
    double gradient_tolerance = 1e-3;

    std::size_t ensemble_count = 99;
    bool vary_params = true;
    std::string variogram = "auto";  // auto | nugget | linear
    double variogram_margin = 2.0;

    std::vector<std::string> held_out;
    std::vector<std::string> targets;  // defaults to held_out
    int aggregate_width = 12;
    double volatility_fraction = 0.1;

    std::optional<std::uint64_t> seed;
    int threads = 1;

    SynthConfig synth;

    std::uint64_t require_seed(const std::string& stage) const;
    StackOptions stack_options() const;
    std::optional<Variogram> forced_variogram() const;
    void validate() const;
};

void to_json(json& j, const RunConfig& c);
/// Missing fields keep their defaults; relative paths resolve against `base`.
RunConfig config_from_json(const json& j, const std::filesystem::path& base = {});
RunConfig load_config(const std::filesystem::path& path);

/// Error carrying the pipeline stage in which it happened.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error("[" + stage + "] " + what), stage_(std::move(stage)) {}
    const std::string& stage() const { return stage_; }

private:
    std::string stage_;
};

/// Windowing, missing-value checks, gap filling, block averaging and alignment
/// for the listed stations. Rows follow `ids`.
DataGrid prepare_grid(const std::vector<RawSeries>& series, const std::vector<std::string>& ids,
                      const RunConfig& config, std::optional<Timestamp> start = std::nullopt);

/// M(x) = site mean moved to sea level.
Eigen::VectorXd mean_field_values(const TransformStack& stack, const std::vector<StationMeta>& stations);

/// Fit stage on an already prepared grid.
FitReport fit_grid(const DataGrid& grid, const RunConfig& config);

/// Smooth spectral functions used as ground truth by the generator.
SpectralParams synth_true_params(const SpectralModel& model);
/// Diurnal coefficients used by the generator.
DiurnalModel synth_diurnal(int period, int n_harmonics, double scale);

struct SynthDataset {
    DataGrid grid;  // all sites, 5-minute averages, n x (T + 1)
    SpectralParams params;
    KnotSet knots;
    TransformStack stack;
    Eigen::VectorXd mean_field;  // M(x) per site
};

SynthDataset synthesize(const RunConfig& config, std::uint64_t seed);

std::filesystem::path cmd_fit(const RunConfig& config);
std::filesystem::path cmd_simulate(const RunConfig& config, const std::filesystem::path& report);
std::filesystem::path cmd_evaluate(const RunConfig& config, const std::filesystem::path& ensemble_dir);
std::filesystem::path cmd_synth(const RunConfig& config);

}  // namespace dataens
