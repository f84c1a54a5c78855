#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dataens {

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp t);

struct StationMeta {
    std::string id;
    double latitude = 0.0;   // degrees
    double longitude = 0.0;  // degrees
    double elevation = 0.0;  // meters
};

/// One station's observations on a regular time axis; missing values are nullopt.
struct RawSeries {
    StationMeta station;
    Timestamp start_time = 0;
    std::int64_t step = 60;  // seconds
    std::vector<std::optional<double>> values;

    std::size_t missing_count() const;
    bool complete() const { return missing_count() == 0; }
    std::vector<double> dense() const;  // throws unless complete
};

/// n stations by T equispaced times, no missing entries.
struct DataGrid {
    std::vector<StationMeta> stations;
    Timestamp start_time = 0;
    std::int64_t step = 300;
    Eigen::MatrixXd values;

    std::size_t n_sites() const { return stations.size(); }
    std::size_t n_times() const { return static_cast<std::size_t>(values.cols()); }
    Eigen::VectorXd elevations() const;
    /// Rows for the listed station ids, in the listed order.
    DataGrid select(const std::vector<std::string>& ids) const;
};

// Station CSV: header `id,latitude_deg,longitude_deg,elevation_m`.
std::vector<StationMeta> parse_stations(std::istream& in);
std::vector<StationMeta> load_stations(const std::filesystem::path& path);
void write_stations(std::ostream& out, const std::vector<StationMeta>& stations);

// Observation CSV: header `timestamp,station_id,pressure_kPa`, empty pressure = missing.
// Rows may be interleaved across stations; one file may hold one or many stations.
// Returns one series per station that has rows, in the order of `stations`.
std::vector<RawSeries> parse_observations(std::istream& in, const std::vector<StationMeta>& stations);
std::vector<RawSeries> load_observations(const std::vector<std::filesystem::path>& paths,
                                         const std::vector<StationMeta>& stations);
void write_observations(std::ostream& out, const RawSeries& series, int decimals = 6);

/// Values on [start, start + count * step); times the series does not cover are missing.
/// `start` must lie on the series' time axis.
RawSeries window(const RawSeries& series, Timestamp start, std::size_t count);

/// Throws DataQualityError if more than `max_fraction` of the values are missing.
void check_missing_fraction(const RawSeries& series, double max_fraction);

/// Linear interpolation across interior gaps of at most `max_gap` missing values;
/// leading/trailing gaps of at most `max_gap` copy the nearest present value.
RawSeries fill_missing(const RawSeries& series, std::size_t max_gap);

/// Non-overlapping means of `block` consecutive values; a trailing partial block is dropped.
RawSeries block_average(const RawSeries& series, std::int64_t block);

/// Stacks complete, aligned series into an n x (target_len + 1) grid, truncating to the
/// first target_len + 1 values so that the differenced grid has target_len columns.
DataGrid assemble_grid(const std::vector<RawSeries>& series, std::size_t target_len);

}  // namespace dataens
