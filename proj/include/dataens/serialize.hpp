#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dataens/condsim.hpp"
#include "dataens/ingest.hpp"
#include "dataens/meanfield.hpp"
#include "dataens/preprocess.hpp"
#include "dataens/spectral_model.hpp"
#include "dataens/whittle.hpp"

namespace dataens {

using json = nlohmann::json;

std::uint64_t fnv1a64(std::string_view data);
std::string hex64(std::uint64_t h);

/// Hash of station ids and coordinates (to 1e-6 degree), order sensitive.
std::string geometry_hash(const std::vector<StationMeta>& stations);

void to_json(json& j, const StationMeta& s);
void from_json(const json& j, StationMeta& s);
void to_json(json& j, const KnotSet& k);
void from_json(const json& j, KnotSet& k);
void to_json(json& j, const SpectralParams& p);
void from_json(const json& j, SpectralParams& p);
void to_json(json& j, const HessianResult& h);
void from_json(const json& j, HessianResult& h);
void to_json(json& j, const Convergence& c);
void from_json(const json& j, Convergence& c);
void to_json(json& j, const FitResult& f);
void from_json(const json& j, FitResult& f);
void to_json(json& j, const SeaLevelModel& m);
void from_json(const json& j, SeaLevelModel& m);
void to_json(json& j, const DiurnalModel& m);
void from_json(const json& j, DiurnalModel& m);
void to_json(json& j, const TransformStack& s);
void from_json(const json& j, TransformStack& s);
void to_json(json& j, const MeanFieldModel& m);
void from_json(const json& j, MeanFieldModel& m);
void to_json(json& j, const MeanFieldChoice& c);
void from_json(const json& j, MeanFieldChoice& c);

/// Everything the simulate stage needs from the fit stage.
struct FitReport {
    std::vector<StationMeta> stations;  // fit stations, in grid order
    std::string geometry_hash;
    Timestamp start_time = 0;
    std::int64_t step = 300;
    std::size_t length = 0;             // T, differenced length
    TransformStack stack;
    FitResult fit;
    MeanFieldChoice mean_field;
    std::size_t parameter_dimension = 0;
    json config;                        // the configuration that produced it
};

void to_json(json& j, const FitReport& r);
void from_json(const json& j, FitReport& r);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

/// Hash of the serialized report, used as ensemble provenance.
std::string report_hash(const FitReport& r);

/// One CSV per member (`member_NNN.csv`, rows `timestamp,site_id,pressure_kPa`)
/// plus `manifest.json`.
void write_ensemble(const std::filesystem::path& dir, const Ensemble& ensemble);
Ensemble read_ensemble(const std::filesystem::path& dir);

}  // namespace dataens
