#include "dataens/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <set>
#include <sstream>

#include "dataens/dft.hpp"
#include "dataens/errors.hpp"
#include "dataens/eval.hpp"
#include "dataens/geometry.hpp"
#include "dataens/rng.hpp"

namespace dataens {

namespace fs = std::filesystem;

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown config key '" + where + "." + key + "'");
    }
}

json section(const json& j, const char* key) { return j.contains(key) ? j.at(key) : json::object(); }

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::vector<LatLon> latlons(const std::vector<StationMeta>& s) {
    std::vector<LatLon> out;
    for (const auto& m : s) out.push_back({m.latitude, m.longitude});
    return out;
}

const StationMeta& find_station(const std::vector<StationMeta>& stations, const std::string& id) {
    for (const auto& s : stations)
        if (s.id == id) return s;
    throw ValidationError("station '" + id + "' is not in the station file");
}

std::vector<std::string> ids_of(const std::vector<StationMeta>& s) {
    std::vector<std::string> out;
    for (const auto& m : s) out.push_back(m.id);
    return out;
}

std::vector<StationMeta> target_stations(const RunConfig& c, const std::vector<StationMeta>& stations) {
    const auto& ids = c.targets.empty() ? c.held_out : c.targets;
    if (ids.empty()) throw ConfigError("no targets: set stations.targets or stations.held_out");
    std::vector<StationMeta> out;
    for (const auto& id : ids) out.push_back(find_station(stations, id));
    return out;
}

// Stations with observations that are not held out, in station-file order.
std::vector<std::string> fit_ids(const RunConfig& c, const std::vector<StationMeta>& stations,
                                 const std::vector<RawSeries>& series) {
    const std::set<std::string> held(c.held_out.begin(), c.held_out.end());
    std::set<std::string> have;
    for (const auto& s : series) have.insert(s.station.id);
    std::vector<std::string> out;
    for (const auto& s : stations)
        if (have.count(s.id) && !held.count(s.id)) out.push_back(s.id);
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

}  // namespace

KnotSet KnotConfig::knot_set() const {
    KnotSet k = KnotSet::from_indices(s, beta, delta, theta, cutoff, denominator);
    for (auto* v : {&k.beta, &k.delta, &k.theta})
        if (v->empty() || v->back() < cutoff * (1.0 - 1e-12)) v->push_back(cutoff);
    k.validate();
    return k;
}

std::uint64_t RunConfig::require_seed(const std::string& stage_name) const {
    if (!seed) throw ConfigError(stage_name + " is stochastic and needs a seed (config 'seed' or --seed)");
    return *seed;
}

StackOptions RunConfig::stack_options() const {
    StackOptions o;
    o.diurnal_period = diurnal_period;
    o.n_harmonics = diurnal_harmonics;
    o.volatility_df = volatility_df;
    o.sd_floor = sd_floor;
    return o;
}

std::optional<Variogram> RunConfig::forced_variogram() const {
    if (variogram == "auto") return std::nullopt;
    return variogram_from_string(variogram);
}

void RunConfig::validate() const {
    if (block < 1) throw ConfigError("window.block must be at least 1");
    if (target_length < 8) throw ConfigError("window.target_length must be at least 8");
    if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0))
        throw ConfigError("window.max_missing_fraction must lie in [0, 1]");
    if (diurnal_period < 2 || diurnal_harmonics < 1 || 2 * diurnal_harmonics >= diurnal_period)
        throw ConfigError("preprocess: need period >= 2 and 1 <= harmonics < period / 2");
    if (!(volatility_df >= 2.0)) throw ConfigError("preprocess.volatility_df must be at least 2");
    if (ensemble_count < 1) throw ConfigError("ensemble.count must be at least 1");
    if (variogram != "auto") variogram_from_string(variogram);
    if (aggregate_width < 1) throw ConfigError("evaluate.aggregate_width must be at least 1");
    if (!(volatility_fraction > 0.0 && volatility_fraction <= 1.0))
        throw ConfigError("evaluate.volatility_fraction must lie in (0, 1]");
    if (threads < 0) throw ConfigError("threads must be nonnegative");
    if (synth.n_sites < 3) throw ConfigError("synth.n_sites must be at least 3");
    knots.knot_set();
}

void to_json(json& j, const RunConfig& c) {
    auto strs = [](const std::vector<fs::path>& v) {
        std::vector<std::string> out;
        for (const auto& p : v) out.push_back(p.string());
        return out;
    };
    j = json::object();
    j["paths"] = {{"stations", c.stations.string()},
                  {"observations", strs(c.observations)},
                  {"truth", strs(c.truth)},
                  {"output_dir", c.output_dir.string()}};
    j["window"] = {{"block", c.block},
                   {"target_length", c.target_length},
                   {"max_gap", c.max_gap},
                   {"max_missing_fraction", c.max_missing_fraction}};
    if (c.start_time) j["window"]["start_time"] = *c.start_time;
    j["knots"] = {{"denominator", c.knots.denominator}, {"s", c.knots.s},         {"beta", c.knots.beta},
                  {"delta", c.knots.delta},             {"theta", c.knots.theta}, {"cutoff", c.knots.cutoff}};
    j["preprocess"] = {{"diurnal_period", c.diurnal_period},
                       {"diurnal_harmonics", c.diurnal_harmonics},
                       {"volatility_df", c.volatility_df},
                       {"sd_floor", c.sd_floor}};
    j["fit"] = {{"max_iterations", c.max_iterations}, {"gradient_tolerance", c.gradient_tolerance}};
    j["ensemble"] = {{"count", c.ensemble_count},
                     {"vary_params", c.vary_params},
                     {"variogram", c.variogram},
                     {"variogram_margin", c.variogram_margin}};
    j["evaluate"] = {{"aggregate_width", c.aggregate_width}, {"volatility_fraction", c.volatility_fraction}};
    j["stations"] = {{"held_out", c.held_out}, {"targets", c.targets}};
    j["threads"] = c.threads;
    if (c.seed) j["seed"] = *c.seed;
    const auto& s = c.synth;
    j["synth"] = {{"n_sites", s.n_sites},
                  {"held_out", s.held_out},
                  {"center_lat", s.center_lat},
                  {"center_lon", s.center_lon},
                  {"radius_km", s.radius_km},
                  {"elevation_min_m", s.elevation_min_m},
                  {"elevation_max_m", s.elevation_max_m},
                  {"p0_kPa", s.p0_kPa},
                  {"scale_height_m", s.scale_height_m},
                  {"mean_field_kPa", s.mean_field_kPa},
                  {"mean_field_sd_kPa", s.mean_field_sd_kPa},
                  {"volatility_kPa", s.volatility_kPa},
                  {"volatility_log_amplitude", s.volatility_log_amplitude},
                  {"diurnal_scale", s.diurnal_scale},
                  {"start_time", s.start_time}};
    if (s.true_params) j["synth"]["true_params"] = *s.true_params;
}

RunConfig config_from_json(const json& j, const fs::path& base) {
    check_keys(j, "config",
               {"paths", "window", "knots", "preprocess", "fit", "ensemble", "evaluate", "stations", "seed", "threads",
                "synth"});
    RunConfig c;
    try {
        const json p = section(j, "paths");
        check_keys(p, "paths", {"stations", "observations", "truth", "output_dir"});
        if (p.contains("stations")) c.stations = resolve(base, p["stations"].get<std::string>());
        for (const auto& o : p.value("observations", std::vector<std::string>{}))
            c.observations.push_back(resolve(base, o));
        for (const auto& o : p.value("truth", std::vector<std::string>{})) c.truth.push_back(resolve(base, o));
        if (p.contains("output_dir")) c.output_dir = resolve(base, p["output_dir"].get<std::string>());

        const json w = section(j, "window");
        check_keys(w, "window", {"start_time", "block", "target_length", "max_gap", "max_missing_fraction"});
        if (w.contains("start_time")) c.start_time = w["start_time"].get<std::string>();
        c.block = w.value("block", c.block);
        c.target_length = w.value("target_length", c.target_length);
        c.max_gap = w.value("max_gap", c.max_gap);
        c.max_missing_fraction = w.value("max_missing_fraction", c.max_missing_fraction);

        const json k = section(j, "knots");
        check_keys(k, "knots", {"denominator", "s", "beta", "delta", "theta", "cutoff"});
        c.knots.denominator = k.value("denominator", c.knots.denominator);
        c.knots.s = k.value("s", c.knots.s);
        c.knots.beta = k.value("beta", c.knots.beta);
        c.knots.delta = k.value("delta", c.knots.delta);
        c.knots.theta = k.value("theta", c.knots.theta);
        c.knots.cutoff = k.value("cutoff", c.knots.cutoff);

        const json pp = section(j, "preprocess");
        check_keys(pp, "preprocess", {"diurnal_period", "diurnal_harmonics", "volatility_df", "sd_floor"});
        c.diurnal_period = pp.value("diurnal_period", c.diurnal_period);
        c.diurnal_harmonics = pp.value("diurnal_harmonics", c.diurnal_harmonics);
        c.volatility_df = pp.value("volatility_df", c.volatility_df);
        c.sd_floor = pp.value("sd_floor", c.sd_floor);

        const json f = section(j, "fit");
        check_keys(f, "fit", {"max_iterations", "gradient_tolerance"});
        c.max_iterations = f.value("max_iterations", c.max_iterations);
        c.gradient_tolerance = f.value("gradient_tolerance", c.gradient_tolerance);

        const json e = section(j, "ensemble");
        check_keys(e, "ensemble", {"count", "vary_params", "variogram", "variogram_margin"});
        c.ensemble_count = e.value("count", c.ensemble_count);
        c.vary_params = e.value("vary_params", c.vary_params);
        c.variogram = e.value("variogram", c.variogram);
        c.variogram_margin = e.value("variogram_margin", c.variogram_margin);

        const json ev = section(j, "evaluate");
        check_keys(ev, "evaluate", {"aggregate_width", "volatility_fraction"});
        c.aggregate_width = ev.value("aggregate_width", c.aggregate_width);
        c.volatility_fraction = ev.value("volatility_fraction", c.volatility_fraction);

        const json st = section(j, "stations");
        check_keys(st, "stations", {"held_out", "targets"});
        c.held_out = st.value("held_out", c.held_out);
        c.targets = st.value("targets", c.targets);

        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        c.threads = j.value("threads", c.threads);

        const json s = section(j, "synth");
        check_keys(s, "synth",
                   {"n_sites", "held_out", "center_lat", "center_lon", "radius_km", "elevation_min_m",
                    "elevation_max_m", "p0_kPa", "scale_height_m", "mean_field_kPa", "mean_field_sd_kPa",
                    "volatility_kPa", "volatility_log_amplitude", "diurnal_scale", "true_params", "start_time"});
        auto& y = c.synth;
        y.n_sites = s.value("n_sites", y.n_sites);
        y.held_out = s.value("held_out", y.held_out);
        y.center_lat = s.value("center_lat", y.center_lat);
        y.center_lon = s.value("center_lon", y.center_lon);
        y.radius_km = s.value("radius_km", y.radius_km);
        y.elevation_min_m = s.value("elevation_min_m", y.elevation_min_m);
        y.elevation_max_m = s.value("elevation_max_m", y.elevation_max_m);
        y.p0_kPa = s.value("p0_kPa", y.p0_kPa);
        y.scale_height_m = s.value("scale_height_m", y.scale_height_m);
        y.mean_field_kPa = s.value("mean_field_kPa", y.mean_field_kPa);
        y.mean_field_sd_kPa = s.value("mean_field_sd_kPa", y.mean_field_sd_kPa);
        y.volatility_kPa = s.value("volatility_kPa", y.volatility_kPa);
        y.volatility_log_amplitude = s.value("volatility_log_amplitude", y.volatility_log_amplitude);
        y.diurnal_scale = s.value("diurnal_scale", y.diurnal_scale);
        y.start_time = s.value("start_time", y.start_time);
        if (s.contains("true_params")) y.true_params = s["true_params"].get<SpectralParams>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::exists(path)) throw IoError("config file not found: " + path.string());
    return config_from_json(read_json(path), path.parent_path());
}

DataGrid prepare_grid(const std::vector<RawSeries>& series, const std::vector<std::string>& ids,
                      const RunConfig& config, std::optional<Timestamp> start) {
    std::vector<const RawSeries*> chosen;
    for (const auto& id : ids) {
        auto it = std::find_if(series.begin(), series.end(), [&](const RawSeries& s) { return s.station.id == id; });
        if (it == series.end()) throw ValidationError("no observations for station '" + id + "'");
        chosen.push_back(&*it);
    }
    if (chosen.empty()) throw ValidationError("no stations to assemble");
    if (!start) {
        if (config.start_time)
            start = parse_timestamp(*config.start_time);
        else {
            start = chosen.front()->start_time;
            for (auto* s : chosen) start = std::max(*start, s->start_time);
        }
    }
    const std::size_t raw_count = (config.target_length + 1) * static_cast<std::size_t>(config.block);
    std::vector<RawSeries> ready;
    for (auto* s : chosen) {
        const auto w = window(*s, *start, raw_count);
        check_missing_fraction(w, config.max_missing_fraction);
        ready.push_back(block_average(fill_missing(w, config.max_gap), config.block));
    }
    return assemble_grid(ready, config.target_length);
}

Eigen::VectorXd mean_field_values(const TransformStack& stack, const std::vector<StationMeta>& stations) {
    Eigen::VectorXd m(static_cast<Eigen::Index>(stations.size()));
    for (std::size_t i = 0; i < stations.size(); ++i)
        m[static_cast<Eigen::Index>(i)] =
            to_sea_level(stack.site_means[static_cast<Eigen::Index>(i)], stations[i].elevation, stack.sea_level);
    return m;
}

FitReport fit_grid(const DataGrid& grid, const RunConfig& config) {
    FitReport r;
    r.stations = grid.stations;
    r.geometry_hash = geometry_hash(grid.stations);
    r.start_time = grid.start_time;
    r.step = grid.step;
    r.length = grid.n_times() - 1;
    r.config = config;
    r.stack = stage("preprocess", [&] { return fit_stack(grid, config.stack_options()); });
    std::clog << "preprocess: sea level p0 = " << r.stack.sea_level.p0() << " kPa, H = " << r.stack.sea_level.scale_height
              << " m (R^2 " << r.stack.sea_level_r2 << "); V max/min = "
              << r.stack.volatility.values.maxCoeff() / r.stack.volatility.values.minCoeff() << '\n';

    r.fit = stage("fit", [&] {
        const SpectralModel model(config.knots.knot_set());
        const WhittleProblem problem(model, forward_dft(apply_stack(grid, r.stack)), SiteGeometry(latlons(grid.stations)));
        const SpectralParams init = initial_params(problem);
        OptimOptions opt;
        opt.max_iterations = config.max_iterations;
        opt.gradient_tolerance = config.gradient_tolerance;
        std::clog << "fit: " << grid.n_sites() << " stations, T = " << r.length << ", "
                  << model.layout().total() << " parameters\n";
        return fit_mle(init, problem, opt);
    });
    r.parameter_dimension = r.fit.params.layout().total();
    std::clog << "fit: loglik " << r.fit.loglik << " after " << r.fit.convergence.iterations << " iterations ("
              << r.fit.convergence.status << ")" << (r.fit.hessian.positive_definite ? "" : "; Hessian not PD")
              << '\n';

    r.mean_field = stage("meanfield", [&] {
        return choose_mean_field(mean_field_values(r.stack, grid.stations), latlons(grid.stations),
                                 config.forced_variogram(), config.variogram_margin);
    });
    return r;
}

fs::path cmd_fit(const RunConfig& config) {
    const auto stations = stage("ingest", [&] { return load_stations(config.stations); });
    const auto series = stage("ingest", [&] { return load_observations(config.observations, stations); });
    const auto grid = stage("ingest", [&] {
        for (const auto& id : config.held_out) find_station(stations, id);
        return prepare_grid(series, fit_ids(config, stations, series), config);
    });
    const FitReport report = fit_grid(grid, config);
    const fs::path out = config.output_dir / "fit_report.json";
    stage("output", [&] { write_json(out, report); });
    return out;
}

fs::path cmd_simulate(const RunConfig& config, const fs::path& report_path) {
    const std::uint64_t seed = stage("simulate", [&] { return config.require_seed("simulate"); });
    const FitReport report = stage("simulate", [&] { return read_json(report_path).get<FitReport>(); });
    const auto stations = stage("ingest", [&] { return load_stations(config.stations); });
    const auto series = stage("ingest", [&] { return load_observations(config.observations, stations); });
    const auto grid = stage("ingest", [&] {
        const auto ids = fit_ids(config, stations, series);
        std::vector<StationMeta> current;
        for (const auto& id : ids) current.push_back(find_station(stations, id));
        if (geometry_hash(current) != report.geometry_hash)
            throw GeometryError("geometry hash mismatch: fit report " + report.geometry_hash +
                                " was produced for a different station set than the configured " +
                                geometry_hash(current));
        return prepare_grid(series, ids, config, report.start_time);
    });
    if (grid.n_times() != report.length + 1)
        throw StageError("ingest", "observed grid length does not match the fit report");

    const fs::path out = config.output_dir / "ensemble";
    stage("simulate", [&] {
        const auto targets = target_stations(config, stations);
        const auto setup = PredictionSetup::make(SiteGeometry(latlons(grid.stations)), targets);
        EnsembleOptions opt;
        opt.count = config.ensemble_count;
        opt.vary_params = config.vary_params;
        opt.seed = seed;
        opt.provenance = report_hash(report);
        MeanFieldChoice mf = report.mean_field;
        if (auto forced = config.forced_variogram()) mf.chosen = *forced;
        std::clog << "simulate: " << opt.count << " members at " << targets.size() << " targets, mean field "
                  << to_string(mf.chosen) << '\n';
        const Ensemble ens = run_ensemble(report.fit, report.stack, setup, grid, mf.selected(), opt);
        if (ens.ridged_frequencies > 0)
            std::clog << "simulate: ridge applied at " << ens.ridged_frequencies << " frequencies\n";
        write_ensemble(out, ens);
    });
    return out;
}

fs::path cmd_evaluate(const RunConfig& config, const fs::path& ensemble_dir) {
    const Ensemble ens = stage("evaluate", [&] { return read_ensemble(ensemble_dir); });
    const fs::path report_path = config.output_dir / "fit_report.json";
    const FitReport report = stage("evaluate", [&] { return read_json(report_path).get<FitReport>(); });
    if (report_hash(report) != ens.provenance)
        throw StageError("evaluate", "ensemble was not produced from " + report_path.string());

    const auto stations = stage("ingest", [&] { return load_stations(config.stations); });
    const auto& truth_paths = config.truth.empty() ? config.observations : config.truth;
    const auto truth_series = stage("ingest", [&] { return load_observations(truth_paths, stations); });
    const auto truth = stage("ingest", [&] { return prepare_grid(truth_series, ids_of(ens.targets), config, ens.start_time); });
    if (ens.members.empty() || static_cast<Eigen::Index>(truth.n_times()) != ens.members[0].pressure.cols())
        throw StageError("evaluate", "truth does not cover the ensemble time window");
    const auto obs_series = stage("ingest", [&] { return load_observations(config.observations, stations); });
    const auto observed = stage("ingest", [&] { return prepare_grid(obs_series, ids_of(report.stations), config, report.start_time); });

    const fs::path out = config.output_dir / "evaluation";
    stage("evaluate", [&] {
        fs::create_directories(out);
        const std::size_t k = ens.members.size();
        const auto width = static_cast<std::size_t>(config.aggregate_width);
        const Eigen::VectorXd& v = report.stack.volatility.values;
        // volatility attached to each aggregated difference: mean over the two blocks it spans
        const auto hourly_blocks = static_cast<Eigen::Index>(truth.n_times() / width);
        Eigen::VectorXd v_hourly(std::max<Eigen::Index>(hourly_blocks - 1, 0));
        for (Eigen::Index h = 0; h < v_hourly.size(); ++h) {
            const Eigen::Index lo = h * static_cast<Eigen::Index>(width);
            const Eigen::Index len = std::min<Eigen::Index>(2 * static_cast<Eigen::Index>(width), v.size() - lo);
            v_hourly[h] = v.segment(lo, len).mean();
        }
        const auto top5 = top_fraction_times(v, config.volatility_fraction);
        const auto top_hourly = top_fraction_times(v_hourly, config.volatility_fraction);
        const Eigen::MatrixXd nn = nearest_neighbor_baseline(observed, ens.targets, report.stack.sea_level);

        json metrics = {{"members", k}, {"n_times", truth.n_times()}, {"tie_policy", "randomized"},
                        {"fit_report_hash", ens.provenance}, {"targets", json::array()}};
        std::ostringstream hist_csv, score_csv;
        hist_csv << "target,selector,rank,count\n";
        score_csv << "target,method,mean_error_kPa,sd_error_kPa,rmse_kPa\n";
        const double q99 = chi_square_quantile(0.99, static_cast<double>(k));

        for (std::size_t s = 0; s < ens.targets.size(); ++s) {
            const auto si = static_cast<Eigen::Index>(s);
            Eigen::MatrixXd pressure(static_cast<Eigen::Index>(k), truth.values.cols());
            for (std::size_t m = 0; m < k; ++m) pressure.row(static_cast<Eigen::Index>(m)) = ens.members[m].pressure.row(si);
            const Eigen::VectorXd tp = truth.values.row(si).transpose();
            const Eigen::VectorXd td = tp.tail(tp.size() - 1) - tp.head(tp.size() - 1);
            const Eigen::MatrixXd md = difference(pressure);
            const Eigen::VectorXd th = aggregate_diffs(tp, width);
            const Eigen::MatrixXd mh = aggregate_diffs(pressure, width);

            json target = {{"id", ens.targets[s].id}};
            json hists = json::array();
            auto add_hist = [&](const RankHistogram& h) {
                for (std::size_t r = 0; r < h.counts.size(); ++r)
                    hist_csv << ens.targets[s].id << ',' << h.selector << ',' << r + 1 << ',' << h.counts[r] << '\n';
                hists.push_back({{"selector", h.selector},
                                 {"n_times", h.n_times},
                                 {"counts", h.counts},
                                 {"chi_square", h.chi_square()},
                                 {"chi_square_q99", q99},
                                 {"uniform_at_1pct", h.chi_square() < q99}});
            };
            {
                Rng rng = substream(ens.seed, {stream_tag("eval"), s, 0});
                add_hist(rank_histogram(td, md, rng));
            }
            {
                Rng rng = substream(ens.seed, {stream_tag("eval"), s, 1});
                auto h = rank_histogram(th, mh, rng);
                h.selector = "aggregated";
                add_hist(h);
            }
            {
                Rng rng = substream(ens.seed, {stream_tag("eval"), s, 2});
                add_hist(rank_histogram(td, md, top5, "top_volatility", rng));
            }
            {
                Rng rng = substream(ens.seed, {stream_tag("eval"), s, 3});
                add_hist(rank_histogram(th, mh, top_hourly, "aggregated_top_volatility", rng));
            }
            target["rank_histograms"] = hists;

            const auto cov = envelope_coverage(tp, pressure);
            target["coverage"] = {{"n_outside", cov.n_outside()}, {"n_below", cov.n_below},
                                  {"n_above", cov.n_above},       {"expected_outside", cov.expected_outside},
                                  {"mean_width_kPa", cov.mean_width}};
            const auto ext = min_max_rank_diagnostic(tp, pressure);
            target["extremes"] = {{"n_series", ext.n_series},
                                  {"never_extreme", ext.never_extreme},
                                  {"truth_never_extreme", ext.truth_never_extreme},
                                  {"truth_extreme_times", ext.truth_extreme_times}};
            json scores = json::array();
            for (const auto& row : {score(tp, ensemble_mean(pressure), ens.targets[s].id, "ensemble_mean"),
                                    score(tp, nn.row(si).transpose(), ens.targets[s].id, "nearest_neighbor")}) {
                scores.push_back({{"method", row.method},
                                  {"mean_error_kPa", row.mean_error},
                                  {"sd_error_kPa", row.sd_error},
                                  {"rmse_kPa", row.rmse}});
                score_csv << row.target << ',' << row.method << ',' << row.mean_error << ',' << row.sd_error << ','
                          << row.rmse << '\n';
            }
            target["scores"] = scores;
            target["nearest_station"] = observed.stations[nearest_station(observed.stations, ens.targets[s])].id;
            metrics["targets"].push_back(target);
        }
        write_json(out / "metrics.json", metrics);
        write_text(out / "rank_histograms.csv", hist_csv.str());
        write_text(out / "scores.csv", score_csv.str());
    });
    return out;
}

SpectralParams synth_true_params(const SpectralModel& model) {
    const auto l = model.layout();
    SpectralParams p = SpectralParams::zeros(l);
    const double c = model.cutoff();
    const int grid = 600;
    auto project = [&](const ConstrainedBasis& basis, double hi, auto&& target) {
        Eigen::MatrixXd rows(grid + 1, static_cast<Eigen::Index>(basis.dimension()));
        Eigen::VectorXd y(grid + 1);
        for (int i = 0; i <= grid; ++i) {
            const double w = hi * i / grid;
            rows.row(i) = basis.row(w);
            y[i] = target(w);
        }
        return Eigen::VectorXd(rows.colPivHouseholderQr().solve(y));
    };
    // power dips toward zero frequency and is close to flat above a few hours
    auto shape = [](double w) { return 0.35 + w * w / (w * w + 0.03 * 0.03) + 0.4 * std::exp(-w / 0.3); };
    double mass = 0.0;
    for (int i = 0; i < 4000; ++i) mass += shape(std::numbers::pi * (i + 0.5) / 4000) / 4000;
    p.s = project(model.s_basis(), std::numbers::pi,
                  [&](double w) { return std::log(shape(w) / (2.0 * std::numbers::pi * mass)); });
    if (l.n_beta)
        p.beta = project(model.beta_basis(), c, [&](double w) {
            const double r = 0.92 - 0.55 * (w / c) * (w / c);
            return std::log(r / (1.0 - r));
        });
    auto taper = [&](double w) { return std::pow(1.0 - (w / c) * (w / c), 3); };
    if (l.n_delta) p.delta = project(model.delta_basis(), c, [&](double w) { return 250.0 * taper(w); });
    if (l.n_theta) p.theta = project(model.theta_basis(), c, [&](double w) { return w / 6.0 * taper(w); });
    p.u_angle = 0.35;
    return p;
}

DiurnalModel synth_diurnal(int period, int n_harmonics, double scale) {
    DiurnalModel d;
    d.period = period;
    d.n_harmonics = n_harmonics;
    d.coefficients = Eigen::VectorXd::Zero(2 * n_harmonics);
    const double base[] = {1.2e-3, 0.6e-3, 3.0e-3, -1.6e-3, 0.5e-3, 0.3e-3, -0.2e-3, 0.15e-3};
    for (int i = 0; i < std::min(8, 2 * n_harmonics); ++i) d.coefficients[i] = scale * base[i];
    return d;
}

SynthDataset synthesize(const RunConfig& config, std::uint64_t seed) {
    const auto& sc = config.synth;
    const std::size_t n = sc.n_sites;
    const std::size_t T = config.target_length;
    SynthDataset ds;
    ds.knots = config.knots.knot_set();
    const SpectralModel model(ds.knots);
    ds.params = sc.true_params ? *sc.true_params : synth_true_params(model);
    if (ds.params.layout().total() != model.layout().total())
        throw ConfigError("synth.true_params does not match the knot set");

    Rng site_rng = substream(seed, {stream_tag("synth-sites")});
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double deg = 180.0 / std::numbers::pi / kEarthRadiusKm;
    std::vector<StationMeta> stations;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = sc.radius_km * std::sqrt(unif(site_rng));
        const double a = 2.0 * std::numbers::pi * unif(site_rng);
        StationMeta s;
        char id[32];
        std::snprintf(id, sizeof id, "S%02zu", i + 1);
        s.id = id;
        s.latitude = sc.center_lat + r * std::sin(a) * deg;
        s.longitude = sc.center_lon + r * std::cos(a) * deg / std::cos(sc.center_lat * std::numbers::pi / 180.0);
        s.elevation = sc.elevation_min_m + (sc.elevation_max_m - sc.elevation_min_m) * unif(site_rng);
        stations.push_back(s);
    }

    const SiteGeometry geometry(latlons(stations));
    const std::uint64_t field_seed = detail::splitmix64(seed ^ stream_tag("synth-field"));
    const Eigen::MatrixXd a = inverse_dft(unconditional_draw(model, ds.params, geometry, T, field_seed, 0));

    TransformStack& st = ds.stack;
    st.sea_level.log_p0 = std::log(sc.p0_kPa);
    st.sea_level.scale_height = sc.scale_height_m;
    st.sea_level_r2 = 1.0;
    st.diurnal = synth_diurnal(config.diurnal_period, config.diurnal_harmonics, sc.diurnal_scale);
    st.volatility.values.resize(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        const double u = static_cast<double>(t) / static_cast<double>(T);
        const double g = 0.65 * std::sin(2.0 * std::numbers::pi * 1.3 * u + 0.4) +
                         0.35 * std::sin(2.0 * std::numbers::pi * 3.1 * u + 1.9);
        st.volatility.values[static_cast<Eigen::Index>(t)] = sc.volatility_kPa * std::exp(sc.volatility_log_amplitude * g);
    }
    st.volatility.spline_df = config.volatility_df;
    st.station_ids = ids_of(stations);

    Rng mean_rng = substream(seed, {stream_tag("synth-mean")});
    ds.mean_field.resize(static_cast<Eigen::Index>(n));
    Eigen::VectorXd zbar(static_cast<Eigen::Index>(n)), elev(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        ds.mean_field[ii] = sc.mean_field_kPa + sc.mean_field_sd_kPa * standard_normal(mean_rng);
        elev[ii] = stations[i].elevation;
        zbar[ii] = from_sea_level(ds.mean_field[ii], elev[ii], st.sea_level);
    }
    st.site_means = zbar;

    const auto rec = invert_stack(a, st, elev, zbar);
    ds.grid.stations = stations;
    ds.grid.start_time = parse_timestamp(sc.start_time);
    ds.grid.step = 300;
    ds.grid.values = rec.pressure;
    return ds;
}

fs::path cmd_synth(const RunConfig& config) {
    const std::uint64_t seed = stage("synth", [&] { return config.require_seed("synth"); });
    const SynthDataset ds = stage("synth", [&] { return synthesize(config, seed); });
    const fs::path out = config.output_dir;
    stage("output", [&] {
        fs::create_directories(out / "observations");
        {
            std::ofstream f(out / "stations.csv");
            if (!f) throw IoError("cannot write " + (out / "stations.csv").string());
            write_stations(f, ds.grid.stations);
        }
        std::vector<std::string> obs;
        for (std::size_t i = 0; i < ds.grid.n_sites(); ++i) {
            RawSeries rs;
            rs.station = ds.grid.stations[i];
            rs.start_time = ds.grid.start_time;
            rs.step = ds.grid.step;
            for (Eigen::Index t = 0; t < ds.grid.values.cols(); ++t)
                rs.values.emplace_back(ds.grid.values(static_cast<Eigen::Index>(i), t));
            const std::string name = "observations/" + rs.station.id + ".csv";
            std::ofstream f(out / name);
            if (!f) throw IoError("cannot write " + (out / name).string());
            write_observations(f, rs, 6);
            obs.push_back(name);
        }
        write_json(out / "truth.json", {{"seed", seed},
                                        {"knots", ds.knots},
                                        {"params", ds.params},
                                        {"stack", ds.stack},
                                        {"mean_field_kPa", std::vector<double>(ds.mean_field.data(), ds.mean_field.data() + ds.mean_field.size())},
                                        {"parameter_dimension", ds.params.layout().total()}});
        // configuration for running the pipeline on the generated data
        RunConfig next = config;
        next.stations = "stations.csv";
        next.observations.assign(obs.begin(), obs.end());
        next.truth.clear();
        next.output_dir = "run";
        next.block = 1;
        next.start_time = config.synth.start_time;
        next.held_out = config.synth.held_out;
        next.targets.clear();
        next.synth.true_params.reset();
        write_json(out / "config.json", next);
    });
    return out;
}

}  // namespace dataens
