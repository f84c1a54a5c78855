#include "dataens/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "dataens/errors.hpp"

namespace dataens {

namespace {

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd vec_from(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json mat(const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(vec(m.row(r).transpose()));
    return rows;
}

Eigen::MatrixXd mat_from(const json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return {};
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) throw FormatError("ragged matrix in JSON");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
}

std::string member_file(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "member_%03zu.csv", k + 1);
    return buf;
}

Eigen::MatrixXd read_member_csv(const std::filesystem::path& path, const Ensemble& ens, Eigen::Index n_times) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    const auto m = static_cast<Eigen::Index>(ens.targets.size());
    Eigen::MatrixXd p = Eigen::MatrixXd::Constant(m, n_times, std::numeric_limits<double>::quiet_NaN());
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line) || line != "timestamp,site_id,pressure_kPa")
        throw FormatError(path.string() + ": expected header 'timestamp,site_id,pressure_kPa'", 1);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c1 = line.find(',');
        const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos) throw FormatError(path.string() + ": bad row", lineno);
        const Timestamp ts = parse_timestamp(line.substr(0, c1));
        const std::string id = line.substr(c1 + 1, c2 - c1 - 1);
        Eigen::Index s = 0;
        while (s < m && ens.targets[static_cast<std::size_t>(s)].id != id) ++s;
        const std::int64_t off = ts - ens.start_time;
        if (s == m || off < 0 || off % ens.step != 0 || off / ens.step >= n_times)
            throw FormatError(path.string() + ": row outside the manifest's sites or window", lineno);
        try {
            p(s, off / ens.step) = std::stod(line.substr(c2 + 1));
        } catch (const std::exception&) {
            throw FormatError(path.string() + ": bad pressure value", lineno);
        }
    }
    if (p.hasNaN()) throw FormatError(path.string() + " does not cover every site and time in the manifest");
    return p;
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string geometry_hash(const std::vector<StationMeta>& stations) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6);
    for (const auto& s : stations) os << s.id << ',' << s.latitude << ',' << s.longitude << ';';
    return hex64(fnv1a64(os.str()));
}

void to_json(json& j, const StationMeta& s) {
    j = {{"id", s.id}, {"latitude_deg", s.latitude}, {"longitude_deg", s.longitude}, {"elevation_m", s.elevation}};
}
void from_json(const json& j, StationMeta& s) {
    s.id = j.at("id").get<std::string>();
    s.latitude = j.at("latitude_deg").get<double>();
    s.longitude = j.at("longitude_deg").get<double>();
    s.elevation = j.at("elevation_m").get<double>();
}

void to_json(json& j, const KnotSet& k) {
    j = {{"s", k.s}, {"beta", k.beta}, {"delta", k.delta}, {"theta", k.theta}, {"cutoff", k.cutoff}};
}
void from_json(const json& j, KnotSet& k) {
    k.s = j.at("s").get<std::vector<double>>();
    k.beta = j.at("beta").get<std::vector<double>>();
    k.delta = j.at("delta").get<std::vector<double>>();
    k.theta = j.at("theta").get<std::vector<double>>();
    k.cutoff = j.at("cutoff").get<double>();
    k.validate();
}

void to_json(json& j, const SpectralParams& p) {
    j = {{"s", vec(p.s)}, {"beta", vec(p.beta)}, {"delta", vec(p.delta)}, {"theta", vec(p.theta)},
         {"u_angle", p.u_angle}};
}
void from_json(const json& j, SpectralParams& p) {
    p.s = vec_from(j.at("s"));
    p.beta = vec_from(j.at("beta"));
    p.delta = vec_from(j.at("delta"));
    p.theta = vec_from(j.at("theta"));
    p.u_angle = j.at("u_angle").get<double>();
}

void to_json(json& j, const HessianResult& h) {
    j = {{"matrix", mat(h.matrix)}, {"min_eigenvalue", h.min_eigenvalue}, {"positive_definite", h.positive_definite}};
}
void from_json(const json& j, HessianResult& h) {
    h.matrix = mat_from(j.at("matrix"));
    h.min_eigenvalue = j.at("min_eigenvalue").get<double>();
    h.positive_definite = j.at("positive_definite").get<bool>();
}

void to_json(json& j, const Convergence& c) {
    j = {{"converged", c.converged},   {"status", c.status},
         {"iterations", c.iterations}, {"evaluations", c.evaluations},
         {"gradient_norm", c.gradient_norm}, {"trace", c.trace}};
}
void from_json(const json& j, Convergence& c) {
    c.converged = j.at("converged").get<bool>();
    c.status = j.at("status").get<std::string>();
    c.iterations = j.at("iterations").get<int>();
    c.evaluations = j.at("evaluations").get<int>();
    c.gradient_norm = j.at("gradient_norm").get<double>();
    c.trace = j.at("trace").get<std::vector<double>>();
}

void to_json(json& j, const FitResult& f) {
    j = {{"params", f.params}, {"loglik", f.loglik}, {"hessian", f.hessian},
         {"convergence", f.convergence}, {"knots", f.knots}};
}
void from_json(const json& j, FitResult& f) {
    f.params = j.at("params").get<SpectralParams>();
    f.loglik = j.at("loglik").get<double>();
    f.hessian = j.at("hessian").get<HessianResult>();
    f.convergence = j.at("convergence").get<Convergence>();
    f.knots = j.at("knots").get<KnotSet>();
    if (f.params.layout().total() != SpectralModel(f.knots).layout().total())
        throw FormatError("fit parameters do not match the knot set");
}

void to_json(json& j, const SeaLevelModel& m) {
    j = {{"p0_kPa", m.p0()}, {"log_p0", m.log_p0}, {"scale_height_m", m.scale_height}};
}
void from_json(const json& j, SeaLevelModel& m) {
    m.log_p0 = j.at("log_p0").get<double>();
    m.scale_height = j.at("scale_height_m").get<double>();
    m.validate();
}

void to_json(json& j, const DiurnalModel& m) {
    j = {{"period", m.period}, {"n_harmonics", m.n_harmonics}, {"coefficients", vec(m.coefficients)}};
}
void from_json(const json& j, DiurnalModel& m) {
    m.period = j.at("period").get<int>();
    m.n_harmonics = j.at("n_harmonics").get<int>();
    m.coefficients = vec_from(j.at("coefficients"));
    m.validate();
}

void to_json(json& j, const TransformStack& s) {
    j = {{"sea_level", s.sea_level},
         {"sea_level_r2", s.sea_level_r2},
         {"diurnal", s.diurnal},
         {"diurnal_variance_removed", vec(s.diurnal_variance_removed)},
         {"volatility", vec(s.volatility.values)},
         {"volatility_df", s.volatility.spline_df},
         {"station_ids", s.station_ids},
         {"site_means", vec(s.site_means)}};
}
void from_json(const json& j, TransformStack& s) {
    s.sea_level = j.at("sea_level").get<SeaLevelModel>();
    s.sea_level_r2 = j.at("sea_level_r2").get<double>();
    s.diurnal = j.at("diurnal").get<DiurnalModel>();
    s.diurnal_variance_removed = vec_from(j.at("diurnal_variance_removed"));
    s.volatility.values = vec_from(j.at("volatility"));
    s.volatility.spline_df = j.at("volatility_df").get<double>();
    s.station_ids = j.at("station_ids").get<std::vector<std::string>>();
    s.site_means = vec_from(j.at("site_means"));
}

void to_json(json& j, const MeanFieldModel& m) {
    json sites = json::array();
    for (const auto& s : m.sites) sites.push_back({s.lat, s.lon});
    j = {{"variogram", to_string(m.variogram)}, {"theta_hat", m.theta_hat}, {"reml_loglik", m.reml_loglik},
         {"n_fit", m.n_fit}, {"sites", sites}, {"values", vec(m.values)}};
    if (m.krige) j["krige"] = {{"predictor", vec(m.krige->predictor)}, {"covariance", mat(m.krige->covariance)}};
}
void from_json(const json& j, MeanFieldModel& m) {
    m.variogram = variogram_from_string(j.at("variogram").get<std::string>());
    m.theta_hat = j.at("theta_hat").get<double>();
    m.reml_loglik = j.at("reml_loglik").get<double>();
    m.n_fit = j.at("n_fit").get<std::size_t>();
    m.sites.clear();
    for (const auto& s : j.at("sites")) m.sites.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
    m.values = vec_from(j.at("values"));
    if (j.contains("krige"))
        m.krige = KrigingPrediction{vec_from(j["krige"].at("predictor")), mat_from(j["krige"].at("covariance"))};
}

void to_json(json& j, const MeanFieldChoice& c) {
    j = {{"nugget", c.nugget}, {"linear", c.linear}, {"chosen", to_string(c.chosen)}};
}
void from_json(const json& j, MeanFieldChoice& c) {
    c.nugget = j.at("nugget").get<MeanFieldModel>();
    c.linear = j.at("linear").get<MeanFieldModel>();
    c.chosen = variogram_from_string(j.at("chosen").get<std::string>());
}

void to_json(json& j, const FitReport& r) {
    j = {{"format", "dataens-fit-report-1"},
         {"stations", r.stations},
         {"geometry_hash", r.geometry_hash},
         {"start_time", format_timestamp(r.start_time)},
         {"step_s", r.step},
         {"length", r.length},
         {"stack", r.stack},
         {"fit", r.fit},
         {"mean_field", r.mean_field},
         {"parameter_dimension", r.parameter_dimension},
         {"config", r.config}};
}
void from_json(const json& j, FitReport& r) {
    if (j.value("format", "") != "dataens-fit-report-1") throw FormatError("not a fit report");
    r.stations = j.at("stations").get<std::vector<StationMeta>>();
    r.geometry_hash = j.at("geometry_hash").get<std::string>();
    r.start_time = parse_timestamp(j.at("start_time").get<std::string>());
    r.step = j.at("step_s").get<std::int64_t>();
    r.length = j.at("length").get<std::size_t>();
    r.stack = j.at("stack").get<TransformStack>();
    r.fit = j.at("fit").get<FitResult>();
    r.mean_field = j.at("mean_field").get<MeanFieldChoice>();
    r.parameter_dimension = j.at("parameter_dimension").get<std::size_t>();
    r.config = j.value("config", json::object());
    if (geometry_hash(r.stations) != r.geometry_hash)
        throw FormatError("fit report geometry hash does not match its station list");
}

void write_json(const std::filesystem::path& path, const json& j) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string report_hash(const FitReport& r) { return hex64(fnv1a64(json(r).dump())); }

void write_ensemble(const std::filesystem::path& dir, const Ensemble& ens) {
    std::filesystem::create_directories(dir);
    json members = json::array();
    for (std::size_t k = 0; k < ens.members.size(); ++k) {
        const auto& m = ens.members[k];
        const auto name = member_file(k);
        std::ofstream out(dir / name);
        if (!out) throw IoError("cannot write " + (dir / name).string());
        out << "timestamp,site_id,pressure_kPa\n";
        char buf[64];
        for (Eigen::Index t = 0; t < m.pressure.cols(); ++t) {
            const auto ts = format_timestamp(ens.start_time + ens.step * t);
            for (std::size_t s = 0; s < ens.targets.size(); ++s) {
                std::snprintf(buf, sizeof buf, "%.9f", m.pressure(static_cast<Eigen::Index>(s), t));
                out << ts << ',' << ens.targets[s].id << ',' << buf << '\n';
            }
        }
        if (!out) throw IoError("write failed: " + (dir / name).string());
        json entry = {{"file", name}, {"mean_field_draw", vec(m.mean_field_draw)}};
        entry["param_draw_id"] = m.param_draw_id ? json(*m.param_draw_id) : json(nullptr);
        members.push_back(entry);
    }
    json manifest = {{"format", "dataens-ensemble-1"},
                     {"seed", ens.seed},
                     {"fit_report_hash", ens.provenance},
                     {"vary_params", ens.vary_params},
                     {"hessian_fallback", ens.hessian_fallback},
                     {"ridged_frequencies", ens.ridged_frequencies},
                     {"start_time", format_timestamp(ens.start_time)},
                     {"step_s", ens.step},
                     {"n_times", ens.members.empty() ? 0 : ens.members[0].pressure.cols()},
                     {"targets", ens.targets},
                     {"members", members}};
    write_json(dir / "manifest.json", manifest);
}

Ensemble read_ensemble(const std::filesystem::path& dir) {
    const json manifest = read_json(dir / "manifest.json");
    if (manifest.value("format", "") != "dataens-ensemble-1")
        throw FormatError((dir / "manifest.json").string() + " is not an ensemble manifest");
    Ensemble ens;
    ens.seed = manifest.at("seed").get<std::uint64_t>();
    ens.provenance = manifest.at("fit_report_hash").get<std::string>();
    ens.vary_params = manifest.at("vary_params").get<bool>();
    ens.hessian_fallback = manifest.at("hessian_fallback").get<bool>();
    ens.ridged_frequencies = manifest.at("ridged_frequencies").get<std::size_t>();
    ens.start_time = parse_timestamp(manifest.at("start_time").get<std::string>());
    ens.step = manifest.at("step_s").get<std::int64_t>();
    ens.targets = manifest.at("targets").get<std::vector<StationMeta>>();
    const auto n_times = manifest.at("n_times").get<Eigen::Index>();

    for (const auto& entry : manifest.at("members")) {
        EnsembleMember member;
        member.mean_field_draw = vec_from(entry.at("mean_field_draw"));
        if (!entry.at("param_draw_id").is_null()) member.param_draw_id = entry["param_draw_id"].get<std::size_t>();
        const auto file = entry.at("file").get<std::string>();
        member.pressure = read_member_csv(dir / file, ens, n_times);
        member.diffs = difference(member.pressure);
        ens.members.push_back(std::move(member));
    }
    return ens;
}

}  // namespace dataens
