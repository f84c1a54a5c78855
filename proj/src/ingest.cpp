#include "dataens/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dataens/errors.hpp"

namespace dataens {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& text, std::size_t line, const char* field) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw FormatError(std::string("cannot parse ") + field + " '" + text + "'", line);
    return v;
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
    int y, mo, d, h = 0, mi = 0, s = 0;
    char tail = 0;
    const int got = std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%d%c", &y, &mo, &d, &h, &mi, &s, &tail);
    const bool date_only = got == 3 && text.size() == 10;
    if (!date_only && (got < 6 || (got == 7 && tail != 'Z')))
        throw FormatError("invalid UTC timestamp '" + text + "'");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || s < 0 || s > 60)
        throw FormatError("invalid UTC timestamp '" + text + "'");
    const auto days = sys_days(ymd).time_since_epoch().count();
    return static_cast<Timestamp>(days) * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    Timestamp days = t / 86400;
    Timestamp secs = t % 86400;
    if (secs < 0) {
        secs += 86400;
        --days;
    }
    const year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(secs / 3600), static_cast<int>((secs / 60) % 60), static_cast<int>(secs % 60));
    return buf;
}

std::size_t RawSeries::missing_count() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](const auto& v) { return !v; }));
}

std::vector<double> RawSeries::dense() const {
    std::vector<double> out;
    out.reserve(values.size());
    for (const auto& v : values) {
        if (!v) throw DataQualityError("series for station " + station.id + " has missing values");
        out.push_back(*v);
    }
    return out;
}

Eigen::VectorXd DataGrid::elevations() const {
    Eigen::VectorXd e(stations.size());
    for (std::size_t i = 0; i < stations.size(); ++i) e[i] = stations[i].elevation;
    return e;
}

DataGrid DataGrid::select(const std::vector<std::string>& ids) const {
    DataGrid out;
    out.start_time = start_time;
    out.step = step;
    out.values.resize(static_cast<Eigen::Index>(ids.size()), values.cols());
    for (std::size_t k = 0; k < ids.size(); ++k) {
        auto it = std::find_if(stations.begin(), stations.end(), [&](const StationMeta& s) { return s.id == ids[k]; });
        if (it == stations.end()) throw ValidationError("station '" + ids[k] + "' not in grid");
        out.stations.push_back(*it);
        out.values.row(static_cast<Eigen::Index>(k)) = values.row(it - stations.begin());
    }
    return out;
}

std::vector<StationMeta> parse_stations(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!is_blank(line)) break;
    }
    if (trim(line) != "id,latitude_deg,longitude_deg,elevation_m")
        throw FormatError("expected station header 'id,latitude_deg,longitude_deg,elevation_m'", lineno);

    std::vector<StationMeta> out;
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        const auto f = split_csv(line);
        if (f.size() != 4) throw FormatError("expected 4 fields in station row", lineno);
        StationMeta s;
        s.id = f[0];
        if (s.id.empty()) throw FormatError("empty station id", lineno);
        s.latitude = parse_double(f[1], lineno, "latitude");
        s.longitude = parse_double(f[2], lineno, "longitude");
        s.elevation = parse_double(f[3], lineno, "elevation");
        if (s.latitude < -90.0 || s.latitude > 90.0) throw ValidationError("latitude out of range for " + s.id);
        if (s.longitude < -180.0 || s.longitude > 180.0) throw ValidationError("longitude out of range for " + s.id);
        if (!seen.insert(s.id).second) throw ValidationError("duplicate station id '" + s.id + "'");
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<StationMeta> load_stations(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open station file " + path.string());
    return parse_stations(in);
}

void write_stations(std::ostream& out, const std::vector<StationMeta>& stations) {
    out << "id,latitude_deg,longitude_deg,elevation_m\n";
    char buf[128];
    for (const auto& s : stations) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.3f", s.latitude, s.longitude, s.elevation);
        out << s.id << ',' << buf << '\n';
    }
}

namespace {

struct ObsRow {
    Timestamp t;
    std::optional<double> value;
};

void parse_rows(std::istream& in, const std::string& source, std::map<std::string, std::vector<ObsRow>>& rows) {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!is_blank(line)) break;
    }
    if (trim(line) != "timestamp,station_id,pressure_kPa")
        throw FormatError(source + ": expected observation header 'timestamp,station_id,pressure_kPa'", lineno);
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        auto f = split_csv(line);
        if (f.size() == 2) f.emplace_back();
        if (f.size() != 3) throw FormatError(source + ": expected 3 fields in observation row", lineno);
        Timestamp t;
        try {
            t = parse_timestamp(f[0]);
        } catch (const FormatError& e) {
            throw FormatError(source + ": " + e.what(), lineno);
        }
        std::optional<double> v;
        if (!f[2].empty()) v = parse_double(f[2], lineno, "pressure");
        rows[f[1]].push_back({t, v});
    }
}

std::vector<RawSeries> build_series(std::map<std::string, std::vector<ObsRow>>& rows,
                                    const std::vector<StationMeta>& stations) {
    for (const auto& [id, _] : rows) {
        if (std::none_of(stations.begin(), stations.end(), [&](const StationMeta& s) { return s.id == id; }))
            throw ValidationError("observations reference unknown station '" + id + "'");
    }
    std::vector<RawSeries> out;
    for (const auto& st : stations) {
        auto it = rows.find(st.id);
        if (it == rows.end()) continue;
        auto& r = it->second;
        std::sort(r.begin(), r.end(), [](const ObsRow& a, const ObsRow& b) { return a.t < b.t; });
        std::int64_t step = 0;
        for (std::size_t i = 1; i < r.size(); ++i) {
            const auto d = r[i].t - r[i - 1].t;
            if (d == 0) throw ValidationError("duplicate timestamp " + format_timestamp(r[i].t) + " for " + st.id);
            step = std::gcd(step, d);
        }
        RawSeries s;
        s.station = st;
        s.start_time = r.front().t;
        s.step = step > 0 ? step : 60;
        const auto len = static_cast<std::size_t>((r.back().t - r.front().t) / s.step) + 1;
        s.values.assign(len, std::nullopt);
        for (const auto& row : r) s.values[static_cast<std::size_t>((row.t - s.start_time) / s.step)] = row.value;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

std::vector<RawSeries> parse_observations(std::istream& in, const std::vector<StationMeta>& stations) {
    std::map<std::string, std::vector<ObsRow>> rows;
    parse_rows(in, "observations", rows);
    return build_series(rows, stations);
}

std::vector<RawSeries> load_observations(const std::vector<std::filesystem::path>& paths,
                                         const std::vector<StationMeta>& stations) {
    std::map<std::string, std::vector<ObsRow>> rows;
    for (const auto& p : paths) {
        std::ifstream in(p);
        if (!in) throw IoError("cannot open observation file " + p.string());
        parse_rows(in, p.string(), rows);
    }
    return build_series(rows, stations);
}

void write_observations(std::ostream& out, const RawSeries& series, int decimals) {
    out << "timestamp,station_id,pressure_kPa\n";
    char buf[64];
    for (std::size_t i = 0; i < series.values.size(); ++i) {
        out << format_timestamp(series.start_time + static_cast<Timestamp>(i) * series.step) << ','
            << series.station.id << ',';
        if (series.values[i]) {
            std::snprintf(buf, sizeof buf, "%.*f", decimals, *series.values[i]);
            out << buf;
        }
        out << '\n';
    }
}

void check_missing_fraction(const RawSeries& series, double max_fraction) {
    if (series.values.empty()) throw DataQualityError("station " + series.station.id + " has no observations");
    const double frac = static_cast<double>(series.missing_count()) / static_cast<double>(series.values.size());
    if (frac > max_fraction)
        throw DataQualityError("station " + series.station.id + " is missing " + std::to_string(frac * 100.0) +
                               "% of observations");
}

RawSeries fill_missing(const RawSeries& series, std::size_t max_gap) {
    RawSeries out = series;
    auto& v = out.values;
    const std::size_t n = v.size();
    auto gap_error = [&](std::size_t lo, std::size_t hi) {
        return DataQualityError("station " + series.station.id + ": gap of " + std::to_string(hi - lo) +
                                " missing values from " +
                                format_timestamp(series.start_time + static_cast<Timestamp>(lo) * series.step) +
                                " to " +
                                format_timestamp(series.start_time + static_cast<Timestamp>(hi - 1) * series.step) +
                                " exceeds limit " + std::to_string(max_gap));
    };
    std::size_t i = 0;
    while (i < n) {
        if (v[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && !v[j]) ++j;
        // gap is [i, j)
        if (j - i > max_gap) throw gap_error(i, j);
        if (i == 0 && j == n) throw DataQualityError("station " + series.station.id + " has no observations");
        if (i == 0) {
            for (std::size_t k = i; k < j; ++k) v[k] = *v[j];
        } else if (j == n) {
            for (std::size_t k = i; k < j; ++k) v[k] = *v[i - 1];
        } else {
            const double a = *v[i - 1];
            const double b = *v[j];
            const double span = static_cast<double>(j - (i - 1));
            for (std::size_t k = i; k < j; ++k) v[k] = a + (b - a) * static_cast<double>(k - (i - 1)) / span;
        }
        i = j;
    }
    return out;
}

RawSeries block_average(const RawSeries& series, std::int64_t block) {
    if (block <= 0) throw std::invalid_argument("block size must be positive");
    const auto b = static_cast<std::size_t>(block);
    if (series.values.size() < b)
        throw std::invalid_argument("series for " + series.station.id + " is shorter than one block");
    const auto x = series.dense();
    RawSeries out;
    out.station = series.station;
    out.start_time = series.start_time;
    out.step = series.step * block;
    const std::size_t m = x.size() / b;
    out.values.reserve(m);
    for (std::size_t k = 0; k < m; ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < b; ++i) s += x[k * b + i];
        out.values.emplace_back(s / static_cast<double>(b));
    }
    return out;
}

RawSeries window(const RawSeries& series, Timestamp start, std::size_t count) {
    const std::int64_t offset = start - series.start_time;
    if (offset % series.step != 0)
        throw AlignmentError("window start " + format_timestamp(start) + " is not on the time axis of station " +
                             series.station.id);
    RawSeries out;
    out.station = series.station;
    out.start_time = start;
    out.step = series.step;
    out.values.assign(count, std::nullopt);
    const std::int64_t first = offset / series.step;
    for (std::size_t t = 0; t < count; ++t) {
        const std::int64_t src = first + static_cast<std::int64_t>(t);
        if (src >= 0 && src < static_cast<std::int64_t>(series.values.size()))
            out.values[t] = series.values[static_cast<std::size_t>(src)];
    }
    return out;
}

DataGrid assemble_grid(const std::vector<RawSeries>& series, std::size_t target_len) {
    if (series.empty()) throw std::invalid_argument("assemble_grid needs at least one series");
    if (target_len < 1) throw std::invalid_argument("target length must be at least 1");
    const auto cols = target_len + 1;
    DataGrid g;
    g.start_time = series.front().start_time;
    g.step = series.front().step;
    g.values.resize(static_cast<Eigen::Index>(series.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto& s = series[i];
        if (s.start_time != g.start_time || s.step != g.step)
            throw AlignmentError("station " + s.station.id + " time axis (start " + format_timestamp(s.start_time) +
                                 ", step " + std::to_string(s.step) + "s) does not match station " +
                                 series.front().station.id);
        if (s.values.size() < cols)
            throw AlignmentError("station " + s.station.id + " has " + std::to_string(s.values.size()) +
                                 " values, need " + std::to_string(cols));
        const auto x = s.dense();
        for (std::size_t t = 0; t < cols; ++t) g.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = x[t];
        g.stations.push_back(s.station);
    }
    return g;
}

}  // namespace dataens
