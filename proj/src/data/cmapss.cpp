#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "rgpd/data/data.hpp"

namespace rgpd {

ParseError::ParseError(const std::string& file, std::size_t line, const std::string& what)
    : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

const std::vector<std::string>& cmapss_channel_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n{"setting1", "setting2", "setting3"};
        for (int i = 1; i <= 21; ++i) n.push_back("s" + std::to_string(i));
        return n;
    }();
    return names;
}

std::vector<std::string> cmapss_sensor_names() {
    const auto& all = cmapss_channel_names();
    return {all.begin() + 3, all.end()};
}

std::vector<UnitTrajectory> load_cmapss(const std::filesystem::path& path, std::ostream* warnings) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    struct Row {
        int cycle;
        std::vector<double> values;
    };
    std::map<int, std::vector<Row>> by_unit;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream fields(line);
        std::vector<double> cols;
        std::string tok;
        while (fields >> tok) {
            try {
                std::size_t used = 0;
                const double v = std::stod(tok, &used);
                if (used != tok.size() || !std::isfinite(v)) throw std::invalid_argument(tok);
                cols.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(path.string(), line_no, "not a number: '" + tok + "'");
            }
        }
        if (cols.size() != 26) {
            throw ParseError(path.string(), line_no, "expected 26 columns, found " + std::to_string(cols.size()));
        }
        if (cols[0] != std::floor(cols[0]) || cols[1] != std::floor(cols[1]) || cols[1] < 1) {
            throw ParseError(path.string(), line_no, "unit and cycle must be positive integers");
        }
        by_unit[static_cast<int>(cols[0])].push_back({static_cast<int>(cols[1]), {cols.begin() + 2, cols.end()}});
    }
    std::vector<UnitTrajectory> units;
    for (auto& [id, rows] : by_unit) {
        std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.cycle < b.cycle; });
        UnitTrajectory u;
        u.unit = id;
        u.channels = cmapss_channel_names();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i > 0 && rows[i].cycle == rows[i - 1].cycle) {
                throw std::runtime_error(path.string() + ": unit " + std::to_string(id) + " repeats cycle " +
                                         std::to_string(rows[i].cycle));
            }
            if (warnings && rows[i].cycle != static_cast<int>(i) + 1) {
                *warnings << "warning: " << path.string() << ": unit " << id << " cycles not contiguous at "
                          << rows[i].cycle << "\n";
                warnings = nullptr;
            }
            u.cycles.push_back(rows[i].cycle);
            u.values.insert(u.values.end(), rows[i].values.begin(), rows[i].values.end());
        }
        units.push_back(std::move(u));
    }
    return units;
}

void attach_rul_file(std::vector<UnitTrajectory>& units, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::vector<double> rul;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        double v;
        if (!(fields >> v)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            throw ParseError(path.string(), line_no, "expected a RUL value");
        }
        if (v < 0) throw ParseError(path.string(), line_no, "negative RUL");
        rul.push_back(v);
    }
    if (rul.size() != units.size()) {
        throw std::runtime_error(path.string() + ": " + std::to_string(rul.size()) + " RUL values for " +
                                 std::to_string(units.size()) + " units");
    }
    for (std::size_t i = 0; i < units.size(); ++i) {
        units[i].failed = false;
        units[i].end_rul = rul[i];
    }
}

void write_cmapss(std::ostream& out, const std::vector<UnitTrajectory>& units) {
    out.precision(17);
    for (const auto& u : units) {
        const std::size_t c = u.num_channels();
        if (c > 21) throw DimensionError("CMAPSS text holds at most 21 sensor channels");
        for (std::size_t r = 0; r < u.length(); ++r) {
            out << u.unit << ' ' << u.cycles[r] << " 0 0 100";
            for (std::size_t k = 0; k < 21; ++k) out << ' ' << (k < c ? u.at(r, k) : 0.0);
            out << '\n';
        }
    }
}

std::vector<UnitTrajectory> select_channels(const std::vector<UnitTrajectory>& units,
                                            const std::vector<std::string>& keep) {
    std::vector<UnitTrajectory> out;
    for (const auto& u : units) {
        std::vector<std::size_t> idx;
        for (const auto& name : keep) {
            auto it = std::find(u.channels.begin(), u.channels.end(), name);
            if (it == u.channels.end()) throw std::invalid_argument("unknown channel '" + name + "'");
            idx.push_back(static_cast<std::size_t>(it - u.channels.begin()));
        }
        UnitTrajectory v = u;
        v.channels = keep;
        v.values.clear();
        for (std::size_t r = 0; r < u.length(); ++r)
            for (std::size_t k : idx) v.values.push_back(u.at(r, k));
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<std::string> constant_channels(const std::vector<UnitTrajectory>& units, double tol) {
    if (units.empty()) return {};
    const std::size_t c = units.front().num_channels();
    std::vector<double> sum(c, 0.0), sq(c, 0.0);
    double n = 0;
    for (const auto& u : units) {
        for (std::size_t r = 0; r < u.length(); ++r)
            for (std::size_t k = 0; k < c; ++k) sum[k] += u.at(r, k);
        n += static_cast<double>(u.length());
    }
    for (auto& s : sum) s /= n;
    for (const auto& u : units)
        for (std::size_t r = 0; r < u.length(); ++r)
            for (std::size_t k = 0; k < c; ++k) sq[k] += (u.at(r, k) - sum[k]) * (u.at(r, k) - sum[k]);
    std::vector<std::string> out;
    for (std::size_t k = 0; k < c; ++k)
        if (std::sqrt(sq[k] / n) < tol) out.push_back(units.front().channels[k]);
    return out;
}

std::vector<double> label_rul(const UnitTrajectory& traj, double cap) {
    if (!(cap > 0)) throw std::invalid_argument("RUL cap must be positive");
    std::vector<double> labels;
    const double last = traj.cycles.empty() ? 0.0 : traj.cycles.back();
    for (int c : traj.cycles) labels.push_back(std::min(cap, traj.end_rul + last - c));
    return labels;
}

}  // namespace rgpd
