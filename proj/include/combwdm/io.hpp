#pragma once

// Two-column text records of measured carriers.
//
//   # sample_rate_hz = 2e9
//   time_s,phase_rad          (or: I,Q)
//   0,0.0
//   5e-10,0.0013
//
// Lines starting with '#' are comments, except the mandatory sample-rate
// declaration. The optional column header selects the kind; without one,
// `phase` is assumed. Separators may be commas or whitespace.

#include "combwdm/errors.hpp"
#include "combwdm/phasenoise.hpp"
#include "combwdm/units.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

namespace combwdm::io {

enum class RecordKind { phase, iq };

struct CarrierRecord {
    RecordKind kind = RecordKind::phase;
    double sample_rate = 0.0;
    std::vector<double> phase; // rad, filled for both kinds (unwrapped from IQ)
    cvec iq;                   // only for RecordKind::iq

    phasenoise::PhaseRecord phase_record() const
    {
        phasenoise::PhaseRecord r;
        r.phases = phase;
        r.sample_interval = 1.0 / sample_rate;
        return r;
    }
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

inline std::string lower(std::string s)
{
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline bool parse_pair(const std::string& line, double& a, double& b)
{
    std::string t = line;
    for (auto& c : t)
        if (c == ',' || c == ';' || c == '\t') c = ' ';
    std::istringstream in(t);
    std::string extra;
    if (!(in >> a >> b)) return false;
    return !(in >> extra);
}

} // namespace detail

/// Unwrapped argument of an IQ sequence.
inline std::vector<double> unwrap_phase(const cvec& iq)
{
    std::vector<double> ph(iq.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < iq.size(); ++i) {
        const double a = std::arg(iq[i]);
        ph[i] = i == 0 ? a : prev + std::remainder(a - prev, 2.0 * std::numbers::pi);
        prev = ph[i];
    }
    return ph;
}

inline CarrierRecord parse_record(std::istream& in, const std::string& origin = "record")
{
    CarrierRecord rec;
    bool have_rate = false, have_header = false;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        if (t[0] == '#') {
            const auto body = detail::lower(detail::trim(t.substr(1)));
            if (body.rfind("sample_rate_hz", 0) == 0) {
                const auto eq = body.find_first_of("=:");
                if (eq == std::string::npos) throw ConfigError(origin + ": malformed sample_rate_hz line");
                try {
                    rec.sample_rate = std::stod(body.substr(eq + 1));
                } catch (const std::exception&) {
                    throw ConfigError(origin + ": malformed sample_rate_hz value");
                }
                have_rate = true;
            }
            continue;
        }
        double a = 0.0, b = 0.0;
        if (!detail::parse_pair(t, a, b)) {
            if (have_header || !rec.phase.empty() || !rec.iq.empty())
                throw ConfigError(origin + ": line " + std::to_string(line_no) + " is not two numbers");
            const auto h = detail::lower(t);
            if (h.find("phase") != std::string::npos) {
                rec.kind = RecordKind::phase;
            } else if (h.rfind("i", 0) == 0 && h.find('q') != std::string::npos) {
                rec.kind = RecordKind::iq;
            } else {
                throw ConfigError(origin + ": unknown column header '" + t + "'");
            }
            have_header = true;
            continue;
        }
        if (!std::isfinite(a) || !std::isfinite(b))
            throw ConfigError(origin + ": non-finite value on line " + std::to_string(line_no));
        if (rec.kind == RecordKind::iq)
            rec.iq.emplace_back(a, b);
        else
            rec.phase.push_back(b);
    }
    if (!have_rate) throw ConfigError(origin + ": missing '# sample_rate_hz = ...' header");
    if (!(rec.sample_rate > 0.0) || !std::isfinite(rec.sample_rate))
        throw ConfigError(origin + ": sample rate must be positive");
    if (rec.kind == RecordKind::iq) rec.phase = unwrap_phase(rec.iq);
    if (rec.phase.size() < 2) throw InsufficientData(origin + ": record needs at least 2 samples");
    return rec;
}

inline CarrierRecord read_record(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    return parse_record(in, path);
}

inline void write_phase_record(std::ostream& out, const phasenoise::PhaseRecord& r)
{
    char buf[96];
    std::snprintf(buf, sizeof buf, "# sample_rate_hz = %.17g\n", r.sample_rate());
    out << buf << "time_s,phase_rad\n";
    for (std::size_t i = 0; i < r.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", static_cast<double>(i) * r.sample_interval, r.phases[i]);
        out << buf;
    }
}

inline void write_phase_record(const std::string& path, const phasenoise::PhaseRecord& r)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    write_phase_record(out, r);
}

} // namespace combwdm::io
