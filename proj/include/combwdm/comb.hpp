#pragma once

// Frequency-comb source: equidistant carriers, each with its own phase-noise
// realization, per-line power envelope and optical carrier-to-noise ratio.

#include "combwdm/errors.hpp"
#include "combwdm/phasenoise.hpp"
#include "combwdm/random.hpp"
#include "combwdm/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

namespace combwdm::comb {

using phasenoise::FmNoiseModel;
using phasenoise::PhaseRecord;

struct CombSpec {
    double center_frequency = 193.4e12; // Hz
    double fsr = 42e9;                  // Hz
    std::size_t n_lines = 1;
    std::vector<double> envelope_db;        // per line, relative; empty means flat
    std::vector<FmNoiseModel> line_noise;   // one shared model or one per line
    double ocnr_db = 37.0;                  // in the 12.5 GHz reference bandwidth

    void validate() const
    {
        if (!(fsr > 0.0) || !std::isfinite(fsr)) throw ValidationError("comb FSR must be positive");
        if (n_lines < 1) throw ValidationError("comb needs at least one line");
        if (!envelope_db.empty() && envelope_db.size() != n_lines)
            throw ValidationError("comb envelope length must equal the line count");
        for (double e : envelope_db)
            if (!std::isfinite(e)) throw ValidationError("comb envelope values must be finite");
        if (line_noise.size() > 1 && line_noise.size() != n_lines)
            throw ValidationError("line noise must hold one shared model or one per line");
        for (const auto& m : line_noise) m.validate();
        if (std::isnan(ocnr_db)) throw ValidationError("OCNR must be a number");
    }

    double line_frequency(std::size_t k) const
    {
        return center_frequency +
               (static_cast<double>(k) - static_cast<double>(n_lines - 1) / 2.0) * fsr;
    }

    double line_power_db(std::size_t k) const { return envelope_db.empty() ? 0.0 : envelope_db[k]; }
    double line_power(std::size_t k) const { return db_to_linear(line_power_db(k)); }

    FmNoiseModel line_model(std::size_t k) const
    {
        if (line_noise.empty()) return {};
        return line_noise.size() == 1 ? line_noise.front() : line_noise[k];
    }
};

/// Parabolic-in-dB envelope dropping by 3 dB at +-fwhm_lines/2 from the center.
inline std::vector<double> gaussian_envelope_db(std::size_t n_lines, double fwhm_lines)
{
    if (!(fwhm_lines > 0.0)) throw ValidationError("envelope width must be positive");
    std::vector<double> env(n_lines);
    const double center = static_cast<double>(n_lines - 1) / 2.0;
    for (std::size_t k = 0; k < n_lines; ++k) {
        const double x = (static_cast<double>(k) - center) / (fwhm_lines / 2.0);
        env[k] = -3.0 * x * x;
    }
    return env;
}

struct CarrierTone {
    double frequency = 0.0;
    double power = 1.0;
    PhaseRecord phase_record;
    std::size_t line_index = 0;
};

inline CarrierTone generate_tone(const CombSpec& spec, std::size_t line_index, double duration,
                                 double sample_rate, std::uint64_t seed)
{
    spec.validate();
    if (line_index >= spec.n_lines) throw ValidationError("line index out of range");
    if (!(duration > 0.0) || !(sample_rate > 0.0))
        throw ValidationError("duration and sample rate must be positive");
    const auto n = std::max<std::size_t>(
        1024, static_cast<std::size_t>(std::ceil(duration * sample_rate - 1e-9)));
    CarrierTone tone;
    tone.line_index = line_index;
    tone.frequency = spec.line_frequency(line_index);
    tone.power = spec.line_power(line_index);
    tone.phase_record = phasenoise::synthesize_phase(
        spec.line_model(line_index), n, sample_rate,
        derive_seed({seed, static_cast<std::uint64_t>(Stream::comb_line), line_index}));
    return tone;
}

/// All lines of the comb. `signal_bandwidth` (Hz, optional) is checked
/// against the per-line sample rate.
inline std::vector<CarrierTone> generate_comb(const CombSpec& spec, double duration, double sample_rate,
                                              std::uint64_t seed, double signal_bandwidth = 0.0)
{
    spec.validate();
    if (signal_bandwidth > 0.0 && sample_rate < 2.0 * signal_bandwidth)
        throw ValidationError("sample rate below twice the per-channel signal bandwidth");
    std::vector<CarrierTone> tones;
    tones.reserve(spec.n_lines);
    for (std::size_t k = 0; k < spec.n_lines; ++k)
        tones.push_back(generate_tone(spec, k, duration, sample_rate, seed));
    return tones;
}

struct Selection {
    enum class Kind { odd, even, indices };
    Kind kind = Kind::indices;
    std::vector<std::size_t> indices;

    static Selection odd() { return {Kind::odd, {}}; }
    static Selection even() { return {Kind::even, {}}; }
    static Selection of(std::vector<std::size_t> idx) { return {Kind::indices, std::move(idx)}; }

    bool contains(std::size_t line_index) const
    {
        switch (kind) {
        case Kind::odd: return line_index % 2 == 1;
        case Kind::even: return line_index % 2 == 0;
        case Kind::indices: return std::find(indices.begin(), indices.end(), line_index) != indices.end();
        }
        return false;
    }
};

/// Line indices of an n-line comb picked by `sel`, ascending.
inline std::vector<std::size_t> selected_indices(std::size_t n_lines, const Selection& sel)
{
    if (sel.kind == Selection::Kind::indices)
        for (auto i : sel.indices)
            if (i >= n_lines) throw ValidationError("selected line index out of range");
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < n_lines; ++k)
        if (sel.contains(k)) out.push_back(k);
    if (out.empty()) throw ValidationError("empty line selection");
    return out;
}

/// Programmable-filter style selection. With `flatten`, every selected line
/// is attenuated to the weakest selected power.
inline std::vector<CarrierTone> select_lines(const std::vector<CarrierTone>& tones, const Selection& sel,
                                             bool flatten = false)
{
    if (sel.kind == Selection::Kind::indices)
        for (auto i : sel.indices) {
            const bool present = std::any_of(tones.begin(), tones.end(),
                                             [&](const CarrierTone& t) { return t.line_index == i; });
            if (!present) throw ValidationError("selected line index out of range");
        }
    std::vector<CarrierTone> out;
    for (const auto& t : tones)
        if (sel.contains(t.line_index)) out.push_back(t);
    if (out.empty()) throw ValidationError("empty line selection");
    if (flatten) {
        double floor = std::numeric_limits<double>::infinity();
        for (const auto& t : out) floor = std::min(floor, t.power);
        for (auto& t : out) t.power = floor;
    }
    return out;
}

/// Noise PSD (linear power per Hz) such that line_power / (psd * 12.5 GHz)
/// equals the OCNR. Infinite OCNR gives zero.
inline double ocnr_noise_floor(double ocnr_db, double line_power)
{
    if (std::isnan(ocnr_db)) throw ValidationError("OCNR must be a number");
    if (std::isinf(ocnr_db) && ocnr_db > 0.0) return 0.0;
    return line_power / (db_to_linear(ocnr_db) * reference_bandwidth_hz);
}

inline double ocnr_noise_floor(const CombSpec& spec, double line_power)
{
    return ocnr_noise_floor(spec.ocnr_db, line_power);
}

} // namespace combwdm::comb
