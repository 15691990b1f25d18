#pragma once

// Transmitter: PRBS source, Gray-mapped square QAM, raised-cosine shaping,
// split-delay-combine PDM emulation and carrier phase noise.

#include "combwdm/comb.hpp"
#include "combwdm/errors.hpp"
#include "combwdm/fft.hpp"
#include "combwdm/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace combwdm::tx {

// ---------------------------------------------------------------------------
// PRBS

/// Maximal-length sequence from x^order + x^tap + 1. Supported orders: 7, 9,
/// 11, 15, 23, 31 (order 11 uses x^11 + x^2 + 1).
inline std::vector<std::uint8_t> prbs(unsigned order, std::uint64_t initial_state, std::size_t n_bits)
{
    unsigned tap = 0;
    switch (order) {
    case 7: tap = 6; break;
    case 9: tap = 5; break;
    case 11: tap = 2; break;
    case 15: tap = 14; break;
    case 23: tap = 18; break;
    case 31: tap = 28; break;
    default: throw ValidationError("unsupported PRBS order");
    }
    const std::uint64_t mask = (std::uint64_t{1} << order) - 1;
    std::uint64_t state = initial_state & mask;
    if (state == 0) throw ValidationError("PRBS initial state must be non-zero");

    // state bit i holds a[t+i]; a[t+order] = a[t+tap] ^ a[t]
    std::vector<std::uint8_t> bits(n_bits);
    for (std::size_t i = 0; i < n_bits; ++i) {
        bits[i] = static_cast<std::uint8_t>(state & 1u);
        const std::uint64_t next = ((state >> tap) ^ state) & 1u;
        state = (state >> 1) | (next << (order - 1));
    }
    return bits;
}

// ---------------------------------------------------------------------------
// Constellations

enum class Modulation { qpsk, qam16 };

inline std::string to_string(Modulation m) { return m == Modulation::qpsk ? "QPSK" : "16QAM"; }

/// Square M-QAM with per-axis Gray coding and unit average energy. The symbol
/// label's high half selects the in-phase level, the low half quadrature.
class ConstellationSpec {
public:
    static ConstellationSpec qpsk() { return ConstellationSpec(Modulation::qpsk, 2); }
    static ConstellationSpec qam16() { return ConstellationSpec(Modulation::qam16, 4); }

    static ConstellationSpec from_name(const std::string& name)
    {
        if (name == "QPSK" || name == "qpsk") return qpsk();
        if (name == "16QAM" || name == "16qam" || name == "qam16") return qam16();
        throw ValidationError("unknown modulation '" + name + "'");
    }

    static ConstellationSpec of(Modulation m) { return m == Modulation::qpsk ? qpsk() : qam16(); }

    Modulation modulation() const { return modulation_; }
    std::string name() const { return to_string(modulation_); }
    unsigned bits_per_symbol() const { return bits_; }
    std::size_t size() const { return points_.size(); }
    const cvec& points() const { return points_; }
    cplx point(std::size_t label) const { return points_[label]; }
    double max_magnitude() const { return max_mag_; }

    /// Label of the nearest point (axis-wise slicing).
    std::size_t decide(cplx s) const
    {
        return (gray(axis_index(s.real())) << half_) | gray(axis_index(s.imag()));
    }

    cplx nearest(cplx s) const { return {level(axis_index(s.real())), level(axis_index(s.imag()))}; }

    double nearest_distance2(cplx s) const { return std::norm(s - nearest(s)); }

private:
    ConstellationSpec(Modulation m, unsigned bits) : modulation_(m), bits_(bits), half_(bits / 2)
    {
        levels_ = 1u << half_;
        scale_ = std::sqrt(2.0 * (levels_ * levels_ - 1.0) / 3.0);
        points_.resize(std::size_t{1} << bits_);
        std::vector<unsigned> inv_gray(levels_);
        for (unsigned i = 0; i < levels_; ++i) inv_gray[gray(i)] = i;
        for (std::size_t label = 0; label < points_.size(); ++label) {
            const unsigned gi = static_cast<unsigned>(label >> half_);
            const unsigned gq = static_cast<unsigned>(label & (levels_ - 1));
            points_[label] = {level(inv_gray[gi]), level(inv_gray[gq])};
        }
        for (const auto& p : points_) max_mag_ = std::max(max_mag_, std::abs(p));
    }

    static unsigned gray(unsigned i) { return i ^ (i >> 1); }

    double level(unsigned i) const { return (2.0 * i - (levels_ - 1.0)) / scale_; }

    unsigned axis_index(double v) const
    {
        const double idx = std::floor((v * scale_ + levels_) / 2.0);
        return static_cast<unsigned>(std::clamp(idx, 0.0, levels_ - 1.0));
    }

    Modulation modulation_;
    unsigned bits_;
    unsigned half_;
    unsigned levels_ = 0;
    double scale_ = 1.0;
    double max_mag_ = 0.0;
    cvec points_;
};

inline cvec map_symbols(std::span<const std::uint8_t> bits, const ConstellationSpec& c)
{
    const unsigned b = c.bits_per_symbol();
    if (bits.size() % b != 0) throw ValidationError("bit count not divisible by bits per symbol");
    cvec out(bits.size() / b);
    for (std::size_t k = 0; k < out.size(); ++k) {
        std::size_t label = 0;
        for (unsigned i = 0; i < b; ++i) label = (label << 1) | (bits[k * b + i] & 1u);
        out[k] = c.point(label);
    }
    return out;
}

inline std::vector<std::uint8_t> demap_symbols(std::span<const cplx> symbols, const ConstellationSpec& c)
{
    const unsigned b = c.bits_per_symbol();
    std::vector<std::uint8_t> bits(symbols.size() * b);
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const std::size_t label = c.decide(symbols[k]);
        for (unsigned i = 0; i < b; ++i)
            bits[k * b + i] = static_cast<std::uint8_t>((label >> (b - 1 - i)) & 1u);
    }
    return bits;
}

// ---------------------------------------------------------------------------
// Pulse shaping

struct PulseShape {
    double rolloff = 0.05;
    std::size_t span = 128; // symbols
    std::size_t samples_per_symbol = 4;

    void validate() const
    {
        if (!(rolloff > 0.0 && rolloff <= 1.0)) throw ValidationError("roll-off must lie in (0, 1]");
        if (span < 16) throw ValidationError("pulse span must be at least 16 symbols");
        if (samples_per_symbol < 2) throw ValidationError("need at least 2 samples per symbol");
    }
};

/// Raised-cosine impulse response at t (in symbol periods), unit peak.
inline double raised_cosine(double t, double rolloff)
{
    const double pi = std::numbers::pi;
    if (std::abs(t) < 1e-12) return 1.0;
    const double edge = 1.0 / (2.0 * rolloff);
    if (std::abs(std::abs(t) - edge) < 1e-9) return pi / 4.0 * std::sin(pi * edge) / (pi * edge);
    const double sinc = std::sin(pi * t) / (pi * t);
    const double d = 2.0 * rolloff * t;
    return sinc * std::cos(pi * rolloff * t) / (1.0 - d * d);
}

inline double occupied_bandwidth(double rolloff, double symbol_rate) { return (1.0 + rolloff) * symbol_rate; }

/// Cyclic convolution of the upsampled symbol stream with a truncated RC
/// pulse. Output sample k*sps equals symbol k exactly (up to rounding).
inline cvec shape_pulses(std::span<const cplx> symbols, const PulseShape& shape)
{
    shape.validate();
    const std::size_t sps = shape.samples_per_symbol;
    const std::size_t n = symbols.size() * sps;
    if (n == 0) return {};
    cvec up(n, cplx{});
    for (std::size_t k = 0; k < symbols.size(); ++k) up[k * sps] = symbols[k];

    cvec kernel(n, cplx{});
    const auto half = static_cast<std::ptrdiff_t>(shape.span * sps / 2);
    const auto nn = static_cast<std::ptrdiff_t>(n);
    for (std::ptrdiff_t m = -half; m <= half; ++m) {
        const double t = static_cast<double>(m) / static_cast<double>(sps);
        const auto idx = static_cast<std::size_t>(((m % nn) + nn) % nn);
        kernel[idx] += raised_cosine(t, shape.rolloff);
    }
    fft::forward(up);
    fft::forward(kernel);
    for (std::size_t i = 0; i < n; ++i) up[i] *= kernel[i];
    fft::inverse(up);
    return up;
}

// ---------------------------------------------------------------------------
// Dual-polarization waveform

struct DualPolWaveform {
    cvec x;
    cvec y;
    double sample_rate = 0.0;
    double symbol_rate = 0.0;

    std::size_t size() const { return x.size(); }
    double samples_per_symbol() const { return sample_rate / symbol_rate; }
    double total_power() const { return mean_power(x) + mean_power(y); }

    void validate() const
    {
        if (x.size() != y.size()) throw ValidationError("polarization lengths differ");
        if (!(sample_rate > 0.0) || !(symbol_rate > 0.0))
            throw ValidationError("waveform rates must be positive");
    }
};

inline std::size_t pdm_delay_samples(double delay, double sample_rate)
{
    return static_cast<std::size_t>(std::llround(delay * sample_rate));
}

/// X carries the waveform, Y a cyclically delayed copy; each polarization
/// holds the full waveform power.
inline DualPolWaveform emulate_pdm(const cvec& waveform, double sample_rate, double symbol_rate,
                                   double decorrelation_delay = 5.3e-9)
{
    if (!(decorrelation_delay >= 0.0)) throw ValidationError("PDM delay must be non-negative");
    const double duration = static_cast<double>(waveform.size()) / sample_rate;
    if (!(decorrelation_delay < duration / 2.0))
        throw ValidationError("PDM delay must be shorter than half the waveform");
    DualPolWaveform out;
    out.sample_rate = sample_rate;
    out.symbol_rate = symbol_rate;
    out.x = waveform;
    out.y.resize(waveform.size());
    const std::size_t d = pdm_delay_samples(decorrelation_delay, sample_rate) % std::max<std::size_t>(waveform.size(), 1);
    std::rotate_copy(waveform.begin(), waveform.end() - static_cast<std::ptrdiff_t>(d), waveform.end(),
                     out.y.begin());
    return out;
}

/// Multiplies both polarizations by exp(j phi(t)) of the carrier tone.
inline DualPolWaveform apply_carrier(DualPolWaveform w, const comb::CarrierTone& tone)
{
    w.validate();
    const auto& rec = tone.phase_record;
    if (std::abs(rec.sample_rate() / w.sample_rate - 1.0) > 1e-9)
        throw ValidationError("carrier phase record sample rate does not match the waveform");
    if (rec.size() < w.size()) throw ValidationError("carrier phase record shorter than the waveform");
    for (std::size_t n = 0; n < w.size(); ++n) {
        const cplx rot = std::polar(1.0, rec.phases[n]);
        w.x[n] *= rot;
        w.y[n] *= rot;
    }
    return w;
}

} // namespace combwdm::tx
