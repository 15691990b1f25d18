#pragma once

// Link impairments: ASE noise loading, chromatic dispersion, polarization
// rotation and intradyne down-conversion against a noisy local oscillator.

#include "combwdm/errors.hpp"
#include "combwdm/fft.hpp"
#include "combwdm/phasenoise.hpp"
#include "combwdm/random.hpp"
#include "combwdm/txdsp.hpp"
#include "combwdm/units.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>

namespace combwdm::channel {

using phasenoise::FmNoiseModel;
using tx::DualPolWaveform;

struct LinkSpec {
    double fiber_length = 75e3;                // m
    double dispersion_ps_nm_km = 17.0;         // ps/(nm km)
    double reference_wavelength = 1550e-9;     // m
    std::optional<double> target_osnr_db;      // dB in 12.5 GHz, dual-pol; none = noiseless
    FmNoiseModel lo_model = FmNoiseModel::from_lorentzian(10e3);
    double lo_frequency_offset = 0.0;          // Hz
    double osnr_tilt_db_per_thz = 0.0;         // applied per channel relative to the comb center

    void validate() const
    {
        if (!(fiber_length >= 0.0)) throw ValidationError("fiber length must be >= 0");
        if (!std::isfinite(dispersion_ps_nm_km)) throw ValidationError("dispersion must be finite");
        if (!(reference_wavelength > 0.0)) throw ValidationError("wavelength must be positive");
        lo_model.validate();
        if (!std::isfinite(lo_frequency_offset)) throw ValidationError("LO offset must be finite");
    }

    /// Accumulated dispersion D*L in s/m.
    double accumulated_dispersion() const { return dispersion_ps_nm_km * 1e-6 * fiber_length; }

    /// OSNR of a channel `offset_hz` away from the comb center, with tilt.
    std::optional<double> channel_osnr_db(double offset_hz) const
    {
        if (!target_osnr_db) return std::nullopt;
        return *target_osnr_db + osnr_tilt_db_per_thz * offset_hz * 1e-12;
    }
};

// ---------------------------------------------------------------------------
// ASE loading and OSNR

/// Adds independent circular white Gaussian noise to both polarizations so
/// that total signal power / (dual-pol noise PSD * 12.5 GHz) equals the
/// target. +inf leaves the signal untouched.
inline DualPolWaveform load_ase_noise(DualPolWaveform s, double target_osnr_db, std::uint64_t seed)
{
    s.validate();
    if (std::isinf(target_osnr_db) && target_osnr_db > 0.0) return s;
    if (!std::isfinite(target_osnr_db)) throw ValidationError("target OSNR must be finite or +inf");
    const double p = s.total_power();
    if (!(p > 0.0)) throw ValidationError("cannot load noise onto a zero-power signal");
    const double psd = p / (db_to_linear(target_osnr_db) * reference_bandwidth_hz);
    const double var_per_pol = psd * s.sample_rate / 2.0;
    Gaussian rng(seed);
    for (auto& v : s.x) v += rng.complex(var_per_pol);
    for (auto& v : s.y) v += rng.complex(var_per_pol);
    return s;
}

inline double measure_osnr(const DualPolWaveform& noisy, const DualPolWaveform& clean)
{
    noisy.validate();
    clean.validate();
    if (noisy.size() != clean.size() || std::abs(noisy.sample_rate - clean.sample_rate) > 1e-9 * clean.sample_rate)
        throw ValidationError("OSNR measurement needs equal lengths and sample rates");
    double noise = 0.0;
    for (std::size_t n = 0; n < clean.size(); ++n)
        noise += std::norm(noisy.x[n] - clean.x[n]) + std::norm(noisy.y[n] - clean.y[n]);
    noise /= static_cast<double>(clean.size());
    if (noise == 0.0) return std::numeric_limits<double>::infinity();
    const double psd = noise / clean.sample_rate;
    return linear_to_db(clean.total_power() / (psd * reference_bandwidth_hz));
}

// ---------------------------------------------------------------------------
// Chromatic dispersion

enum class CdDirection { forward, inverse };

/// Quadratic phase coefficient pi lambda^2 D L / c (rad/Hz^2).
inline double cd_phase_coefficient(const LinkSpec& link)
{
    return std::numbers::pi * link.reference_wavelength * link.reference_wavelength *
           link.accumulated_dispersion() / speed_of_light;
}

/// Group delay of the forward fiber response at baseband frequency f (s).
/// Positive dispersion makes higher frequencies arrive earlier.
inline double cd_group_delay(const LinkSpec& link, double f)
{
    return -cd_phase_coefficient(link) * f / std::numbers::pi;
}

/// All-pass exp(+-j beta f^2) applied in the frequency domain per polarization.
inline DualPolWaveform apply_cd(DualPolWaveform s, const LinkSpec& link, CdDirection dir)
{
    s.validate();
    link.validate();
    if (link.fiber_length == 0.0 || link.dispersion_ps_nm_km == 0.0 || s.size() == 0) return s;
    const double beta = cd_phase_coefficient(link) * (dir == CdDirection::forward ? 1.0 : -1.0);
    const std::size_t n = s.size();
    cvec h(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double f = fft::bin_frequency(k, n, s.sample_rate);
        h[k] = std::polar(1.0, beta * f * f);
    }
    for (cvec* pol : {&s.x, &s.y}) {
        fft::forward(*pol);
        for (std::size_t k = 0; k < n; ++k) (*pol)[k] *= h[k];
        fft::inverse(*pol);
    }
    return s;
}

/// Band-limited (DFT-domain) delay of both polarizations by `delay` seconds,
/// cyclic. Models the sampling phase of the receiver ADC.
inline DualPolWaveform apply_delay(DualPolWaveform s, double delay)
{
    s.validate();
    if (!std::isfinite(delay)) throw ValidationError("delay must be finite");
    if (delay == 0.0 || s.size() == 0) return s;
    const std::size_t n = s.size();
    cvec h(n);
    for (std::size_t k = 0; k < n; ++k)
        h[k] = std::polar(1.0, -2.0 * std::numbers::pi * fft::bin_frequency(k, n, s.sample_rate) * delay);
    for (cvec* pol : {&s.x, &s.y}) {
        fft::forward(*pol);
        for (std::size_t k = 0; k < n; ++k) (*pol)[k] *= h[k];
        fft::inverse(*pol);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Polarization

using Jones = std::array<cplx, 4>; // row-major 2x2

inline Jones jones_rotation(double theta_rad, double phase_rad = 0.0)
{
    const double c = std::cos(theta_rad), s = std::sin(theta_rad);
    const cplx e = std::polar(1.0, phase_rad);
    return {c * e, -s * std::conj(e), s * e, c * std::conj(e)};
}

inline bool is_unitary(const Jones& j, double tol = 1e-9)
{
    // J^H J == I
    const cplx a = std::conj(j[0]) * j[0] + std::conj(j[2]) * j[2];
    const cplx b = std::conj(j[0]) * j[1] + std::conj(j[2]) * j[3];
    const cplx d = std::conj(j[1]) * j[1] + std::conj(j[3]) * j[3];
    return std::abs(a - 1.0) <= tol && std::abs(b) <= tol && std::abs(d - 1.0) <= tol;
}

inline DualPolWaveform apply_polarization_rotation(DualPolWaveform s, const Jones& j)
{
    s.validate();
    if (!is_unitary(j)) throw ValidationError("Jones matrix is not unitary");
    for (std::size_t n = 0; n < s.size(); ++n) {
        const cplx x = s.x[n], y = s.y[n];
        s.x[n] = j[0] * x + j[1] * y;
        s.y[n] = j[2] * x + j[3] * y;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Coherent receiver front end

/// Multiplies by exp(-j (2 pi df t + phi_LO(t))). The LO phase is synthesized
/// from link.lo_model at the signal sample rate.
inline DualPolWaveform coherent_receive(DualPolWaveform s, const LinkSpec& link, std::uint64_t seed)
{
    s.validate();
    link.validate();
    if (link.lo_model.is_zero() && link.lo_frequency_offset == 0.0) return s;
    const std::size_t n = s.size();
    std::vector<double> lo(n, 0.0);
    if (!link.lo_model.is_zero()) {
        auto rec = phasenoise::synthesize_phase(link.lo_model, std::max<std::size_t>(n, 1024), s.sample_rate, seed);
        std::copy_n(rec.phases.begin(), n, lo.begin());
    }
    const double w = 2.0 * std::numbers::pi * link.lo_frequency_offset / s.sample_rate;
    for (std::size_t k = 0; k < n; ++k) {
        const cplx rot = std::polar(1.0, -(w * static_cast<double>(k) + lo[k]));
        s.x[k] *= rot;
        s.y[k] *= rot;
    }
    return s;
}

} // namespace combwdm::channel
