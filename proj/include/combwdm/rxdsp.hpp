#pragma once

// Receiver DSP chain: resampling to 2 sps, square-law timing recovery, CMA
// butterfly equalizer, 4th-power frequency-offset estimation, block-wise
// carrier phase recovery and symbol-wise blind phase search.

#include "combwdm/errors.hpp"
#include "combwdm/fft.hpp"
#include "combwdm/txdsp.hpp"
#include "combwdm/units.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

namespace combwdm::rx {

using tx::ConstellationSpec;
using tx::DualPolWaveform;

struct SymbolFrame {
    cvec x;
    cvec y;
    double symbol_rate = 0.0;
    double frequency_offset = 0.0;     // Hz removed so far
    std::vector<double> phase_x;       // rad, recovered carrier phase per symbol
    std::vector<double> phase_y;
    std::vector<double> cma_cost;      // block-averaged CM cost of the first pass
    bool cma_reinitialized = false;

    std::size_t size() const { return x.size(); }
};

// ---------------------------------------------------------------------------
// Resampling

/// Band-limited resampling to exactly two samples per symbol (DFT domain).
inline DualPolWaveform resample_to_2sps(const DualPolWaveform& w)
{
    w.validate();
    const double sps = w.samples_per_symbol();
    if (sps < 2.0 - 1e-9) throw ValidationError("input is sampled below 2 samples per symbol");
    if (std::abs(sps - 2.0) < 1e-12) return w;

    const std::size_t n = w.size();
    const double exact = static_cast<double>(n) * 2.0 / sps;
    const auto m = static_cast<std::size_t>(std::llround(exact));
    if (std::abs(exact - static_cast<double>(m)) > 1e-6)
        throw ValidationError("record length does not map to an integer number of 2-sps samples");

    DualPolWaveform out;
    out.sample_rate = 2.0 * w.symbol_rate;
    out.symbol_rate = w.symbol_rate;
    const double gain = static_cast<double>(m) / static_cast<double>(n);
    auto convert = [&](const cvec& in) {
        auto spec = fft::forward_copy(in);
        cvec o(m, cplx{});
        const std::size_t pos = (m + 1) / 2; // bins 0..pos-1 are non-negative
        const std::size_t neg = m / 2;       // the top `neg` bins are negative (Nyquist dropped)
        for (std::size_t k = 0; k < pos; ++k) o[k] = spec[k] * gain;
        for (std::size_t k = 1; k < neg; ++k) o[m - k] = spec[n - k] * gain;
        fft::inverse(o);
        return o;
    };
    out.x = convert(w.x);
    out.y = convert(w.y);
    return out;
}

// ---------------------------------------------------------------------------
// Timing recovery

/// Symbol-clock phase from the spectral line of |x|^2 at the symbol rate,
/// evaluated from the signal spectrum (square-law, Godard style). Returns
/// the delay of the symbol instants in unit intervals, in [-0.5, 0.5).
inline double estimate_timing_offset(const DualPolWaveform& w)
{
    w.validate();
    if (std::abs(w.samples_per_symbol() - 2.0) > 1e-9) throw ValidationError("timing recovery expects 2 sps");
    const std::size_t n = w.size();
    if (n < 4 || n % 2 != 0) throw ValidationError("timing recovery needs an even number of samples");
    cplx line{};
    double energy = 0.0;
    for (const cvec* pol : {&w.x, &w.y}) {
        const auto spec = fft::forward_copy(*pol);
        const std::size_t half = n / 2;
        for (std::size_t k = 0; k < half; ++k) line += spec[k] * std::conj(spec[k + half]);
        for (const auto& v : spec) energy += std::norm(v);
    }
    if (!(energy > 0.0) || std::abs(line) <= 1e-9 * energy)
        throw LockFailure("no symbol-rate timing tone detected");
    return -std::arg(line) / (2.0 * std::numbers::pi);
}

/// Delays a 2-sps stream by `delay_samples` (may be fractional) with a cubic
/// Lagrange (Farrow) interpolator, cyclically: out[n] = in(n - delay).
inline cvec fractional_delay(const cvec& in, double delay_samples)
{
    const std::size_t n = in.size();
    if (n == 0) return {};
    const double shift = -delay_samples;
    const double fl = std::floor(shift);
    const double mu = shift - fl;
    const auto base = static_cast<std::ptrdiff_t>(fl);
    const std::array<double, 4> c{
        -mu * (mu - 1.0) * (mu - 2.0) / 6.0,
        (mu + 1.0) * (mu - 1.0) * (mu - 2.0) / 2.0,
        -(mu + 1.0) * mu * (mu - 2.0) / 2.0,
        (mu + 1.0) * mu * (mu - 1.0) / 6.0,
    };
    const auto nn = static_cast<std::ptrdiff_t>(n);
    auto at = [&](std::ptrdiff_t i) { return in[static_cast<std::size_t>(((i % nn) + nn) % nn)]; };
    cvec out(n);
    for (std::ptrdiff_t k = 0; k < nn; ++k) {
        const std::ptrdiff_t i = k + base;
        out[static_cast<std::size_t>(k)] = c[0] * at(i - 1) + c[1] * at(i) + c[2] * at(i + 1) + c[3] * at(i + 2);
    }
    return out;
}

struct TimingResult {
    DualPolWaveform waveform;
    double estimated_offset_ui = 0.0;
};

inline TimingResult timing_recovery_with_estimate(const DualPolWaveform& w)
{
    TimingResult r;
    r.estimated_offset_ui = estimate_timing_offset(w);
    const double delay_samples = -2.0 * r.estimated_offset_ui;
    r.waveform = w;
    if (r.estimated_offset_ui != 0.0) {
        r.waveform.x = fractional_delay(w.x, delay_samples);
        r.waveform.y = fractional_delay(w.y, delay_samples);
    }
    return r;
}

inline DualPolWaveform timing_recovery(const DualPolWaveform& w) { return timing_recovery_with_estimate(w).waveform; }

// ---------------------------------------------------------------------------
// CMA butterfly equalizer

struct EqualizerConfig {
    std::size_t n_taps = 30;
    double step_size = 1e-3;
    std::size_t n_training_passes = 1;

    void validate() const
    {
        if (n_taps < 1) throw ValidationError("equalizer needs at least one tap");
        if (!(step_size > 0.0 && step_size < 0.1)) throw ValidationError("CMA step size must lie in (0, 0.1)");
    }
};

namespace detail {

struct Butterfly {
    std::size_t taps;
    std::vector<cplx> h11, h12, h21, h22;

    explicit Butterfly(std::size_t t) : taps(t), h11(t), h12(t), h21(t), h22(t)
    {
        h11[t / 2] = 1.0;
        h22[t / 2] = 1.0;
    }

    double tap_correlation() const
    {
        double n1 = 0, n2 = 0;
        for (std::size_t i = 0; i < taps; ++i) {
            n1 += std::norm(h11[i]) + std::norm(h12[i]);
            n2 += std::norm(h21[i]) + std::norm(h22[i]);
        }
        if (n1 == 0.0 || n2 == 0.0) return 1.0;
        double best = 0.0;
        const auto t = static_cast<std::ptrdiff_t>(taps);
        for (std::ptrdiff_t d = -t + 1; d < t; ++d) {
            cplx acc{};
            for (std::ptrdiff_t i = 0; i < t; ++i) {
                const std::ptrdiff_t j = i + d;
                if (j < 0 || j >= t) continue;
                acc += h11[static_cast<std::size_t>(i)] * std::conj(h21[static_cast<std::size_t>(j)]) +
                       h12[static_cast<std::size_t>(i)] * std::conj(h22[static_cast<std::size_t>(j)]);
            }
            best = std::max(best, std::abs(acc));
        }
        return best / std::sqrt(n1 * n2);
    }

    void orthogonalize_second()
    {
        for (std::size_t i = 0; i < taps; ++i) {
            h21[i] = -std::conj(h12[taps - 1 - i]);
            h22[i] = std::conj(h11[taps - 1 - i]);
        }
    }
};

// Runs one adaptation pass; stores outputs when `out_x` is non-null and, when
// `cost` is non-null, the CM cost averaged over blocks of `cost_block` symbols.
inline void cma_pass(Butterfly& b, const cvec& xe, const cvec& ye, std::size_t n_sym, double mu,
                     cvec* out_x, cvec* out_y, std::vector<double>* cost, std::size_t cost_block)
{
    const std::size_t t = b.taps;
    double acc_cost = 0.0;
    std::size_t acc_n = 0;
    for (std::size_t k = 0; k < n_sym; ++k) {
        const cplx* ux = &xe[2 * k];
        const cplx* uy = &ye[2 * k];
        cplx y1{}, y2{};
        for (std::size_t i = 0; i < t; ++i) {
            y1 += b.h11[i] * ux[i] + b.h12[i] * uy[i];
            y2 += b.h21[i] * ux[i] + b.h22[i] * uy[i];
        }
        const double m1 = 1.0 - std::norm(y1);
        const double m2 = 1.0 - std::norm(y2);
        const cplx e1 = mu * m1 * y1;
        const cplx e2 = mu * m2 * y2;
        for (std::size_t i = 0; i < t; ++i) {
            const cplx cx = std::conj(ux[i]), cy = std::conj(uy[i]);
            b.h11[i] += e1 * cx;
            b.h12[i] += e1 * cy;
            b.h21[i] += e2 * cx;
            b.h22[i] += e2 * cy;
        }
        if (out_x) {
            (*out_x)[k] = y1;
            (*out_y)[k] = y2;
        }
        if (cost) {
            acc_cost += m1 * m1 + m2 * m2;
            if (++acc_n == cost_block) {
                cost->push_back(acc_cost / static_cast<double>(2 * acc_n));
                acc_cost = 0.0;
                acc_n = 0;
            }
        }
    }
}

inline void normalize_energy(cvec& v)
{
    const double p = mean_power(v);
    if (p > 0.0) {
        const double s = 1.0 / std::sqrt(p);
        for (auto& z : v) z *= s;
    }
}

} // namespace detail

/// 2x2 butterfly CMA at 2 sps with symbol-rate output, center-spike start.
/// Training passes adapt over the whole record; the final pass adapts and
/// emits. Outputs are scaled to unit mean energy.
inline SymbolFrame cma_equalize(const DualPolWaveform& w, const EqualizerConfig& cfg = {})
{
    cfg.validate();
    w.validate();
    if (std::abs(w.samples_per_symbol() - 2.0) > 1e-9) throw ValidationError("CMA expects 2 sps input");
    const std::size_t n = w.size();
    const std::size_t n_sym = n / 2;
    if (n_sym < cfg.n_taps) throw InsufficientData("record shorter than the equalizer");

    // cyclic extension so that window k covers samples 2k - c .. 2k - c + taps - 1
    const std::size_t t = cfg.n_taps;
    const std::size_t c = t / 2;
    auto extend = [&](const cvec& in) {
        cvec v = in;
        detail::normalize_energy(v);
        cvec e(n + t);
        for (std::size_t i = 0; i < n + t; ++i) e[i] = v[(i + n - c) % n];
        return e;
    };
    const cvec xe = extend(w.x);
    const cvec ye = extend(w.y);

    SymbolFrame frame;
    frame.symbol_rate = w.symbol_rate;
    frame.x.resize(n_sym);
    frame.y.resize(n_sym);

    const std::size_t cost_block = 1000;
    const std::size_t passes = std::max<std::size_t>(cfg.n_training_passes, 1);
    detail::Butterfly bf(t);
    for (std::size_t p = 0; p < passes; ++p)
        detail::cma_pass(bf, xe, ye, n_sym, cfg.step_size, nullptr, nullptr, p == 0 ? &frame.cma_cost : nullptr,
                         cost_block);

    constexpr double singular_threshold = 0.9;
    if (bf.tap_correlation() > singular_threshold) {
        frame.cma_reinitialized = true;
        bf.orthogonalize_second();
        detail::cma_pass(bf, xe, ye, n_sym, cfg.step_size, nullptr, nullptr, nullptr, cost_block);
        if (bf.tap_correlation() > singular_threshold)
            throw EqualizerSingularity("both equalizer outputs converged to the same polarization");
    }
    detail::cma_pass(bf, xe, ye, n_sym, cfg.step_size, &frame.x, &frame.y, nullptr, cost_block);
    detail::normalize_energy(frame.x);
    detail::normalize_energy(frame.y);
    return frame;
}

// ---------------------------------------------------------------------------
// Frequency offset

namespace detail {

/// Unit-magnitude 4th power of a QPSK-like symbol; 16QAM middle-ring symbols
/// (not on the 45-degree diagonals) are excluded and return 0.
struct FourthPower {
    bool partition = false;
    double inner = 0.0, outer = 0.0;
    double scale = 1.0;

    FourthPower(const ConstellationSpec& c, double energy)
    {
        scale = energy > 0.0 ? 1.0 / std::sqrt(energy) : 1.0;
        if (c.modulation() == tx::Modulation::qam16) {
            partition = true;
            const double r1 = std::sqrt(2.0 / 10.0), r2 = 1.0, r3 = std::sqrt(18.0 / 10.0);
            inner = (r1 + r2) / 2.0;
            outer = (r2 + r3) / 2.0;
        }
    }

    cplx operator()(cplx s) const
    {
        const double r = std::abs(s) * scale;
        if (r == 0.0) return {};
        if (partition && r > inner && r < outer) return {};
        const cplx u = s / std::abs(s);
        const cplx u2 = u * u;
        return u2 * u2;
    }
};

inline double mean_energy2(const SymbolFrame& f)
{
    return 0.5 * (mean_power(f.x) + mean_power(f.y));
}

} // namespace detail

struct FrequencyEstimatorConfig {
    std::size_t block = 128;
    std::size_t smoothing_blocks = 8;
    std::size_t welch_segment = 4096;
    std::size_t min_symbols = 10000;
};

/// 4th-power (QPSK) or QPSK-partitioned (16QAM) frequency-offset estimate: a
/// coarse periodogram peak of the 4th-power sequence followed by a linear fit
/// to the unwrapped phase of smoothed block-averaged 4th powers. Unambiguous within
/// +-symbol_rate/8.
inline double estimate_frequency_offset(const SymbolFrame& frame, const ConstellationSpec& c,
                                        FrequencyEstimatorConfig cfg = {})
{
    const std::size_t n = frame.size();
    if (n < cfg.min_symbols) throw InsufficientData("frequency estimation needs more symbols");
    if (frame.y.size() != n) throw ValidationError("polarization lengths differ");
    const detail::FourthPower p4(c, detail::mean_energy2(frame));
    std::vector<cplx> z(n);
    for (std::size_t k = 0; k < n; ++k) z[k] = p4(frame.x[k]) + p4(frame.y[k]);

    // Welch periodogram (phase noise broadens the 4th-power line, so segment
    // averaging beats one long transform); parabolic interpolation on the log peak
    const std::size_t seg = std::min<std::size_t>(n, cfg.welch_segment);
    const std::size_t nfft = 2 * seg;
    std::vector<double> psd(nfft, 0.0);
    cvec buf(nfft);
    for (std::size_t s0 = 0; s0 + seg <= n; s0 += seg) {
        std::fill(buf.begin(), buf.end(), cplx{});
        std::copy(z.begin() + static_cast<std::ptrdiff_t>(s0), z.begin() + static_cast<std::ptrdiff_t>(s0 + seg),
                  buf.begin());
        fft::forward(buf);
        for (std::size_t k = 0; k < nfft; ++k) psd[k] += std::norm(buf[k]);
    }
    const auto peak = static_cast<std::size_t>(std::max_element(psd.begin(), psd.end()) - psd.begin());
    const double lm = std::log(psd[(peak + nfft - 1) % nfft] + 1e-300);
    const double l0 = std::log(psd[peak] + 1e-300);
    const double lp = std::log(psd[(peak + 1) % nfft] + 1e-300);
    const double den = lm - 2.0 * l0 + lp;
    const double shift = den < 0.0 ? std::clamp(0.5 * (lm - lp) / den, -0.5, 0.5) : 0.0;
    const double coarse =
        2.0 * std::numbers::pi * (fft::bin_frequency(peak, nfft, 1.0) + shift / static_cast<double>(nfft));

    // block averages with the coarse ramp removed, smoothed over a sliding
    // span of blocks before unwrapping
    const std::size_t block = std::max<std::size_t>(cfg.block, 1);
    const std::size_t n_blocks = n / block;
    std::vector<cplx> avg(n_blocks);
    for (std::size_t b = 0; b < n_blocks; ++b)
        for (std::size_t k = b * block; k < (b + 1) * block; ++k)
            avg[b] += z[k] * std::polar(1.0, -coarse * static_cast<double>(k));
    const std::size_t span = std::max<std::size_t>(cfg.smoothing_blocks, 1);
    std::vector<double> centers, phases;
    double prev = 0.0;
    for (std::size_t b = 0; b + span <= n_blocks; ++b) {
        cplx acc{};
        for (std::size_t i = b; i < b + span; ++i) acc += avg[i];
        double ph = std::arg(acc);
        if (!phases.empty()) ph = prev + std::remainder(ph - prev, 2.0 * std::numbers::pi);
        prev = ph;
        centers.push_back(static_cast<double>(b * block) + 0.5 * static_cast<double>(span * block - 1));
        phases.push_back(ph);
    }
    double fine = 0.0;
    if (centers.size() >= 2) {
        double st = 0, sp = 0, stt = 0, stp = 0;
        const auto m = static_cast<double>(centers.size());
        for (std::size_t i = 0; i < centers.size(); ++i) {
            st += centers[i];
            sp += phases[i];
            stt += centers[i] * centers[i];
            stp += centers[i] * phases[i];
        }
        fine = (m * stp - st * sp) / (m * stt - st * st);
    }
    const double per_symbol = (coarse + fine) / 4.0;
    return per_symbol * frame.symbol_rate / (2.0 * std::numbers::pi);
}

inline SymbolFrame correct_frequency_offset(SymbolFrame frame, double offset_hz)
{
    if (!std::isfinite(offset_hz)) throw ValidationError("frequency offset must be finite");
    const double w = 2.0 * std::numbers::pi * offset_hz / frame.symbol_rate;
    for (std::size_t k = 0; k < frame.size(); ++k) {
        const cplx rot = std::polar(1.0, -w * static_cast<double>(k));
        frame.x[k] *= rot;
        if (k < frame.y.size()) frame.y[k] *= rot;
    }
    frame.frequency_offset += offset_hz;
    return frame;
}

// ---------------------------------------------------------------------------
// Carrier phase recovery

struct BlockCprConfig {
    std::size_t block_length = 1024;
    bool estimate_frequency = false; // optional per-block residual frequency term
};

namespace detail {

inline std::vector<double> blockwise_phase(const cvec& s, const ConstellationSpec& c, const BlockCprConfig& cfg)
{
    const std::size_t n = s.size();
    const double quarter = std::numbers::pi / 2.0;
    const FourthPower p4(c, mean_power(s));
    std::vector<double> phase(n, 0.0);
    double prev = 0.0;
    bool first = true;
    for (std::size_t start = 0; start < n; start += cfg.block_length) {
        const std::size_t end = std::min(n, start + cfg.block_length);
        const double center = 0.5 * static_cast<double>(start + end - 1);
        double omega = 0.0;
        if (cfg.estimate_frequency) {
            // slope of the unwrapped 4th-power phase over 8 sub-blocks
            constexpr std::size_t parts = 8;
            const std::size_t len = (end - start) / parts;
            double st = 0, sp = 0, stt = 0, stp = 0, prev_sub = 0;
            std::size_t used = 0;
            for (std::size_t p = 0; p < parts && len > 0; ++p) {
                cplx sub{};
                for (std::size_t k = start + p * len; k < start + (p + 1) * len; ++k) sub += p4(s[k]);
                if (std::abs(sub) == 0.0) continue;
                double ph = std::arg(sub);
                if (used > 0) ph = prev_sub + std::remainder(ph - prev_sub, 2.0 * std::numbers::pi);
                prev_sub = ph;
                const double t = static_cast<double>(start + p * len) + 0.5 * static_cast<double>(len - 1);
                st += t;
                sp += ph;
                stt += t * t;
                stp += t * ph;
                ++used;
            }
            if (used >= 2) {
                const auto m = static_cast<double>(used);
                omega = (m * stp - st * sp) / (m * stt - st * st) / 4.0;
            }
        }
        cplx acc{};
        for (std::size_t k = start; k < end; ++k)
            acc += p4(s[k]) * std::polar(1.0, -4.0 * omega * (static_cast<double>(k) - center));
        // QPSK-like points sit at 45 degrees, so their 4th power is -1
        double theta = std::abs(acc) > 0.0 ? std::arg(-acc) / 4.0 : prev;
        if (!first) theta = prev + std::remainder(theta - prev, quarter);
        first = false;
        prev = theta;
        for (std::size_t k = start; k < end; ++k) phase[k] = theta + omega * (static_cast<double>(k) - center);
    }
    return phase;
}

inline void derotate(cvec& s, const std::vector<double>& phase)
{
    for (std::size_t k = 0; k < s.size(); ++k) s[k] *= std::polar(1.0, -phase[k]);
}

} // namespace detail

/// One constant phase (plus optional linear term) per block from averaged
/// 4th powers, unwrapped from block to block. No tracking inside a block.
inline SymbolFrame cpr_blockwise(SymbolFrame frame, const ConstellationSpec& c, const BlockCprConfig& cfg = {})
{
    if (cfg.block_length < 64) throw ValidationError("block length must be at least 64 symbols");
    frame.phase_x = detail::blockwise_phase(frame.x, c, cfg);
    frame.phase_y = detail::blockwise_phase(frame.y, c, cfg);
    detail::derotate(frame.x, frame.phase_x);
    detail::derotate(frame.y, frame.phase_y);
    return frame;
}

struct BpsConfig {
    std::size_t n_test_phases = 45;
    double half_range_deg = 45.0;
    std::size_t window_n = 30;

    void validate() const
    {
        if (n_test_phases < 2) throw ValidationError("BPS needs at least two test phases");
        if (!(half_range_deg > 0.0 && half_range_deg <= 180.0)) throw ValidationError("invalid BPS range");
        if (window_n < 1 || window_n > 256) throw ValidationError("BPS window must lie in 1..256");
    }

    double spacing_rad() const
    {
        return 2.0 * half_range_deg * std::numbers::pi / 180.0 / static_cast<double>(n_test_phases);
    }
};

namespace detail {

inline std::vector<double> bps_phase(const cvec& s, const ConstellationSpec& c, const BpsConfig& cfg)
{
    const std::size_t n = s.size();
    const std::size_t nb = cfg.n_test_phases;
    const double spacing = cfg.spacing_rad();
    const double period = 2.0 * cfg.half_range_deg * std::numbers::pi / 180.0;

    std::vector<double> test(nb);
    std::vector<cplx> rot(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        test[b] = (static_cast<double>(b) - 0.5 * static_cast<double>(nb - 1)) * spacing;
        rot[b] = std::polar(1.0, test[b]);
    }

    // squared distance to the nearest point after each test rotation
    std::vector<float> dist(n * nb);
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t b = 0; b < nb; ++b)
            dist[k * nb + b] = static_cast<float>(c.nearest_distance2(s[k] * rot[b]));

    const std::size_t lo_half = cfg.window_n / 2;
    const std::size_t hi_half = cfg.window_n - 1 - lo_half;

    std::vector<double> metric(nb), running(nb, 0.0);
    auto window_sum = [&](std::size_t k, std::size_t lo, std::size_t hi) {
        std::fill(metric.begin(), metric.end(), 0.0);
        for (std::size_t j = k - lo; j <= k + hi; ++j)
            for (std::size_t b = 0; b < nb; ++b) metric[b] += dist[j * nb + b];
    };

    std::vector<double> phase(n);
    double prev_unwrapped = 0.0;
    bool have_running = false;
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t lo = std::min(lo_half, k);
        std::size_t hi = std::min(hi_half, n - 1 - k);
        const bool full = (lo == lo_half && hi == hi_half);
        if (!full) {
            lo = hi = std::min(lo, hi); // symmetric truncation at the edges
            window_sum(k, lo, hi);
            have_running = false;
        } else if (!have_running) {
            window_sum(k, lo, hi);
            running = metric;
            have_running = true;
        } else {
            const std::size_t add = k + hi, drop = k - lo - 1;
            for (std::size_t b = 0; b < nb; ++b) running[b] += dist[add * nb + b] - dist[drop * nb + b];
            metric = running;
        }

        // argmin; ties go to the test phase closest to the previous decision
        const double reference = (k == 0) ? 0.0 : prev_unwrapped;
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        double arg_gap = std::numeric_limits<double>::infinity();
        for (std::size_t b = 0; b < nb; ++b) {
            const double m = metric[b];
            const double tol = 1e-9 * std::max(std::abs(best), 1e-12);
            const double gap = std::abs(std::remainder(-test[b] - reference, period));
            if (m < best - tol) {
                best = m;
                arg = b;
                arg_gap = gap;
            } else if (m <= best + tol && gap < arg_gap) {
                arg = b;
                arg_gap = gap;
                best = std::min(best, m);
            }
        }
        const double estimate = -test[arg];
        const double unwrapped = (k == 0) ? estimate : prev_unwrapped + std::remainder(estimate - prev_unwrapped, period);
        phase[k] = unwrapped;
        prev_unwrapped = unwrapped;
    }
    return phase;
}

} // namespace detail

/// Symbol-wise blind phase search over test phases spaced symmetrically about
/// zero inside [-half, +half) (45 phases: -44, -42, ..., +44 degrees), window
/// of N symbols centered on each symbol, decisions unwrapped across symbols
/// with the constellation's 90-degree symmetry period.
inline SymbolFrame cpr_bps(SymbolFrame frame, const ConstellationSpec& c, const BpsConfig& cfg = {})
{
    cfg.validate();
    if (cfg.window_n > frame.size()) throw ValidationError("BPS window larger than the frame");
    frame.phase_x = detail::bps_phase(frame.x, c, cfg);
    frame.phase_y = detail::bps_phase(frame.y, c, cfg);
    detail::derotate(frame.x, frame.phase_x);
    detail::derotate(frame.y, frame.phase_y);
    return frame;
}

/// Minimum-distance decisions, Gray demapped; X bits then Y bits.
inline std::vector<std::uint8_t> decide_and_demap(const SymbolFrame& frame, const ConstellationSpec& c)
{
    auto bits = tx::demap_symbols(frame.x, c);
    const auto by = tx::demap_symbols(frame.y, c);
    bits.insert(bits.end(), by.begin(), by.end());
    return bits;
}

} // namespace combwdm::rx
