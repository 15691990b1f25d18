#pragma once

// Laser phase noise: synthesis of phase trajectories from the three-term
// FM-noise model S(f) = S_L + S_1/f + S_2/f^2, and the estimators that take
// a sampled phase record back to the model and to linewidth figures.

#include "combwdm/errors.hpp"
#include "combwdm/fft.hpp"
#include "combwdm/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace combwdm::phasenoise {

/// One-sided FM-noise PSD coefficients. s_white in Hz (Hz^2/Hz), s_flicker in
/// Hz^2, s_randomwalk in Hz^3.
struct FmNoiseModel {
    double s_white = 0.0;
    double s_flicker = 0.0;
    double s_randomwalk = 0.0;

    double psd(double f) const { return s_white + s_flicker / f + s_randomwalk / (f * f); }

    bool is_zero() const { return s_white == 0.0 && s_flicker == 0.0 && s_randomwalk == 0.0; }

    void validate() const
    {
        for (double c : {s_white, s_flicker, s_randomwalk}) {
            if (!std::isfinite(c) || c < 0.0)
                throw InvalidModel("FM-noise coefficients must be finite and non-negative");
        }
    }

    /// White-only model with the given Lorentzian linewidth (Hz).
    static FmNoiseModel from_lorentzian(double linewidth_hz)
    {
        return {linewidth_hz / std::numbers::pi, 0.0, 0.0};
    }

    bool operator==(const FmNoiseModel&) const = default;
};

/// FM-noise fit of a measured Kerr-comb line; the reference model of the bundled scenarios.
inline const FmNoiseModel comb_line_model{5.4e5, 8.4e11, 5.0e17};

struct PhaseRecord {
    std::vector<double> phases; // rad, unwrapped
    double sample_interval = 0.0;
    std::uint64_t seed = 0;

    std::size_t size() const { return phases.size(); }
    double sample_rate() const { return 1.0 / sample_interval; }
    double duration() const { return static_cast<double>(phases.size()) * sample_interval; }

    void validate() const
    {
        if (phases.size() < 2) throw InsufficientData("phase record needs at least 2 samples");
        if (!(sample_interval > 0.0) || !std::isfinite(sample_interval))
            throw ValidationError("sample interval must be positive");
    }
};

struct FmSpectrum {
    std::vector<double> frequencies; // Hz, strictly increasing, > 0
    std::vector<double> psd;         // Hz^2/Hz
    double segment_duration = 0.0;   // s, length of one averaging segment (0 if unknown)

    std::size_t size() const { return frequencies.size(); }
    bool empty() const { return frequencies.empty(); }

    void validate() const
    {
        if (frequencies.size() != psd.size())
            throw ValidationError("spectrum frequency and PSD arrays differ in length");
        if (frequencies.empty()) throw InsufficientData("empty spectrum");
        for (std::size_t i = 0; i < frequencies.size(); ++i) {
            if (!(frequencies[i] > 0.0)) throw ValidationError("spectrum frequencies must be > 0");
            if (i > 0 && !(frequencies[i] > frequencies[i - 1]))
                throw ValidationError("spectrum frequencies must be strictly increasing");
            if (!(psd[i] >= 0.0)) throw ValidationError("spectrum PSD must be >= 0");
        }
    }
};

struct PhaseVarianceCurve {
    std::vector<double> delays;    // s
    std::vector<double> variances; // rad^2
};

// ---------------------------------------------------------------------------
// Synthesis

/// Phase trajectory whose first-difference instantaneous frequency has the
/// one-sided PSD of `model`. Bins below 1/duration are empty.
inline PhaseRecord synthesize_phase(const FmNoiseModel& model, std::size_t n_samples,
                                    double sample_rate, std::uint64_t seed)
{
    model.validate();
    if (n_samples < (std::size_t{1} << 10))
        throw ValidationError("synthesize_phase needs at least 1024 samples");
    if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
        throw ValidationError("sample rate must be positive");

    PhaseRecord rec;
    rec.sample_interval = 1.0 / sample_rate;
    rec.seed = seed;
    rec.phases.assign(n_samples, 0.0);
    if (model.is_zero()) return rec;

    const std::size_t m = n_samples - 1;
    Gaussian rng(seed);
    auto white = rng.real(m);
    auto spec = fft::forward_real(white);

    // unit-variance white noise has one-sided PSD 2/fs
    spec[0] = 0.0;
    for (std::size_t k = 1; k < spec.size(); ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(m);
        spec[k] *= std::sqrt(model.psd(f) * sample_rate / 2.0);
    }
    const auto f_inst = fft::inverse_real(spec, m);

    const double step = 2.0 * std::numbers::pi / sample_rate;
    double acc = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        acc += step * f_inst[k];
        rec.phases[k + 1] = acc;
    }
    return rec;
}

// ---------------------------------------------------------------------------
// FM-noise spectrum

inline std::vector<double> instantaneous_frequency(const PhaseRecord& record)
{
    record.validate();
    const double scale = 1.0 / (2.0 * std::numbers::pi * record.sample_interval);
    std::vector<double> f(record.size() - 1);
    for (std::size_t k = 0; k + 1 < record.size(); ++k)
        f[k] = (record.phases[k + 1] - record.phases[k]) * scale;
    return f;
}

struct WelchOptions {
    std::size_t min_segments = 8;
};

/// One-sided PSD of a real series: Hann window, 50% overlap, per-segment mean
/// removed. The segment length is the largest power of two that still yields
/// `min_segments` segments. DC is dropped.
inline FmSpectrum welch_psd(std::span<const double> x, double sample_rate, WelchOptions opt = {})
{
    const std::size_t n = x.size();
    const std::size_t min_seg = std::max<std::size_t>(opt.min_segments, 1);
    std::size_t len = 0;
    for (std::size_t l = 16; l <= n; l *= 2) {
        const std::size_t count = (n - l) / (l / 2) + 1;
        if (count >= min_seg) len = l;
    }
    if (len == 0) throw InsufficientData("record too short for the requested number of segments");

    const std::size_t hop = len / 2;
    const std::size_t n_seg = (n - len) / hop + 1;

    std::vector<double> window(len);
    double wsum2 = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        window[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                          static_cast<double>(len)));
        wsum2 += window[i] * window[i];
    }

    const std::size_t n_bins = len / 2 + 1;
    std::vector<double> acc(n_bins, 0.0);
    std::vector<double> seg(len);
    for (std::size_t s = 0; s < n_seg; ++s) {
        const auto begin = x.begin() + static_cast<std::ptrdiff_t>(s * hop);
        const double mean = std::accumulate(begin, begin + static_cast<std::ptrdiff_t>(len), 0.0) /
                            static_cast<double>(len);
        for (std::size_t i = 0; i < len; ++i) seg[i] = (begin[static_cast<std::ptrdiff_t>(i)] - mean) * window[i];
        const auto spec = fft::forward_real(seg);
        for (std::size_t k = 0; k < n_bins; ++k) acc[k] += std::norm(spec[k]);
    }

    FmSpectrum out;
    out.segment_duration = static_cast<double>(len) / sample_rate;
    const double norm = 1.0 / (sample_rate * wsum2 * static_cast<double>(n_seg));
    for (std::size_t k = 1; k < n_bins; ++k) {
        const bool nyquist = (len % 2 == 0) && (k == len / 2);
        out.frequencies.push_back(static_cast<double>(k) * sample_rate / static_cast<double>(len));
        out.psd.push_back(acc[k] * norm * (nyquist ? 1.0 : 2.0));
    }
    return out;
}

inline FmSpectrum estimate_fm_spectrum(const PhaseRecord& record, WelchOptions opt = {})
{
    const auto f_inst = instantaneous_frequency(record);
    return welch_psd(f_inst, record.sample_rate(), opt);
}

/// Moving average whose width is a constant fraction of a decade around each
/// frequency. With `log_decimate`, one averaged point per window instead.
struct SmoothingPolicy {
    double decade_fraction = 0.1;
    bool log_decimate = false;
};

inline FmSpectrum smooth_spectrum(const FmSpectrum& spec, SmoothingPolicy policy = {})
{
    spec.validate();
    if (!(policy.decade_fraction > 0.0)) throw ValidationError("smoothing width must be positive");
    const std::size_t n = spec.size();
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + spec.psd[i];

    FmSpectrum out;
    out.segment_duration = spec.segment_duration;
    const double half = std::pow(10.0, policy.decade_fraction / 2.0);

    if (!policy.log_decimate) {
        out.frequencies = spec.frequencies;
        out.psd.resize(n);
        std::size_t lo = 0, hi = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = spec.frequencies[i];
            while (spec.frequencies[lo] < f / half) ++lo;
            if (hi < i + 1) hi = i + 1;
            while (hi < n && spec.frequencies[hi] <= f * half) ++hi;
            out.psd[i] = (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo);
        }
        return out;
    }

    const double width = half * half;
    double edge = spec.frequencies.front();
    std::size_t i = 0;
    while (i < n) {
        const double upper = edge * width;
        const std::size_t start = i;
        while (i < n && spec.frequencies[i] < upper) ++i;
        if (i > start) {
            out.frequencies.push_back(std::sqrt(spec.frequencies[start] * spec.frequencies[i - 1]));
            out.psd.push_back((prefix[i] - prefix[start]) / static_cast<double>(i - start));
        }
        edge = upper;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model fit

struct FitBand {
    double low = 0.0;
    double high = 0.0;
};

struct FmFit {
    FmNoiseModel model;
    double rms_relative_residual = 0.0; // over the band averages
    std::size_t n_bands = 0;
};

/// [5 / segment duration, fs/8] clipped to the spectrum support.
inline FitBand default_fit_band(const FmSpectrum& spec, double sample_rate)
{
    const double seg = spec.segment_duration > 0.0 ? spec.segment_duration
                                                   : 1.0 / spec.frequencies.front();
    FitBand band{5.0 / seg, sample_rate / 8.0};
    band.low = std::max(band.low, spec.frequencies.front());
    band.high = std::min(band.high, spec.frequencies.back());
    return band;
}

namespace detail {

// Least squares on at most three columns via normal equations (columns are
// pre-scaled to unit norm, so the system is well conditioned).
inline bool solve_small(const std::vector<std::array<double, 3>>& rows, const std::vector<double>& rhs,
                        const std::array<bool, 3>& active, std::array<double, 3>& sol)
{
    std::array<std::size_t, 3> idx{};
    std::size_t m = 0;
    for (std::size_t j = 0; j < 3; ++j)
        if (active[j]) idx[m++] = j;
    double a[3][4] = {};
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t p = 0; p < m; ++p) {
            for (std::size_t q = 0; q < m; ++q) a[p][q] += rows[r][idx[p]] * rows[r][idx[q]];
            a[p][3] += rows[r][idx[p]] * rhs[r];
        }
    }
    for (std::size_t c = 0; c < m; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < m; ++r)
            if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
        if (std::abs(a[piv][c]) < 1e-14) return false;
        for (std::size_t k = 0; k < 4; ++k) std::swap(a[c][k], a[piv][k]);
        for (std::size_t r = 0; r < m; ++r) {
            if (r == c) continue;
            const double f = a[r][c] / a[c][c];
            for (std::size_t k = 0; k < 4; ++k) a[r][k] -= f * a[c][k];
        }
    }
    sol = {0.0, 0.0, 0.0};
    for (std::size_t p = 0; p < m; ++p) sol[idx[p]] = a[p][3] / a[p][p];
    return true;
}

} // namespace detail

/// Non-negative least-squares fit of S_L + S_1/f + S_2/f^2 to log-spaced band
/// averages of `spec` inside `band`. Residuals are relative to the measured
/// band level, each band weighted equally, so every decade counts the same.
inline FmFit fit_fm_model(const FmSpectrum& spec, FitBand band, std::size_t bands_per_decade = 10)
{
    spec.validate();
    if (!(band.low > 0.0) || !(band.high > band.low)) throw ValidationError("invalid fit band");
    const double tol = 1e-9;
    if (band.low < spec.frequencies.front() * (1.0 - tol) || band.high > spec.frequencies.back() * (1.0 + tol))
        throw ValidationError("fit band outside the spectrum support");
    const double decades = std::log10(band.high / band.low);
    if (decades < 1.0) throw FitDegenerate("fit band spans less than one decade");

    const std::size_t n_bands =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(decades * static_cast<double>(bands_per_decade) - 1e-9)));
    const double ratio = std::pow(band.high / band.low, 1.0 / static_cast<double>(n_bands));

    std::vector<std::array<double, 3>> basis_avg;
    std::vector<double> meas;
    std::size_t i = static_cast<std::size_t>(
        std::lower_bound(spec.frequencies.begin(), spec.frequencies.end(), band.low * (1.0 - tol)) -
        spec.frequencies.begin());
    double upper = band.low;
    for (std::size_t b = 0; b < n_bands; ++b) {
        upper = (b + 1 == n_bands) ? band.high * (1.0 + tol) : upper * ratio;
        std::array<double, 3> basis{0.0, 0.0, 0.0};
        double level = 0.0;
        std::size_t count = 0;
        for (; i < spec.size() && spec.frequencies[i] < upper; ++i) {
            const double f = spec.frequencies[i];
            basis[0] += 1.0;
            basis[1] += 1.0 / f;
            basis[2] += 1.0 / (f * f);
            level += spec.psd[i];
            ++count;
        }
        if (count == 0 || level <= 0.0) continue;
        const auto c = static_cast<double>(count);
        basis_avg.push_back({basis[0] / c, basis[1] / c, basis[2] / c});
        meas.push_back(level / c);
    }

    FmFit fit;
    fit.n_bands = meas.size();
    if (meas.empty()) return fit; // all-zero spectrum: zero model
    if (meas.size() < 3) throw FitDegenerate("fewer than three populated fit bands");

    // relative residual rows, columns scaled to unit norm
    std::vector<std::array<double, 3>> rows(meas.size());
    std::vector<double> rhs(meas.size(), 1.0);
    std::array<double, 3> colnorm{0.0, 0.0, 0.0};
    for (std::size_t r = 0; r < meas.size(); ++r)
        for (std::size_t j = 0; j < 3; ++j) {
            rows[r][j] = basis_avg[r][j] / meas[r];
            colnorm[j] += rows[r][j] * rows[r][j];
        }
    for (auto& c : colnorm) c = std::sqrt(c);
    for (auto& row : rows)
        for (std::size_t j = 0; j < 3; ++j) row[j] /= colnorm[j];

    double best_cost = std::numeric_limits<double>::infinity();
    std::array<double, 3> best{0.0, 0.0, 0.0};
    for (unsigned mask = 1; mask < 8; ++mask) {
        const std::array<bool, 3> active{(mask & 1u) != 0, (mask & 2u) != 0, (mask & 4u) != 0};
        std::array<double, 3> sol{};
        if (!detail::solve_small(rows, rhs, active, sol)) continue;
        if (sol[0] < 0.0 || sol[1] < 0.0 || sol[2] < 0.0) continue;
        double cost = 0.0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const double e = rows[r][0] * sol[0] + rows[r][1] * sol[1] + rows[r][2] * sol[2] - 1.0;
            cost += e * e;
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = sol;
        }
    }
    fit.model = {best[0] / colnorm[0], best[1] / colnorm[1], best[2] / colnorm[2]};
    fit.rms_relative_residual = std::sqrt(best_cost / static_cast<double>(rows.size()));
    return fit;
}

// ---------------------------------------------------------------------------
// Linewidths

inline double lorentzian_linewidth(const FmNoiseModel& model)
{
    model.validate();
    return std::numbers::pi * model.s_white;
}

/// Slope of the line (4 ln 4 / pi^2) f separating the slow-modulation region.
inline constexpr double beta_separation_slope = 4.0 * 1.3862943611198906 / (std::numbers::pi * std::numbers::pi);

/// Frequency where S(f) crosses the separation line, by bisection in log f.
inline double integration_upper_frequency(const FmNoiseModel& model, double rel_tol = 1e-6)
{
    model.validate();
    if (model.is_zero()) throw InvalidModel("degenerate (all-zero) FM-noise model");
    auto g = [&](double f) { return model.psd(f) - beta_separation_slope * f; };
    double lo = 1.0, hi = 1e12;
    if (!(g(lo) > 0.0) || !(g(hi) < 0.0))
        throw NoCrossing("FM-noise spectrum does not cross the separation line in [1 Hz, 1 THz]");
    while ((hi - lo) / lo > rel_tol) {
        const double mid = std::sqrt(lo * hi);
        (g(mid) > 0.0 ? lo : hi) = mid;
    }
    return std::sqrt(lo * hi);
}

struct GaussianLinewidth {
    double fwhm = 0.0;     // Hz
    double area = 0.0;     // Hz^2, integral of S(f) over [f_low, f_high]
    double f_low = 0.0;
    double f_high = 0.0;
    bool reliable = true;  // false when forced outside f_high > 5 f_low
};

/// Long-term FWHM sqrt(8 ln2 A) for observation time tau0 = 1/f_low.
inline GaussianLinewidth gaussian_linewidth(const FmNoiseModel& model, double observation_time,
                                            bool force = false)
{
    model.validate();
    if (!(observation_time > 0.0)) throw ValidationError("observation time must be positive");
    GaussianLinewidth out;
    out.f_low = 1.0 / observation_time;
    out.f_high = integration_upper_frequency(model);
    if (!(out.f_high > 5.0 * out.f_low)) {
        if (!force)
            throw ApproximationInvalid("Gaussian linewidth approximation needs f_high > 5 f_low");
        out.reliable = false;
    }
    const double lo = out.f_low, hi = out.f_high;
    double area = model.s_white * (hi - lo) + model.s_flicker * std::log(hi / lo) +
                  model.s_randomwalk * (1.0 / lo - 1.0 / hi);
    out.area = std::max(area, 0.0);
    out.fwhm = std::sqrt(8.0 * std::numbers::ln2 * out.area);
    return out;
}

// ---------------------------------------------------------------------------
// Phase-variance method

inline PhaseVarianceCurve phase_variance(const PhaseRecord& record, std::span<const double> delays)
{
    record.validate();
    PhaseVarianceCurve curve;
    const double duration = record.duration();
    for (double tau : delays) {
        if (!(tau >= 0.0)) throw ValidationError("delays must be non-negative");
        const double steps = tau / record.sample_interval;
        const double rounded = std::round(steps);
        if (std::abs(steps - rounded) > 1e-6 * std::max(1.0, rounded))
            throw GridMismatch("delay is not an integer multiple of the sample interval");
        if (tau > 0.0 && !(tau < duration / 4.0))
            throw ValidationError("delay must be shorter than a quarter of the record");
        const auto lag = static_cast<std::size_t>(rounded);
        double var = 0.0;
        if (lag > 0) {
            const std::size_t count = record.size() - lag;
            double mean = 0.0;
            for (std::size_t t = 0; t < count; ++t) mean += record.phases[t + lag] - record.phases[t];
            mean /= static_cast<double>(count);
            for (std::size_t t = 0; t < count; ++t) {
                const double d = record.phases[t + lag] - record.phases[t] - mean;
                var += d * d;
            }
            var /= static_cast<double>(count);
        }
        curve.delays.push_back(tau);
        curve.variances.push_back(var);
    }
    return curve;
}

struct VarianceSlopeEstimate {
    double linewidth = 0.0;            // Hz
    double rms_relative_residual = 0.0;
    double ratio_spread = 0.0;         // (max-min)/mean of sigma^2/(2 pi tau) over the fit delays
    bool reliable = false;
};

/// Slope of sigma^2(tau) over the `n_fit` smallest non-zero delays divided by
/// 2 pi. Marked unreliable when sigma^2/(2 pi tau) is not flat over the fit
/// range, i.e. when flicker or random-walk noise bends the curve.
inline VarianceSlopeEstimate linewidth_from_variance_slope(const PhaseVarianceCurve& curve,
                                                           std::size_t n_fit = 4,
                                                           double flatness_tolerance = 0.1)
{
    if (curve.delays.size() != curve.variances.size())
        throw ValidationError("variance curve arrays differ in length");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < curve.delays.size(); ++i)
        if (curve.delays[i] > 0.0) pts.emplace_back(curve.delays[i], curve.variances[i]);
    std::sort(pts.begin(), pts.end());
    n_fit = std::max<std::size_t>(n_fit, 4);
    if (pts.size() < n_fit) throw InsufficientData("need at least four non-zero delays");
    pts.resize(n_fit);

    for (std::size_t i = 1; i < pts.size(); ++i)
        if (!(pts[i].second > pts[i - 1].second))
            throw UnreliableEstimate("phase variance is not increasing over the smallest delays");

    double st = 0, sv = 0, stt = 0, stv = 0;
    const auto n = static_cast<double>(pts.size());
    for (auto [t, v] : pts) {
        st += t;
        sv += v;
        stt += t * t;
        stv += t * v;
    }
    const double slope = (n * stv - st * sv) / (n * stt - st * st);
    const double intercept = (sv - slope * st) / n;
    if (!(slope > 0.0)) throw UnreliableEstimate("non-positive phase-variance slope");

    VarianceSlopeEstimate est;
    est.linewidth = slope / (2.0 * std::numbers::pi);
    double res = 0.0, rmin = std::numeric_limits<double>::infinity(), rmax = 0.0, rsum = 0.0;
    for (auto [t, v] : pts) {
        const double e = (intercept + slope * t - v) / v;
        res += e * e;
        const double r = v / (2.0 * std::numbers::pi * t);
        rmin = std::min(rmin, r);
        rmax = std::max(rmax, r);
        rsum += r;
    }
    est.rms_relative_residual = std::sqrt(res / n);
    est.ratio_spread = (rmax - rmin) / (rsum / n);
    est.reliable = est.ratio_spread <= flatness_tolerance;
    return est;
}

} // namespace combwdm::phasenoise
