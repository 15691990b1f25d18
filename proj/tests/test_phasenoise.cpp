#include "combwdm/phasenoise.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace combwdm;
using namespace combwdm::phasenoise;

namespace {

const FmNoiseModel kCombModel = comb_line_model;

double band_average(const FmSpectrum& s, double lo, double hi)
{
    double acc = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
        if (s.frequencies[i] >= lo && s.frequencies[i] <= hi) {
            acc += s.psd[i];
            ++n;
        }
    return acc / n;
}

// Simpson quadrature of S(f) in u = ln f; independent of the closed form.
double integrate_psd(const FmNoiseModel& m, double lo, double hi)
{
    const int n = 20000;
    const double a = std::log(lo), b = std::log(hi), h = (b - a) / n;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double f = std::exp(a + i * h);
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        acc += w * m.psd(f) * f;
    }
    return acc * h / 3.0;
}

// Log-grid scan for the first frequency where S(f) <= c f.
double scan_crossing(const FmNoiseModel& m)
{
    const double c = 4.0 * std::log(4.0) / (std::numbers::pi * std::numbers::pi);
    double f = 1.0;
    while (m.psd(f) > c * f) f *= 1.0 + 1e-7;
    return f;
}

} // namespace

TEST(FmNoiseModel, RejectsNegativeOrNonFinite)
{
    EXPECT_THROW(synthesize_phase({-1.0, 0, 0}, 2048, 1e9, 1), InvalidModel);
    EXPECT_THROW(synthesize_phase({0, NAN, 0}, 2048, 1e9, 1), InvalidModel);
    EXPECT_THROW(synthesize_phase({0, 0, INFINITY}, 2048, 1e9, 1), InvalidModel);
}

TEST(FmNoiseModel, CombModelAtOneMegahertz)
{
    EXPECT_NEAR(kCombModel.psd(1e6), 1.88e6, 1.0);
}

TEST(SynthesizePhase, ZeroModelIsConstant)
{
    const auto rec = synthesize_phase({}, 4096, 1e9, 3);
    for (double p : rec.phases) EXPECT_EQ(p, 0.0);
    for (double f : instantaneous_frequency(rec)) EXPECT_EQ(f, 0.0);
}

TEST(SynthesizePhase, Preconditions)
{
    EXPECT_THROW(synthesize_phase({1, 0, 0}, 1000, 1e9, 1), ValidationError);
    EXPECT_THROW(synthesize_phase({1, 0, 0}, 4096, 0.0, 1), ValidationError);
}

TEST(SynthesizePhase, DeterministicPerSeed)
{
    const auto a = synthesize_phase(kCombModel, 1 << 12, 2e9, 17);
    const auto b = synthesize_phase(kCombModel, 1 << 12, 2e9, 17);
    const auto c = synthesize_phase(kCombModel, 1 << 12, 2e9, 18);
    EXPECT_EQ(a.phases, b.phases);
    EXPECT_NE(a.phases, c.phases);
}

TEST(SynthesizePhase, WhiteRoundTripIsFlat)
{
    const auto rec = synthesize_phase({5.4e5, 0, 0}, 1 << 20, 2e9, 5);
    const auto spec = estimate_fm_spectrum(rec);
    const double avg = band_average(spec, 1e6, 5e8);
    EXPECT_NEAR(avg / 5.4e5, 1.0, 0.10);
}

TEST(SynthesizePhase, CombModelAtOneMegahertzRoundTrip)
{
    const auto rec = synthesize_phase(kCombModel, 1 << 22, 2e9, 11);
    const auto spec = estimate_fm_spectrum(rec);
    const double avg = band_average(spec, 0.95e6, 1.05e6);
    EXPECT_NEAR(avg / 1.88e6, 1.0, 0.15);
}

TEST(InstantaneousFrequency, LinearRampIsExactlyConstant)
{
    PhaseRecord rec;
    rec.sample_interval = 1e-9;
    for (int k = 0; k < 1000; ++k)
        rec.phases.push_back(2.0 * std::numbers::pi * 1e6 * k * rec.sample_interval);
    const auto f = instantaneous_frequency(rec);
    ASSERT_EQ(f.size(), 999u);
    for (double v : f) EXPECT_NEAR(v, 1e6, 1e-6);
    // every first difference evaluates to the same constant
    for (double v : f) EXPECT_NEAR(v, f.front(), 1e-6);
}

TEST(InstantaneousFrequency, SinusoidalPhaseMatchesDerivative)
{
    PhaseRecord rec;
    rec.sample_interval = 1e-6;
    const double amp = 0.2, fm = 1e3;
    for (int k = 0; k < 10000; ++k)
        rec.phases.push_back(amp * std::sin(2 * std::numbers::pi * fm * k * rec.sample_interval));
    const auto f = instantaneous_frequency(rec);
    const double peak = *std::max_element(f.begin(), f.end());
    // analytic peak of dphi/dt / 2pi = amp * fm
    EXPECT_NEAR(peak, amp * fm, amp * fm * 1e-3);
}

TEST(InstantaneousFrequency, TooShort)
{
    PhaseRecord rec{{0.0}, 1e-9, 0};
    EXPECT_THROW(instantaneous_frequency(rec), InsufficientData);
}

TEST(EstimateFmSpectrum, TooShortRecord)
{
    PhaseRecord rec{std::vector<double>(50, 0.0), 1e-9, 0};
    EXPECT_THROW(estimate_fm_spectrum(rec), InsufficientData);
}

TEST(EstimateFmSpectrum, ZeroNoiseIsZero)
{
    const auto spec = estimate_fm_spectrum(synthesize_phase({}, 1 << 14, 1e9, 0));
    for (double p : spec.psd) EXPECT_LT(p, 1e-20);
}

TEST(EstimateFmSpectrum, ParsevalConsistent)
{
    const auto rec = synthesize_phase({1e6, 0, 0}, 1 << 18, 1e9, 9);
    const auto f = instantaneous_frequency(rec);
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    double var = 0.0;
    for (double v : f) var += (v - mean) * (v - mean);
    var /= static_cast<double>(f.size());

    const auto spec = estimate_fm_spectrum(rec);
    const double df = spec.frequencies[1] - spec.frequencies[0];
    double integral = 0.0;
    for (double p : spec.psd) integral += p * df;
    EXPECT_NEAR(integral / var, 1.0, 0.05);
}

TEST(EstimateFmSpectrum, FrequencySupportBounds)
{
    const auto rec = synthesize_phase({1e6, 0, 0}, 1 << 14, 1e9, 1);
    const auto spec = estimate_fm_spectrum(rec);
    EXPECT_GE(spec.frequencies.front(), 1.0 / rec.duration());
    EXPECT_LE(spec.frequencies.back(), 0.5 * rec.sample_rate() * (1 + 1e-12));
    EXPECT_NO_THROW(spec.validate());
}

TEST(EstimateFmSpectrum, CombModelSlopeMinusTwoThenFlat)
{
    const auto rec = synthesize_phase(kCombModel, 1 << 22, 2e9, 2);
    const auto spec = smooth_spectrum(estimate_fm_spectrum(rec));
    // log-log slope between 20 kHz and 100 kHz (random-walk dominated)
    const double s1 = band_average(spec, 19e3, 21e3), s2 = band_average(spec, 95e3, 105e3);
    const double slope = std::log10(s2 / s1) / std::log10(100.0 / 20.0);
    EXPECT_NEAR(slope, -2.0, 0.25);
    // flat well above 10 MHz
    const double h1 = band_average(spec, 50e6, 60e6), h2 = band_average(spec, 400e6, 500e6);
    EXPECT_NEAR(h1 / h2, 1.0, 0.1);
}

TEST(SmoothSpectrum, ConstantUnchanged)
{
    FmSpectrum s;
    for (int i = 1; i <= 1000; ++i) {
        s.frequencies.push_back(i * 1e3);
        s.psd.push_back(7.0);
    }
    const auto out = smooth_spectrum(s);
    ASSERT_EQ(out.size(), s.size());
    for (double p : out.psd) EXPECT_NEAR(p, 7.0, 1e-9);
}

TEST(SmoothSpectrum, SpikeReducedByWindowWidth)
{
    FmSpectrum s;
    for (int i = 1; i <= 4000; ++i) {
        s.frequencies.push_back(i * 1e3);
        s.psd.push_back(1.0);
    }
    const std::size_t spike = 2999; // 3 MHz
    s.psd[spike] = 1001.0;
    const auto out = smooth_spectrum(s);
    // window around 3 MHz spans 3e6 * (10^0.05 - 10^-0.05) ~ 691 kHz, i.e. ~691 bins
    std::size_t width = 0;
    for (double f : s.frequencies)
        if (f >= 3e6 / std::pow(10.0, 0.05) && f <= 3e6 * std::pow(10.0, 0.05)) ++width;
    EXPECT_LE(out.psd[spike] - 1.0, 1000.0 / static_cast<double>(width) * (1 + 1e-9));
}

TEST(SmoothSpectrum, PreservesBandPower)
{
    const auto rec = synthesize_phase(kCombModel, 1 << 20, 2e9, 4);
    const auto raw = estimate_fm_spectrum(rec);
    const auto sm = smooth_spectrum(raw);
    double p_raw = 0, p_sm = 0;
    for (std::size_t i = 0; i < raw.size(); ++i)
        if (raw.frequencies[i] > 1e5 && raw.frequencies[i] < 1e8) {
            p_raw += raw.psd[i];
            p_sm += sm.psd[i];
        }
    EXPECT_NEAR(p_sm / p_raw, 1.0, 0.05);
}

TEST(SmoothSpectrum, NoisyCombPeriodogramWithinThreeDb)
{
    const auto rec = synthesize_phase(kCombModel, 1 << 22, 2e9, 8);
    const auto sm = smooth_spectrum(estimate_fm_spectrum(rec));
    const auto band = default_fit_band(sm, 2e9);
    for (std::size_t i = 0; i < sm.size(); ++i) {
        const double f = sm.frequencies[i];
        if (f < band.low || f > band.high) continue;
        EXPECT_LT(std::abs(10 * std::log10(sm.psd[i] / kCombModel.psd(f))), 3.0) << "f=" << f;
    }
}

TEST(SmoothSpectrum, LogDecimatedGrid)
{
    FmSpectrum s;
    for (int i = 1; i <= 100000; ++i) {
        s.frequencies.push_back(i * 1.0);
        s.psd.push_back(3.0);
    }
    const auto out = smooth_spectrum(s, {0.1, true});
    EXPECT_NEAR(static_cast<double>(out.size()), 50.0, 2.0);
    for (double p : out.psd) EXPECT_NEAR(p, 3.0, 1e-12);
}

TEST(FitFmModel, FlatSpectrum)
{
    FmSpectrum s;
    for (int i = 1; i <= 100000; ++i) {
        s.frequencies.push_back(i * 1e3);
        s.psd.push_back(2.5e5);
    }
    const auto fit = fit_fm_model(s, {1e4, 1e8});
    EXPECT_NEAR(fit.model.s_white, 2.5e5, 1e-3);
    EXPECT_NEAR(fit.model.s_flicker, 0.0, 1e-3 * 1e4);
    EXPECT_NEAR(fit.model.s_randomwalk, 0.0, 1e-3 * 1e8);
}

TEST(FitFmModel, PureRandomWalk)
{
    FmSpectrum s;
    for (int i = 1; i <= 100000; ++i) {
        const double f = i * 1e3;
        s.frequencies.push_back(f);
        s.psd.push_back(5e17 / (f * f));
    }
    const auto fit = fit_fm_model(s, {1e4, 1e8});
    EXPECT_NEAR(fit.model.s_randomwalk / 5e17, 1.0, 0.10);
    EXPECT_LT(fit.model.s_white, 1e-3 * 5e17 / 1e16);
    EXPECT_LT(fit.model.s_flicker, 1e-3 * 5e17 / 1e4);
}

TEST(FitFmModel, DegenerateBand)
{
    FmSpectrum s;
    for (int i = 1; i <= 1000; ++i) {
        s.frequencies.push_back(i * 1e3);
        s.psd.push_back(1.0);
    }
    EXPECT_THROW(fit_fm_model(s, {1e5, 5e5}), FitDegenerate);
    EXPECT_THROW(fit_fm_model(s, {1e2, 5e5}), ValidationError);
}

TEST(FitFmModel, CombModelRoundTrip)
{
    const auto rec = synthesize_phase(kCombModel, 1 << 22, 2e9, 21);
    const auto sm = smooth_spectrum(estimate_fm_spectrum(rec));
    const auto fit = fit_fm_model(sm, default_fit_band(sm, 2e9));
    EXPECT_NEAR(fit.model.s_white / kCombModel.s_white, 1.0, 0.2);
    EXPECT_NEAR(fit.model.s_flicker / kCombModel.s_flicker, 1.0, 0.2);
    EXPECT_NEAR(fit.model.s_randomwalk / kCombModel.s_randomwalk, 1.0, 0.2);
}

TEST(LorentzianLinewidth, Values)
{
    EXPECT_EQ(lorentzian_linewidth({0, 1e11, 1e17}), 0.0);
    EXPECT_NEAR(lorentzian_linewidth({5.4e5, 0, 0}), 1.696e6, 1e3);
    EXPECT_EQ(lorentzian_linewidth({5.4e5, 0, 0}), std::numbers::pi * 5.4e5);
}

TEST(LorentzianLinewidth, Homogeneous)
{
    for (double alpha : {0.5, 2.0, 3.7, 1e3}) {
        const double base = lorentzian_linewidth({1.234e5, 0, 0});
        EXPECT_DOUBLE_EQ(lorentzian_linewidth({alpha * 1.234e5, 0, 0}), alpha * base);
    }
}

TEST(IntegrationUpperFrequency, ClosedForms)
{
    const double c = 4.0 * std::log(4.0) / (std::numbers::pi * std::numbers::pi);
    EXPECT_NEAR(integration_upper_frequency({0, 0, 5e17}) / std::cbrt(5e17 / c), 1.0, 2e-6);
    EXPECT_NEAR(integration_upper_frequency({0, 0, 5e17}), 9.6e5, 0.01e6);
    EXPECT_NEAR(integration_upper_frequency({1e6, 0, 0}) / (1e6 / c), 1.0, 2e-6);
}

TEST(IntegrationUpperFrequency, CombModelMatchesScan)
{
    const double f = integration_upper_frequency(kCombModel);
    EXPECT_NEAR(f / scan_crossing(kCombModel), 1.0, 2e-6);
    EXPECT_GE(f, 1.9e6);
    EXPECT_LE(f, 2.0e6);
}

TEST(IntegrationUpperFrequency, Errors)
{
    EXPECT_THROW(integration_upper_frequency({}), InvalidModel);
    EXPECT_THROW(integration_upper_frequency({1e-3, 0, 0}), NoCrossing);
}

TEST(GaussianLinewidth, CombModelFifteenMicroseconds)
{
    const auto g = gaussian_linewidth(kCombModel, 15e-6);
    EXPECT_NEAR(g.fwhm / 7.4e6, 1.0, 0.15);
    EXPECT_GE(g.fwhm, 6.3e6);
    EXPECT_LE(g.fwhm, 8.5e6);
    EXPECT_NEAR(g.area / integrate_psd(kCombModel, g.f_low, g.f_high), 1.0, 1e-6);
}

TEST(GaussianLinewidth, RandomWalkOnly)
{
    const FmNoiseModel m{0, 0, 5e17};
    const auto g = gaussian_linewidth(m, 15e-6);
    EXPECT_NEAR(g.area / 6.98e12, 1.0, 0.01);
    EXPECT_NEAR(g.fwhm / 6.2e6, 1.0, 0.01);
    EXPECT_NEAR(g.area / integrate_psd(m, g.f_low, g.f_high), 1.0, 1e-6);
}

TEST(GaussianLinewidth, ValidityCondition)
{
    // f_high ~ 17.8 kHz for S_L = 1e4, tau0 = 100 us -> f_low = 10 kHz
    EXPECT_THROW(gaussian_linewidth({1e4, 0, 0}, 100e-6), ApproximationInvalid);
    const auto forced = gaussian_linewidth({1e4, 0, 0}, 100e-6, true);
    EXPECT_FALSE(forced.reliable);
    EXPECT_GT(forced.fwhm, 0.0);
}

TEST(GaussianLinewidth, MonotoneInObservationTime)
{
    double prev = 0.0;
    for (double tau = 5e-6; tau < 1e-3; tau *= 1.5) {
        const double w = gaussian_linewidth(kCombModel, tau).fwhm;
        EXPECT_GE(w, prev);
        prev = w;
    }
}

TEST(GaussianLinewidth, WhiteOnlyConstantForLongObservation)
{
    const FmNoiseModel m{1e6, 0, 0};
    const double a = gaussian_linewidth(m, 1e-3).fwhm;
    const double b = gaussian_linewidth(m, 1e-2).fwhm;
    EXPECT_NEAR(a / b, 1.0, 1e-3);
}

TEST(PhaseVariance, ZeroDelay)
{
    const auto rec = synthesize_phase({1e6, 0, 0}, 4096, 1e9, 1);
    const std::vector<double> d{0.0};
    EXPECT_EQ(phase_variance(rec, d).variances[0], 0.0);
}

TEST(PhaseVariance, GridMismatch)
{
    const auto rec = synthesize_phase({1e6, 0, 0}, 4096, 1e9, 1);
    const std::vector<double> d{1.5e-9};
    EXPECT_THROW(phase_variance(rec, d), GridMismatch);
    const std::vector<double> too_long{2000e-9};
    EXPECT_THROW(phase_variance(rec, too_long), ValidationError);
}

TEST(PhaseVariance, WienerOracle)
{
    // Lorentzian 1 MHz: sigma^2(tau) = 2 pi dfL tau
    const auto rec = synthesize_phase(FmNoiseModel::from_lorentzian(1e6), 1 << 20, 1e9, 12);
    const std::vector<double> d{100e-9};
    const double v = phase_variance(rec, d).variances[0];
    EXPECT_NEAR(v / (2 * std::numbers::pi * 1e6 * 100e-9), 1.0, 0.10);
}

TEST(PhaseVariance, WhiteOnlyLinearInDelay)
{
    const double s_white = 3e5;
    const auto rec = synthesize_phase({s_white, 0, 0}, 1 << 20, 2e9, 6);
    std::vector<double> d;
    for (int m = 1; m <= 64; m *= 2) d.push_back(m * rec.sample_interval);
    const auto curve = phase_variance(rec, d);
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double slope = curve.variances[i] / d[i];
        EXPECT_NEAR(slope / (2 * std::numbers::pi * std::numbers::pi * s_white), 1.0, 0.10);
    }
}

TEST(VarianceSlope, ExactLine)
{
    PhaseVarianceCurve c;
    for (int i = 0; i <= 6; ++i) {
        c.delays.push_back(i * 1e-9);
        c.variances.push_back(2 * std::numbers::pi * 1e6 * i * 1e-9);
    }
    const auto est = linewidth_from_variance_slope(c);
    EXPECT_NEAR(est.linewidth, 1e6, 1e-3);
    EXPECT_TRUE(est.reliable);
}

TEST(VarianceSlope, WhiteSyntheticWithinTolerance)
{
    const FmNoiseModel m{5.4e5, 0, 0};
    const auto rec = synthesize_phase(m, 1 << 20, 2e9, 30);
    std::vector<double> d;
    for (int k = 0; k <= 8; ++k) d.push_back(k * rec.sample_interval);
    const auto est = linewidth_from_variance_slope(phase_variance(rec, d));
    EXPECT_NEAR(est.linewidth / lorentzian_linewidth(m), 1.0, 0.25);
}

TEST(VarianceSlope, CombModelContaminatedAndFlagged)
{
    const auto rec = synthesize_phase(kCombModel, 1 << 22, 2e9, 31);
    std::vector<double> d;
    for (int k = 0; k <= 8; ++k) d.push_back(k * 64 * rec.sample_interval);
    const auto est = linewidth_from_variance_slope(phase_variance(rec, d));
    EXPECT_GT(est.linewidth, lorentzian_linewidth(kCombModel));
    EXPECT_FALSE(est.reliable);
}

TEST(VarianceSlope, Errors)
{
    PhaseVarianceCurve c{{0, 1, 2, 3, 4}, {0, 1, 0.5, 2, 3}};
    EXPECT_THROW(linewidth_from_variance_slope(c), UnreliableEstimate);
    PhaseVarianceCurve short_curve{{0, 1, 2}, {0, 1, 2}};
    EXPECT_THROW(linewidth_from_variance_slope(short_curve), InsufficientData);
}
