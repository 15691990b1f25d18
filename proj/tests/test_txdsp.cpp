#include "combwdm/txdsp.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

using namespace combwdm;
using namespace combwdm::tx;

TEST(Prbs, BalanceOverOnePeriod)
{
    for (std::uint64_t seed : {1ull, 0x2aull, 0x7ffull}) {
        const auto bits = prbs(11, seed, 2047);
        const auto ones = std::count(bits.begin(), bits.end(), 1);
        EXPECT_EQ(ones, 1024);
        EXPECT_EQ(2047 - ones, 1023);
    }
}

TEST(Prbs, PeriodIs2047)
{
    const auto bits = prbs(11, 0x155, 4094);
    EXPECT_TRUE(std::equal(bits.begin(), bits.begin() + 2047, bits.begin() + 2047));
    // no shorter period
    for (std::size_t p : {23u, 89u}) {
        const auto per = prbs(11, 0x155, 2047 + p);
        EXPECT_FALSE(std::equal(per.begin(), per.begin() + 2047, per.begin() + p));
    }
}

TEST(Prbs, SatisfiesRecurrence)
{
    const auto a = prbs(11, 0x3a1, 3000);
    for (std::size_t t = 0; t + 11 < a.size(); ++t) ASSERT_EQ(a[t + 11], a[t + 2] ^ a[t]);
}

TEST(Prbs, DifferentSeedsAreCyclicShifts)
{
    const auto a = prbs(11, 1, 2047);
    const auto b = prbs(11, 0x5a5, 2047);
    bool found = false;
    for (std::size_t s = 0; s < 2047 && !found; ++s) {
        bool eq = true;
        for (std::size_t i = 0; i < 2047 && eq; ++i) eq = a[(i + s) % 2047] == b[i];
        found = eq;
    }
    EXPECT_TRUE(found);
}

TEST(Prbs, RejectsZeroState)
{
    EXPECT_THROW(prbs(11, 0, 10), ValidationError);
    EXPECT_THROW(prbs(11, 1u << 11, 10), ValidationError);
}

TEST(Constellation, QpskGrayOrder)
{
    const auto c = ConstellationSpec::qpsk();
    const std::vector<std::uint8_t> bits{0, 0, 0, 1, 1, 1, 1, 0};
    const auto s = map_symbols(bits, c);
    const double a = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(std::abs(s[0] - cplx(-a, -a)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s[1] - cplx(-a, a)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s[2] - cplx(a, a)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s[3] - cplx(a, -a)), 0.0, 1e-15);
    // consecutive points in this order differ by one bit and are neighbours
    for (int k = 0; k < 4; ++k) EXPECT_NEAR(std::abs(s[k] - s[(k + 1) % 4]), std::sqrt(2.0), 1e-12);
}

TEST(Constellation, UnitEnergy)
{
    for (const auto& c : {ConstellationSpec::qpsk(), ConstellationSpec::qam16()}) {
        double e = 0.0;
        for (const auto& p : c.points()) e += std::norm(p);
        EXPECT_NEAR(e / static_cast<double>(c.size()), 1.0, 1e-12);
    }
    EXPECT_NEAR(ConstellationSpec::qam16().max_magnitude(), std::sqrt(1.8), 1e-12);
}

TEST(Constellation, GrayNeighboursDifferByOneBit)
{
    const auto c = ConstellationSpec::qam16();
    const double dmin = 2.0 / std::sqrt(10.0);
    for (std::size_t a = 0; a < 16; ++a)
        for (std::size_t b = 0; b < 16; ++b)
            if (std::abs(std::abs(c.point(a) - c.point(b)) - dmin) < 1e-9) {
                EXPECT_EQ(__builtin_popcountll(a ^ b), 1);
            }
}

TEST(Constellation, MapDemapRoundTrip)
{
    for (const auto& c : {ConstellationSpec::qpsk(), ConstellationSpec::qam16()}) {
        const auto bits = prbs(11, 0x1f, 2047 * c.bits_per_symbol());
        const auto sym = map_symbols(bits, c);
        EXPECT_EQ(demap_symbols(sym, c), bits);
    }
}

TEST(Constellation, RejectsBadLength)
{
    const std::vector<std::uint8_t> bits(7, 0);
    EXPECT_THROW(map_symbols(bits, ConstellationSpec::qam16()), ValidationError);
    EXPECT_THROW(ConstellationSpec::from_name("8PSK"), ValidationError);
}

TEST(PulseShape, ZeroIsiAtSymbolInstants)
{
    for (double beta : {0.05, 0.1, 0.5, 1.0}) {
        cvec sym(256, cplx{});
        sym[100] = 1.0;
        PulseShape ps;
        ps.rolloff = beta;
        const auto w = shape_pulses(sym, ps);
        for (std::size_t k = 0; k < sym.size(); ++k) {
            const double expect = (k == 100) ? 1.0 : 0.0;
            EXPECT_NEAR(std::abs(w[k * ps.samples_per_symbol] - expect), 0.0, 1e-9) << beta << " " << k;
        }
    }
}

TEST(PulseShape, SpectrumFollowsRaisedCosine)
{
    PulseShape ps;
    ps.rolloff = 0.1;
    const std::size_t n = 4096;
    cvec sym(n / ps.samples_per_symbol, cplx{});
    sym[0] = 1.0;
    const auto spec = fft::forward_copy(shape_pulses(sym, ps));
    // normalized frequency in symbol-rate units
    for (std::size_t k = 0; k < n / 2; k += 7) {
        const double f = static_cast<double>(k) * ps.samples_per_symbol / static_cast<double>(n);
        const double f1 = (1 - ps.rolloff) / 2, f2 = (1 + ps.rolloff) / 2;
        double ideal = 0.0;
        if (f <= f1) {
            ideal = 1.0;
        } else if (f <= f2) {
            ideal = 0.5 * (1 + std::cos(std::numbers::pi / ps.rolloff * (f - f1)));
        }
        EXPECT_NEAR(std::abs(spec[k]) / static_cast<double>(ps.samples_per_symbol), ideal, 0.02) << f;
    }
}

TEST(PulseShape, OccupiedBandwidth)
{
    EXPECT_NEAR(occupied_bandwidth(0.10, 38e9), 41.8e9, 1.0);
    EXPECT_NEAR(occupied_bandwidth(0.05, 40e9), 42e9, 1.0);
}

TEST(PulseShape, MatchedSamplingRecoversSymbols)
{
    const auto c = ConstellationSpec::qam16();
    const auto sym = map_symbols(prbs(11, 3, 4 * 4096), c);
    for (double beta : {0.05, 0.1}) {
        PulseShape ps;
        ps.rolloff = beta;
        const auto w = shape_pulses(sym, ps);
        double err = 0.0;
        for (std::size_t k = 0; k < sym.size(); ++k) err += std::norm(w[k * 4] - sym[k]);
        EXPECT_LT(std::sqrt(err / static_cast<double>(sym.size())), 1e-3);
    }
}

TEST(PulseShape, RejectsInvalidRolloff)
{
    const cvec sym(64, cplx{1.0, 0.0});
    PulseShape ps;
    ps.rolloff = 0.0;
    EXPECT_THROW(shape_pulses(sym, ps), ValidationError);
    ps.rolloff = 1.5;
    EXPECT_THROW(shape_pulses(sym, ps), ValidationError);
}

TEST(Pdm, DelayAtFortyGigabaud)
{
    EXPECT_EQ(pdm_delay_samples(5.3e-9, 40e9), 212u);
    const auto sym = map_symbols(prbs(11, 9, 2 * 2048), ConstellationSpec::qpsk());
    const auto w = emulate_pdm(sym, 40e9, 40e9);
    for (std::size_t k = 0; k < sym.size(); ++k) ASSERT_EQ(w.y[(k + 212) % sym.size()], w.x[k]);
    EXPECT_NEAR(mean_power(w.x), mean_power(w.y), 1e-12);
}

TEST(Pdm, ZeroDelayCopies)
{
    const auto sym = map_symbols(prbs(11, 9, 512), ConstellationSpec::qpsk());
    const auto w = emulate_pdm(sym, 40e9, 40e9, 0.0);
    EXPECT_EQ(w.x, w.y);
}

TEST(Pdm, RejectsLongDelay)
{
    const cvec sym(100, cplx{1.0, 0.0});
    EXPECT_THROW(emulate_pdm(sym, 40e9, 40e9, 60.0 / 40e9), ValidationError);
}

namespace {

comb::CarrierTone ramp_tone(std::size_t n, double fs, double f0)
{
    comb::CarrierTone t;
    t.phase_record.sample_interval = 1.0 / fs;
    t.phase_record.phases.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        t.phase_record.phases[i] = 2.0 * std::numbers::pi * f0 * static_cast<double>(i) / fs;
    return t;
}

double centroid(const cvec& x, double fs)
{
    const auto s = fft::forward_copy(x);
    double num = 0, den = 0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        const double p = std::norm(s[k]);
        num += p * fft::bin_frequency(k, s.size(), fs);
        den += p;
    }
    return num / den;
}

} // namespace

TEST(Carrier, ZeroNoiseIsIdentity)
{
    const auto sym = map_symbols(prbs(11, 9, 2048), ConstellationSpec::qpsk());
    const auto w = emulate_pdm(shape_pulses(sym, {}), 160e9, 40e9);
    const auto out = apply_carrier(w, ramp_tone(w.size(), w.sample_rate, 0.0));
    EXPECT_EQ(out.x, w.x);
    EXPECT_EQ(out.y, w.y);
}

TEST(Carrier, PhaseRampShiftsSpectrum)
{
    const auto sym = map_symbols(prbs(11, 9, 2 * 4096), ConstellationSpec::qpsk());
    const auto w = emulate_pdm(shape_pulses(sym, {}), 160e9, 40e9);
    const double f0 = 3e9;
    const auto out = apply_carrier(w, ramp_tone(w.size(), w.sample_rate, f0));
    const double shift = centroid(out.x, w.sample_rate) - centroid(w.x, w.sample_rate);
    EXPECT_NEAR(shift, f0, 0.01e9);
    EXPECT_NEAR(out.total_power(), w.total_power(), 1e-12);
}

TEST(Carrier, CombModelRotatesConstellation)
{
    const auto c = ConstellationSpec::qpsk();
    const auto sym = map_symbols(prbs(11, 9, 2 * 10000), c);
    const auto w = emulate_pdm(shape_pulses(sym, {}), 152e9, 38e9);
    comb::CombSpec cs;
    cs.line_noise = {phasenoise::FmNoiseModel{5.4e5, 8.4e11, 5.0e17}};
    const auto tone = comb::generate_tone(cs, 0, static_cast<double>(w.size()) / w.sample_rate, w.sample_rate, 4);
    const auto out = apply_carrier(w, tone);
    double clean = 0, noisy = 0, max_rot = 0;
    for (std::size_t k = 0; k < sym.size(); ++k) {
        clean += std::norm(w.x[4 * k] - sym[k]);
        noisy += std::norm(out.x[4 * k] - sym[k]);
        max_rot = std::max(max_rot, std::abs(std::arg(out.x[4 * k] * std::conj(sym[k]))));
    }
    EXPECT_GT(noisy, 100.0 * clean);
    EXPECT_GT(max_rot, 0.2);
}

TEST(Carrier, RejectsShortRecord)
{
    const auto sym = map_symbols(prbs(11, 9, 2048), ConstellationSpec::qpsk());
    const auto w = emulate_pdm(shape_pulses(sym, {}), 160e9, 40e9);
    EXPECT_THROW(apply_carrier(w, ramp_tone(w.size() - 1, w.sample_rate, 0.0)), ValidationError);
    EXPECT_THROW(apply_carrier(w, ramp_tone(w.size(), 2 * w.sample_rate, 0.0)), ValidationError);
}
