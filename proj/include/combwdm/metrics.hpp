#pragma once

// BER counting with blind frame alignment, EVM, FEC-threshold classes and
// line/net rate accounting.

#include "combwdm/errors.hpp"
#include "combwdm/fft.hpp"
#include "combwdm/rxdsp.hpp"
#include "combwdm/txdsp.hpp"
#include "combwdm/units.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace combwdm::metrics {

using tx::ConstellationSpec;

/// Fewer errors than this and the BER is not statistically reliable.
inline constexpr std::size_t min_countable_errors = 5;

struct BerResult {
    double ber = 0.0;
    std::size_t n_errors = 0;
    std::size_t n_bits = 0;
    std::size_t delay = 0; // received[i] pairs with transmitted[(i + delay) % m]
    bool below_min_countable = false;
};

namespace detail {

inline BerResult finish(std::size_t errors, std::size_t bits, std::size_t delay)
{
    BerResult r;
    r.n_errors = errors;
    r.n_bits = bits;
    r.delay = delay;
    r.ber = bits ? static_cast<double>(errors) / static_cast<double>(bits) : 0.0;
    r.below_min_countable = errors < min_countable_errors;
    return r;
}

// Circular cross-correlation c[d] = sum_j a[j] conj(b[(j + d) % m]).
inline cvec circular_xcorr(const cvec& a, const cvec& b)
{
    auto fa = fft::forward_copy(a);
    const auto fb = fft::forward_copy(b);
    for (std::size_t k = 0; k < fa.size(); ++k) fa[k] = std::conj(fa[k]) * fb[k];
    fft::inverse(fa);
    for (auto& v : fa) v = std::conj(v);
    return fa;
}

} // namespace detail

/// Bit error ratio after searching the cyclic delay of `transmitted` (treated
/// as periodic) that best matches `received`. Throws AlignmentFailure when the
/// best normalized correlation does not clear the noise floor.
inline BerResult count_ber(std::span<const std::uint8_t> received, std::span<const std::uint8_t> transmitted)
{
    const std::size_t n = received.size(), m = transmitted.size();
    if (n == 0 || m == 0) throw ValidationError("BER needs non-empty bit streams");
    if (m > n) return count_ber(transmitted, received); // symmetric for equal periods

    // fold the received stream onto one reference period
    cvec folded(m, cplx{}), ref(m);
    for (std::size_t i = 0; i < n; ++i) folded[i % m] += received[i] ? 1.0 : -1.0;
    for (std::size_t j = 0; j < m; ++j) ref[j] = transmitted[j] ? 1.0 : -1.0;
    const auto corr = detail::circular_xcorr(folded, ref);
    std::size_t best = 0;
    for (std::size_t d = 1; d < m; ++d)
        if (corr[d].real() > corr[best].real()) best = d;
    const double rho = corr[best].real() / static_cast<double>(n);
    if (!(rho > 8.0 / std::sqrt(static_cast<double>(n))))
        throw AlignmentFailure("no bit alignment above the correlation floor");

    std::size_t errors = 0;
    for (std::size_t i = 0; i < n; ++i) errors += received[i] != transmitted[(i + best) % m];
    return detail::finish(errors, n, best);
}

// ---------------------------------------------------------------------------
// Symbol-level alignment of an equalized frame against the transmitted data

struct PolAlignment {
    std::size_t reference = 0; // 0 = X reference, 1 = Y reference
    std::size_t delay = 0;     // output[k] pairs with reference[(k + delay) % n]
    int quadrant = 0;          // output multiplied by j^quadrant
    bool conjugate = false;
    double correlation = 0.0;  // normalized peak
};

namespace detail {

// Segments whose correlation magnitudes are summed non-coherently, so that
// cycle slips between segments cannot cancel the peak.
struct SegmentPlan {
    std::size_t length = 0;
    std::size_t count = 0;

    explicit SegmentPlan(std::size_t n)
    {
        constexpr std::size_t target = 8192, max_segments = 4;
        length = std::min(n, target);
        count = std::clamp<std::size_t>(n / std::max<std::size_t>(length, 1), 1, max_segments);
    }

    std::size_t start(std::size_t s, std::size_t n) const
    {
        return count > 1 ? s * (n - length) / (count - 1) : 0;
    }

    double floor() const { return 8.0 / std::sqrt(static_cast<double>(length * count)); }
};

inline PolAlignment best_alignment(const cvec& out, const cvec& ref, std::size_t ref_index)
{
    const std::size_t n = out.size();
    const SegmentPlan plan(n);
    const auto fb = fft::forward_copy(ref);
    PolAlignment best;
    best.reference = ref_index;
    const double norm = std::sqrt(mean_power(out) * mean_power(ref)) * static_cast<double>(plan.length * plan.count);
    std::vector<double> acc(n);
    cvec a(n);
    for (bool conj : {false, true}) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t sgm = 0; sgm < plan.count; ++sgm) {
            std::fill(a.begin(), a.end(), cplx{});
            const std::size_t s0 = plan.start(sgm, n);
            for (std::size_t j = s0; j < s0 + plan.length; ++j) a[j] = conj ? std::conj(out[j]) : out[j];
            // c[d] = sum_j a[j] conj(ref[(j + d) % n])
            fft::forward(a);
            for (std::size_t k = 0; k < n; ++k) a[k] = std::conj(a[k]) * fb[k];
            fft::inverse(a);
            for (std::size_t d = 0; d < n; ++d) acc[d] += std::abs(a[d]);
        }
        for (std::size_t d = 0; d < n; ++d) {
            const double mag = acc[d] / norm;
            if (mag > best.correlation) {
                best.correlation = mag;
                best.delay = d;
                best.conjugate = conj;
            }
        }
    }
    // quadrant from the coherent sum over the whole frame: out * j^q ~ ref
    cplx c{};
    for (std::size_t j = 0; j < n; ++j)
        c += (best.conjugate ? std::conj(out[j]) : out[j]) * std::conj(ref[(j + best.delay) % n]);
    const double q = std::round(-std::arg(c) / (std::numbers::pi / 2));
    best.quadrant = ((static_cast<int>(q) % 4) + 4) % 4;
    return best;
}

inline cplx transform(cplx s, const PolAlignment& a)
{
    static const cplx quad[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    return (a.conjugate ? std::conj(s) : s) * quad[a.quadrant];
}

} // namespace detail

struct FrameAlignment {
    PolAlignment x;
    PolAlignment y;
    bool swapped = false;
};

/// Finds delay, polarization swap, quadrant rotation and conjugation of the
/// two outputs against the transmitted X/Y symbol streams. Delay, swap and
/// conjugation tolerate cycle slips; the quadrant follows the frame majority.
inline FrameAlignment align_frame(const rx::SymbolFrame& frame, const cvec& ref_x, const cvec& ref_y)
{
    const std::size_t n = frame.size();
    if (ref_x.size() != n || ref_y.size() != n || frame.y.size() != n)
        throw ValidationError("frame and reference lengths differ");
    const auto xx = detail::best_alignment(frame.x, ref_x, 0);
    const auto xy = detail::best_alignment(frame.x, ref_y, 1);
    const auto yx = detail::best_alignment(frame.y, ref_x, 0);
    const auto yy = detail::best_alignment(frame.y, ref_y, 1);
    FrameAlignment a;
    if (xx.correlation + yy.correlation >= xy.correlation + yx.correlation) {
        a.x = xx;
        a.y = yy;
    } else {
        a.x = xy;
        a.y = yx;
        a.swapped = true;
    }
    const double floor = detail::SegmentPlan(n).floor();
    if (a.x.correlation < floor || a.y.correlation < floor)
        throw AlignmentFailure("equalized symbols do not correlate with the transmitted data");
    return a;
}

struct FrameBer {
    double ber = 0.0;
    std::size_t n_errors = 0;
    std::size_t n_bits = 0;
    bool below_min_countable = false;
    double evm_percent = 0.0;
    std::size_t cycle_slips = 0; // quadrant changes between resync blocks
    FrameAlignment alignment;
};

/// Data-aided EVM_m: RMS error vector over the maximum constellation
/// magnitude, in percent.
inline double compute_evm(std::span<const cplx> symbols, std::span<const cplx> reference, const ConstellationSpec& c)
{
    if (symbols.size() != reference.size()) throw ValidationError("EVM needs equal lengths");
    if (symbols.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < symbols.size(); ++k) acc += std::norm(symbols[k] - reference[k]);
    return 100.0 * std::sqrt(acc / static_cast<double>(symbols.size())) / c.max_magnitude();
}

/// Decision-directed EVM_m against the nearest constellation points.
inline double compute_evm(std::span<const cplx> symbols, const ConstellationSpec& c)
{
    if (symbols.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& s : symbols) acc += c.nearest_distance2(s);
    return 100.0 * std::sqrt(acc / static_cast<double>(symbols.size())) / c.max_magnitude();
}

/// Aligns the frame to the transmitted streams and counts bit errors over
/// symbols [guard, n - guard) of both polarizations. With `slip_block` > 0 the
/// quadrant is re-resolved against the known data in every block of that many
/// symbols, so a cycle slip costs at most one block (genie slip correction).
inline FrameBer count_frame_ber(const rx::SymbolFrame& frame, const cvec& ref_x, const cvec& ref_y,
                                const ConstellationSpec& c, std::size_t guard = 32, std::size_t slip_block = 0)
{
    const auto a = align_frame(frame, ref_x, ref_y);
    const std::size_t n = frame.size();
    if (2 * guard >= n) throw InsufficientData("guard interval covers the whole frame");
    const unsigned b = c.bits_per_symbol();
    std::size_t errors = 0, bits = 0;
    double err2 = 0.0;
    std::size_t count = 0, slips = 0;
    auto run = [&](const cvec& out, const PolAlignment& pa) {
        int last_quadrant = pa.quadrant;
        const cvec& ref = pa.reference == 0 ? ref_x : ref_y;
        const std::size_t end = n - guard;
        const std::size_t step = slip_block > 0 ? slip_block : end - guard;
        for (std::size_t start = guard; start < end; start += step) {
            const std::size_t stop = std::min(end, start + step);
            PolAlignment best = pa;
            std::size_t best_errors = std::numeric_limits<std::size_t>::max();
            for (int q = 0; q < (slip_block > 0 ? 4 : 1); ++q) {
                PolAlignment trial = pa;
                trial.quadrant = (pa.quadrant + q) % 4;
                std::size_t e = 0;
                for (std::size_t k = start; k < stop; ++k) {
                    const std::size_t got = c.decide(detail::transform(out[k], trial));
                    const std::size_t want = c.decide(ref[(k + pa.delay) % n]);
                    e += static_cast<std::size_t>(__builtin_popcountll(got ^ want));
                }
                if (e < best_errors) {
                    best_errors = e;
                    best = trial;
                }
            }
            errors += best_errors;
            if (best.quadrant != last_quadrant) ++slips;
            last_quadrant = best.quadrant;
            for (std::size_t k = start; k < stop; ++k) {
                err2 += std::norm(detail::transform(out[k], best) - ref[(k + pa.delay) % n]);
                bits += b;
                ++count;
            }
        }
    };
    run(frame.x, a.x);
    run(frame.y, a.y);
    FrameBer r;
    r.n_errors = errors;
    r.n_bits = bits;
    r.ber = static_cast<double>(errors) / static_cast<double>(bits);
    r.below_min_countable = errors < min_countable_errors;
    r.evm_percent = 100.0 * std::sqrt(err2 / static_cast<double>(count)) / c.max_magnitude();
    r.cycle_slips = slips;
    r.alignment = a;
    return r;
}

/// Gray-coded QPSK over AWGN: per-bit Q(sqrt(Es/N0)).
inline double qpsk_ber_awgn(double esn0_linear) { return 0.5 * std::erfc(std::sqrt(esn0_linear / 2.0)); }

// ---------------------------------------------------------------------------
// FEC classes and rates

struct FecThreshold {
    double ber = 0.0;
    double overhead = 0.0;
};

struct FecPolicy {
    std::vector<FecThreshold> thresholds{{4.7e-3, 0.0625}, {1.44e-2, 0.20}};

    void validate() const
    {
        for (std::size_t i = 0; i < thresholds.size(); ++i) {
            if (!(thresholds[i].ber > 0.0) || !(thresholds[i].overhead > 0.0))
                throw ValidationError("FEC thresholds and overheads must be positive");
            if (i > 0 && thresholds[i].ber <= thresholds[i - 1].ber)
                throw ValidationError("FEC thresholds must be sorted ascending by BER");
        }
    }
};

/// Overhead of the smallest-overhead class whose threshold covers `ber`;
/// empty when no class applies.
inline std::optional<double> fec_classify(double ber, const FecPolicy& policy = {})
{
    policy.validate();
    std::optional<double> best;
    for (const auto& t : policy.thresholds)
        if (ber <= t.ber && (!best || t.overhead < *best)) best = t.overhead;
    return best;
}

inline std::string fec_label(const std::optional<double>& overhead)
{
    if (!overhead) return "fail";
    if (*overhead == 0.0) return "none";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * *overhead);
    return buf;
}

struct ChannelResult {
    std::size_t channel_index = 0;
    double carrier_frequency = 0.0; // Hz
    double ber = 0.0;
    double evm_percent = 0.0;
    std::size_t n_bits = 0;
    std::size_t n_errors = 0;
    std::optional<double> fec_overhead; // empty = fails every class; 0 = no FEC needed
    bool below_min_countable = false;
};

struct RateSummary {
    double line_rate = 0.0;       // bit/s
    double net_rate = 0.0;        // bit/s
    double line_se = 0.0;         // bit/s/Hz
    double net_se = 0.0;          // bit/s/Hz
    std::size_t n_channels = 0;
    std::size_t n_failed = 0;
};

inline RateSummary aggregate_rates(std::span<const ChannelResult> results, double symbol_rate,
                                   unsigned bits_per_symbol, unsigned n_polarizations,
                                   double channel_spacing = 42e9)
{
    RateSummary s;
    s.n_channels = results.size();
    const double per_channel = symbol_rate * bits_per_symbol * n_polarizations;
    for (const auto& r : results) {
        s.line_rate += per_channel;
        if (r.fec_overhead) s.net_rate += per_channel / (1.0 + *r.fec_overhead);
        else ++s.n_failed;
    }
    if (s.n_channels > 0 && channel_spacing > 0.0) {
        const double band = static_cast<double>(s.n_channels) * channel_spacing;
        s.line_se = s.line_rate / band;
        s.net_se = s.net_rate / band;
    }
    return s;
}

} // namespace combwdm::metrics
