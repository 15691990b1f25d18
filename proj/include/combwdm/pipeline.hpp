#pragma once

// One WDM channel end to end: PRBS -> QAM -> RC shaping -> PDM -> carrier
// phase noise -> fiber CD -> ASE -> LO down-conversion -> CD compensation ->
// 2 sps -> timing -> CMA -> frequency offset -> CPR -> BER/EVM.

#include "combwdm/channel.hpp"
#include "combwdm/comb.hpp"
#include "combwdm/metrics.hpp"
#include "combwdm/phasenoise.hpp"
#include "combwdm/random.hpp"
#include "combwdm/rxdsp.hpp"
#include "combwdm/txdsp.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

namespace combwdm::pipeline {

enum class CprMode { blockwise, bps };

inline std::string to_string(CprMode m) { return m == CprMode::bps ? "bps" : "blockwise"; }

struct DspSetup {
    rx::EqualizerConfig equalizer;
    rx::BpsConfig bps;
    rx::BlockCprConfig blockwise;
    bool genie_timing = false;
    bool estimate_frequency = true;
    bool compensate_cd = true;
    double residual_dispersion_ps_nm = 0.0; // left uncompensated by the static CD filter
    // Quadrant re-resolved against the known data every this many symbols, so
    // a cycle slip costs only its own block; 0 aligns the frame once.
    std::size_t slip_resync_block = 1024;
};

struct ChannelSetup {
    tx::Modulation modulation = tx::Modulation::qam16;
    double symbol_rate = 38e9;
    double rolloff = 0.1;
    std::size_t samples_per_symbol = 4;
    std::size_t n_symbols = 400000;
    // PDM decorrelation in whole symbols (5.3 ns at 40 GBd), held fixed across
    // symbol rates: X and Y are shifted copies of one 2047-periodic sequence and
    // 16QAM CMA locks onto spurious solutions for many shifts.
    std::size_t pdm_delay_symbols = 212;
    phasenoise::FmNoiseModel carrier_model;             // transmit carrier FM noise
    double ocnr_db = std::numeric_limits<double>::infinity();
    channel::LinkSpec link;
    double osnr_offset_hz = 0.0;                        // position in the comb, for OSNR tilt
    double polarization_angle = 0.5;                    // rad
    double polarization_phase = 0.3;                    // rad
    double sampling_phase_ui = 0.25;                    // receiver clock phase
    DspSetup dsp;

    void validate() const
    {
        if (!(symbol_rate > 0.0)) throw ValidationError("symbol rate must be positive");
        if (samples_per_symbol < 2) throw ValidationError("need at least 2 samples per symbol");
        if (n_symbols < 10000) throw ValidationError("channel simulation needs at least 1e4 symbols");
        if (2 * pdm_delay_symbols >= n_symbols) throw ValidationError("PDM delay must be shorter than half the record");
        carrier_model.validate();
        link.validate();
        dsp.equalizer.validate();
        dsp.bps.validate();
    }

    /// Effective OSNR (dB) after folding in the carrier's OCNR; +inf if noiseless.
    double effective_osnr_db() const
    {
        const auto osnr = link.channel_osnr_db(osnr_offset_hz);
        double inv = 0.0;
        if (osnr) inv += 1.0 / db_to_linear(*osnr);
        if (std::isfinite(ocnr_db)) inv += 1.0 / db_to_linear(ocnr_db);
        return inv > 0.0 ? linear_to_db(1.0 / inv) : std::numeric_limits<double>::infinity();
    }
};

/// Receiver state after frequency-offset removal, ready for CPR.
struct Received {
    rx::SymbolFrame frame;
    cvec ref_x;
    cvec ref_y;
    tx::ConstellationSpec constellation = tx::ConstellationSpec::qpsk();
    double timing_estimate_ui = 0.0;
    double osnr_db = 0.0;
};

inline std::uint16_t prbs_state(std::uint64_t seed) { return static_cast<std::uint16_t>(seed % 2047u + 1u); }

/// Link used by the receiver's static CD filter: the transmission link minus
/// the configured residual dispersion.
inline channel::LinkSpec compensation_link(const channel::LinkSpec& link, double residual_ps_nm)
{
    if (residual_ps_nm == 0.0) return link;
    if (link.dispersion_ps_nm_km == 0.0) throw ValidationError("residual dispersion needs a dispersive fiber");
    auto comp = link;
    const double accumulated_ps_nm = link.dispersion_ps_nm_km * link.fiber_length * 1e-3;
    comp.fiber_length = (accumulated_ps_nm - residual_ps_nm) / link.dispersion_ps_nm_km * 1e3;
    if (comp.fiber_length < 0.0) {
        comp.fiber_length = -comp.fiber_length;
        comp.dispersion_ps_nm_km = -comp.dispersion_ps_nm_km;
    }
    return comp;
}

/// Transmitter, link and receiver DSP up to frequency-offset removal. The
/// carrier phase comes from `tone` when given (a comb line sampled at the
/// transmitter rate), otherwise from `cfg.carrier_model`.
inline Received simulate_front_end(const ChannelSetup& cfg, std::uint64_t seed,
                                   const comb::CarrierTone* tone = nullptr)
{
    cfg.validate();
    const auto c = tx::ConstellationSpec::of(cfg.modulation);
    const double rs = cfg.symbol_rate;
    const double fs = rs * static_cast<double>(cfg.samples_per_symbol);

    // transmitter
    const auto bits = tx::prbs(11, prbs_state(stream_seed(seed, Stream::prbs)), cfg.n_symbols * c.bits_per_symbol());
    const auto symbols = tx::map_symbols(bits, c);
    tx::PulseShape shape;
    shape.rolloff = cfg.rolloff;
    shape.samples_per_symbol = cfg.samples_per_symbol;
    const std::size_t delay_symbols = cfg.pdm_delay_symbols;
    auto w = tx::emulate_pdm(tx::shape_pulses(symbols, shape), fs, rs, static_cast<double>(delay_symbols) / rs);

    Received out;
    out.constellation = c;
    out.ref_x = symbols;
    out.ref_y.resize(cfg.n_symbols);
    for (std::size_t k = 0; k < cfg.n_symbols; ++k) out.ref_y[(k + delay_symbols) % cfg.n_symbols] = symbols[k];

    if (tone) {
        w = tx::apply_carrier(std::move(w), *tone);
    } else if (!cfg.carrier_model.is_zero()) {
        comb::CarrierTone own;
        own.phase_record =
            phasenoise::synthesize_phase(cfg.carrier_model, w.size(), fs, stream_seed(seed, Stream::carrier_phase));
        w = tx::apply_carrier(std::move(w), own);
    }

    // link
    w = channel::apply_polarization_rotation(std::move(w),
                                             channel::jones_rotation(cfg.polarization_angle, cfg.polarization_phase));
    w = channel::apply_cd(std::move(w), cfg.link, channel::CdDirection::forward);
    out.osnr_db = cfg.effective_osnr_db();
    w = channel::load_ase_noise(std::move(w), out.osnr_db, stream_seed(seed, Stream::ase));
    w = channel::coherent_receive(std::move(w), cfg.link, stream_seed(seed, Stream::lo_phase));
    w = channel::apply_delay(std::move(w), cfg.sampling_phase_ui / rs);

    // receiver DSP
    if (cfg.dsp.compensate_cd)
        w = channel::apply_cd(std::move(w), compensation_link(cfg.link, cfg.dsp.residual_dispersion_ps_nm),
                              channel::CdDirection::inverse);
    w = rx::resample_to_2sps(w);
    if (cfg.dsp.genie_timing) {
        w = channel::apply_delay(std::move(w), -cfg.sampling_phase_ui / rs);
        out.timing_estimate_ui = cfg.sampling_phase_ui;
    } else {
        auto t = rx::timing_recovery_with_estimate(w);
        w = std::move(t.waveform);
        out.timing_estimate_ui = t.estimated_offset_ui;
    }
    out.frame = rx::cma_equalize(w, cfg.dsp.equalizer);
    if (cfg.dsp.estimate_frequency) {
        const double df = rx::estimate_frequency_offset(out.frame, c);
        out.frame = rx::correct_frequency_offset(std::move(out.frame), df);
    }
    return out;
}

struct ChannelOutcome {
    metrics::FrameBer ber;
    CprMode mode = CprMode::bps;
    double osnr_db = 0.0;
    bool cma_reinitialized = false;
    double frequency_offset = 0.0;
    double timing_estimate_ui = 0.0;
    rx::SymbolFrame frame; // after CPR
};

inline ChannelOutcome finish_channel(const Received& r, CprMode mode, const DspSetup& dsp, std::size_t guard = 32)
{
    ChannelOutcome o;
    o.mode = mode;
    o.osnr_db = r.osnr_db;
    o.cma_reinitialized = r.frame.cma_reinitialized;
    o.frequency_offset = r.frame.frequency_offset;
    o.timing_estimate_ui = r.timing_estimate_ui;
    o.frame = mode == CprMode::bps ? rx::cpr_bps(r.frame, r.constellation, dsp.bps)
                                   : rx::cpr_blockwise(r.frame, r.constellation, dsp.blockwise);
    o.ber = metrics::count_frame_ber(o.frame, r.ref_x, r.ref_y, r.constellation, guard, dsp.slip_resync_block);
    return o;
}

inline ChannelOutcome simulate_channel(const ChannelSetup& cfg, CprMode mode, std::uint64_t seed,
                                       const comb::CarrierTone* tone = nullptr)
{
    return finish_channel(simulate_front_end(cfg, seed, tone), mode, cfg.dsp);
}

} // namespace combwdm::pipeline
