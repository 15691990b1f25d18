#pragma once

// Scenario configuration files (JSON, schema version 1). Every object is
// checked for unknown keys; in strict mode they are errors, otherwise they
// are collected as warnings. The full schema is documented in README.md.

#include "combwdm/comb.hpp"
#include "combwdm/errors.hpp"
#include "combwdm/pipeline.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace combwdm::config {

using nlohmann::json;

inline constexpr int schema_version = 1;

enum class SweepAxis { symbol_rate, osnr, linewidth, channel };

inline std::string to_string(SweepAxis a)
{
    switch (a) {
    case SweepAxis::symbol_rate: return "symbol_rate";
    case SweepAxis::osnr: return "osnr";
    case SweepAxis::linewidth: return "linewidth";
    case SweepAxis::channel: return "channel";
    }
    return "?";
}

enum class PlotKind { ber_vs_osnr, ber_per_channel, evm_vs_rate, fm_spectrum, constellation };

inline std::string to_string(PlotKind k)
{
    switch (k) {
    case PlotKind::ber_vs_osnr: return "ber_vs_osnr";
    case PlotKind::ber_per_channel: return "ber_per_channel";
    case PlotKind::evm_vs_rate: return "evm_vs_rate";
    case PlotKind::fm_spectrum: return "fm_spectrum";
    case PlotKind::constellation: return "constellation";
    }
    return "?";
}

inline PlotKind plot_kind_from_name(const std::string& s)
{
    for (auto k : {PlotKind::ber_vs_osnr, PlotKind::ber_per_channel, PlotKind::evm_vs_rate, PlotKind::fm_spectrum,
                   PlotKind::constellation})
        if (to_string(k) == s) return k;
    throw ValidationError("unknown plot kind '" + s + "'");
}

struct OutputSpec {
    std::string directory = "results";
    bool csv = true;
    bool svg = true;
    std::vector<PlotKind> plots;
    std::size_t constellation_symbols = 0; // per row, X polarization after CPR
};

struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 1;

    comb::CombSpec comb;
    comb::Selection selection = comb::Selection::even(); // replaced by "all" in parsing defaults
    bool select_all = true;
    bool flatten = true;

    pipeline::ChannelSetup channel; // modulation, link, DSP and record length
    std::vector<pipeline::CprMode> cpr_modes{pipeline::CprMode::bps};
    std::optional<double> equal_snr_reference_rate; // scale OSNR with symbol rate

    SweepAxis axis = SweepAxis::osnr;
    std::vector<double> grid;

    OutputSpec output;

    std::vector<std::size_t> channels() const
    {
        if (select_all) {
            std::vector<std::size_t> all(comb.n_lines);
            for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
            return all;
        }
        return comb::selected_indices(comb.n_lines, selection);
    }

    void validate() const
    {
        comb.validate();
        if (channels().empty()) throw ValidationError("line selection is empty");
        if (grid.empty()) throw ValidationError("sweep grid must not be empty");
        if (cpr_modes.empty()) throw ValidationError("at least one CPR mode is required");
        if (channel.n_symbols < 100000) throw ValidationError("BER scenarios need at least 1e5 symbols");
        for (double v : grid)
            if (!std::isfinite(v)) throw ValidationError("sweep values must be finite");
        if (axis == SweepAxis::symbol_rate)
            for (double v : grid)
                if (!(v > 0.0)) throw ValidationError("symbol rates must be positive");
        if (axis == SweepAxis::linewidth)
            for (double v : grid)
                if (v < 0.0) throw ValidationError("linewidths must be >= 0");
        if (axis == SweepAxis::channel)
            for (double v : grid)
                if (v < 0.0 || v != std::floor(v) || v >= static_cast<double>(comb.n_lines))
                    throw ValidationError("channel sweep values must be line indices");
        if (equal_snr_reference_rate && !(*equal_snr_reference_rate > 0.0))
            throw ValidationError("equal-SNR reference rate must be positive");
        channel.validate();
    }
};

namespace detail {

// Reads keys of one JSON object and remembers which were consumed.
class Reader {
public:
    Reader(const json& j, std::string path, std::vector<std::string>& unknown)
        : j_(j), path_(std::move(path)), unknown_(unknown)
    {
        if (!j_.is_object()) throw ConfigError(path_ + " must be an object");
    }

    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    ~Reader()
    {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!used_.count(it.key())) unknown_.push_back(path_ + "." + it.key());
    }

    bool has(const std::string& key)
    {
        used_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }

    bool present(const std::string& key)
    {
        used_.insert(key);
        return j_.contains(key);
    }

    const json& at(const std::string& key)
    {
        used_.insert(key);
        return j_.at(key);
    }

    std::string where(const std::string& key) const { return path_ + "." + key; }

    template <class T>
    void get(const std::string& key, T& out)
    {
        if (!has(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where(key) + " has the wrong type");
        }
    }

    double number(const std::string& key, double fallback)
    {
        get(key, fallback);
        return fallback;
    }

    std::size_t count(const std::string& key, std::size_t fallback)
    {
        if (!has(key)) return fallback;
        const auto& v = j_.at(key);
        if (!v.is_number_integer() && !(v.is_number() && v.get<double>() == std::floor(v.get<double>())))
            throw ConfigError(where(key) + " must be an integer");
        const double d = v.get<double>();
        if (d < 0.0) throw ConfigError(where(key) + " must be >= 0");
        return static_cast<std::size_t>(d);
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string>& unknown_;
    std::set<std::string> used_;
};

inline phasenoise::FmNoiseModel parse_fm_model(const json& j, const std::string& path,
                                               std::vector<std::string>& unknown)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "comb_line") return phasenoise::comb_line_model;
        if (s == "none") return {};
        throw ConfigError(path + ": unknown model name '" + s + "'");
    }
    Reader r(j, path, unknown);
    phasenoise::FmNoiseModel m;
    if (r.has("lorentzian_linewidth_hz")) {
        m = phasenoise::FmNoiseModel::from_lorentzian(r.number("lorentzian_linewidth_hz", 0.0));
    }
    m.s_white = r.number("s_white_hz", m.s_white);
    m.s_flicker = r.number("s_flicker_hz2", m.s_flicker);
    m.s_randomwalk = r.number("s_randomwalk_hz3", m.s_randomwalk);
    try {
        m.validate();
    } catch (const Error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return m;
}

inline std::optional<double> optional_db(Reader& r, const std::string& key, std::optional<double> fallback)
{
    if (!r.present(key)) return fallback;
    if (r.at(key).is_null()) return std::nullopt;
    if (!r.at(key).is_number()) throw ConfigError(r.where(key) + " must be a number or null");
    return r.at(key).get<double>();
}

} // namespace detail

struct ParseResult {
    ScenarioConfig config;
    std::vector<std::string> warnings; // unknown keys when not strict
};

inline ParseResult parse_scenario(const json& root, bool strict = true)
{
    using detail::Reader;
    ParseResult out;
    auto& cfg = out.config;
    std::vector<std::string> unknown;
    {
        Reader top(root, "$", unknown);
        int version = schema_version;
        top.get("schema_version", version);
        if (version != schema_version)
            throw ConfigError("unsupported schema_version " + std::to_string(version));
        top.get("name", cfg.name);
        if (top.has("seed")) cfg.seed = top.count("seed", 1);
        cfg.channel.n_symbols = top.count("n_symbols", cfg.channel.n_symbols);

        if (top.has("comb")) {
            Reader c(top.at("comb"), "$.comb", unknown);
            cfg.comb.n_lines = c.count("n_lines", cfg.comb.n_lines);
            cfg.comb.fsr = c.number("fsr_hz", cfg.comb.fsr);
            cfg.comb.center_frequency = c.number("center_frequency_hz", cfg.comb.center_frequency);
            const auto ocnr = detail::optional_db(c, "ocnr_db", cfg.comb.ocnr_db);
            cfg.comb.ocnr_db = ocnr ? *ocnr : std::numeric_limits<double>::infinity();
            if (c.has("fm_model")) {
                const auto& m = c.at("fm_model");
                if (m.is_array()) {
                    for (std::size_t i = 0; i < m.size(); ++i)
                        cfg.comb.line_noise.push_back(
                            detail::parse_fm_model(m[i], "$.comb.fm_model[" + std::to_string(i) + "]", unknown));
                } else {
                    cfg.comb.line_noise = {detail::parse_fm_model(m, "$.comb.fm_model", unknown)};
                }
            }
            if (c.has("envelope")) {
                Reader e(c.at("envelope"), "$.comb.envelope", unknown);
                std::string kind = "flat";
                e.get("kind", kind);
                if (kind == "gaussian") {
                    cfg.comb.envelope_db = comb::gaussian_envelope_db(cfg.comb.n_lines, e.number("fwhm_lines", 0.0));
                } else if (kind == "table") {
                    e.get("db", cfg.comb.envelope_db);
                } else if (kind != "flat") {
                    throw ConfigError("$.comb.envelope.kind must be flat, gaussian or table");
                }
            }
            if (c.has("selection")) {
                const auto& s = c.at("selection");
                if (s.is_string()) {
                    const auto v = s.get<std::string>();
                    cfg.select_all = v == "all";
                    if (v == "odd") cfg.selection = comb::Selection::odd();
                    else if (v == "even") cfg.selection = comb::Selection::even();
                    else if (v != "all") throw ConfigError("$.comb.selection must be all, odd, even or a list");
                } else if (s.is_array()) {
                    cfg.select_all = false;
                    try {
                        cfg.selection = comb::Selection::of(s.get<std::vector<std::size_t>>());
                    } catch (const json::exception&) {
                        throw ConfigError("$.comb.selection list must hold line indices");
                    }
                } else {
                    throw ConfigError("$.comb.selection must be all, odd, even or a list");
                }
            }
            c.get("flatten", cfg.flatten);
        }

        auto& ch = cfg.channel;
        if (top.has("modulation")) {
            Reader m(top.at("modulation"), "$.modulation", unknown);
            if (m.has("format")) {
                try {
                    ch.modulation = tx::ConstellationSpec::from_name(m.at("format").get<std::string>()).modulation();
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("$.modulation.format: ") + e.what());
                }
            }
            ch.symbol_rate = m.number("symbol_rate_hz", ch.symbol_rate);
            ch.rolloff = m.number("rolloff", ch.rolloff);
            ch.samples_per_symbol = m.count("samples_per_symbol", ch.samples_per_symbol);
            ch.pdm_delay_symbols = m.count("pdm_delay_symbols", ch.pdm_delay_symbols);
        }

        if (top.has("link")) {
            Reader l(top.at("link"), "$.link", unknown);
            ch.link.fiber_length = l.number("fiber_length_m", ch.link.fiber_length);
            ch.link.dispersion_ps_nm_km = l.number("dispersion_ps_nm_km", ch.link.dispersion_ps_nm_km);
            ch.link.reference_wavelength = l.number("reference_wavelength_m", ch.link.reference_wavelength);
            ch.link.target_osnr_db = detail::optional_db(l, "osnr_db", ch.link.target_osnr_db);
            ch.link.osnr_tilt_db_per_thz = l.number("osnr_tilt_db_per_thz", ch.link.osnr_tilt_db_per_thz);
            if (l.has("lo_fm_model")) ch.link.lo_model = detail::parse_fm_model(l.at("lo_fm_model"), "$.link.lo_fm_model", unknown);
            ch.link.lo_frequency_offset = l.number("lo_frequency_offset_hz", ch.link.lo_frequency_offset);
            ch.polarization_angle = l.number("polarization_angle_rad", ch.polarization_angle);
            ch.polarization_phase = l.number("polarization_phase_rad", ch.polarization_phase);
            ch.sampling_phase_ui = l.number("sampling_phase_ui", ch.sampling_phase_ui);
            cfg.equal_snr_reference_rate = detail::optional_db(l, "equal_snr_reference_rate_hz", std::nullopt);
        }

        if (top.has("dsp")) {
            Reader d(top.at("dsp"), "$.dsp", unknown);
            auto& dsp = ch.dsp;
            if (d.has("cpr_mode")) {
                const auto& m = d.at("cpr_mode");
                std::vector<std::string> names;
                if (m.is_string()) names = {m.get<std::string>()};
                else if (m.is_array()) names = m.get<std::vector<std::string>>();
                else throw ConfigError("$.dsp.cpr_mode must be a string or list");
                cfg.cpr_modes.clear();
                for (const auto& n : names) {
                    if (n == "bps") cfg.cpr_modes.push_back(pipeline::CprMode::bps);
                    else if (n == "blockwise") cfg.cpr_modes.push_back(pipeline::CprMode::blockwise);
                    else throw ConfigError("$.dsp.cpr_mode entries must be bps or blockwise");
                }
            }
            if (d.has("equalizer")) {
                Reader e(d.at("equalizer"), "$.dsp.equalizer", unknown);
                dsp.equalizer.n_taps = e.count("n_taps", dsp.equalizer.n_taps);
                dsp.equalizer.step_size = e.number("step_size", dsp.equalizer.step_size);
                dsp.equalizer.n_training_passes = e.count("training_passes", dsp.equalizer.n_training_passes);
            }
            if (d.has("bps")) {
                Reader b(d.at("bps"), "$.dsp.bps", unknown);
                dsp.bps.n_test_phases = b.count("test_phases", dsp.bps.n_test_phases);
                dsp.bps.half_range_deg = b.number("half_range_deg", dsp.bps.half_range_deg);
                dsp.bps.window_n = b.count("window", dsp.bps.window_n);
            }
            if (d.has("blockwise")) {
                Reader b(d.at("blockwise"), "$.dsp.blockwise", unknown);
                dsp.blockwise.block_length = b.count("block_length", dsp.blockwise.block_length);
                b.get("estimate_frequency", dsp.blockwise.estimate_frequency);
            }
            d.get("genie_timing", dsp.genie_timing);
            d.get("estimate_frequency", dsp.estimate_frequency);
            d.get("compensate_cd", dsp.compensate_cd);
            dsp.residual_dispersion_ps_nm = d.number("residual_dispersion_ps_nm", dsp.residual_dispersion_ps_nm);
            dsp.slip_resync_block = d.count("slip_resync_block", dsp.slip_resync_block);
        }

        if (!top.has("sweep")) throw ConfigError("$.sweep is required");
        {
            Reader s(top.at("sweep"), "$.sweep", unknown);
            std::string axis;
            s.get("axis", axis);
            if (axis == "symbol_rate") cfg.axis = SweepAxis::symbol_rate;
            else if (axis == "osnr") cfg.axis = SweepAxis::osnr;
            else if (axis == "linewidth") cfg.axis = SweepAxis::linewidth;
            else if (axis == "channel") cfg.axis = SweepAxis::channel;
            else throw ConfigError("$.sweep.axis must be symbol_rate, osnr, linewidth or channel");
            s.get("values", cfg.grid);
        }

        if (top.has("output")) {
            Reader o(top.at("output"), "$.output", unknown);
            o.get("directory", cfg.output.directory);
            if (o.has("formats")) {
                const auto f = o.at("formats").get<std::vector<std::string>>();
                cfg.output.csv = cfg.output.svg = false;
                for (const auto& x : f) {
                    if (x == "csv") cfg.output.csv = true;
                    else if (x == "svg") cfg.output.svg = true;
                    else throw ConfigError("$.output.formats entries must be csv or svg");
                }
            }
            if (o.has("plots")) {
                for (const auto& p : o.at("plots").get<std::vector<std::string>>()) {
                    try {
                        cfg.output.plots.push_back(plot_kind_from_name(p));
                    } catch (const ValidationError& e) {
                        throw ConfigError(std::string("$.output.plots: ") + e.what());
                    }
                }
            }
            cfg.output.constellation_symbols = o.count("constellation_symbols", 0);
        }
    }
    // a channel sweep without values covers the selection
    if (cfg.axis == SweepAxis::channel && cfg.grid.empty())
        for (auto c : cfg.channels()) cfg.grid.push_back(static_cast<double>(c));

    if (!unknown.empty()) {
        if (strict) {
            std::string msg = "unknown configuration keys:";
            for (const auto& k : unknown) msg += " " + k;
            throw ConfigError(msg);
        }
        out.warnings = unknown;
    }
    try {
        cfg.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(std::string("invalid scenario: ") + e.what());
    }
    return out;
}

inline ParseResult load_scenario(const std::string& path, bool strict = true)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true); // comments allowed
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_scenario(j, strict);
}

} // namespace combwdm::config
