#pragma once

// Static SVG figures. Each kind is built as a Figure (the plotted data) and
// then rendered, so tests can inspect exactly what was drawn.

#include "combwdm/config.hpp"
#include "combwdm/harness.hpp"
#include "combwdm/phasenoise.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace combwdm::plots {

using config::PlotKind;

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    bool lines = true;
    bool markers = true;
};

struct HLine {
    double y = 0.0;
    std::string label;
};

struct Figure {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    bool logx = false;
    bool logy = false;
    bool equal_aspect = false;
    std::vector<Series> series;
    std::vector<HLine> hlines;
};

namespace detail {

inline std::string escape(const std::string& s)
{
    std::string o;
    for (char c : s) {
        if (c == '&') o += "&amp;";
        else if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '"') o += "&quot;";
        else o += c;
    }
    return o;
}

inline std::string fmt(const char* f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

struct Axis {
    double lo = 0.0, hi = 1.0; // in plot coordinates (log10 for log axes)
    bool log = false;
    std::vector<double> ticks; // plot coordinates

    double map(double v) const { return log ? std::log10(v) : v; }
    bool usable(double v) const { return std::isfinite(v) && (!log || v > 0.0); }

    std::string label(double t) const
    {
        if (log) return "1e" + fmt("%.0f", t);
        return fmt("%g", std::abs(t) < 1e-12 * std::max(std::abs(lo), std::abs(hi)) ? 0.0 : t);
    }
};

inline Axis make_axis(std::vector<double> values, bool log)
{
    Axis a;
    a.log = log;
    double lo = INFINITY, hi = -INFINITY;
    for (double v : values)
        if (a.usable(v)) {
            lo = std::min(lo, a.map(v));
            hi = std::max(hi, a.map(v));
        }
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (log) {
        lo = std::floor(lo);
        hi = std::ceil(hi);
        if (hi <= lo) hi = lo + 1.0;
        const double step = std::max(1.0, std::ceil((hi - lo) / 10.0));
        for (double t = lo; t <= hi + 1e-9; t += step) a.ticks.push_back(t);
    } else {
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            const double pad = std::abs(hi) > 0 ? 0.05 * std::abs(hi) : 1.0;
            lo -= pad;
            hi += pad;
        }
        const double raw = (hi - lo) / 6.0;
        const double mag = std::pow(10.0, std::floor(std::log10(raw)));
        double step = mag;
        for (double m : {1.0, 2.0, 5.0, 10.0})
            if (m * mag >= raw) {
                step = m * mag;
                break;
            }
        lo = std::floor(lo / step) * step;
        hi = std::ceil(hi / step) * step;
        for (double t = lo; t <= hi + step * 1e-9; t += step) a.ticks.push_back(t);
    }
    a.lo = lo;
    a.hi = hi;
    return a;
}

inline const char* color(std::size_t i)
{
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22"};
    return palette[i % 10];
}

} // namespace detail

inline std::string render_svg(const Figure& fig)
{
    using detail::fmt;
    const double W = 720, H = 480, ml = 80, mr = 170, mt = 40, mb = 60;
    double pw = W - ml - mr, ph = H - mt - mb;

    std::vector<double> xs, ys;
    for (const auto& s : fig.series) {
        xs.insert(xs.end(), s.x.begin(), s.x.end());
        ys.insert(ys.end(), s.y.begin(), s.y.end());
    }
    for (const auto& h : fig.hlines) ys.push_back(h.y);
    auto ax = detail::make_axis(xs, fig.logx);
    auto ay = detail::make_axis(ys, fig.logy);
    if (fig.equal_aspect) {
        const double span = std::max(ax.hi - ax.lo, ay.hi - ay.lo);
        ax = detail::make_axis({ax.lo, ax.lo + span}, false);
        ay = detail::make_axis({ay.lo, ay.lo + span}, false);
        pw = ph = std::min(pw, ph);
    }
    auto px = [&](double v) { return ml + (ax.map(v) - ax.lo) / (ax.hi - ax.lo) * pw; };
    auto py = [&](double v) { return mt + ph - (ay.map(v) - ay.lo) / (ay.hi - ay.lo) * ph; };
    auto inside = [&](double x, double y) {
        if (!ax.usable(x) || !ay.usable(y)) return false;
        return ax.map(x) >= ax.lo - 1e-9 && ax.map(x) <= ax.hi + 1e-9 && ay.map(y) >= ay.lo - 1e-9 &&
               ay.map(y) <= ay.hi + 1e-9;
    };

    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 "
      << W << ' ' << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<text x=\"" << ml + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << detail::escape(fig.title) << "</text>\n";
    o << "<g class=\"axes\" stroke=\"#000\" fill=\"none\"><rect x=\"" << ml << "\" y=\"" << mt << "\" width=\""
      << fmt("%.2f", pw) << "\" height=\"" << fmt("%.2f", ph) << "\"/></g>\n";

    o << "<g class=\"ticks\">\n";
    for (double t : ax.ticks) {
        const double x = ml + (t - ax.lo) / (ax.hi - ax.lo) * pw;
        o << "<line x1=\"" << fmt("%.2f", x) << "\" y1=\"" << mt << "\" x2=\"" << fmt("%.2f", x) << "\" y2=\""
          << fmt("%.2f", mt + ph) << "\" stroke=\"#ddd\"/>";
        o << "<text x=\"" << fmt("%.2f", x) << "\" y=\"" << fmt("%.2f", mt + ph + 16)
          << "\" text-anchor=\"middle\">" << ax.label(t) << "</text>\n";
    }
    for (double t : ay.ticks) {
        const double y = mt + ph - (t - ay.lo) / (ay.hi - ay.lo) * ph;
        o << "<line x1=\"" << ml << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\"" << fmt("%.2f", ml + pw) << "\" y2=\""
          << fmt("%.2f", y) << "\" stroke=\"#ddd\"/>";
        o << "<text x=\"" << ml - 6 << "\" y=\"" << fmt("%.2f", y + 4) << "\" text-anchor=\"end\">" << ay.label(t)
          << "</text>\n";
    }
    o << "</g>\n";
    o << "<text x=\"" << fmt("%.2f", ml + pw / 2) << "\" y=\"" << H - 16 << "\" text-anchor=\"middle\">"
      << detail::escape(fig.xlabel) << "</text>\n";
    o << "<text transform=\"translate(20," << fmt("%.2f", mt + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << detail::escape(fig.ylabel) << "</text>\n";

    for (const auto& h : fig.hlines) {
        if (!ay.usable(h.y)) continue;
        const double y = py(h.y);
        o << "<g class=\"threshold\"><line x1=\"" << ml << "\" y1=\"" << fmt("%.2f", y) << "\" x2=\""
          << fmt("%.2f", ml + pw) << "\" y2=\"" << fmt("%.2f", y)
          << "\" stroke=\"#555\" stroke-dasharray=\"6,4\"/><text x=\"" << fmt("%.2f", ml + pw - 4) << "\" y=\""
          << fmt("%.2f", y - 4) << "\" text-anchor=\"end\" fill=\"#555\">" << detail::escape(h.label)
          << "</text></g>\n";
    }

    for (std::size_t k = 0; k < fig.series.size(); ++k) {
        const auto& s = fig.series[k];
        const char* c = detail::color(k);
        o << "<g class=\"series\" data-label=\"" << detail::escape(s.label) << "\">\n";
        if (s.lines) {
            o << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
            bool first = true;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!inside(s.x[i], s.y[i])) continue;
                o << (first ? "" : " ") << fmt("%.2f", px(s.x[i])) << ',' << fmt("%.2f", py(s.y[i]));
                first = false;
            }
            o << "\"/>\n";
        }
        if (s.markers) {
            const double r = s.lines ? 3.0 : 1.5;
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                if (!inside(s.x[i], s.y[i])) continue;
                o << "<circle cx=\"" << fmt("%.2f", px(s.x[i])) << "\" cy=\"" << fmt("%.2f", py(s.y[i]))
                  << "\" r=\"" << r << "\" fill=\"" << c << "\"/>\n";
            }
        }
        o << "</g>\n";
        const double ly = mt + 10 + 18.0 * static_cast<double>(k);
        o << "<g class=\"legend\"><rect x=\"" << W - mr + 14 << "\" y=\"" << fmt("%.2f", ly - 8)
          << "\" width=\"12\" height=\"10\" fill=\"" << c << "\"/><text x=\"" << W - mr + 32 << "\" y=\""
          << fmt("%.2f", ly + 1) << "\">" << detail::escape(s.label) << "</text></g>\n";
    }
    o << "</svg>\n";
    return o.str();
}

inline void write_svg(const std::string& path, const Figure& fig)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("cannot write " + path);
    out << render_svg(fig);
}

// ---------------------------------------------------------------------------
// Figure builders

inline std::vector<HLine> fec_lines()
{
    std::vector<HLine> h;
    for (const auto& t : metrics::FecPolicy{}.thresholds)
        h.push_back({t.ber, "FEC " + detail::fmt("%.4g", 100.0 * t.overhead) + "% OH"});
    return h;
}

namespace detail {

inline void require_rows(const std::vector<harness::ResultRow>& rows)
{
    std::size_t ok = 0;
    for (const auto& r : rows) ok += r.ok();
    if (ok == 0) throw ValidationError("nothing to plot: no successful result rows");
}

inline bool varies(const std::vector<harness::ResultRow>& rows, auto key)
{
    for (const auto& r : rows)
        if (key(r) != key(rows.front())) return true;
    return false;
}

// Series keyed by label, in order of first appearance, points sorted by x.
struct SeriesBuilder {
    std::vector<Series> series;

    void add(const std::string& label, double x, double y, bool lines)
    {
        for (auto& s : series)
            if (s.label == label) {
                s.x.push_back(x);
                s.y.push_back(y);
                return;
            }
        series.push_back({label, {x}, {y}, lines, true});
    }

    std::vector<Series> sorted()
    {
        for (auto& s : series) {
            std::vector<std::size_t> idx(s.x.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s.x[a] < s.x[b]; });
            Series t{s.label, {}, {}, s.lines, s.markers};
            for (auto i : idx) {
                t.x.push_back(s.x[i]);
                t.y.push_back(s.y[i]);
            }
            s = std::move(t);
        }
        return series;
    }
};

} // namespace detail

/// BER against effective OSNR, one curve per CPR mode (and per channel or
/// symbol rate where those vary). Zero-BER points cannot sit on a log axis
/// and are left out.
inline Figure ber_vs_osnr_figure(const std::vector<harness::ResultRow>& rows)
{
    detail::require_rows(rows);
    const bool by_channel = detail::varies(rows, [](const auto& r) { return r.channel_index; });
    const bool by_rate = detail::varies(rows, [](const auto& r) { return r.symbol_rate; });
    detail::SeriesBuilder b;
    for (const auto& r : rows) {
        if (!r.ok() || !(r.ber > 0.0) || !std::isfinite(r.osnr_db)) continue;
        std::string label = r.cpr_mode;
        if (by_channel) label += " ch" + std::to_string(r.channel_index);
        if (by_rate) label += " " + detail::fmt("%g", r.symbol_rate / 1e9) + " GBd";
        b.add(label, r.osnr_db, r.ber, true);
    }
    return {"BER vs OSNR", "OSNR (dB, 0.1 nm)", "BER", false, true, false, b.sorted(), fec_lines()};
}

inline Figure ber_per_channel_figure(const std::vector<harness::ResultRow>& rows)
{
    detail::require_rows(rows);
    const bool by_sweep = detail::varies(rows, [](const auto& r) { return r.sweep_index; });
    detail::SeriesBuilder b;
    for (const auto& r : rows) {
        if (!r.ok() || !(r.ber > 0.0)) continue;
        std::string label = r.cpr_mode;
        if (by_sweep) label += " #" + std::to_string(r.sweep_index);
        b.add(label, r.carrier_frequency / 1e12, r.ber, false);
    }
    return {"BER per channel", "carrier frequency (THz)", "BER", false, true, false, b.sorted(), fec_lines()};
}

inline Figure evm_vs_rate_figure(const std::vector<harness::ResultRow>& rows)
{
    detail::require_rows(rows);
    const bool by_channel = detail::varies(rows, [](const auto& r) { return r.channel_index; });
    detail::SeriesBuilder b;
    for (const auto& r : rows) {
        if (!r.ok()) continue;
        std::string label = r.cpr_mode;
        if (by_channel) label += " ch" + std::to_string(r.channel_index);
        b.add(label, r.symbol_rate / 1e9, r.evm_percent, true);
    }
    return {"EVM vs symbol rate", "symbol rate (GBd)", "EVM (%)", false, false, false, b.sorted(), {}};
}

/// Smoothed FM-noise PSD of a phase record, with the fitted model overlaid
/// when `fit` is given.
inline Figure fm_spectrum_figure(const phasenoise::PhaseRecord& record,
                                 const std::optional<phasenoise::FmNoiseModel>& fit = std::nullopt)
{
    record.validate();
    const auto spec = phasenoise::smooth_spectrum(phasenoise::estimate_fm_spectrum(record));
    Figure f{"FM-noise spectrum", "frequency (Hz)", "S_f (Hz^2/Hz)", true, true, false, {}, {}};
    Series m{"measured", spec.frequencies, spec.psd, true, false};
    f.series.push_back(std::move(m));
    if (fit) {
        Series s{"fit", spec.frequencies, {}, true, false};
        for (double x : spec.frequencies) s.y.push_back(fit->psd(x));
        f.series.push_back(std::move(s));
    }
    return f;
}

inline Figure constellation_figure(const harness::ConstellationSample& sample)
{
    if (sample.symbols.empty()) throw ValidationError("nothing to plot: empty constellation");
    Series s{"X pol, " + sample.cpr_mode, {}, {}, false, true};
    for (const auto& z : sample.symbols) {
        s.x.push_back(z.real());
        s.y.push_back(z.imag());
    }
    char title[96];
    std::snprintf(title, sizeof title, "Constellation, sweep %zu, channel %zu", sample.sweep_index,
                  sample.channel_index);
    return {title, "I", "Q", false, false, true, {std::move(s)}, {}};
}

/// Figure of a result-table kind; fm_spectrum and constellation need their
/// own inputs and are rejected here.
inline Figure results_figure(PlotKind kind, const std::vector<harness::ResultRow>& rows)
{
    switch (kind) {
    case PlotKind::ber_vs_osnr: return ber_vs_osnr_figure(rows);
    case PlotKind::ber_per_channel: return ber_per_channel_figure(rows);
    case PlotKind::evm_vs_rate: return evm_vs_rate_figure(rows);
    default: break;
    }
    throw ValidationError("plot kind " + config::to_string(kind) + " is not drawn from a results table");
}

/// Writes the configured plots of a finished run into `dir`; returns the
/// file paths in order.
inline std::vector<std::string> emit_plots(const config::ScenarioConfig& cfg, const harness::RunResult& run,
                                           const std::string& dir)
{
    std::vector<std::string> files;
    for (auto kind : cfg.output.plots) {
        if (kind == PlotKind::fm_spectrum) {
            // carrier phase of the first selected line, 2^20 samples at 2 GHz
            const auto line = cfg.channels().front();
            const auto model = cfg.comb.line_model(line);
            const auto rec = phasenoise::synthesize_phase(model, std::size_t{1} << 20, 2e9,
                                                          derive_seed({cfg.seed, line, 0xf5}));
            const auto path = dir + "/" + cfg.name + "_fm_spectrum.svg";
            write_svg(path, fm_spectrum_figure(rec, model));
            files.push_back(path);
        } else if (kind == PlotKind::constellation) {
            for (const auto& s : run.constellations) {
                const auto path = dir + "/" + cfg.name + "_constellation_s" + std::to_string(s.sweep_index) + "_c" +
                                  std::to_string(s.channel_index) + "_" + s.cpr_mode + ".svg";
                write_svg(path, constellation_figure(s));
                files.push_back(path);
            }
        } else {
            const auto path = dir + "/" + cfg.name + "_" + config::to_string(kind) + ".svg";
            write_svg(path, results_figure(kind, run.rows));
            files.push_back(path);
        }
    }
    return files;
}

} // namespace combwdm::plots
