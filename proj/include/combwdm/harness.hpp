#pragma once

// Scenario runner: expands a ScenarioConfig into (sweep point, channel)
// tasks, runs them on a worker pool and collects one row per task and CPR
// mode in a fixed order. Results CSV schema version 1 (see README.md).

#include "combwdm/config.hpp"
#include "combwdm/metrics.hpp"
#include "combwdm/pipeline.hpp"
#include "combwdm/random.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace combwdm::harness {

inline constexpr int csv_schema_version = 1;

struct ResultRow {
    std::string scenario;
    std::string sweep_axis;
    std::size_t sweep_index = 0;
    double sweep_value = 0.0;
    std::size_t channel_index = 0;
    double carrier_frequency = 0.0; // Hz
    double symbol_rate = 0.0;       // Bd
    std::string modulation;
    std::string cpr_mode;
    double osnr_db = 0.0;           // effective, +inf when noiseless
    double ber = 0.0;
    std::size_t n_errors = 0;
    std::size_t n_bits = 0;
    bool below_min_countable = false;
    double evm_percent = 0.0;
    std::string fec_class;
    std::size_t cycle_slips = 0;
    double frequency_offset = 0.0;  // Hz
    double timing_offset_ui = 0.0;
    bool cma_reinitialized = false;
    double channel_spacing = 0.0;   // Hz
    std::string status = "ok";      // ok | error
    std::string message;

    bool ok() const { return status == "ok"; }
};

inline const std::vector<std::string>& csv_columns()
{
    static const std::vector<std::string> cols{
        "scenario",       "sweep_axis",        "sweep_index",      "sweep_value",       "channel_index",
        "carrier_frequency_hz", "symbol_rate_hz", "modulation",     "cpr_mode",          "osnr_db",
        "ber",            "n_errors",          "n_bits",           "below_min_countable", "evm_percent",
        "fec_class",      "cycle_slips",       "frequency_offset_hz", "timing_offset_ui", "cma_reinitialized",
        "channel_spacing_hz", "status",        "message"};
    return cols;
}

struct ConstellationSample {
    std::size_t sweep_index = 0;
    std::size_t channel_index = 0;
    std::string cpr_mode;
    cvec symbols; // X polarization after CPR
};

struct RunResult {
    std::vector<ResultRow> rows; // sweep index, then channel, then CPR mode order
    std::vector<ConstellationSample> constellations;
    std::vector<std::string> warnings;

    bool all_ok() const
    {
        return std::all_of(rows.begin(), rows.end(), [](const ResultRow& r) { return r.ok(); });
    }
};

struct RunOptions {
    std::size_t threads = 0; // 0 = hardware concurrency
};

/// One (sweep point, channel) task with its seed and fully resolved setup.
struct Task {
    std::size_t sweep_index = 0;
    double sweep_value = 0.0;
    std::size_t channel_index = 0;
    std::uint64_t seed = 0;
    comb::CombSpec comb;
    pipeline::ChannelSetup setup;
};

inline std::vector<Task> expand_tasks(const config::ScenarioConfig& cfg)
{
    using config::SweepAxis;
    std::vector<Task> tasks;
    const auto selected = cfg.channels();
    for (std::size_t i = 0; i < cfg.grid.size(); ++i) {
        const double v = cfg.grid[i];
        std::vector<std::size_t> chans = selected;
        if (cfg.axis == SweepAxis::channel) chans = {static_cast<std::size_t>(v)};
        for (auto c : chans) {
            Task t;
            t.sweep_index = i;
            t.sweep_value = v;
            t.channel_index = c;
            t.seed = derive_seed({cfg.seed, c, i});
            t.comb = cfg.comb;
            t.setup = cfg.channel;
            auto& s = t.setup;
            switch (cfg.axis) {
            case SweepAxis::symbol_rate: s.symbol_rate = v; break;
            case SweepAxis::osnr: s.link.target_osnr_db = v; break;
            case SweepAxis::linewidth: t.comb.line_noise = {phasenoise::FmNoiseModel::from_lorentzian(v)}; break;
            case SweepAxis::channel: break;
            }
            if (s.link.target_osnr_db) {
                if (cfg.equal_snr_reference_rate)
                    *s.link.target_osnr_db += linear_to_db(s.symbol_rate / *cfg.equal_snr_reference_rate);
                if (!cfg.flatten) *s.link.target_osnr_db += t.comb.line_power_db(c);
            }
            s.ocnr_db = t.comb.ocnr_db;
            s.osnr_offset_hz = t.comb.line_frequency(c) - t.comb.center_frequency;
            tasks.push_back(std::move(t));
        }
    }
    return tasks;
}

namespace detail {

inline std::string clean_message(std::string m)
{
    for (auto& ch : m)
        if (ch == ',' || ch == '\n' || ch == '\r' || ch == '"') ch = ';';
    return m;
}

inline void run_task(const config::ScenarioConfig& cfg, const Task& t, std::vector<ResultRow>& rows,
                     std::vector<ConstellationSample>& constellations)
{
    const auto& s = t.setup;
    ResultRow base;
    base.scenario = cfg.name;
    base.sweep_axis = config::to_string(cfg.axis);
    base.sweep_index = t.sweep_index;
    base.sweep_value = t.sweep_value;
    base.channel_index = t.channel_index;
    base.carrier_frequency = t.comb.line_frequency(t.channel_index);
    base.symbol_rate = s.symbol_rate;
    base.modulation = tx::to_string(s.modulation);
    base.channel_spacing = t.comb.fsr;
    base.osnr_db = s.effective_osnr_db();

    std::optional<pipeline::Received> received;
    std::string front_error;
    try {
        const double fs = s.symbol_rate * static_cast<double>(s.samples_per_symbol);
        const double duration = static_cast<double>(s.n_symbols) / s.symbol_rate;
        const auto tone = comb::generate_tone(t.comb, t.channel_index, duration, fs, t.seed);
        received = pipeline::simulate_front_end(s, t.seed, &tone);
    } catch (const std::exception& e) {
        front_error = e.what();
    }
    for (auto mode : cfg.cpr_modes) {
        ResultRow row = base;
        row.cpr_mode = pipeline::to_string(mode);
        try {
            if (!received) throw StageError(front_error);
            const auto o = pipeline::finish_channel(*received, mode, s.dsp);
            row.osnr_db = o.osnr_db;
            row.ber = o.ber.ber;
            row.n_errors = o.ber.n_errors;
            row.n_bits = o.ber.n_bits;
            row.below_min_countable = o.ber.below_min_countable;
            row.evm_percent = o.ber.evm_percent;
            row.fec_class = metrics::fec_label(metrics::fec_classify(o.ber.ber));
            row.cycle_slips = o.ber.cycle_slips;
            row.frequency_offset = o.frequency_offset;
            row.timing_offset_ui = o.timing_estimate_ui;
            row.cma_reinitialized = o.cma_reinitialized;
            if (cfg.output.constellation_symbols > 0) {
                ConstellationSample cs{t.sweep_index, t.channel_index, row.cpr_mode, {}};
                const auto n = std::min(cfg.output.constellation_symbols, o.frame.x.size());
                // skip the CMA convergence region at the record start
                const auto start = o.frame.x.size() > 2 * n ? o.frame.x.size() / 2 : 0;
                cs.symbols.assign(o.frame.x.begin() + static_cast<std::ptrdiff_t>(start),
                                  o.frame.x.begin() + static_cast<std::ptrdiff_t>(start + n));
                constellations.push_back(std::move(cs));
            }
        } catch (const std::exception& e) {
            row.status = "error";
            row.fec_class = "fail";
            char ctx[96];
            std::snprintf(ctx, sizeof ctx, "sweep point %zu channel %zu: ", t.sweep_index, t.channel_index);
            row.message = clean_message(ctx + std::string(e.what()));
        }
        rows.push_back(std::move(row));
    }
}

} // namespace detail

/// Runs every task. Stage errors do not abort the run; they are recorded in
/// the row's status and message. Row order is independent of scheduling.
inline RunResult run_scenario(const config::ScenarioConfig& cfg, RunOptions opt = {})
{
    cfg.validate();
    const auto tasks = expand_tasks(cfg);
    std::vector<std::vector<ResultRow>> rows(tasks.size());
    std::vector<std::vector<ConstellationSample>> consts(tasks.size());

    std::size_t n_threads = opt.threads ? opt.threads : std::max(1u, std::thread::hardware_concurrency());
    n_threads = std::min(n_threads, tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < tasks.size(); k = next++) detail::run_task(cfg, tasks[k], rows[k], consts[k]);
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    }

    RunResult out;
    for (std::size_t k = 0; k < tasks.size(); ++k) {
        for (auto& r : rows[k]) out.rows.push_back(std::move(r));
        for (auto& c : consts[k]) out.constellations.push_back(std::move(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return buf;
}

inline void write_csv(std::ostream& out, const std::vector<ResultRow>& rows)
{
    const auto& cols = csv_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
    out << '\n';
    for (const auto& r : rows) {
        out << r.scenario << ',' << r.sweep_axis << ',' << r.sweep_index << ',' << format_double(r.sweep_value)
            << ',' << r.channel_index << ',' << format_double(r.carrier_frequency) << ','
            << format_double(r.symbol_rate) << ',' << r.modulation << ',' << r.cpr_mode << ','
            << format_double(r.osnr_db) << ',' << format_double(r.ber) << ',' << r.n_errors << ',' << r.n_bits
            << ',' << (r.below_min_countable ? 1 : 0) << ',' << format_double(r.evm_percent) << ','
            << r.fec_class << ',' << r.cycle_slips << ',' << format_double(r.frequency_offset) << ','
            << format_double(r.timing_offset_ui) << ',' << (r.cma_reinitialized ? 1 : 0) << ','
            << format_double(r.channel_spacing) << ',' << r.status << ',' << detail::clean_message(r.message)
            << '\n';
    }
}

inline void write_csv(const std::string& path, const std::vector<ResultRow>& rows)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("cannot write " + path);
    write_csv(out, rows);
    if (!out) throw StageError("write failed for " + path);
}

namespace detail {

inline std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> f;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            f.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    f.push_back(cur);
    return f;
}

inline double to_double(const std::string& s, const std::string& where)
{
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(where + ": '" + s + "' is not a number");
    }
}

inline std::size_t to_count(const std::string& s, const std::string& where)
{
    const double v = to_double(s, where);
    if (v < 0.0 || v != std::floor(v)) throw ConfigError(where + ": '" + s + "' is not a count");
    return static_cast<std::size_t>(v);
}

} // namespace detail

inline std::vector<ResultRow> read_csv(std::istream& in, const std::string& origin = "results")
{
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(origin + ": empty file");
    if (detail::split(line) != csv_columns())
        throw ConfigError(origin + ": header does not match results schema v" + std::to_string(csv_schema_version));
    std::vector<ResultRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split(line);
        const std::string where = origin + ":" + std::to_string(line_no);
        if (f.size() != csv_columns().size()) throw ConfigError(where + ": wrong column count");
        ResultRow r;
        r.scenario = f[0];
        r.sweep_axis = f[1];
        r.sweep_index = detail::to_count(f[2], where);
        r.sweep_value = detail::to_double(f[3], where);
        r.channel_index = detail::to_count(f[4], where);
        r.carrier_frequency = detail::to_double(f[5], where);
        r.symbol_rate = detail::to_double(f[6], where);
        r.modulation = f[7];
        r.cpr_mode = f[8];
        r.osnr_db = detail::to_double(f[9], where);
        r.ber = detail::to_double(f[10], where);
        r.n_errors = detail::to_count(f[11], where);
        r.n_bits = detail::to_count(f[12], where);
        r.below_min_countable = f[13] == "1";
        r.evm_percent = detail::to_double(f[14], where);
        r.fec_class = f[15];
        r.cycle_slips = detail::to_count(f[16], where);
        r.frequency_offset = detail::to_double(f[17], where);
        r.timing_offset_ui = detail::to_double(f[18], where);
        r.cma_reinitialized = f[19] == "1";
        r.channel_spacing = detail::to_double(f[20], where);
        r.status = f[21];
        r.message = f[22];
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<ResultRow> read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    return read_csv(in, path);
}

inline void write_constellations(const std::string& path, const std::vector<ConstellationSample>& samples)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw StageError("cannot write " + path);
    out << "sweep_index,channel_index,cpr_mode,i,q\n";
    for (const auto& s : samples)
        for (const auto& z : s.symbols)
            out << s.sweep_index << ',' << s.channel_index << ',' << s.cpr_mode << ',' << format_double(z.real())
                << ',' << format_double(z.imag()) << '\n';
}

inline std::vector<ConstellationSample> read_constellations(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open " + path);
    std::string line;
    std::getline(in, line);
    if (detail::split(line) != std::vector<std::string>{"sweep_index", "channel_index", "cpr_mode", "i", "q"})
        throw ConfigError(path + ": not a constellation file");
    std::vector<ConstellationSample> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split(line);
        const auto where = path + ":" + std::to_string(line_no);
        if (f.size() != 5) throw ConfigError(where + ": wrong column count");
        const auto si = detail::to_count(f[0], where), ci = detail::to_count(f[1], where);
        if (out.empty() || out.back().sweep_index != si || out.back().channel_index != ci ||
            out.back().cpr_mode != f[2])
            out.push_back({si, ci, f[2], {}});
        out.back().symbols.emplace_back(detail::to_double(f[3], where), detail::to_double(f[4], where));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Reports

struct GroupSummary {
    std::size_t sweep_index = 0;
    double sweep_value = 0.0;
    std::string cpr_mode;
    metrics::RateSummary rates;
    std::map<std::string, std::size_t> class_counts; // fec label -> channels
    std::optional<ResultRow> worst;                  // highest BER
    std::size_t n_errored = 0;                       // rows with status error
};

inline unsigned bits_per_symbol(const std::string& modulation)
{
    return tx::ConstellationSpec::from_name(modulation).bits_per_symbol();
}

/// Rates, FEC class counts and worst channel of one set of channel rows
/// (one sweep point and CPR mode). Errored rows count as failing channels.
inline GroupSummary summarize(const std::vector<ResultRow>& rows)
{
    GroupSummary g;
    if (rows.empty()) return g;
    g.sweep_index = rows.front().sweep_index;
    g.sweep_value = rows.front().sweep_value;
    g.cpr_mode = rows.front().cpr_mode;
    std::vector<metrics::ChannelResult> res;
    for (const auto& r : rows) {
        if (r.symbol_rate != rows.front().symbol_rate || r.modulation != rows.front().modulation)
            throw ValidationError("a report group must share symbol rate and modulation");
        metrics::ChannelResult c;
        c.channel_index = r.channel_index;
        c.carrier_frequency = r.carrier_frequency;
        c.ber = r.ber;
        c.evm_percent = r.evm_percent;
        c.n_bits = r.n_bits;
        c.n_errors = r.n_errors;
        c.below_min_countable = r.below_min_countable;
        if (r.ok()) c.fec_overhead = metrics::fec_classify(r.ber);
        else ++g.n_errored;
        ++g.class_counts[metrics::fec_label(c.fec_overhead)];
        res.push_back(c);
        if (r.ok() && (!g.worst || r.ber > g.worst->ber)) g.worst = r;
    }
    g.rates = metrics::aggregate_rates(res, rows.front().symbol_rate, bits_per_symbol(rows.front().modulation), 2,
                                       rows.front().channel_spacing);
    return g;
}

/// One summary per (sweep point, CPR mode), ordered by sweep index.
inline std::vector<GroupSummary> sweep_report(const std::vector<ResultRow>& rows)
{
    std::map<std::pair<std::size_t, std::string>, std::vector<ResultRow>> groups;
    for (const auto& r : rows) groups[{r.sweep_index, r.cpr_mode}].push_back(r);
    std::vector<GroupSummary> out;
    for (const auto& [key, g] : groups) out.push_back(summarize(g));
    return out;
}

inline void print_report(std::ostream& out, const std::vector<GroupSummary>& groups)
{
    char buf[256];
    for (const auto& g : groups) {
        std::snprintf(buf, sizeof buf,
                      "sweep %zu (value %.6g) cpr %s: %zu channels, line %.4f Tbit/s, net %.4f Tbit/s, "
                      "line SE %.3f, net SE %.3f bit/s/Hz\n",
                      g.sweep_index, g.sweep_value, g.cpr_mode.c_str(), g.rates.n_channels, g.rates.line_rate / 1e12,
                      g.rates.net_rate / 1e12, g.rates.line_se, g.rates.net_se);
        out << buf;
        out << "  classes:";
        for (const auto& [label, n] : g.class_counts) out << ' ' << label << '=' << n;
        out << '\n';
        if (g.worst) {
            std::snprintf(buf, sizeof buf, "  worst: channel %zu at %.6f THz, BER %.3e\n", g.worst->channel_index,
                          g.worst->carrier_frequency / 1e12, g.worst->ber);
            out << buf;
        }
        if (g.n_errored) out << "  errored rows: " << g.n_errored << '\n';
    }
}

} // namespace combwdm::harness
