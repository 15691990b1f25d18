// combwdm: run scenarios, characterize carrier records, report and plot results.
//
// Exit codes: 0 success, 1 configuration or input error, 2 runtime stage error.

#include "combwdm/config.hpp"
#include "combwdm/harness.hpp"
#include "combwdm/io.hpp"
#include "combwdm/phasenoise.hpp"
#include "combwdm/plots.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace fs = std::filesystem;
using namespace combwdm;

namespace {

constexpr int exit_config = 1;
constexpr int exit_runtime = 2;

void ensure_dir(const std::string& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw StageError("cannot create " + dir + ": " + ec.message());
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::size_t threads = 0;
    bool strict = true;
    bool quiet = false;
};

int cmd_run(const RunArgs& a)
{
    auto parsed = config::load_scenario(a.config, a.strict);
    for (const auto& w : parsed.warnings) std::cerr << "warning: ignoring unknown key " << w << '\n';
    auto& cfg = parsed.config;
    if (a.seed) cfg.seed = *a.seed;
    if (a.out_dir) cfg.output.directory = *a.out_dir;
    ensure_dir(cfg.output.directory);

    const auto run = harness::run_scenario(cfg, {a.threads});
    const auto base = cfg.output.directory + "/" + cfg.name;
    if (cfg.output.csv) {
        harness::write_csv(base + ".csv", run.rows);
        if (!run.constellations.empty()) harness::write_constellations(base + "_constellation.csv", run.constellations);
        if (!a.quiet) std::cout << "wrote " << base << ".csv\n";
    }
    if (cfg.output.svg) {
        for (const auto& f : plots::emit_plots(cfg, run, cfg.output.directory))
            if (!a.quiet) std::cout << "wrote " << f << '\n';
    }
    if (!a.quiet) harness::print_report(std::cout, harness::sweep_report(run.rows));
    for (const auto& r : run.rows)
        if (!r.ok()) std::cerr << "error: " << r.message << '\n';
    return run.all_ok() ? 0 : exit_runtime;
}

int cmd_characterize(const std::string& path, double t0, const std::optional<std::string>& out_dir)
{
    const auto rec = io::read_record(path);
    const auto pr = rec.phase_record();
    const auto spec = phasenoise::smooth_spectrum(phasenoise::estimate_fm_spectrum(pr));
    const auto band = phasenoise::default_fit_band(spec, rec.sample_rate);
    const auto fit = phasenoise::fit_fm_model(spec, band);
    const auto& m = fit.model;

    std::printf("record: %zu samples at %.6g Hz (%s)\n", pr.size(), rec.sample_rate,
                rec.kind == io::RecordKind::iq ? "IQ" : "phase");
    std::printf("fit band: %.4g .. %.4g Hz, %zu bands, rms relative residual %.3f\n", band.low, band.high,
                fit.n_bands, fit.rms_relative_residual);
    std::printf("S_L = %.4e Hz^2/Hz\nS_1/f = %.4e Hz^2\nS_1/f2 = %.4e Hz^3\n", m.s_white, m.s_flicker,
                m.s_randomwalk);
    std::printf("Lorentzian linewidth: %.4e Hz\n", phasenoise::lorentzian_linewidth(m));
    try {
        const auto g = phasenoise::gaussian_linewidth(m, t0);
        std::printf("Gaussian linewidth at %.3g s: %.4e Hz%s\n", t0, g.fwhm, g.reliable ? "" : " (unreliable)");
    } catch (const Error& e) {
        std::printf("Gaussian linewidth at %.3g s: not available (%s)\n", t0, e.what());
    }
    if (out_dir) {
        ensure_dir(*out_dir);
        const auto file = *out_dir + "/" + stem_of(path) + "_fm_spectrum.svg";
        plots::write_svg(file, plots::fm_spectrum_figure(pr, m));
        std::printf("wrote %s\n", file.c_str());
    }
    return 0;
}

int cmd_report(const std::string& path)
{
    harness::print_report(std::cout, harness::sweep_report(harness::read_csv(path)));
    return 0;
}

int cmd_plot(const std::string& input, const std::string& kind_name, const std::string& out_dir)
{
    const auto kind = [&] {
        try {
            return config::plot_kind_from_name(kind_name);
        } catch (const ValidationError& e) {
            throw ConfigError(e.what());
        }
    }();
    ensure_dir(out_dir);
    const auto base = out_dir + "/" + stem_of(input);
    std::vector<std::string> files;
    if (kind == config::PlotKind::fm_spectrum) {
        const auto rec = io::read_record(input).phase_record();
        const auto spec = phasenoise::smooth_spectrum(phasenoise::estimate_fm_spectrum(rec));
        const auto fit = phasenoise::fit_fm_model(spec, phasenoise::default_fit_band(spec, rec.sample_rate()));
        files.push_back(base + "_fm_spectrum.svg");
        plots::write_svg(files.back(), plots::fm_spectrum_figure(rec, fit.model));
    } else if (kind == config::PlotKind::constellation) {
        const auto samples = harness::read_constellations(input);
        for (const auto& s : samples) {
            files.push_back(base + "_s" + std::to_string(s.sweep_index) + "_c" + std::to_string(s.channel_index) +
                            "_" + s.cpr_mode + ".svg");
            plots::write_svg(files.back(), plots::constellation_figure(s));
        }
    } else {
        files.push_back(base + "_" + kind_name + ".svg");
        plots::write_svg(files.back(), plots::results_figure(kind, harness::read_csv(input)));
    }
    for (const auto& f : files) std::cout << "wrote " << f << '\n';
    return 0;
}

phasenoise::FmNoiseModel parse_model(const std::string& s)
{
    if (s == "comb_line") return phasenoise::comb_line_model;
    const std::string lor = "lorentzian:";
    try {
        if (s.rfind(lor, 0) == 0) return phasenoise::FmNoiseModel::from_lorentzian(std::stod(s.substr(lor.size())));
        phasenoise::FmNoiseModel m;
        char c1 = 0, c2 = 0;
        std::istringstream in(s);
        if (!(in >> m.s_white >> c1 >> m.s_flicker >> c2 >> m.s_randomwalk) || c1 != ',' || c2 != ',')
            throw std::invalid_argument(s);
        m.validate();
        return m;
    } catch (const std::exception&) {
        throw ConfigError("model must be 'comb_line', 'lorentzian:<Hz>' or 'S_L,S_1f,S_1f2'");
    }
}

int cmd_synthesize(const std::string& model, std::size_t n, double rate, std::uint64_t seed, const std::string& out)
{
    const auto m = parse_model(model);
    const auto rec = phasenoise::synthesize_phase(m, n, rate, seed);
    io::write_phase_record(out, rec);
    std::cout << "wrote " << out << '\n';
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Comb-based WDM coherent link simulator"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "run a scenario configuration");
    run_cmd->add_option("config", run.config, "scenario JSON file")->required()->check(CLI::ExistingFile);
    run_cmd->add_option("--seed", run.seed, "override the base seed");
    run_cmd->add_option("--out-dir", run.out_dir, "override the output directory");
    run_cmd->add_option("--threads", run.threads, "worker threads (0 = all cores)");
    run_cmd->add_flag("--strict-config,!--no-strict-config", run.strict, "reject unknown configuration keys");
    run_cmd->add_flag("-q,--quiet", run.quiet, "only report errors");

    std::string record;
    double t0 = 15e-6;
    std::optional<std::string> char_out;
    auto* char_cmd = app.add_subcommand("characterize", "fit the FM-noise model of a measured carrier record");
    char_cmd->add_option("record", record, "phase or IQ record (text)")->required()->check(CLI::ExistingFile);
    char_cmd->add_option("--observation-time", t0, "observation time for the Gaussian linewidth (s)");
    char_cmd->add_option("--out-dir", char_out, "write the FM-spectrum plot here");

    std::string results;
    auto* report_cmd = app.add_subcommand("report", "summarize a results CSV");
    report_cmd->add_option("results", results, "results CSV")->required()->check(CLI::ExistingFile);

    std::string plot_in, plot_kind, plot_out = ".";
    auto* plot_cmd = app.add_subcommand("plot", "draw a figure from results or a carrier record");
    plot_cmd->add_option("input", plot_in, "results CSV, constellation CSV or carrier record")
        ->required()
        ->check(CLI::ExistingFile);
    plot_cmd->add_option("--kind", plot_kind, "ber_vs_osnr | ber_per_channel | evm_vs_rate | fm_spectrum | constellation")
        ->required();
    plot_cmd->add_option("--out-dir", plot_out, "output directory");

    std::string syn_model = "comb_line", syn_out;
    std::size_t syn_n = std::size_t{1} << 20;
    double syn_rate = 2e9;
    std::uint64_t syn_seed = 1;
    auto* syn_cmd = app.add_subcommand("synthesize", "write a synthetic carrier phase record");
    syn_cmd->add_option("--model", syn_model, "comb_line | lorentzian:<Hz> | S_L,S_1f,S_1f2");
    syn_cmd->add_option("--samples", syn_n, "number of samples");
    syn_cmd->add_option("--rate", syn_rate, "sample rate (Hz)");
    syn_cmd->add_option("--seed", syn_seed, "random seed");
    syn_cmd->add_option("--out", syn_out, "output file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : exit_config;
    }

    try {
        if (*run_cmd) return cmd_run(run);
        if (*char_cmd) return cmd_characterize(record, t0, char_out);
        if (*report_cmd) return cmd_report(results);
        if (*plot_cmd) return cmd_plot(plot_in, plot_kind, plot_out);
        if (*syn_cmd) return cmd_synthesize(syn_model, syn_n, syn_rate, syn_seed, syn_out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return 0;
}
