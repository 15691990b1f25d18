#include "combwdm/harness.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace combwdm;
using namespace combwdm::harness;

namespace {

config::ScenarioConfig scenario(const std::string& file)
{
    return config::load_scenario(std::string(COMBWDM_SOURCE_DIR) + "/scenarios/" + file).config;
}

// Two-line QPSK comb, short records: a fast end-to-end run.
config::ScenarioConfig small_wdm()
{
    const auto j = config::json::parse(R"({
      "name": "small", "seed": 11, "n_symbols": 100000,
      "comb": { "n_lines": 2, "fm_model": { "lorentzian_linewidth_hz": 1e5 } },
      "modulation": { "format": "QPSK", "symbol_rate_hz": 40e9, "rolloff": 0.05 },
      "link": { "fiber_length_m": 0 },
      "sweep": { "axis": "osnr", "values": [14, 30] }
    })");
    return config::parse_scenario(j).config;
}

std::string csv_text(const std::vector<ResultRow>& rows)
{
    std::ostringstream o;
    write_csv(o, rows);
    return o.str();
}

ResultRow fake_row(std::size_t ch, double ber, const std::string& mod, double rs)
{
    ResultRow r;
    r.channel_index = ch;
    r.carrier_frequency = 193.4e12 + 42e9 * static_cast<double>(ch);
    r.ber = ber;
    r.modulation = mod;
    r.symbol_rate = rs;
    r.cpr_mode = "bps";
    r.channel_spacing = 42e9;
    return r;
}

} // namespace

TEST(RunScenario, DegenerateScenarioIsErrorFree)
{
    const auto run = run_scenario(scenario("degenerate.json"), {1});
    ASSERT_EQ(run.rows.size(), 2u); // one channel, two CPR modes
    for (const auto& r : run.rows) {
        EXPECT_TRUE(r.ok()) << r.message;
        EXPECT_EQ(r.n_errors, 0u);
        EXPECT_EQ(r.ber, 0.0);
        EXPECT_LT(r.evm_percent, 0.5);
        EXPECT_EQ(r.cycle_slips, 0u);
    }
    EXPECT_EQ(run.constellations.size(), 2u);
}

TEST(RunScenario, EverySweepPointAppearsOncePerChannelAndMode)
{
    const auto run = run_scenario(small_wdm(), {2});
    ASSERT_EQ(run.rows.size(), 4u);
    std::set<std::tuple<std::size_t, std::size_t, std::string>> seen;
    for (const auto& r : run.rows) {
        EXPECT_TRUE(r.ok()) << r.message;
        EXPECT_TRUE(seen.insert({r.sweep_index, r.channel_index, r.cpr_mode}).second);
    }
    // deterministic order: sweep index, then channel
    EXPECT_EQ(run.rows[0].sweep_index, 0u);
    EXPECT_EQ(run.rows[1].channel_index, 1u);
    EXPECT_EQ(run.rows[2].sweep_index, 1u);
    // lower OSNR, more errors
    EXPECT_GT(run.rows[0].ber, run.rows[2].ber);
    // the comb's 37 dB OCNR adds to the link noise
    EXPECT_NEAR(run.rows[0].osnr_db, linear_to_db(1.0 / (1.0 / db_to_linear(14.0) + 1.0 / db_to_linear(37.0))), 1e-9);
    EXPECT_DOUBLE_EQ(run.rows[1].carrier_frequency - run.rows[0].carrier_frequency, 42e9);
}

TEST(RunScenario, OutputIndependentOfThreadCount)
{
    const auto cfg = small_wdm();
    const auto a = csv_text(run_scenario(cfg, {1}).rows);
    const auto b = csv_text(run_scenario(cfg, {3}).rows);
    EXPECT_EQ(a, b);
}

TEST(RunScenario, StageErrorsCarryContext)
{
    auto cfg = small_wdm();
    cfg.channel.link.dispersion_ps_nm_km = 0.0;
    cfg.channel.dsp.residual_dispersion_ps_nm = 10.0; // impossible without a dispersive fiber
    const auto run = run_scenario(cfg, {1});
    EXPECT_FALSE(run.all_ok());
    for (const auto& r : run.rows) {
        EXPECT_EQ(r.status, "error");
        EXPECT_NE(r.message.find("sweep point"), std::string::npos);
        EXPECT_EQ(r.message.find(','), std::string::npos);
    }
}

TEST(ResultsCsv, RoundTrip)
{
    const auto run = run_scenario(small_wdm(), {1});
    const auto text = csv_text(run.rows);
    std::istringstream in(text);
    const auto back = read_csv(in);
    ASSERT_EQ(back.size(), run.rows.size());
    EXPECT_EQ(csv_text(back), text);
    EXPECT_EQ(back[0].n_bits, run.rows[0].n_bits);
    EXPECT_NEAR(back[0].ber, run.rows[0].ber, 1e-6 * run.rows[0].ber);
}

TEST(ResultsCsv, HeaderIsFixed)
{
    std::ostringstream o;
    write_csv(o, {});
    EXPECT_EQ(o.str(),
              "scenario,sweep_axis,sweep_index,sweep_value,channel_index,carrier_frequency_hz,symbol_rate_hz,"
              "modulation,cpr_mode,osnr_db,ber,n_errors,n_bits,below_min_countable,evm_percent,fec_class,"
              "cycle_slips,frequency_offset_hz,timing_offset_ui,cma_reinitialized,channel_spacing_hz,status,"
              "message\n");
    std::istringstream bad("scenario,ber\nx,1\n");
    EXPECT_THROW(read_csv(bad), ConfigError);
    std::istringstream short_row(o.str() + "a,b\n");
    EXPECT_THROW(read_csv(short_row), ConfigError);
}

TEST(SweepReport, QpskWdmAccounting)
{
    std::vector<ResultRow> rows;
    for (std::size_t k = 0; k < 52; ++k) rows.push_back(fake_row(k, 1e-4, "QPSK", 40e9));
    rows[17].ber = 3e-3; // worst
    const auto rep = sweep_report(rows);
    ASSERT_EQ(rep.size(), 1u);
    EXPECT_DOUBLE_EQ(rep[0].rates.line_rate, 8.32e12);
    EXPECT_NEAR(rep[0].rates.net_rate / 1e12, 7.83, 0.005);
    EXPECT_EQ(rep[0].class_counts.at("6.25%"), 52u);
    ASSERT_TRUE(rep[0].worst);
    EXPECT_EQ(rep[0].worst->channel_index, 17u);
}

TEST(SweepReport, Qam16WdmAccounting)
{
    std::vector<ResultRow> rows;
    for (std::size_t k = 0; k < 38; ++k) rows.push_back(fake_row(k, k < 32 ? 1e-3 : 1e-2, "16QAM", 38e9));
    const auto g = summarize(rows);
    EXPECT_NEAR(g.rates.line_rate / 1e12, 11.552, 1e-9);
    EXPECT_NEAR(g.rates.net_rate / 1e12, 10.676, 0.01);
    EXPECT_NEAR(g.rates.net_se, 6.69, 0.02);
    EXPECT_EQ(g.class_counts.at("6.25%"), 32u);
    EXPECT_EQ(g.class_counts.at("20.00%"), 6u);
}

TEST(SweepReport, EmptyInputGivesZeroRates)
{
    EXPECT_TRUE(sweep_report({}).empty());
    const auto g = summarize({});
    EXPECT_EQ(g.rates.line_rate, 0.0);
    EXPECT_EQ(g.rates.net_rate, 0.0);
    EXPECT_EQ(g.rates.n_channels, 0u);
    EXPECT_FALSE(g.worst);
}

TEST(SweepReport, ErroredRowsFailAndGroupsSplit)
{
    std::vector<ResultRow> rows{fake_row(0, 1e-4, "QPSK", 40e9), fake_row(1, 1e-4, "QPSK", 40e9)};
    rows[1].status = "error";
    auto other = fake_row(0, 1e-4, "QPSK", 40e9);
    other.sweep_index = 1;
    rows.push_back(other);
    const auto rep = sweep_report(rows);
    ASSERT_EQ(rep.size(), 2u);
    EXPECT_EQ(rep[0].n_errored, 1u);
    EXPECT_EQ(rep[0].rates.n_failed, 1u);
    EXPECT_EQ(rep[1].rates.n_channels, 1u);
}
