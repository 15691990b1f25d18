#include "combwdm/io.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <sstream>

using namespace combwdm;
using namespace combwdm::io;

TEST(CarrierRecordIo, PhaseRecordRoundTripsExactly)
{
    const auto rec = phasenoise::synthesize_phase({5.4e5, 8.4e11, 5e17}, 4096, 2e9, 3);
    std::stringstream buf;
    write_phase_record(buf, rec);
    const auto back = parse_record(buf);
    EXPECT_EQ(back.kind, RecordKind::phase);
    EXPECT_DOUBLE_EQ(back.sample_rate, 2e9);
    ASSERT_EQ(back.phase.size(), rec.phases.size());
    for (std::size_t i = 0; i < rec.size(); ++i) EXPECT_EQ(back.phase[i], rec.phases[i]);
    EXPECT_DOUBLE_EQ(back.phase_record().sample_interval, rec.sample_interval);
}

TEST(CarrierRecordIo, IqRecordIsUnwrapped)
{
    std::stringstream s;
    s << "# measured tone\n# sample_rate_hz = 1e9\nI,Q\n";
    const double step = 0.9; // rad per sample, wraps several times
    for (int k = 0; k < 50; ++k) s << std::cos(step * k) << ", " << std::sin(step * k) << "\n";
    const auto rec = parse_record(s);
    EXPECT_EQ(rec.kind, RecordKind::iq);
    ASSERT_EQ(rec.phase.size(), 50u);
    for (int k = 0; k < 50; ++k) EXPECT_NEAR(rec.phase[k], step * k, 1e-5);
}

TEST(CarrierRecordIo, WhitespaceSeparatedWithoutHeaderIsPhase)
{
    std::stringstream s("# sample_rate_hz: 2e6\n0 0.1\n1e-6 0.2\n2e-6\t0.3\n");
    const auto rec = parse_record(s);
    EXPECT_EQ(rec.kind, RecordKind::phase);
    EXPECT_EQ(rec.phase, (std::vector<double>{0.1, 0.2, 0.3}));
}

TEST(CarrierRecordIo, RejectsMalformedInput)
{
    std::stringstream no_rate("time_s,phase_rad\n0,0\n1,1\n");
    EXPECT_THROW(parse_record(no_rate), ConfigError);
    std::stringstream bad_line("# sample_rate_hz = 1e9\n0,0\n1,abc\n");
    EXPECT_THROW(parse_record(bad_line), ConfigError);
    std::stringstream bad_header("# sample_rate_hz = 1e9\nfoo,bar\n0,0\n");
    EXPECT_THROW(parse_record(bad_header), ConfigError);
    std::stringstream zero_rate("# sample_rate_hz = 0\n0,0\n1,1\n");
    EXPECT_THROW(parse_record(zero_rate), ConfigError);
    std::stringstream three_cols("# sample_rate_hz = 1e9\n0,0,0\n");
    EXPECT_THROW(parse_record(three_cols), ConfigError);
    std::stringstream one_sample("# sample_rate_hz = 1e9\n0,0\n");
    EXPECT_THROW(parse_record(one_sample), InsufficientData);
    EXPECT_THROW(read_record("/nonexistent/record.csv"), ConfigError);
}
