#include <gtest/gtest.h>

#include "paflab/bench.hpp"
#include "paflab/errors.hpp"

namespace paflab {
namespace {

BenchConfig tiny() {
    BenchConfig c;
    c.depth = 2;
    c.dim = 16;
    c.heads = 2;
    c.ffn_dim = 32;
    c.seq_len = 8;
    c.threads = 2;
    c.repeats = 30;
    return c;
}

TEST(Quantile, LinearInterpolation) {
    const std::vector<std::int64_t> s{40, 10, 30, 20};
    EXPECT_EQ(quantile(s, 0.0), 10.0);
    EXPECT_EQ(quantile(s, 1.0), 40.0);
    EXPECT_EQ(quantile(s, 0.5), 25.0);
    EXPECT_NEAR(quantile(s, 0.1), 13.0, 1e-12);
    const TimingStats t = summarize(s);
    EXPECT_EQ(t.median_ns, 25.0);
    EXPECT_NEAR(t.p90_ns, 37.0, 1e-12);
    EXPECT_THROW(quantile(std::vector<std::int64_t>{}, 0.5), ContractError);
}

TEST(Bench, TooFewRepeatsRejected) {
    BenchConfig c = tiny();
    c.repeats = 1;
    EXPECT_THROW(run_bench(c), ConfigError);
}

TEST(Bench, ParallelOutputIdenticalAndStatsRecomputable) {
    const BenchResult r = run_bench(tiny());
    ASSERT_TRUE(r.paf_outputs_identical.has_value());
    EXPECT_TRUE(*r.paf_outputs_identical);
    ASSERT_EQ(r.timings.size(), 3u);
    for (const ModeTiming& t : r.timings) {
        EXPECT_EQ(t.samples_ns.size(), 30u);
        const TimingStats s = summarize(t.samples_ns);
        EXPECT_EQ(s.median_ns, t.stats.median_ns);
        EXPECT_LE(t.stats.p10_ns, t.stats.median_ns);
        EXPECT_LE(t.stats.median_ns, t.stats.p90_ns);
    }
    EXPECT_TRUE(r.warnings.empty());
}

TEST(Bench, SingleThreadParallelWarnsButRuns) {
    BenchConfig c = tiny();
    c.threads = 1;
    c.modes = {BenchMode::paf_seq, BenchMode::paf_par};
    const BenchResult r = run_bench(c);
    EXPECT_EQ(r.warnings.size(), 1u);
    EXPECT_TRUE(r.paf_outputs_identical.value_or(false));
}

TEST(Bench, ModeListParsing) {
    EXPECT_EQ(parse_bench_modes("paf-par,saf,paf-par"), (std::vector<BenchMode>{BenchMode::paf_par, BenchMode::saf}));
    EXPECT_THROW(parse_bench_modes("fast"), ConfigError);
    EXPECT_THROW(parse_bench_modes(""), ConfigError);
}

}  // namespace
}  // namespace paflab
