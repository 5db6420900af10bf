#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "qmcgsa/gsa.hpp"
#include "qmcgsa/instruments.hpp"

using namespace qmcgsa;

namespace {

constexpr std::uint64_t kN = 1 << 16;

FunctionIntegrand uniform_fn(std::size_t d, FunctionIntegrand::Fn fn) {
    return FunctionIntegrand(d, InputSpace::Uniform, std::move(fn));
}

}  // namespace

TEST(Indices, SingleVariable) {
    const auto r = estimate_indices(uniform_fn(2, [](auto x) { return x[0]; }), kN);
    ASSERT_FALSE(r.degenerate);
    EXPECT_NEAR(r.first[0], 1.0, 1e-2);
    EXPECT_NEAR(r.first[1], 0.0, 1e-2);
    EXPECT_NEAR(r.total[0], 1.0, 1e-2);
    EXPECT_NEAR(r.total[1], 0.0, 1e-12);
    EXPECT_NEAR(r.d_a, 1.0, 1e-2);
    EXPECT_EQ(r.d_t, 1u);
    EXPECT_TRUE(r.qmc_favorable);
}

TEST(Indices, Additive) {
    const auto r = estimate_indices(uniform_fn(2, [](auto x) { return x[0] + x[1]; }), kN);
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(r.first[i], 0.5, 1e-2);
        EXPECT_NEAR(r.total[i], 0.5, 1e-2);
    }
    EXPECT_NEAR(r.d_a, 1.0, 1e-2);
    EXPECT_EQ(r.type, FunctionType::B);
}

TEST(Indices, Product) {
    const auto r = estimate_indices(uniform_fn(2, [](auto x) { return x[0] * x[1]; }), kN);
    for (int i = 0; i < 2; ++i) {
        EXPECT_NEAR(r.first[i], 3.0 / 7.0, 1e-2);
        EXPECT_NEAR(r.total[i], 4.0 / 7.0, 1e-2);
    }
    EXPECT_NEAR(r.d_a, 8.0 / 7.0, 1e-2);
    EXPECT_NEAR(r.f0, 0.25, 1e-3);
    EXPECT_NEAR(r.variance, 7.0 / 144.0, 1e-3);
}

TEST(Indices, PrngFallbackAgrees) {
    const auto r = estimate_indices(uniform_fn(2, [](auto x) { return x[0] * x[1]; }), kN, SequenceKind::Prng, {0, 7});
    EXPECT_NEAR(r.total[0], 4.0 / 7.0, 3e-2);
    EXPECT_NEAR(r.first[1], 3.0 / 7.0, 3e-2);
}

TEST(Indices, PermutationEquivariance) {
    // Weighted product with distinct per-input effects, then the same with inputs reversed.
    auto f = [](std::span<const double> x) { return (1 + 2 * x[0]) * (1 + 0.5 * x[1]) * (1 + 0.1 * x[2]); };
    const auto a = estimate_indices(uniform_fn(3, f), kN);
    const auto b = estimate_indices(uniform_fn(3, [&](auto x) {
                                        const double y[3] = {x[2], x[1], x[0]};
                                        return f(y);
                                    }),
                                    kN);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(a.first[i], b.first[2 - i], 1e-2);
        EXPECT_NEAR(a.total[i], b.total[2 - i], 1e-2);
    }
    EXPECT_NEAR(a.d_a, b.d_a, 1e-2);
    EXPECT_NE(a.d_t, b.d_t);
}

TEST(Indices, ClampingKeepsRawValues) {
    const auto r = estimate_indices(uniform_fn(4, [](auto x) { return std::exp(x[0]) + x[1] * x[2] + 0.1 * x[3]; }), kN);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_LE(std::abs(r.first_raw[i] - r.first[i]), 0.02);
        EXPECT_LE(std::abs(r.total_raw[i] - r.total[i]), 0.02);
        EXPECT_LE(r.first[i], r.total[i]);
    }
    EXPECT_LE(r.sum_first, 1.02);
}

TEST(Indices, ConstantIsDegenerate) {
    const auto r = estimate_indices(uniform_fn(3, [](auto) { return 4.2; }), 1 << 10);
    EXPECT_TRUE(r.degenerate);
    EXPECT_TRUE(r.first.empty());
    EXPECT_EQ(r.d_s_class, "undefined");
    const auto spec = InstrumentSpec::cliquet(0.0, 0.16);
    OptionFunctional cliquet(spec, {}, TimeGrid::uniform(1.0, 32), Scheme::Standard);
    EXPECT_TRUE(estimate_indices(cliquet, 1 << 10).degenerate);
}

TEST(Indices, Deterministic) {
    const auto f = uniform_fn(3, [](auto x) { return x[0] * x[1] + x[2]; });
    RunOptions one, many;
    one.chunk = many.chunk = 512;
    many.threads = 3;
    const auto a = estimate_indices(f, 1 << 12, SequenceKind::Sobol, {}, one);
    const auto b = estimate_indices(f, 1 << 12, SequenceKind::Sobol, {}, many);
    EXPECT_EQ(a.first_raw, b.first_raw);
    EXPECT_EQ(a.total_raw, b.total_raw);
}

TEST(Dimensions, TruncationExamples) {
    std::vector<double> spike(8, 0.0);
    spike[0] = 1.0;
    EXPECT_EQ(truncation_dimension(spike, 0.01), 1u);
    EXPECT_EQ(truncation_dimension(std::vector<double>(8, 0.125), 0.01), 8u);
    EXPECT_EQ(truncation_dimension(std::vector<double>{0.6, 0.3, 0.001, 0.001}, 0.01), 2u);
}

TEST(Dimensions, AverageAndClassification) {
    GsaReport r;
    r.dimension = 4;
    r.first_raw = {0.9, 0.0, 0.0, 0.0};
    r.total_raw = {1.0, 0.0, 0.0, 0.0};
    finalize(r);
    EXPECT_EQ(r.d_a, 1.0);
    EXPECT_TRUE(r.qmc_favorable);
    EXPECT_EQ(r.type, FunctionType::A);

    r.first_raw = {0.24, 0.24, 0.24, 0.24};
    r.total_raw = {0.26, 0.26, 0.26, 0.26};
    finalize(r);
    EXPECT_EQ(r.type, FunctionType::B);
    EXPECT_EQ(r.d_t, 4u);

    r.first_raw = {0.001, 0.001, 0.001, 0.001};
    r.total_raw = {0.9, 0.9, 0.9, 0.9};
    finalize(r);
    EXPECT_EQ(r.type, FunctionType::C);
    EXPECT_NEAR(r.d_a, 3.6, 1e-12);
    EXPECT_FALSE(r.qmc_favorable);
    EXPECT_EQ(r.d_s_class, "~4");

    // Raw estimates outside [0, 1] are clamped, raw values kept.
    r.first_raw = {-0.01, 0.5, 0.5, 0.0};
    r.total_raw = {0.002, 0.5, 1.01, -0.003};
    finalize(r);
    EXPECT_EQ(r.first[0], 0.0);
    EXPECT_EQ(r.total[2], 1.0);
    EXPECT_EQ(r.total[3], 0.0);
    EXPECT_EQ(r.total_raw[2], 1.01);
}

TEST(Instruments, EuropeanPriceBridgeIsTypeA) {
    OptionFunctional f(InstrumentSpec::european(), {}, TimeGrid::uniform(1.0, 32), Scheme::BrownianBridge);
    const auto r = estimate_indices(f, 1 << 14);
    EXPECT_EQ(r.d_t, 1u);
    EXPECT_EQ(r.type, FunctionType::A);
    EXPECT_NEAR(r.d_a, 1.0, 0.1);
}

TEST(Instruments, CliquetPriceStandardIsTypeB) {
    OptionFunctional f(InstrumentSpec::cliquet(), {}, TimeGrid::uniform(1.0, 32), Scheme::Standard);
    const auto r = estimate_indices(f, 1 << 14);
    EXPECT_EQ(r.type, FunctionType::B);
    EXPECT_NEAR(r.d_a, 1.0, 0.1);
}

TEST(Csv, RowsCarryManifest) {
    const auto r = estimate_indices(uniform_fn(2, [](auto x) { return x[0] + 2 * x[1]; }), 1 << 10);
    std::ostringstream out;
    write_gsa_csv_header(out);
    write_gsa_csv_rows(out, {"test", "price", "SD", std::nullopt}, r, "abc123");
    std::istringstream in(out.str());
    std::string line;
    int rows = 0;
    std::getline(in, line);
    const auto commas = std::count(line.begin(), line.end(), ',');
    while (std::getline(in, line)) {
        ++rows;
        EXPECT_TRUE(line.ends_with(",abc123")) << line;
        EXPECT_EQ(std::count(line.begin(), line.end(), ','), commas) << line;
    }
    EXPECT_EQ(rows, 3);
}
