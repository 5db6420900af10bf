// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion,
// followed by indented measurements. Exit status is the number of failed
// criteria that are not listed in --allow-fail.

#include <algorithm>
#include <bit>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "qmcgsa/analysis.hpp"
#include "qmcgsa/diffusion.hpp"
#include "qmcgsa/greeks.hpp"
#include "qmcgsa/gsa.hpp"
#include "qmcgsa/harness.hpp"
#include "qmcgsa/hash.hpp"
#include "qmcgsa/instruments.hpp"
#include "qmcgsa/sequence.hpp"

using namespace qmcgsa;
namespace fs = std::filesystem;

namespace {

struct Check {
    std::vector<std::string> lines;
    bool ok = true;

    void expect(bool cond, std::string what) {
        lines.push_back(fmt::format("{} {}", cond ? "ok  " : "FAIL", what));
        ok = ok && cond;
    }
    void note(std::string what) { lines.push_back("     " + std::move(what)); }
};

bool within(double x, double target, double tol) { return std::abs(x - target) <= tol; }

std::size_t g_threads = 1;
fs::path g_work;

ExperimentConfig base_config() {
    ExperimentConfig c;
    c.threads = g_threads;
    c.output_dir = g_work / "session";
    return c;
}

// ---------------------------------------------------------------------------
// 1 and 4 share the convergence runs.

struct ConvergenceRuns {
    std::vector<ConvergenceSeries> european, asian_gamma;
    ConvergenceSeries cliquet;
    std::vector<SpeedUpRow> european_rows, asian_rows;
};

ConvergenceRuns& convergence_runs() {
    static ConvergenceRuns runs = [] {
        ConvergenceRuns r;
        Session s(base_config());
        for (auto m : {Method::McSd, Method::QmcSd, Method::QmcBbd}) {
            r.european.push_back(convergence_series(s, InstrumentKind::European, Quantity::Price, m));
            r.asian_gamma.push_back(convergence_series(s, InstrumentKind::AsianGeometric, Quantity::Gamma, m));
        }
        r.cliquet = convergence_series(s, InstrumentKind::Cliquet, Quantity::Price, Method::QmcSd);
        r.european_rows = speedup_rows(s, r.european);
        r.asian_rows = speedup_rows(s, r.asian_gamma);
        return r;
    }();
    return runs;
}

Check criterion1() {
    Check c;
    auto& r = convergence_runs();
    const double want[3] = {-0.46, -0.71, -0.901};
    for (int i = 0; i < 3; ++i) {
        const double slope = -r.european[i].fit.alpha;
        c.expect(within(slope, want[i], 0.08),
                 fmt::format("european price {:7} slope {:.3f} (target {} +- 0.08)", to_string(r.european[i].method),
                             slope, want[i]));
    }
    const double cliquet = -r.cliquet.fit.alpha;
    c.expect(within(cliquet, -1.0, 0.1), fmt::format("cliquet price qmc-sd slope {:.3f} (target -1.00 +- 0.1)", cliquet));
    for (const auto& s : r.asian_gamma) {
        c.expect(within(-s.fit.alpha, -0.5, 0.1),
                 fmt::format("asian gamma {:7} slope {:.3f} (target -0.5 +- 0.1, {} points)", to_string(s.method),
                             -s.fit.alpha, s.fit.points));
    }
    return c;
}

// ---------------------------------------------------------------------------
// 2 and 3 share the GSA reports, at the default ε of each instrument.

constexpr std::uint64_t kGsaN = std::uint64_t{1} << 17;

struct GsaKey {
    InstrumentKind kind;
    Quantity q;
    Scheme scheme;
    auto operator<=>(const GsaKey&) const = default;
};

std::map<GsaKey, GsaReport>& gsa_reports() {
    static std::map<GsaKey, GsaReport> reports = [] {
        std::map<GsaKey, GsaReport> out;
        const ExperimentConfig cfg = base_config();
        for (auto kind : cfg.instruments) {
            for (auto q : cfg.functions) {
                if (analytically_null(kind, q)) continue;
                for (auto scheme : {Scheme::Standard, Scheme::BrownianBridge}) {
                    OptionFunctional f(cfg.spec(kind), cfg.model, cfg.grid(), scheme, q,
                                       q == Quantity::Price ? 0.0 : cfg.epsilon_for(kind));
                    out[{kind, q, scheme}] = estimate_indices(f, kGsaN, SequenceKind::Sobol, SampleBlock{0, cfg.seed},
                                                              cfg.run_options(), cfg.gsa_thresholds);
                }
            }
        }
        return out;
    }();
    return reports;
}

Check criterion2() {
    Check c;
    auto& g = gsa_reports();
    using K = InstrumentKind;
    const auto& eu_sd = g[{K::European, Quantity::Price, Scheme::Standard}];
    const auto& eu_bb = g[{K::European, Quantity::Price, Scheme::BrownianBridge}];
    const auto& ko_sd = g[{K::DoubleKnockOut, Quantity::Price, Scheme::Standard}];
    const auto& ko_bb = g[{K::DoubleKnockOut, Quantity::Price, Scheme::BrownianBridge}];
    const auto& cl_sd = g[{K::Cliquet, Quantity::Price, Scheme::Standard}];
    const auto& cv_sd = g[{K::Cliquet, Quantity::Vega, Scheme::Standard}];
    const auto& cv_bb = g[{K::Cliquet, Quantity::Vega, Scheme::BrownianBridge}];
    c.note(fmt::format("N = {}", kGsaN));
    c.expect(within(eu_sd.d_a, 1.40, 0.15), fmt::format("european price sd  d_A {:.3f} (1.40 +- 0.15)", eu_sd.d_a));
    c.expect(within(eu_bb.d_a, 1.00, 0.05) && eu_bb.d_t == 1,
             fmt::format("european price bbd d_A {:.3f} (1.00 +- 0.05), d_T {} (1)", eu_bb.d_a, eu_bb.d_t));
    c.expect(within(ko_sd.d_a, 8.5, 1.0), fmt::format("double_ko price sd  d_A {:.3f} (8.5 +- 1.0)", ko_sd.d_a));
    c.expect(within(ko_bb.d_a, 1.63, 0.2), fmt::format("double_ko price bbd d_A {:.3f} (1.63 +- 0.2)", ko_bb.d_a));
    c.expect(cl_sd.sum_first >= 0.95 && cl_sd.d_a <= 1.1,
             fmt::format("cliquet price sd sum S_i {:.4f} (>= 0.95), d_A {:.4f} (<= 1.1)", cl_sd.sum_first, cl_sd.d_a));
    c.expect(within(cv_bb.d_a, 2.6, 0.5) && within(cv_sd.d_a, 1.0, 0.1) && cv_bb.d_a > cv_sd.d_a,
             fmt::format("cliquet vega d_A bbd {:.3f} (2.6 +- 0.5) > sd {:.3f} (1.0 +- 0.1)", cv_bb.d_a, cv_sd.d_a));
    return c;
}

Check criterion3() {
    using K = InstrumentKind;
    using Q = Quantity;
    const FunctionType A = FunctionType::A, B = FunctionType::B, C = FunctionType::C;
    // {SD, BBD}
    const std::map<std::pair<K, Q>, std::pair<FunctionType, FunctionType>> expected{
        {{K::European, Q::Price}, {B, A}},       {{K::European, Q::Delta}, {B, A}},
        {{K::European, Q::Gamma}, {C, A}},       {{K::European, Q::Vega}, {B, A}},
        {{K::AsianGeometric, Q::Price}, {B, A}}, {{K::AsianGeometric, Q::Delta}, {C, A}},
        {{K::AsianGeometric, Q::Gamma}, {C, C}}, {{K::AsianGeometric, Q::Vega}, {B, A}},
        {{K::DoubleKnockOut, Q::Price}, {C, A}}, {{K::DoubleKnockOut, Q::Delta}, {C, A}},
        {{K::DoubleKnockOut, Q::Gamma}, {C, A}}, {{K::DoubleKnockOut, Q::Vega}, {C, C}},
        {{K::Cliquet, Q::Price}, {B, A}},        {{K::Cliquet, Q::Vega}, {B, C}},
    };
    Check c;
    auto& g = gsa_reports();
    int matched = 0;
    for (const auto& [key, types] : expected) {
        const auto& sd = g.at({key.first, key.second, Scheme::Standard});
        const auto& bb = g.at({key.first, key.second, Scheme::BrownianBridge});
        const bool ok = sd.type == types.first && bb.type == types.second;
        matched += (sd.type == types.first) + (bb.type == types.second);
        c.expect(ok, fmt::format("{:9} {:6} sd {} (want {})  bbd {} (want {})   d_T {:2}/{:2}  sum_S {:.2f}/{:.2f}",
                                 to_string(key.first), to_string(key.second), to_string(sd.type),
                                 to_string(types.first), to_string(bb.type), to_string(types.second), sd.d_t, bb.d_t,
                                 sd.sum_first, bb.sum_first));
    }
    c.note(fmt::format("{} of 28 classifications match", matched));
    return c;
}

// ---------------------------------------------------------------------------

Check criterion4() {
    Check c;
    auto& r = convergence_runs();
    auto find = [](const std::vector<SpeedUpRow>& rows, Method i, Method j, double a) {
        for (const auto& row : rows) {
            if (row.method_i == i && row.method_j == j && row.accuracy == a) return row;
        }
        throw std::runtime_error("speed-up row missing");
    };
    const double want[2] = {30.0, 140.0};
    const double acc[2] = {1e-2, 1e-3};
    for (int k = 0; k < 2; ++k) {
        const auto row = find(r.european_rows, Method::QmcBbd, Method::McSd, acc[k]);
        const double s = row.speed_up.value_or(NAN);
        c.expect(row.speed_up && s >= want[k] / 2 && s <= want[k] * 2,
                 fmt::format("european price qmc-bbd vs mc-sd at a = {:g}: S* = {:.1f} (target {} within x2; N* {:.3g} vs "
                             "{:.3g})",
                             acc[k], s, want[k], row.n_star_i.value_or(NAN), row.n_star_j.value_or(NAN)));
    }
    bool undefined = true;
    for (const auto& row : r.asian_rows) {
        if (row.accuracy != 1e-3 || row.method_i == row.method_j) continue;
        undefined = undefined && !row.speed_up;
        c.note(fmt::format("asian gamma a = 0.001 {} vs {}: N* {} / {}", to_string(row.method_i), to_string(row.method_j),
                           row.n_star_i ? fmt::format("{:.3g}", *row.n_star_i) : "-",
                           row.n_star_j ? fmt::format("{:.3g}", *row.n_star_j) : "-"));
    }
    const auto& ag = r.asian_gamma.front();
    c.note(fmt::format("asian gamma reference {:.6g}, b = {:.3g}, h = {:g}, bias floor 3|b|h^2 = {:.3g}, a|V| = {:.3g}",
                       ag.reference, ag.bias_b, ag.shift, 3 * std::abs(ag.bias_b) * ag.shift * ag.shift,
                       1e-3 * std::abs(ag.reference)));
    c.expect(undefined, "asian gamma at a = 0.001: every cross-method speed-up undefined");
    // S^(i,j)·S^(j,i) is a product of two rounded quotients; 1 up to its rounding.
    double worst = 0.0;
    std::size_t pairs = 0;
    for (const auto* rows : {&r.european_rows, &r.asian_rows}) {
        for (const auto& a : *rows) {
            for (const auto& b : *rows) {
                if (a.method_i != b.method_j || a.method_j != b.method_i || a.accuracy != b.accuracy) continue;
                if (!a.speed_up || !b.speed_up) continue;
                worst = std::max(worst, std::abs(*a.speed_up * *b.speed_up - 1.0));
                ++pairs;
            }
        }
    }
    c.expect(worst <= 2 * DBL_EPSILON,
             fmt::format("antisymmetry over {} ordered pairs: max |S_ij S_ji - 1| = {:.3g}", pairs, worst));
    return c;
}

// ---------------------------------------------------------------------------

// Joe–Kuo table re-read here, directions built as generator matrices and
// points taken in natural order at index gray(n). Shares no code with SobolSequence.
std::vector<std::vector<std::uint32_t>> reference_sobol(std::size_t dims, std::size_t points) {
    std::ifstream in(DirectionTable::default_path());
    std::vector<std::array<std::uint32_t, 32>> cols(1);
    for (int k = 0; k < 32; ++k) cols[0][k] = 1U << (31 - k);
    std::string line;
    std::getline(in, line);
    while (cols.size() < dims && std::getline(in, line)) {
        std::istringstream f(line);
        unsigned d = 0, s = 0;
        unsigned long a = 0;
        f >> d >> s >> a;
        std::vector<unsigned long> m(s);
        for (auto& x : m) f >> x;
        std::array<unsigned long, 32> mm{};
        for (unsigned k = 0; k < 32; ++k) {
            if (k < s) {
                mm[k] = m[k];
                continue;
            }
            // m_k = 2^s m_{k-s} xor m_{k-s} xor sum_j 2^j a_j m_{k-j}
            unsigned long v = (mm[k - s] << s) ^ mm[k - s];
            for (unsigned j = 1; j < s; ++j) {
                if ((a >> (s - 1 - j)) & 1UL) v ^= mm[k - j] << j;
            }
            mm[k] = v;
        }
        std::array<std::uint32_t, 32> col{};
        for (unsigned k = 0; k < 32; ++k) col[k] = static_cast<std::uint32_t>(mm[k] << (31 - k));
        cols.push_back(col);
    }
    std::vector<std::vector<std::uint32_t>> out(points, std::vector<std::uint32_t>(dims));
    for (std::size_t n = 1; n <= points; ++n) {
        const std::uint64_t g = n ^ (n >> 1);
        for (std::size_t d = 0; d < dims; ++d) {
            std::uint32_t x = 0;
            for (int k = 0; k < 32; ++k) {
                if ((g >> k) & 1U) x ^= cols[d][k];
            }
            out[n - 1][d] = x;
        }
    }
    return out;
}

// Composite 8-point Gauss–Legendre on [a, b].
template <class F>
double gauss_legendre(F&& f, double a, double b, int panels) {
    static const double x[4] = {0.1834346424956498, 0.5255324099163290, 0.7966664774136267, 0.9602898564975363};
    static const double w[4] = {0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
    const double step = (b - a) / panels;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * step, half = 0.5 * step;
        for (int i = 0; i < 4; ++i) total += w[i] * half * (f(mid - half * x[i]) + f(mid + half * x[i]));
    }
    return total;
}

Check criterion5() {
    Check c;
    constexpr std::uint64_t n = std::uint64_t{1} << 16;

    // Additive: f = Σ a_i x_i, S_i = S_i^tot = a_i² / Σ a_j².
    const std::vector<double> a{1.0, 2.0, 0.5, 3.0, 0.25};
    double sa = 0.0;
    for (double v : a) sa += v * v;
    FunctionIntegrand add(a.size(), InputSpace::Uniform, [&](std::span<const double> x) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
        return s;
    });
    const auto ra = estimate_indices(add, n);
    double err_a = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        err_a = std::max({err_a, std::abs(ra.first[i] - a[i] * a[i] / sa), std::abs(ra.total[i] - a[i] * a[i] / sa)});
    }
    c.expect(err_a <= 0.01, fmt::format("additive (D = 5) max index error {:.2e} (<= 0.01)", err_a));

    // Product: f = Π (1 + c_i (x_i − ½)), v_i = c_i²/12, V = Π(1 + v_i) − 1.
    const std::vector<double> k{2.0, 1.0, 1.5, 0.5, 0.25, 0.1};
    FunctionIntegrand prod(k.size(), InputSpace::Uniform, [&](std::span<const double> x) {
        double p = 1.0;
        for (std::size_t i = 0; i < k.size(); ++i) p *= 1.0 + k[i] * (x[i] - 0.5);
        return p;
    });
    std::vector<double> v(k.size());
    double big = 1.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        v[i] = k[i] * k[i] / 12.0;
        big *= 1.0 + v[i];
    }
    const double var = big - 1.0;
    const auto rp = estimate_indices(prod, n);
    double err_p = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double s = v[i] / var, t = v[i] * big / (1.0 + v[i]) / var;
        err_p = std::max({err_p, std::abs(rp.first[i] - s), std::abs(rp.total[i] - t)});
    }
    c.expect(err_p <= 0.01, fmt::format("product (D = 6) max index error {:.2e} (<= 0.01)", err_p));

    // Sobol' against the generator-matrix construction and the frozen scipy digest.
    const auto want = reference_sobol(64, 4096);
    SobolSequence s(64);
    std::vector<std::uint32_t> p(64);
    std::size_t mismatches = 0;
    Fnv1a h;
    for (std::size_t row = 0; row < 4096; ++row) {
        s.next_raw(p);
        mismatches += !std::equal(p.begin(), p.end(), want[row].begin());
        for (std::uint32_t x : p) {
            const unsigned char bytes[4] = {static_cast<unsigned char>(x), static_cast<unsigned char>(x >> 8),
                                            static_cast<unsigned char>(x >> 16), static_cast<unsigned char>(x >> 24)};
            h.update(bytes, 4);
        }
    }
    c.expect(mismatches == 0, fmt::format("sobol' 4096 x 64 vs generator-matrix construction: {} rows differ", mismatches));
    c.expect(h.digest() == 0x667b9af093c9aa70ULL, fmt::format("sobol' 4096 x 64 digest {:#018x} (scipy 0x667b9af093c9aa70)", h.digest()));

    // Geometric Asian: closed form vs quadrature of the lognormal density.
    const auto grid = TimeGrid::uniform(1.0, 32);
    double worst = 0.0;
    for (double r : {0.0, 0.05}) {
        for (double vol : {0.1, 0.3}) {
            const ModelParams m{100.0, r, vol};
            double mean_t = 0.0, min_sum = 0.0;
            for (double ti : grid.times()) {
                mean_t += ti / 32.0;
                for (double tj : grid.times()) min_sum += std::min(ti, tj);
            }
            const double mu = std::log(100.0) + (r - 0.5 * vol * vol) * mean_t;
            const double sd = vol * std::sqrt(min_sum) / 32.0;
            const double oracle =
                std::exp(-r) * gauss_legendre(
                                   [&](double y) {
                                       const double z = (y - mu) / sd;
                                       return (std::exp(y) - 100.0) * std::exp(-0.5 * z * z) / (sd * std::sqrt(2 * M_PI));
                                   },
                                   std::log(100.0), mu + 14.0 * sd, 400);
            const double closed = asian_geometric_reference(InstrumentSpec::asian_geometric(), m, grid).price;
            worst = std::max(worst, std::abs(closed - oracle));
        }
    }
    c.expect(worst <= 1e-10, fmt::format("geometric asian closed form vs quadrature: max error {:.2e} (<= 1e-10)", worst));
    return c;
}

// ---------------------------------------------------------------------------

Check criterion6() {
    Check c;
    const ModelParams model{100.0, 0.0, 0.3};
    const auto grid = TimeGrid::uniform(1.0, 32);
    const auto spec = InstrumentSpec::european();
    const Greeks exact = bs_reference(spec, model);

    // Bias of the noise-free pricer's central differences against ε.
    for (auto q : {Quantity::Delta, Quantity::Gamma, Quantity::Vega}) {
        std::vector<std::pair<double, double>> pts;
        for (double eps = 0.005; eps <= 0.0801; eps *= std::sqrt(2.0)) {
            const bool spot = q != Quantity::Vega;
            const double theta = spot ? model.spot : model.vol;
            const double h = spot ? eps * model.spot : eps;
            auto v = [&](double x) {
                return bs_reference(spec, spot ? ModelParams{x, model.rate, model.vol} : ModelParams{model.spot, model.rate, x})
                    .price;
            };
            pts.emplace_back(eps, std::abs(central_difference(v, theta, h, q) - exact.get(q)));
        }
        const auto fit = fit_power_law(pts);
        c.expect(within(-fit.alpha, 2.0, 0.1), fmt::format("{:5} bias slope {:.4f} (2.0 +- 0.1)", to_string(q), -fit.alpha));
    }

    // h_N from the error model against a grid search, European delta, MC+SD, N = 2^14.
    constexpr std::uint64_t n = std::uint64_t{1} << 14;
    constexpr int runs = 30;
    auto sample = [&](double eps) {
        std::vector<double> v(runs);
        for (int l = 0; l < runs; ++l) {
            v[l] = fd_greek(spec, model, grid, Method::McSd, n, Quantity::Delta, eps, {0, derive_seed(6, l)})
                       .estimate.value;
        }
        return v;
    };
    double best_h = 0.0, best = INFINITY;
    for (int e = 0; e <= 24; ++e) {
        const double eps = std::pow(10.0, -4.0 + e / 8.0);
        const double r = rmse(exact.delta, sample(eps));
        if (r < best) best = r, best_h = eps * model.spot;
    }
    const double eps0 = default_epsilon(InstrumentKind::European);
    const auto pilot = sample(eps0);
    double mean = 0.0, var = 0.0;
    for (double x : pilot) mean += x / runs;
    for (double x : pilot) var += (x - mean) * (x - mean) / (runs - 1);
    FdErrorModel em;
    em.c = var * static_cast<double>(n) * eps0 * model.spot;
    em.b = bias_constant(spec, model, grid, Quantity::Delta).b;
    const double h_n = optimal_shift(em, static_cast<double>(n)).value_or(NAN);
    const double ratio = h_n / best_h;
    c.note(fmt::format("c = {:.4g} (variance at eps = {:g}), b = {:.4g}", em.c, eps0, em.b));
    c.expect(ratio >= 0.5 && ratio <= 2.0,
             fmt::format("h_N = {:.3f} vs grid optimum h = {:.3f} (ratio {:.2f}, within x2)", h_n, best_h, ratio));

    // Sample covariance of W(t_i)W(t_j) over 2^16 Sobol'-driven paths.
    constexpr std::uint64_t paths = std::uint64_t{1} << 16;
    const std::size_t d = grid.size();
    const BrownianBridge bridge(grid);
    for (auto scheme : {Scheme::Standard, Scheme::BrownianBridge}) {
        std::vector<double> sum(d * d, 0.0), sum_sq(d * d, 0.0);
        SobolSequence seq(d);
        std::vector<double> u(d), z(d), w(d);
        for (std::uint64_t k = 0; k < paths; ++k) {
            seq.next(u);
            to_input_space(InputSpace::Normal, u, z);
            if (scheme == Scheme::Standard) {
                path_sd(z, grid, w);
            } else {
                path_bbd(z, bridge, w);
            }
            for (std::size_t i = 0; i < d; ++i) {
                for (std::size_t j = 0; j <= i; ++j) {
                    const double x = w[i] * w[j];
                    sum[i * d + j] += x;
                    sum_sq[i * d + j] += x * x;
                }
            }
        }
        double worst = 0.0;
        std::size_t outside = 0;
        const auto np = static_cast<double>(paths);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const double m = sum[i * d + j] / np;
                const double se = std::sqrt((sum_sq[i * d + j] / np - m * m) / (np - 1));
                const double zscore = std::abs(m - std::min(grid.times()[i], grid.times()[j])) / se;
                worst = std::max(worst, zscore);
                outside += zscore > 3.0;
            }
        }
        c.expect(outside == 0, fmt::format("{} covariance: {} of {} entries outside 3 SE (max {:.2f} SE)",
                                           scheme == Scheme::Standard ? "sd " : "bbd", outside, d * (d + 1) / 2, worst));
    }
    return c;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> read_outputs(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().extension() != ".csv") continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        out[e.path().filename().string()] = buf.str();
    }
    return out;
}

Check criterion7() {
    Check c;
    {
        ExperimentConfig cfg = base_config();
        cfg.output_dir.clear();
        cfg.instruments = {InstrumentKind::European};
        cfg.functions = {Quantity::Price};
        cfg.methods = {Method::McSd, Method::QmcBbd};
        Session s(cfg);
        const auto series = run_stability(s);
        const auto& mc = series[0].report;
        const auto& bbd = series[1].report;
        int wins = 0;
        std::string vols;
        // Windows 2..10: the ones with a log-return, i.e. comparable across methods.
        for (std::size_t w = 1; w < mc.vols.size(); ++w) {
            wins += bbd.vols[w] < mc.vols[w];
            vols += fmt::format(" {:.1e}/{:.1e}", bbd.vols[w], mc.vols[w]);
        }
        c.note("window vol bbd/mc:" + vols);
        c.expect(wins >= 8, fmt::format("european price: qmc-bbd window vol below mc-sd in {} of 9 windows (>= 8)", wins));
    }

    // Every driver at reduced sizes, once single-threaded and once on 4 workers.
    auto run_all = [&](std::size_t threads, const fs::path& dir) {
        fs::remove_all(dir);
        ExperimentConfig cfg = base_config();
        cfg.threads = threads;
        cfg.output_dir = dir;
        cfg.price_n = 1 << 12;
        cfg.gsa_n = 1 << 10;
        cfg.gsa_epsilons = {1e-3};
        cfg.convergence_n_min = 1 << 9;
        cfg.convergence_n_max = 1 << 13;
        cfg.runs = 8;
        cfg.reference_n = 1 << 16;
        cfg.stability_n_max = 2000;
        cfg.functions = {Quantity::Price, Quantity::Delta};
        cfg.bias_n = 1 << 18;
        Session s(cfg);
        (void)run_reference(s);
        (void)run_price(s);
        (void)run_greeks(s);
        (void)run_gsa(s);
        (void)run_speedup(s);
        (void)run_stability(s);
        s.finish();
        return read_outputs(dir);
    };
    const auto one = run_all(1, g_work / "repro-1");
    const auto many = run_all(4, g_work / "repro-4");
    std::vector<std::string> differ;
    for (const auto& [name, bytes] : one) {
        auto it = many.find(name);
        if (it == many.end() || it->second != bytes) differ.push_back(name);
    }
    c.note(fmt::format("{} report files compared", one.size()));
    c.expect(differ.empty() && one.size() == many.size() && one.size() >= 8,
             differ.empty() ? "all csv reports byte-identical at 1 vs 4 threads"
                            : fmt::format("differ at 1 vs 4 threads: {}", fmt::join(differ, ", ")));
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only, allowed;
    g_threads = std::max(1U, std::thread::hardware_concurrency());
    g_work = fs::temp_directory_path() / "qmcgsa-acceptance";
    for (int i = 1; i < argc; ++i) {
        const std::string a = argv[i];
        auto ints = [&](std::set<int>& into) {
            if (i + 1 >= argc) throw std::invalid_argument(a + " needs a value");
            std::stringstream list(argv[++i]);
            for (std::string x; std::getline(list, x, ',');) into.insert(std::stoi(x));
        };
        if (a == "--only") {
            ints(only);
        } else if (a == "--allow-fail") {
            ints(allowed);
        } else if (a == "--threads" && i + 1 < argc) {
            g_threads = std::stoul(argv[++i]);
        } else if (a == "--work" && i + 1 < argc) {
            g_work = argv[++i];
        } else {
            std::fprintf(stderr, "usage: %s [--only 1,2,..] [--allow-fail 4,..] [--threads N] [--work DIR]\n", argv[0]);
            return 2;
        }
    }
    fs::create_directories(g_work);

    const std::vector<std::pair<std::string, std::function<Check()>>> criteria{
        {"convergence rates", criterion1},  {"gsa headline numbers", criterion2},
        {"type classification", criterion3}, {"speed-up", criterion4},
        {"oracle equivalence", criterion5},  {"numerical-analysis properties", criterion6},
        {"stability and reproducibility", criterion7},
    };
    int failures = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k) + 1;
        if (!only.empty() && !only.contains(id)) continue;
        Check c;
        try {
            c = criteria[k].second();
        } catch (const std::exception& e) {
            c.expect(false, fmt::format("exception: {}", e.what()));
        }
        const bool tolerated = !c.ok && allowed.contains(id);
        std::printf("%s criterion %d: %s%s\n", c.ok ? "PASS" : "FAIL", id, criteria[k].first.c_str(),
                    tolerated ? " (known failure, not counted)" : "");
        for (const auto& line : c.lines) std::printf("    %s\n", line.c_str());
        std::fflush(stdout);
        failures += !c.ok && !tolerated;
    }
    return failures;
}
