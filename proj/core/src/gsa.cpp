#include "qmcgsa/gsa.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "qmcgsa/error.hpp"
#include "qmcgsa/hash.hpp"

namespace qmcgsa {

std::string_view to_string(FunctionType t) noexcept {
    switch (t) {
        case FunctionType::A: return "A";
        case FunctionType::B: return "B";
        case FunctionType::C: return "C";
    }
    return "?";
}

namespace {

// Per-chunk sums of f − c (c: value at the first point, to limit cancellation).
struct GsaSums {
    double a = 0.0, aa = 0.0, b = 0.0;
    std::vector<double> cross, diff, sq;  // Σ g_B(g_C−g_A), Σ (g_C−g_A), Σ (g_A−g_C)²

    explicit GsaSums(std::size_t d = 0) : cross(d), diff(d), sq(d) {}
    void add(const GsaSums& o) {
        a += o.a;
        aa += o.aa;
        b += o.b;
        for (std::size_t i = 0; i < cross.size(); ++i) {
            cross[i] += o.cross[i];
            diff[i] += o.diff[i];
            sq[i] += o.sq[i];
        }
    }
};

}  // namespace

GsaReport estimate_indices(const Integrand& target, std::uint64_t n, SequenceKind kind, const SampleBlock& block,
                           const RunOptions& options, const GsaThresholds& thresholds) {
    const std::size_t d = target.dimension();
    if (d == 0) throw ConfigError("GSA target has dimension 0");
    if (n < 2) throw ConfigError("GSA needs at least 2 trials");
    const auto table = options.directions ? options.directions : DirectionTable::default_table();
    const std::uint64_t chunk = options.chunk == 0 ? 4096 : options.chunk;
    const std::uint64_t chunks = (n + chunk - 1) / chunk;

    auto make_stream = [&](std::uint64_t c) -> UniformStream {
        if (kind == SequenceKind::Sobol) {
            SobolSequence s(table, 2 * d);
            s.skip(block.offset + c * chunk);
            return s;
        }
        return PseudoRandomSequence(derive_seed(block.seed, c), 2 * d);
    };

    double shift = 0.0;
    {
        auto f = target.clone();
        auto stream = make_stream(0);
        std::vector<double> u(2 * d), x(d);
        stream.next(u);
        to_input_space(target.input_space(), std::span(u).first(d), x);
        shift = f->evaluate(x);
    }

    std::vector<GsaSums> sums(chunks, GsaSums(d));
    std::vector<std::unique_ptr<Integrand>> workers(std::max<std::size_t>(1, options.threads));
    parallel_for(chunks, options.threads, [&](std::size_t c, std::size_t w) {
        if (!workers[w]) workers[w] = target.clone();
        Integrand& f = *workers[w];
        auto stream = make_stream(c);
        std::vector<double> u(2 * d), xa(d), xb(d), xc(d);
        GsaSums s(d);
        const std::uint64_t count = std::min(chunk, n - c * chunk);
        for (std::uint64_t k = 0; k < count; ++k) {
            stream.next(u);
            to_input_space(target.input_space(), std::span(u).first(d), xa);
            to_input_space(target.input_space(), std::span(u).last(d), xb);
            const double ga = f.evaluate(xa) - shift;
            const double gb = f.evaluate(xb) - shift;
            s.a += ga;
            s.aa += ga * ga;
            s.b += gb;
            xc = xa;
            for (std::size_t i = 0; i < d; ++i) {
                xc[i] = xb[i];
                const double gc = f.evaluate(xc) - shift;
                xc[i] = xa[i];
                s.cross[i] += gb * (gc - ga);
                s.diff[i] += gc - ga;
                s.sq[i] += (ga - gc) * (ga - gc);
            }
        }
        sums[c] = std::move(s);
    });
    GsaSums total(d);
    for (const auto& s : sums) total.add(s);

    GsaReport r;
    r.dimension = d;
    r.n = n;
    const double m = static_cast<double>(n);
    const double g0 = total.a / m;
    r.f0 = g0 + shift;
    r.variance = std::max(0.0, total.aa / m - g0 * g0);
    const double second_moment = total.aa / m + 2.0 * shift * g0 + shift * shift;
    if (!std::isfinite(r.variance)) throw NumericalError("GSA: non-finite variance");
    if (r.variance <= 1e-12 * second_moment || r.variance == 0.0) {
        r.degenerate = true;
        r.d_s_class = "undefined";
        return r;
    }
    r.first_raw.resize(d);
    r.total_raw.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
        r.first_raw[i] = (total.cross[i] / m - g0 * total.diff[i] / m) / r.variance;
        r.total_raw[i] = total.sq[i] / m / (2.0 * r.variance);
    }
    finalize(r, thresholds);
    return r;
}

std::size_t truncation_dimension(std::span<const double> total, double threshold) {
    const std::size_t d = total.size();
    std::vector<double> prefix(d + 1, 0.0);
    for (std::size_t i = 0; i < d; ++i) prefix[i + 1] = prefix[i] + std::clamp(total[i], 0.0, 1.0);
    for (std::size_t k = 1; k < d; ++k) {
        const double head = prefix[k] / static_cast<double>(k);
        const double tail = (prefix[d] - prefix[k]) / static_cast<double>(d - k);
        if (head > 0.0 && tail / head < threshold) return k;
    }
    return d;
}

std::size_t truncation_dimension(const GsaReport& report, double threshold) {
    return truncation_dimension(report.total, threshold);
}

double average_dimension(const GsaReport& report) {
    double s = 0.0;
    for (double t : report.total) s += t;
    return s;
}

FunctionType classify(const GsaReport& report, const GsaThresholds& th) {
    if (report.degenerate) return FunctionType::C;
    const double d = static_cast<double>(report.dimension);
    if (static_cast<double>(report.d_t) <= th.type_a_fraction * d) return FunctionType::A;
    if (report.sum_first >= th.min_sum_first && report.min_ratio >= th.min_ratio) return FunctionType::B;
    return FunctionType::C;
}

void finalize(GsaReport& r, const GsaThresholds& th) {
    if (r.degenerate) return;
    const std::size_t d = r.total_raw.size();
    r.total.resize(d);
    r.first.resize(d);
    double max_total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        r.total[i] = std::clamp(r.total_raw[i], 0.0, 1.0);
        r.first[i] = std::clamp(r.first_raw[i], 0.0, r.total[i]);
        max_total = std::max(max_total, r.total[i]);
    }
    r.sum_first = 0.0;
    r.min_ratio = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
        r.sum_first += r.first[i];
        if (max_total > 0.0 && r.total[i] >= th.importance * max_total) {
            r.min_ratio = std::min(r.min_ratio, r.first[i] / r.total[i]);
        }
    }
    r.d_t = truncation_dimension(r.total, th.truncation);
    r.d_a = average_dimension(r);
    r.qmc_favorable = r.d_a <= th.favorable_average;
    r.type = classify(r, th);
    switch (r.type) {
        case FunctionType::A: r.d_s_class = fmt::format("<={}", r.d_t); break;
        case FunctionType::B: r.d_s_class = fmt::format("<<{}", r.d_t); break;
        case FunctionType::C: r.d_s_class = fmt::format("~{}", d); break;
    }
}

void write_gsa_csv_header(std::ostream& out) {
    out << "instrument,function,scheme,epsilon,row,i,S_i_raw,S_i,S_tot_i_raw,S_tot_i,f0,variance,d_T,d_S_class,d_A,"
           "type,manifest\n";
}

void write_gsa_csv_rows(std::ostream& out, const GsaLabel& label, const GsaReport& r, std::string_view manifest) {
    const std::string eps = label.epsilon ? fmt::format("{:g}", *label.epsilon) : std::string();
    const std::string prefix = fmt::format("{},{},{},{}", label.instrument, label.function, label.scheme, eps);
    if (!r.degenerate) {
        for (std::size_t i = 0; i < r.dimension; ++i) {
            fmt::print(out, "{},index,{},{:.10g},{:.10g},{:.10g},{:.10g},,,,,,,{}\n", prefix, i + 1, r.first_raw[i],
                       r.first[i], r.total_raw[i], r.total[i], manifest);
        }
    }
    if (r.degenerate) {
        fmt::print(out, "{},summary,,,,,,{:.10g},{:.10g},,variance~0,,,{}\n", prefix, r.f0, r.variance, manifest);
        return;
    }
    fmt::print(out, "{},summary,,,,,,{:.10g},{:.10g},{},{},{:.6g},{},{}\n", prefix, r.f0, r.variance, r.d_t, r.d_s_class,
               r.d_a, to_string(r.type), manifest);
}

}  // namespace qmcgsa
