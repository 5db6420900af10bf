#include "qmcgsa/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

#include <fmt/format.h>

#include "qmcgsa/error.hpp"
#include "qmcgsa/hash.hpp"
#include "qmcgsa/normal.hpp"

namespace qmcgsa {

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::McSd: return "mc-sd";
        case Method::QmcSd: return "qmc-sd";
        case Method::QmcBbd: return "qmc-bbd";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    std::string s;
    for (char c : name) s.push_back(c == '_' ? '-' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (s == "mc-sd" || s == "mc") return Method::McSd;
    if (s == "qmc-sd") return Method::QmcSd;
    if (s == "qmc-bbd" || s == "qmc-bb") return Method::QmcBbd;
    throw ConfigError(fmt::format("unknown method '{}' (expected mc-sd, qmc-sd or qmc-bbd)", name));
}

void to_input_space(InputSpace space, std::span<const double> u, std::span<double> out) {
    if (space == InputSpace::Normal) {
        to_normals(u, out);
    } else {
        std::copy(u.begin(), u.end(), out.begin());
    }
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t, std::size_t)>& task) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) task(i, 0);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    task(i, w);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = count;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

namespace {

struct ChunkSums {
    double sum = 0.0;
    double sum_sq = 0.0;
};

// Recursive halving; exact for 2^p equal terms.
template <class Get>
double pairwise_sum(std::size_t lo, std::size_t hi, Get&& get) {
    const std::size_t n = hi - lo;
    if (n == 1) return get(lo);
    if (n == 2) return get(lo) + get(lo + 1);
    const std::size_t mid = lo + n / 2;
    return pairwise_sum(lo, mid, get) + pairwise_sum(mid, hi, get);
}

// Evaluates one chunk; `emit` receives each sample (a pair average under MC).
template <class Emit>
void run_chunk(Integrand& f, Method method, std::uint64_t chunk_index, std::uint64_t first, std::uint64_t count,
               const SampleBlock& block, const std::shared_ptr<const DirectionTable>& table, Emit&& emit) {
    const std::size_t dim = f.dimension();
    std::vector<double> u(dim), x(dim), mate(dim);
    if (is_qmc(method)) {
        SobolSequence seq(table, dim);
        seq.skip(block.offset + first);
        for (std::uint64_t k = 0; k < count; ++k) {
            seq.next(u);
            to_input_space(f.input_space(), u, x);
            emit(f.evaluate(x));
        }
    } else {
        PseudoRandomSequence seq(derive_seed(block.seed, chunk_index), dim);
        for (std::uint64_t k = 0; k < count; ++k) {
            seq.next(u);
            to_input_space(f.input_space(), u, x);
            if (f.input_space() == InputSpace::Normal) {
                antithetic(x, mate);
            } else {
                for (std::size_t d = 0; d < dim; ++d) mate[d] = 1.0 - x[d];
            }
            const double a = f.evaluate(x);
            const double b = f.evaluate(mate);
            emit(0.5 * (a + b));
        }
    }
}

std::shared_ptr<const DirectionTable> table_for(const RunOptions& options) {
    return options.directions ? options.directions : DirectionTable::default_table();
}

}  // namespace

void validate_sample_size(Method method, std::uint64_t n) {
    if (n < 2) throw ConfigError(fmt::format("N must be at least 2, got {}", n));
    if (is_qmc(method) && !std::has_single_bit(n)) {
        throw ConfigError(fmt::format("QMC runs need N = 2^p, got N = {}", n));
    }
    if (!is_qmc(method) && n % 2 != 0) throw ConfigError(fmt::format("MC with antithetic pairs needs an even N, got {}", n));
}

PriceEstimate simulate(const Integrand& f, Method method, std::uint64_t n, const SampleBlock& block,
                       const RunOptions& options) {
    if (n < 2) throw ConfigError("simulate: N must be at least 2");
    if (!is_qmc(method) && n % 2 != 0) throw ConfigError("simulate: MC with antithetic pairing needs an even N");
    if (options.chunk == 0) throw ConfigError("simulate: chunk size must be positive");
    const auto table = table_for(options);
    // Under MC a point is one antithetic pair.
    const std::uint64_t points = is_qmc(method) ? n : n / 2;
    const std::uint64_t chunks = (points + options.chunk - 1) / options.chunk;
    std::vector<ChunkSums> sums(chunks);
    const std::size_t slots = std::max<std::size_t>(1, options.threads);
    std::vector<std::unique_ptr<Integrand>> workers(slots);
    std::vector<std::vector<double>> buffers(slots);
    parallel_for(chunks, options.threads, [&](std::size_t c, std::size_t w) {
        if (!workers[w]) workers[w] = f.clone();
        const std::uint64_t first = c * options.chunk;
        const std::uint64_t count = std::min(options.chunk, points - first);
        auto& values = buffers[w];
        values.clear();
        run_chunk(*workers[w], method, c, first, count, block, table, [&](double v) { values.push_back(v); });
        sums[c].sum = pairwise_sum(0, values.size(), [&](std::size_t i) { return values[i]; });
        sums[c].sum_sq = pairwise_sum(0, values.size(), [&](std::size_t i) { return values[i] * values[i]; });
    });
    ChunkSums total;
    total.sum = pairwise_sum(0, sums.size(), [&](std::size_t i) { return sums[i].sum; });
    total.sum_sq = pairwise_sum(0, sums.size(), [&](std::size_t i) { return sums[i].sum_sq; });
    PriceEstimate est;
    est.method = method;
    est.n = n;
    est.uniforms_consumed = points * f.dimension();
    const double m = static_cast<double>(points);
    est.value = total.sum / m;
    if (!std::isfinite(est.value)) throw NumericalError("simulate: non-finite estimate");
    if (!is_qmc(method)) {
        const double var = std::max(0.0, (total.sum_sq - m * est.value * est.value) / (m - 1.0));
        est.std_error = points > 1 ? std::sqrt(var / m) : 0.0;
    }
    return est;
}

std::vector<double> running_means(const Integrand& f, Method method, std::span<const std::uint64_t> checkpoints,
                                  const SampleBlock& block, const RunOptions& options) {
    if (checkpoints.empty()) return {};
    std::uint64_t prev = 0;
    for (auto n : checkpoints) {
        if (n <= prev) throw ConfigError("running_means: checkpoints must be strictly increasing");
        if (!is_qmc(method) && n % 2 != 0) throw ConfigError("running_means: MC checkpoints must be even");
        prev = n;
    }
    const auto table = table_for(options);
    const std::uint64_t points = is_qmc(method) ? checkpoints.back() : checkpoints.back() / 2;
    const std::uint64_t chunks = (points + options.chunk - 1) / options.chunk;
    auto worker = f.clone();
    std::vector<double> out;
    out.reserve(checkpoints.size());
    std::size_t next_cp = 0;
    std::uint64_t seen = 0;
    double mean = 0.0;
    for (std::uint64_t c = 0; c < chunks; ++c) {
        const std::uint64_t first = c * options.chunk;
        const std::uint64_t count = std::min(options.chunk, points - first);
        run_chunk(*worker, method, c, first, count, block, table, [&](double v) {
            ++seen;
            // Incremental form keeps a constant integrand exactly constant.
            mean += (v - mean) / static_cast<double>(seen);
            const std::uint64_t n_paths = is_qmc(method) ? seen : 2 * seen;
            if (next_cp < checkpoints.size() && n_paths == checkpoints[next_cp]) {
                out.push_back(mean);
                ++next_cp;
            }
        });
    }
    return out;
}

}  // namespace qmcgsa
