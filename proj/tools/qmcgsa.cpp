// qmcgsa: command-line front end for the experiments.
//
//   qmcgsa <command> [--config PATH] [--out DIR] [--seed U64] [--threads N]
//                    [--method M]... [--instrument I]... [--function F]... [--set key=value]...
//
// Exit codes: 0 ok, 2 configuration error, 3 missing reference, 4 numerical failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include "qmcgsa/error.hpp"
#include "qmcgsa/harness.hpp"

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kMissingReference = 3, kNumerical = 4 };

struct CommonArgs {
    std::optional<std::string> config;
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::vector<std::string> methods, instruments, functions, sets;
    bool quiet = false;
};

std::string join(const std::vector<std::string>& v) {
    std::string s;
    for (const auto& x : v) s += (s.empty() ? "" : ",") + x;
    return s;
}

qmcgsa::ExperimentConfig build_config(const CommonArgs& a) {
    qmcgsa::ConfigValues overrides;
    for (const auto& kv : a.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0) throw qmcgsa::ConfigError(fmt::format("--set expects key=value, got '{}'", kv));
        overrides[kv.substr(0, eq)] = kv.substr(eq + 1);
    }
    // Dedicated flags win over --set.
    if (!a.methods.empty()) overrides["methods"] = join(a.methods);
    if (!a.instruments.empty()) overrides["instruments"] = join(a.instruments);
    if (!a.functions.empty()) overrides["functions"] = join(a.functions);
    if (a.seed) overrides["seed"] = std::to_string(*a.seed);
    if (a.threads) overrides["threads"] = std::to_string(*a.threads);
    if (a.out) overrides["output.dir"] = *a.out;
    std::optional<std::filesystem::path> file;
    if (a.config) file = *a.config;
    return qmcgsa::load_config(file, overrides);
}

std::string num(const std::optional<double>& v, const char* none = "-") {
    return v ? fmt::format("{:.6g}", *v) : std::string(none);
}

void print_prices(const std::vector<qmcgsa::PriceRow>& rows) {
    fmt::print("{:<10} {:<6} {:<8} {:>8} {:>14} {:>11} {:>14}\n", "instrument", "func", "method", "N", "value",
               "std_err", "reference");
    for (const auto& r : rows) {
        const auto& e = r.estimate.estimate;
        fmt::print("{:<10} {:<6} {:<8} {:>8} {:>14.8g} {:>11} {:>14}{}\n", qmcgsa::to_string(r.instrument),
                   qmcgsa::to_string(r.function), qmcgsa::to_string(r.method), e.n, e.value, num(e.std_error, "n/a"),
                   num(r.reference), r.estimate.analytically_null ? "  (analytically null)" : "");
    }
}

void print_gsa(const std::vector<qmcgsa::GsaResult>& results) {
    fmt::print("{:<10} {:<6} {:<4} {:>7} {:>5} {:>8} {:>8} {:>8} {:>5}\n", "instrument", "func", "disc", "eps", "d_T",
               "sum_S", "min_r", "d_A", "type");
    for (const auto& r : results) {
        const auto& g = r.report;
        const std::string eps = r.epsilon ? fmt::format("{:g}", *r.epsilon) : "-";
        if (g.degenerate) {
            fmt::print("{:<10} {:<6} {:<4} {:>7}  variance ~ 0, indices undefined\n", qmcgsa::to_string(r.instrument),
                       qmcgsa::to_string(r.function), r.scheme == qmcgsa::Scheme::Standard ? "SD" : "BBD", eps);
            continue;
        }
        fmt::print("{:<10} {:<6} {:<4} {:>7} {:>5} {:>8.3f} {:>8.3f} {:>8.3f} {:>5}\n", qmcgsa::to_string(r.instrument),
                   qmcgsa::to_string(r.function), r.scheme == qmcgsa::Scheme::Standard ? "SD" : "BBD", eps, g.d_t,
                   g.sum_first, g.min_ratio, g.d_a, qmcgsa::to_string(g.type));
    }
}

void print_convergence(const std::vector<qmcgsa::ConvergenceSeries>& all) {
    fmt::print("{:<10} {:<6} {:<8} {:>9} {:>8} {:>9} {:>6}\n", "instrument", "func", "method", "slope", "+-", "k",
               "pts");
    for (const auto& s : all) {
        fmt::print("{:<10} {:<6} {:<8} {:>9.3f} {:>8.3f} {:>9.3f} {:>6}\n", qmcgsa::to_string(s.instrument),
                   qmcgsa::to_string(s.function), qmcgsa::to_string(s.method), -s.fit.alpha, s.fit.alpha_se, s.fit.k,
                   s.fit.points);
    }
}

void print_speedup(const std::vector<qmcgsa::SpeedUpRow>& rows) {
    fmt::print("{:<10} {:<6} {:<8} {:<8} {:>7} {:>12} {:>12} {:>10}\n", "instrument", "func", "i", "j", "a", "N*_i",
               "N*_j", "S*");
    for (const auto& r : rows) {
        if (r.method_i == r.method_j) continue;
        fmt::print("{:<10} {:<6} {:<8} {:<8} {:>7g} {:>12} {:>12} {:>10}\n", qmcgsa::to_string(r.instrument),
                   qmcgsa::to_string(r.function), qmcgsa::to_string(r.method_i), qmcgsa::to_string(r.method_j),
                   r.accuracy, num(r.n_star_i), num(r.n_star_j), num(r.speed_up));
    }
}

void print_stability(const std::vector<qmcgsa::StabilitySeries>& all) {
    fmt::print("{:<10} {:<6} {:<8} {:>12} {:>12}\n", "instrument", "func", "method", "max|logret|", "mean vol");
    for (const auto& s : all) {
        double max_lr = 0.0, mean_vol = 0.0;
        for (const auto& r : s.report.logret) {
            if (r) max_lr = std::max(max_lr, std::abs(*r));
        }
        for (double v : s.report.vols) mean_vol += v / static_cast<double>(s.report.vols.size());
        fmt::print("{:<10} {:<6} {:<8} {:>12.4g} {:>12.4g}\n", qmcgsa::to_string(s.instrument),
                   qmcgsa::to_string(s.function), qmcgsa::to_string(s.method), max_lr, mean_vol);
    }
}

int run(const std::string& command, const CommonArgs& args) {
    const auto config = build_config(args);
    const auto start = std::chrono::steady_clock::now();
    qmcgsa::Logger logger;
    if (!args.quiet) {
        logger = [start](std::string_view msg) {
            const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            fmt::print(stderr, "[{:8.2f}s] {}\n", t, msg);
        };
    }
    qmcgsa::Session session(config, logger);
    session.log(fmt::format("{} (config {}, manifest {})", command, config.hash(), session.manifest().id));

    if (command == "price") {
        print_prices(qmcgsa::run_price(session));
    } else if (command == "greeks") {
        print_prices(qmcgsa::run_greeks(session));
    } else if (command == "gsa") {
        print_gsa(qmcgsa::run_gsa(session));
    } else if (command == "convergence") {
        print_convergence(qmcgsa::run_convergence(session));
    } else if (command == "speedup") {
        print_speedup(qmcgsa::run_speedup(session));
    } else if (command == "stability") {
        print_stability(qmcgsa::run_stability(session));
    } else if (command == "reference") {
        for (const auto& [name, e] : qmcgsa::run_reference(session)) {
            fmt::print("{:<20} {:>16.10g} {:>11.3g} {}\n", name, e.value, e.std_error, e.n == 0 ? "analytic" : "simulated");
        }
    }
    session.finish();
    if (session.writes_files()) session.log(fmt::format("wrote {}", config.output_dir.string()));
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quasi-Monte Carlo pricing, greeks and global sensitivity analysis experiments"};
    app.set_version_flag("--version", std::string(qmcgsa::library_version()));
    app.require_subcommand(0, 1);
    bool dump_config = false;
    app.add_flag("--print-config", dump_config, "Print every configuration key with its default and exit");

    CommonArgs args;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"price", "Price the configured instruments"},
        {"greeks", "Finite-difference delta, gamma and vega with path recycling"},
        {"gsa", "Sobol' sensitivity indices, effective dimensions and function types"},
        {"convergence", "RMSE against N over independent runs and power-law fits"},
        {"speedup", "Paths needed for a target accuracy and pairwise speed-ups"},
        {"stability", "Windowed means, volatilities and log-returns of running estimates"},
        {"reference", "Compute and cache large-N reference values"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", args.config, "Configuration file (key = value lines)");
        sub->add_option("--out", args.out, "Output directory for CSV files and the manifest");
        sub->add_option("--seed", args.seed, "Master seed");
        sub->add_option("--threads", args.threads, "Worker threads (results do not depend on it)")
            ->check(CLI::PositiveNumber);
        sub->add_option("--method", args.methods, "mc-sd, qmc-sd or qmc-bbd (repeatable)")
            ->check(CLI::IsMember({"mc-sd", "qmc-sd", "qmc-bbd", "all"}));
        sub->add_option("--instrument", args.instruments, "european, asian, double_ko or cliquet (repeatable)");
        sub->add_option("--function", args.functions, "price, delta, gamma or vega (repeatable)");
        sub->add_option("--set", args.sets, "Override a configuration key: --set key=value (repeatable)");
        sub->add_flag("-q,--quiet", args.quiet, "No progress messages on stderr");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    if (dump_config) {
        fmt::print("{}", qmcgsa::default_config_text());
        return kOk;
    }
    if (app.get_subcommands().empty()) {
        fmt::print(stderr, "{}", app.help());
        return kConfig;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    try {
        return run(command, args);
    } catch (const qmcgsa::ConfigError& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return kConfig;
    } catch (const qmcgsa::ShiftTooLarge& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return kConfig;
    } catch (const qmcgsa::UnsupportedDimension& e) {
        fmt::print(stderr, "configuration error: {}\n", e.what());
        return kConfig;
    } catch (const qmcgsa::MissingReference& e) {
        fmt::print(stderr, "missing reference: {}\n", e.what());
        return kMissingReference;
    } catch (const qmcgsa::Error& e) {
        fmt::print(stderr, "numerical failure: {}\n", e.what());
        return kNumerical;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kNumerical;
    }
}
