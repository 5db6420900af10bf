#include "qmcgsa/harness.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <nlohmann/json.hpp>

#include "qmcgsa/error.hpp"
#include "qmcgsa/hash.hpp"

#ifndef QMCGSA_VERSION
#define QMCGSA_VERSION "0.0.0"
#endif

namespace qmcgsa {

std::string_view library_version() noexcept { return QMCGSA_VERSION; }

// ---------------------------------------------------------------------------
// Value parsing

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lowercase(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in{std::string(s)};
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(fmt::format("{}: expected a number, got '{}'", key, v));
    }
}

// Accepts plain integers and powers of two written 2^p.
std::uint64_t to_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    if (v.starts_with("2^")) {
        const std::uint64_t p = to_u64(key, v.substr(2));
        if (p > 63) throw ConfigError(fmt::format("{}: exponent too large in '{}'", key, v));
        return std::uint64_t{1} << p;
    }
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", key, v));
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    const std::string s = lowercase(v);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

std::string num(double v) { return fmt::format("{:.17g}", v); }

template <class T, class F>
std::string join(const std::vector<T>& v, F&& f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += f(v[i]);
    }
    return out;
}

Scheme parse_scheme(const std::string& s) {
    const std::string l = lowercase(s);
    if (l == "sd" || l == "standard") return Scheme::Standard;
    if (l == "bbd" || l == "bb" || l == "bridge") return Scheme::BrownianBridge;
    throw ConfigError(fmt::format("unknown scheme '{}' (expected sd or bbd)", s));
}

std::string_view scheme_name(Scheme s) { return s == Scheme::Standard ? "sd" : "bbd"; }

ReferencePolicy parse_policy(const std::string& s) {
    const std::string l = lowercase(s);
    if (l == "auto") return ReferencePolicy::Auto;
    if (l == "analytic") return ReferencePolicy::AnalyticOnly;
    if (l == "cache") return ReferencePolicy::CacheOnly;
    throw ConfigError(fmt::format("unknown reference policy '{}' (expected auto, analytic or cache)", s));
}

std::string_view policy_name(ReferencePolicy p) {
    switch (p) {
        case ReferencePolicy::Auto: return "auto";
        case ReferencePolicy::AnalyticOnly: return "analytic";
        case ReferencePolicy::CacheOnly: return "cache";
    }
    return "?";
}

struct Key {
    std::string name;
    bool hashed;  // part of the config hash
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

#define QMCGSA_NUM(key, field)                                                                        \
    Key {                                                                                             \
        key, true, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(key, v); },  \
            [](const ExperimentConfig& c) { return num(c.field); }                                    \
    }
#define QMCGSA_U64(key, field)                                                                      \
    Key {                                                                                           \
        key, true, [](ExperimentConfig& c, const std::string& v) { c.field = to_u64(key, v); },   \
            [](const ExperimentConfig& c) { return std::to_string(c.field); }                       \
    }

#define QMCGSA_EPS(key, kind)                                                                          \
    Key {                                                                                              \
        key, true, [](ExperimentConfig& c, const std::string& v) { c.epsilon[kind] = to_double(key, v); }, \
            [](const ExperimentConfig& c) { return num(c.epsilon_for(kind)); }                         \
    }

const std::vector<Key>& keys() {
    static const std::vector<Key> k = {
        {"instruments", true,
         [](ExperimentConfig& c, const std::string& v) {
             c.instruments.clear();
             for (const auto& s : split_list(v)) {
                 if (lowercase(s) == "all") {
                     c.instruments = ExperimentConfig{}.instruments;
                     break;
                 }
                 c.instruments.push_back(parse_instrument(s));
             }
         },
         [](const ExperimentConfig& c) { return join(c.instruments, [](auto x) { return std::string(to_string(x)); }); }},
        {"functions", true,
         [](ExperimentConfig& c, const std::string& v) {
             c.functions.clear();
             for (const auto& s : split_list(v)) {
                 if (lowercase(s) == "all") {
                     c.functions = ExperimentConfig{}.functions;
                     break;
                 }
                 c.functions.push_back(parse_quantity(s));
             }
         },
         [](const ExperimentConfig& c) { return join(c.functions, [](auto x) { return std::string(to_string(x)); }); }},
        {"methods", true,
         [](ExperimentConfig& c, const std::string& v) {
             c.methods.clear();
             for (const auto& s : split_list(v)) {
                 if (lowercase(s) == "all") {
                     c.methods = ExperimentConfig{}.methods;
                     break;
                 }
                 c.methods.push_back(parse_method(s));
             }
         },
         [](const ExperimentConfig& c) { return join(c.methods, [](auto x) { return std::string(to_string(x)); }); }},
        QMCGSA_NUM("contract.strike", strike),
        QMCGSA_NUM("contract.lower_barrier", lower_barrier),
        QMCGSA_NUM("contract.upper_barrier", upper_barrier),
        {"contract.barriers_track_spot", true,
         [](ExperimentConfig& c, const std::string& v) { c.barriers_track_spot = to_bool("contract.barriers_track_spot", v); },
         [](const ExperimentConfig& c) { return std::string(c.barriers_track_spot ? "true" : "false"); }},
        QMCGSA_NUM("contract.cap", cap),
        QMCGSA_NUM("contract.floor", floor),
        QMCGSA_NUM("model.spot", model.spot),
        QMCGSA_NUM("model.rate", model.rate),
        QMCGSA_NUM("model.vol", model.vol),
        QMCGSA_NUM("grid.maturity", maturity),
        QMCGSA_U64("grid.steps", steps),
        QMCGSA_EPS("fd.epsilon.european", InstrumentKind::European),
        QMCGSA_EPS("fd.epsilon.asian", InstrumentKind::AsianGeometric),
        QMCGSA_EPS("fd.epsilon.double_ko", InstrumentKind::DoubleKnockOut),
        QMCGSA_EPS("fd.epsilon.cliquet", InstrumentKind::Cliquet),
        QMCGSA_U64("price.n", price_n),
        QMCGSA_U64("convergence.n_min", convergence_n_min),
        QMCGSA_U64("convergence.n_max", convergence_n_max),
        QMCGSA_U64("convergence.runs", runs),
        QMCGSA_U64("gsa.n", gsa_n),
        {"gsa.epsilons", true,
         [](ExperimentConfig& c, const std::string& v) {
             c.gsa_epsilons.clear();
             for (const auto& s : split_list(v)) c.gsa_epsilons.push_back(to_double("gsa.epsilons", s));
         },
         [](const ExperimentConfig& c) { return join(c.gsa_epsilons, [](double x) { return num(x); }); }},
        {"gsa.schemes", true,
         [](ExperimentConfig& c, const std::string& v) {
             c.gsa_schemes.clear();
             for (const auto& s : split_list(v)) c.gsa_schemes.push_back(parse_scheme(s));
         },
         [](const ExperimentConfig& c) {
             return join(c.gsa_schemes, [](Scheme s) { return std::string(scheme_name(s)); });
         }},
        QMCGSA_NUM("gsa.truncation", gsa_thresholds.truncation),
        QMCGSA_NUM("gsa.type_a_fraction", gsa_thresholds.type_a_fraction),
        QMCGSA_NUM("gsa.min_sum_first", gsa_thresholds.min_sum_first),
        QMCGSA_NUM("gsa.min_ratio", gsa_thresholds.min_ratio),
        QMCGSA_NUM("gsa.importance", gsa_thresholds.importance),
        QMCGSA_NUM("gsa.favorable_average", gsa_thresholds.favorable_average),
        {"reference.policy", true,
         [](ExperimentConfig& c, const std::string& v) { c.reference_policy = parse_policy(v); },
         [](const ExperimentConfig& c) { return std::string(policy_name(c.reference_policy)); }},
        QMCGSA_U64("reference.n", reference_n),
        QMCGSA_U64("bias.n", bias_n),
        {"speedup.accuracies", true,
         [](ExperimentConfig& c, const std::string& v) {
             c.accuracies.clear();
             for (const auto& s : split_list(v)) c.accuracies.push_back(to_double("speedup.accuracies", s));
         },
         [](const ExperimentConfig& c) { return join(c.accuracies, [](double x) { return num(x); }); }},
        QMCGSA_U64("stability.n_min", stability_n_min),
        QMCGSA_U64("stability.n_max", stability_n_max),
        QMCGSA_U64("stability.n_step", stability_n_step),
        QMCGSA_U64("stability.windows", stability_windows),
        QMCGSA_U64("seed", seed),
        QMCGSA_U64("engine.chunk", chunk),
        {"threads", false, [](ExperimentConfig& c, const std::string& v) { c.threads = to_u64("threads", v); },
         [](const ExperimentConfig& c) { return std::to_string(c.threads); }},
        {"output.dir", false, [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
         [](const ExperimentConfig& c) { return c.output_dir.string(); }},
    };
    return k;
}

#undef QMCGSA_NUM
#undef QMCGSA_U64
#undef QMCGSA_EPS

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig

InstrumentSpec ExperimentConfig::spec(InstrumentKind kind) const {
    InstrumentSpec s;
    switch (kind) {
        case InstrumentKind::European: s = InstrumentSpec::european(strike, maturity); break;
        case InstrumentKind::AsianGeometric: s = InstrumentSpec::asian_geometric(strike, maturity); break;
        case InstrumentKind::DoubleKnockOut:
            s = InstrumentSpec::double_knock_out(strike, lower_barrier, upper_barrier, maturity);
            s.barriers_track_spot = barriers_track_spot;
            break;
        case InstrumentKind::Cliquet: s = InstrumentSpec::cliquet(cap, floor, maturity); break;
    }
    return s;
}

double ExperimentConfig::epsilon_for(InstrumentKind kind) const {
    auto it = epsilon.find(kind);
    return it == epsilon.end() ? default_epsilon(kind) : it->second;
}

RunOptions ExperimentConfig::run_options(std::size_t threads_override) const {
    RunOptions o;
    o.threads = threads_override ? threads_override : threads;
    o.chunk = chunk;
    return o;
}

void ExperimentConfig::validate() const {
    if (instruments.empty()) throw ConfigError("instruments: at least one instrument is required");
    if (functions.empty()) throw ConfigError("functions: at least one function is required");
    if (methods.empty()) throw ConfigError("methods: at least one method is required");
    if (steps == 0) throw ConfigError("grid.steps must be positive");
    for (auto kind : instruments) spec(kind).validate(model);
    for (auto& [kind, e] : epsilon) {
        if (!(e > 0.0)) throw ConfigError(fmt::format("fd.epsilon.{} must be positive", to_string(kind)));
    }
    auto pow2 = [](const char* key, std::uint64_t n) {
        if (n < 2 || !std::has_single_bit(n)) throw ConfigError(fmt::format("{} must be a power of two >= 2, got {}", key, n));
    };
    pow2("price.n", price_n);
    pow2("convergence.n_min", convergence_n_min);
    pow2("convergence.n_max", convergence_n_max);
    if (convergence_n_max < convergence_n_min * 8) {
        throw ConfigError("convergence needs at least 4 sample sizes (n_max >= 8·n_min)");
    }
    if (runs < 2) throw ConfigError("convergence.runs must be at least 2");
    if (gsa_n < 2) throw ConfigError("gsa.n must be at least 2");
    if (gsa_epsilons.empty()) throw ConfigError("gsa.epsilons must not be empty");
    if (gsa_schemes.empty()) throw ConfigError("gsa.schemes must not be empty");
    if (reference_n < 32 || reference_n % 16 != 0) throw ConfigError("reference.n must be a multiple of 16, >= 32");
    if (bias_n < 32 || bias_n % 16 != 0) throw ConfigError("bias.n must be a multiple of 16, >= 32");
    for (double a : accuracies) {
        if (!(a > 0.0)) throw ConfigError("speedup.accuracies must be positive");
    }
    if (stability_n_step == 0 || stability_n_step % 2 != 0) throw ConfigError("stability.n_step must be even and positive");
    if (stability_n_min % stability_n_step != 0 || stability_n_max % stability_n_step != 0 ||
        stability_n_max <= stability_n_min) {
        throw ConfigError("stability range must be multiples of stability.n_step with n_max > n_min");
    }
    const std::uint64_t points = (stability_n_max - stability_n_min) / stability_n_step + 1;
    if (stability_windows < 2 || points % stability_windows != 0 || points / stability_windows < 2) {
        throw ConfigError(fmt::format("stability: {} sample points do not split into {} windows", points,
                                      stability_windows));
    }
    if (chunk == 0) throw ConfigError("engine.chunk must be positive");
    if (threads == 0) throw ConfigError("threads must be at least 1");
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& k : keys()) {
        if (k.hashed) out += fmt::format("{} = {}\n", k.name, k.get(*this));
    }
    return out;
}

std::string ExperimentConfig::hash() const { return Fnv1a{}.update(canonical()).hex(); }

ConfigValues parse_config_text(std::string_view text) {
    ConfigValues values;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(fmt::format("config line {}: expected 'key = value'", line_no));
        std::string key = trim(std::string_view(line).substr(0, eq));
        std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ConfigError(fmt::format("config line {}: empty key", line_no));
        if (values.count(key)) throw ConfigError(fmt::format("config line {}: duplicate key '{}'", line_no, key));
        values[key] = value;
    }
    return values;
}

ConfigValues read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

void apply_config(ExperimentConfig& config, const ConfigValues& values) {
    for (const auto& [key, value] : values) {
        auto it = std::find_if(keys().begin(), keys().end(), [&](const Key& k) { return k.name == key; });
        if (it == keys().end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
        it->set(config, value);
    }
}

ExperimentConfig load_config(const std::optional<std::filesystem::path>& file, const ConfigValues& overrides) {
    ExperimentConfig config;
    if (file) apply_config(config, read_config_file(*file));
    apply_config(config, overrides);
    config.validate();
    return config;
}

std::string default_config_text() {
    const ExperimentConfig c;
    std::string out = "# qmcgsa experiment configuration (defaults)\n";
    for (const auto& k : keys()) {
        if (k.name == "output.dir") {
            out += "# output.dir = out\n";
            continue;
        }
        out += fmt::format("{} = {}\n", k.name, k.get(c));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifest and session

RunManifest RunManifest::create(const ExperimentConfig& config) {
    RunManifest m;
    m.config_hash = config.hash();
    m.direction_hash = DirectionTable::default_table()->hash();
    m.version = std::string(library_version());
    m.id = Fnv1a{}.update(m.config_hash).update(m.direction_hash).update(m.version).hex();
    return m;
}

void RunManifest::record_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    checksums[path.filename().string()] = Fnv1a{}.update(buf.str()).hex();
}

void RunManifest::write(const std::filesystem::path& path) const {
    nlohmann::json doc;
    doc["manifest"] = id;
    doc["config_hash"] = config_hash;
    doc["direction_table_hash"] = direction_hash;
    doc["library_version"] = version;
    doc["files"] = checksums;
    doc["timings_seconds"] = timings;
    std::ofstream out(path, std::ios::trunc);
    out << doc.dump(2) << '\n';
}

Session::Session(ExperimentConfig config, Logger log)
    : config_(std::move(config)), log_(std::move(log)), manifest_(RunManifest::create(config_)) {
    config_.validate();
    if (writes_files()) {
        std::filesystem::create_directories(config_.output_dir);
        cache_ = std::make_unique<ReferenceCache>(config_.output_dir / "reference_cache.json");
        if (cache_->was_corrupt()) this->log("reference cache unreadable, recomputing references");
        std::ofstream(config_.output_dir / "config.txt", std::ios::trunc) << config_.canonical();
        manifest_.record_file(config_.output_dir / "config.txt");
    }
}

void Session::log(std::string_view message) const {
    if (log_) log_(message);
}

ReferenceEntry Session::reference(InstrumentKind kind, Quantity q) {
    const InstrumentSpec spec = config_.spec(kind);
    const TimeGrid grid = config_.grid();
    if (analytically_null(kind, q)) return ReferenceEntry{0.0, 0.0, 0, {}, {}};
    if (auto a = analytic_reference(spec, config_.model, grid)) return ReferenceEntry{a->get(q), 0.0, 0, "analytic", {}};
    if (config_.reference_policy == ReferencePolicy::AnalyticOnly) {
        throw MissingReference(fmt::format("no closed form for {} {} and reference.policy = analytic", to_string(kind),
                                           to_string(q)));
    }
    ReferenceRequest req;
    req.quantity = q;
    req.epsilon = q == Quantity::Price ? 0.0 : config_.epsilon_for(kind);
    req.n = config_.reference_n;
    const auto table = DirectionTable::default_table();
    const Method method = default_reference_method(kind);
    const std::string key = reference_key(spec, config_.model, grid, method, req, table->hash());
    if (cache_) {
        if (auto hit = cache_->find(key, table->hash())) return *hit;
    }
    if (config_.reference_policy == ReferencePolicy::CacheOnly) {
        throw MissingReference(fmt::format("reference for {} {} not in cache (run the 'reference' command first)",
                                           to_string(kind), to_string(q)));
    }
    log(fmt::format("computing {} reference for {} {} (N = {})", to_string(method), to_string(kind), to_string(q), req.n));
    const auto t0 = std::chrono::steady_clock::now();
    auto entry = simulated_reference(spec, config_.model, grid, req, cache_.get(), config_.run_options());
    manifest_.timings[fmt::format("reference/{}/{}", to_string(kind), to_string(q))] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return entry;
}

BiasConstant Session::bias(InstrumentKind kind, Quantity q) {
    const std::string key = fmt::format("{}/{}", to_string(kind), to_string(q));
    if (auto it = bias_cache_.find(key); it != bias_cache_.end()) return it->second;
    BiasOptions opts;
    opts.simulated_n = config_.bias_n;
    const InstrumentSpec spec = config_.spec(kind);
    if (!analytic_reference(spec, config_.model, config_.grid()) && q != Quantity::Price && !analytically_null(kind, q)) {
        log(fmt::format("estimating bias constant for {} {} from simulated stencils (N = {})", to_string(kind),
                        to_string(q), opts.simulated_n));
    }
    auto b = bias_constant(spec, config_.model, config_.grid(), q, opts, config_.run_options());
    bias_cache_[key] = b;
    return b;
}

void Session::write_csv(const std::string& name, const std::function<void(std::ostream&)>& body) {
    if (!writes_files()) return;
    const auto path = config_.output_dir / name;
    {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
        body(out);
    }
    manifest_.record_file(path);
}

void Session::finish() {
    if (writes_files()) manifest_.write(config_.output_dir / "manifest.json");
}

// ---------------------------------------------------------------------------
// Experiments

namespace {

std::string opt_num(const std::optional<double>& v, std::string_view none = "") {
    return v ? fmt::format("{:.10g}", *v) : std::string(none);
}

template <class F>
auto timed(Session& s, const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    auto result = f();
    s.manifest().timings[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

std::vector<PriceRow> price_rows(Session& s, const std::vector<Quantity>& functions) {
    const auto& c = s.config();
    std::vector<PriceRow> rows;
    for (auto kind : c.instruments) {
        for (auto q : functions) {
            std::optional<double> ref;
            if (auto a = analytic_reference(c.spec(kind), c.model, c.grid())) ref = a->get(q);
            if (analytically_null(kind, q)) ref = 0.0;
            for (auto m : c.methods) {
                PriceRow row{kind, q, m, {}, ref};
                row.estimate = fd_greek(c.spec(kind), c.model, c.grid(), m, c.price_n, q,
                                        q == Quantity::Price ? 0.0 : c.epsilon_for(kind), SampleBlock{0, c.seed},
                                        c.run_options());
                rows.push_back(row);
            }
        }
    }
    return rows;
}

void write_price_rows(Session& s, const std::string& name, const std::vector<PriceRow>& rows) {
    s.write_csv(name, [&](std::ostream& out) {
        out << "instrument,function,method,N,epsilon,shift,value,std_error,reference,note,manifest\n";
        for (const auto& r : rows) {
            const auto& e = r.estimate;
            fmt::print(out, "{},{},{},{},{},{},{:.12g},{},{},{},{}\n", to_string(r.instrument), to_string(r.function),
                       to_string(r.method), e.estimate.n, r.function == Quantity::Price ? "" : fmt::format("{:g}", e.epsilon),
                       r.function == Quantity::Price ? "" : fmt::format("{:.10g}", e.shift), e.estimate.value,
                       opt_num(e.estimate.std_error, "n/a"), opt_num(r.reference),
                       e.analytically_null ? "analytically null" : "", s.manifest().id);
        }
    });
}

}  // namespace

std::vector<PriceRow> run_price(Session& session) {
    auto rows = timed(session, "price", [&] { return price_rows(session, {Quantity::Price}); });
    write_price_rows(session, "price.csv", rows);
    return rows;
}

std::vector<PriceRow> run_greeks(Session& session) {
    std::vector<Quantity> fs;
    for (auto q : session.config().functions) {
        if (q != Quantity::Price) fs.push_back(q);
    }
    if (fs.empty()) fs = {Quantity::Delta, Quantity::Gamma, Quantity::Vega};
    auto rows = timed(session, "greeks", [&] { return price_rows(session, fs); });
    write_price_rows(session, "greeks.csv", rows);
    return rows;
}

std::vector<GsaResult> run_gsa(Session& session) {
    const auto& c = session.config();
    std::vector<GsaResult> results;
    std::uint64_t evaluations = 0;
    std::size_t functions = 0;
    const auto t0 = std::chrono::steady_clock::now();
    for (auto kind : c.instruments) {
        for (auto q : c.functions) {
            if (analytically_null(kind, q)) {
                session.log(fmt::format("gsa: {} {} is analytically null, skipped", to_string(kind), to_string(q)));
                continue;
            }
            ++functions;
            for (auto scheme : c.gsa_schemes) {
                std::vector<std::optional<double>> eps;
                if (q == Quantity::Price) {
                    eps.emplace_back(std::nullopt);
                } else {
                    for (double e : c.gsa_epsilons) eps.emplace_back(e);
                }
                for (const auto& e : eps) {
                    OptionFunctional f(c.spec(kind), c.model, c.grid(), scheme, q, e.value_or(0.0));
                    GsaResult r{kind, q, scheme, e,
                                estimate_indices(f, c.gsa_n, SequenceKind::Sobol, SampleBlock{0, c.seed},
                                                 c.run_options(), c.gsa_thresholds)};
                    evaluations += c.gsa_n * (c.steps + 2);
                    session.log(fmt::format("gsa: {} {} {} eps={} d_T={} d_A={:.3f} type {}", to_string(kind),
                                            to_string(q), scheme_name(scheme), e ? fmt::format("{:g}", *e) : "-",
                                            r.report.d_t, r.report.d_a, to_string(r.report.type)));
                    results.push_back(std::move(r));
                }
            }
        }
    }
    session.manifest().timings["gsa"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    session.log(fmt::format("gsa: {} pricing functions, {} function evaluations (N = {}, D + 2 = {})", functions,
                            evaluations, c.gsa_n, c.steps + 2));
    session.write_csv("gsa.csv", [&](std::ostream& out) {
        write_gsa_csv_header(out);
        for (const auto& r : results) {
            GsaLabel label{std::string(to_string(r.instrument)), std::string(to_string(r.function)),
                           std::string(scheme_name(r.scheme)), r.epsilon};
            write_gsa_csv_rows(out, label, r.report, session.manifest().id);
        }
    });
    return results;
}

ConvergenceSeries convergence_series(Session& session, InstrumentKind kind, Quantity q, Method method) {
    const auto& c = session.config();
    ConvergenceSeries s;
    s.instrument = kind;
    s.function = q;
    s.method = method;
    s.epsilon = q == Quantity::Price ? 0.0 : c.epsilon_for(kind);
    s.reference = session.reference(kind, q).value;
    const BiasConstant bias = session.bias(kind, q);
    s.bias_b = bias.b;
    OptionFunctional f(c.spec(kind), c.model, c.grid(), scheme_of(method), q, s.epsilon);
    s.shift = f.shift();
    std::vector<std::pair<double, double>> points;
    for (std::uint64_t n = c.convergence_n_min; n <= c.convergence_n_max; n *= 2) {
        std::vector<double> runs(c.runs);
        const auto p = static_cast<std::uint64_t>(std::countr_zero(n));
        parallel_for(c.runs, c.threads, [&](std::size_t l, std::size_t) {
            // QMC run l takes points [l·N, (l+1)·N); MC run l its own derived seed.
            SampleBlock block{l * n, derive_seed(c.seed, (p << 32) | l)};
            runs[l] = simulate(f, method, n, block, c.run_options(1)).value;
        });
        const double e = rmse(s.reference, runs);
        double mean = 0.0;
        for (double v : runs) mean += v;
        mean /= static_cast<double>(runs.size());
        double ss = 0.0;
        for (double v : runs) ss += (v - mean) * (v - mean);
        s.n.push_back(n);
        s.rmse.push_back(e);
        s.mean.push_back(mean);
        s.sd.push_back(std::sqrt(ss / static_cast<double>(runs.size() - 1)));
        // Points where the FD bias dominates the error say nothing about the rate.
        const bool excluded = q != Quantity::Price && std::abs(bias.b) * s.shift * s.shift > 0.1 * e;
        s.excluded.push_back(excluded);
        if (!excluded) points.emplace_back(static_cast<double>(n), e);
    }
    const auto dropped = std::count(s.excluded.begin(), s.excluded.end(), true);
    if (dropped > 0) {
        session.log(fmt::format("convergence: {} {} {}: {} sample sizes excluded (bias > 10% of RMSE)", to_string(kind),
                                to_string(q), to_string(method), dropped));
    }
    if (points.size() < 4) {
        throw NumericalError(fmt::format("convergence: {} {} {}: fewer than 4 bias-free sample sizes", to_string(kind),
                                         to_string(q), to_string(method)));
    }
    s.fit = fit_power_law(points);
    return s;
}

std::vector<ConvergenceSeries> run_convergence(Session& session) {
    const auto& c = session.config();
    std::vector<ConvergenceSeries> all;
    for (auto kind : c.instruments) {
        for (auto q : c.functions) {
            if (analytically_null(kind, q)) continue;
            for (auto m : c.methods) {
                auto s = timed(session, fmt::format("convergence/{}/{}/{}", to_string(kind), to_string(q), to_string(m)),
                               [&] { return convergence_series(session, kind, q, m); });
                session.log(fmt::format("convergence: {} {} {} slope {:.3f} +- {:.3f}", to_string(kind), to_string(q),
                                        to_string(m), -s.fit.alpha, s.fit.alpha_se));
                all.push_back(std::move(s));
            }
        }
    }
    const std::string& id = session.manifest().id;
    session.write_csv("convergence.csv", [&](std::ostream& out) {
        out << "instrument,function,method,N,rmse,rmse_rel,mean,sd,band_lo,band_hi,reference,excluded,manifest\n";
        for (const auto& s : all) {
            for (std::size_t i = 0; i < s.n.size(); ++i) {
                const double rel = s.reference != 0.0 ? s.rmse[i] / std::abs(s.reference) : NAN;
                fmt::print(out, "{},{},{},{},{:.10g},{:.10g},{:.12g},{:.10g},{:.12g},{:.12g},{:.12g},{},{}\n",
                           to_string(s.instrument), to_string(s.function), to_string(s.method), s.n[i], s.rmse[i], rel,
                           s.mean[i], s.sd[i], s.mean[i] - 3 * s.sd[i], s.mean[i] + 3 * s.sd[i], s.reference,
                           s.excluded[i] ? 1 : 0, id);
            }
        }
    });
    session.write_csv("regression.csv", [&](std::ostream& out) {
        out << "instrument,function,method,alpha,alpha_se,k,k_se,slope,log10_intercept_at_10^2.5,points,epsilon,"
               "manifest\n";
        for (const auto& s : all) {
            fmt::print(out, "{},{},{},{:.6g},{:.3g},{:.6g},{:.3g},{:.6g},{:.6g},{},{},{}\n", to_string(s.instrument),
                       to_string(s.function), to_string(s.method), s.fit.alpha, s.fit.alpha_se, s.fit.k, s.fit.k_se,
                       -s.fit.alpha, s.fit.log10_intercept(2.5), s.fit.points,
                       s.function == Quantity::Price ? "" : fmt::format("{:g}", s.epsilon), id);
        }
    });
    return all;
}

std::vector<SpeedUpRow> speedup_rows(Session& session, const std::vector<ConvergenceSeries>& fits) {
    const auto& c = session.config();
    std::vector<SpeedUpRow> rows;
    for (const auto& si : fits) {
        for (const auto& sj : fits) {
            if (si.instrument != sj.instrument || si.function != sj.function) continue;
            const EstimatorKind kind = si.function == Quantity::Price   ? EstimatorKind::Price
                                       : si.function == Quantity::Gamma ? EstimatorKind::SecondDifference
                                                                        : EstimatorKind::FirstDifference;
            for (double a : c.accuracies) {
                SpeedUpRow row{si.instrument, si.function, si.method, sj.method, a, {}, {}, {}};
                const double abs_a = a * std::abs(si.reference);
                row.n_star_i = n_star(si.fit, si.bias_b, si.shift, abs_a, kind);
                row.n_star_j = n_star(sj.fit, sj.bias_b, sj.shift, abs_a, kind);
                row.speed_up = qmcgsa::speed_up(row.n_star_i, row.n_star_j);
                rows.push_back(row);
            }
        }
    }
    return rows;
}

std::vector<SpeedUpRow> run_speedup(Session& session, const std::vector<ConvergenceSeries>& fits) {
    auto rows = speedup_rows(session, fits);
    session.write_csv("speedup.csv", [&](std::ostream& out) {
        out << "instrument,function,method_i,method_j,a,N_star_i,N_star_j,S_star,manifest\n";
        for (const auto& r : rows) {
            fmt::print(out, "{},{},{},{},{:g},{},{},{},{}\n", to_string(r.instrument), to_string(r.function),
                       to_string(r.method_i), to_string(r.method_j), r.accuracy, opt_num(r.n_star_i, "-"),
                       opt_num(r.n_star_j, "-"), opt_num(r.speed_up, "-"), session.manifest().id);
        }
    });
    return rows;
}

std::vector<SpeedUpRow> run_speedup(Session& session) { return run_speedup(session, run_convergence(session)); }

std::vector<StabilitySeries> run_stability(Session& session) {
    const auto& c = session.config();
    std::vector<std::uint64_t> checkpoints;
    for (std::uint64_t n = c.stability_n_min; n <= c.stability_n_max; n += c.stability_n_step) checkpoints.push_back(n);
    std::vector<StabilitySeries> all;
    for (auto kind : c.instruments) {
        for (auto q : c.functions) {
            if (analytically_null(kind, q)) continue;
            for (auto m : c.methods) {
                OptionFunctional f(c.spec(kind), c.model, c.grid(), scheme_of(m), q,
                                   q == Quantity::Price ? 0.0 : c.epsilon_for(kind));
                StabilitySeries s{kind, q, m, checkpoints, {}, {}};
                s.estimates = running_means(f, m, checkpoints, SampleBlock{0, c.seed}, c.run_options(1));
                s.report = stability(s.estimates, c.stability_windows);
                all.push_back(std::move(s));
            }
        }
    }
    const std::string& id = session.manifest().id;
    session.write_csv("stability.csv", [&](std::ostream& out) {
        out << "instrument,function,method,window,mean,vol,logret,manifest\n";
        for (const auto& s : all) {
            for (std::size_t w = 0; w < s.report.means.size(); ++w) {
                const std::string lr = w == 0 ? std::string() : opt_num(s.report.logret[w - 1], "undefined");
                fmt::print(out, "{},{},{},{},{:.12g},{:.10g},{},{}\n", to_string(s.instrument), to_string(s.function),
                           to_string(s.method), w + 1, s.report.means[w], s.report.vols[w], lr, id);
            }
        }
    });
    session.write_csv("stability_trace.csv", [&](std::ostream& out) {
        out << "instrument,function,method,N,estimate,manifest\n";
        for (const auto& s : all) {
            for (std::size_t i = 0; i < s.n.size(); ++i) {
                fmt::print(out, "{},{},{},{},{:.12g},{}\n", to_string(s.instrument), to_string(s.function),
                           to_string(s.method), s.n[i], s.estimates[i], id);
            }
        }
    });
    return all;
}

std::vector<std::pair<std::string, ReferenceEntry>> run_reference(Session& session) {
    const auto& c = session.config();
    std::vector<std::pair<std::string, ReferenceEntry>> out;
    for (auto kind : c.instruments) {
        for (auto q : c.functions) {
            if (analytically_null(kind, q)) continue;
            out.emplace_back(fmt::format("{}/{}", to_string(kind), to_string(q)), session.reference(kind, q));
        }
    }
    session.write_csv("reference.csv", [&](std::ostream& o) {
        o << "instrument_function,value,std_error,N,source,manifest\n";
        for (const auto& [name, e] : out) {
            fmt::print(o, "{},{:.12g},{:.3g},{},{},{}\n", name, e.value, e.std_error, e.n,
                       e.n == 0 ? "analytic" : "simulated", session.manifest().id);
        }
    });
    return out;
}

}  // namespace qmcgsa
