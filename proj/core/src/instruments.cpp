#include "qmcgsa/instruments.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "qmcgsa/error.hpp"
#include "qmcgsa/hash.hpp"
#include "qmcgsa/normal.hpp"

namespace qmcgsa {

namespace {

std::string lower(std::string_view s) {
    std::string out;
    for (char c : s) out.push_back(c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    return out;
}

// Black formula on a log-normal underlying with forward F and total stddev s.
struct BlackTerms {
    double value, d1, d2;
};

BlackTerms black(double forward, double strike, double s) {
    if (s <= 0.0) return {std::max(forward - strike, 0.0), forward > strike ? INFINITY : -INFINITY, 0.0};
    const double d1 = (std::log(forward / strike) + 0.5 * s * s) / s;
    const double d2 = d1 - s;
    return {forward * normal_cdf(d1) - strike * normal_cdf(d2), d1, d2};
}

}  // namespace

std::string_view to_string(InstrumentKind k) noexcept {
    switch (k) {
        case InstrumentKind::European: return "european";
        case InstrumentKind::AsianGeometric: return "asian";
        case InstrumentKind::DoubleKnockOut: return "double_ko";
        case InstrumentKind::Cliquet: return "cliquet";
    }
    return "?";
}

InstrumentKind parse_instrument(std::string_view name) {
    const std::string s = lower(name);
    if (s == "european" || s == "call") return InstrumentKind::European;
    if (s == "asian" || s == "asian_geometric" || s == "geometric_asian") return InstrumentKind::AsianGeometric;
    if (s == "double_ko" || s == "dko" || s == "double_knock_out" || s == "barrier") return InstrumentKind::DoubleKnockOut;
    if (s == "cliquet") return InstrumentKind::Cliquet;
    throw ConfigError(fmt::format("unknown instrument '{}'", name));
}

InstrumentSpec InstrumentSpec::european(double strike, double maturity) {
    InstrumentSpec s;
    s.kind = InstrumentKind::European;
    s.strike = strike;
    s.maturity = maturity;
    return s;
}

InstrumentSpec InstrumentSpec::asian_geometric(double strike, double maturity) {
    InstrumentSpec s = european(strike, maturity);
    s.kind = InstrumentKind::AsianGeometric;
    return s;
}

InstrumentSpec InstrumentSpec::double_knock_out(double strike, double lower, double upper, double maturity) {
    InstrumentSpec s = european(strike, maturity);
    s.kind = InstrumentKind::DoubleKnockOut;
    s.lower_barrier = lower;
    s.upper_barrier = upper;
    return s;
}

InstrumentSpec InstrumentSpec::cliquet(double cap, double floor, double maturity) {
    InstrumentSpec s = european(100.0, maturity);
    s.kind = InstrumentKind::Cliquet;
    s.cap = cap;
    s.floor = floor;
    return s;
}

InstrumentSpec InstrumentSpec::defaults(InstrumentKind kind) {
    switch (kind) {
        case InstrumentKind::European: return european();
        case InstrumentKind::AsianGeometric: return asian_geometric();
        case InstrumentKind::DoubleKnockOut: return double_knock_out();
        case InstrumentKind::Cliquet: return cliquet();
    }
    return european();
}

void InstrumentSpec::validate(const ModelParams& params) const {
    params.validate();
    if (!(maturity > 0.0)) throw ConfigError("maturity must be positive");
    switch (kind) {
        case InstrumentKind::European:
        case InstrumentKind::AsianGeometric:
            if (!(strike > 0.0)) throw ConfigError("strike must be positive");
            break;
        case InstrumentKind::DoubleKnockOut:
            if (!(strike > 0.0)) throw ConfigError("strike must be positive");
            if (!lower_barrier || !upper_barrier) throw ConfigError("double knock-out needs lower and upper barriers");
            if (!(*lower_barrier >= 0.0 && *lower_barrier < params.spot && params.spot < *upper_barrier)) {
                throw ConfigError(fmt::format("barriers must satisfy B_l < S_0 < B_u (got {} < {} < {})", *lower_barrier,
                                              params.spot, *upper_barrier));
            }
            break;
        case InstrumentKind::Cliquet:
            if (!cap || !floor) throw ConfigError("cliquet needs a local cap and a global floor");
            if (*cap < 0.0 || *floor < 0.0) throw ConfigError("cliquet cap and floor must be >= 0");
            break;
    }
}

std::string InstrumentSpec::canonical() const {
    auto opt = [](const std::optional<double>& v) { return v ? fmt::format("{:.17g}", *v) : std::string("-"); };
    return fmt::format("{};K={:.17g};Bl={};Bu={};track={};C={};F={};T={:.17g}", to_string(kind), strike,
                       opt(lower_barrier), opt(upper_barrier), barriers_track_spot ? 1 : 0, opt(cap), opt(floor),
                       maturity);
}

std::string_view to_string(Quantity q) noexcept {
    switch (q) {
        case Quantity::Price: return "price";
        case Quantity::Delta: return "delta";
        case Quantity::Gamma: return "gamma";
        case Quantity::Vega: return "vega";
    }
    return "?";
}

Quantity parse_quantity(std::string_view name) {
    const std::string s = lower(name);
    if (s == "price") return Quantity::Price;
    if (s == "delta") return Quantity::Delta;
    if (s == "gamma") return Quantity::Gamma;
    if (s == "vega") return Quantity::Vega;
    throw ConfigError(fmt::format("unknown function '{}' (expected price, delta, gamma or vega)", name));
}

double Greeks::get(Quantity q) const noexcept {
    switch (q) {
        case Quantity::Price: return price;
        case Quantity::Delta: return delta;
        case Quantity::Gamma: return gamma;
        case Quantity::Vega: return vega;
    }
    return 0.0;
}

double payoff(const InstrumentSpec& spec, const AssetPath& path) {
    const auto& s = path.values;
    if (s.empty()) throw ConfigError("payoff: empty path");
    switch (spec.kind) {
        case InstrumentKind::European: return std::max(s.back() - spec.strike, 0.0);
        case InstrumentKind::AsianGeometric: {
            double log_sum = 0.0;
            for (double v : s) log_sum += std::log(v);
            return std::max(std::exp(log_sum / static_cast<double>(s.size())) - spec.strike, 0.0);
        }
        case InstrumentKind::DoubleKnockOut: {
            if (!spec.lower_barrier || !spec.upper_barrier) throw ConfigError("double knock-out needs barriers");
            for (double v : s) {
                if (!(v > *spec.lower_barrier && v < *spec.upper_barrier)) return 0.0;
            }
            return std::max(s.back() - spec.strike, 0.0);
        }
        case InstrumentKind::Cliquet: {
            if (!spec.cap || !spec.floor) throw ConfigError("cliquet needs cap and floor");
            double prev = path.spot, acc = 0.0;
            for (double v : s) {
                acc += std::max(0.0, std::min(*spec.cap, (v - prev) / prev));
                prev = v;
            }
            return std::max(acc, *spec.floor);
        }
    }
    return 0.0;
}

double payoff_log(const InstrumentSpec& spec, double spot, std::span<const double> x, double barrier_spot) {
    switch (spec.kind) {
        case InstrumentKind::European: return std::max(spot * std::exp(x.back()) - spec.strike, 0.0);
        case InstrumentKind::AsianGeometric: {
            double sum = 0.0;
            for (double v : x) sum += v;
            return std::max(spot * std::exp(sum / static_cast<double>(x.size())) - spec.strike, 0.0);
        }
        case InstrumentKind::DoubleKnockOut: {
            // Compare log-returns with log(B/S_0): with tracking barriers the
            // knock-out set does not depend on the bumped spot at all.
            const double base = spec.barriers_track_spot ? barrier_spot : spot;
            const double lo = *spec.lower_barrier > 0.0 ? std::log(*spec.lower_barrier / base)
                                                        : -std::numeric_limits<double>::infinity();
            const double hi = std::log(*spec.upper_barrier / base);
            for (double v : x) {
                if (!(v > lo && v < hi)) return 0.0;
            }
            return std::max(spot * std::exp(x.back()) - spec.strike, 0.0);
        }
        case InstrumentKind::Cliquet: {
            double prev = 0.0, acc = 0.0;
            for (double v : x) {
                acc += std::max(0.0, std::min(*spec.cap, std::expm1(v - prev)));
                prev = v;
            }
            return std::max(acc, *spec.floor);
        }
    }
    return 0.0;
}

Greeks bs_reference(const InstrumentSpec& spec, const ModelParams& params) {
    if (spec.kind != InstrumentKind::European) throw ConfigError("bs_reference needs a European instrument");
    const double t = spec.maturity, df = std::exp(-params.rate * t);
    const double s = params.vol * std::sqrt(t);
    const double forward = params.spot * std::exp(params.rate * t);
    const BlackTerms b = black(forward, spec.strike, s);
    Greeks g;
    g.price = df * b.value;
    if (s <= 0.0) {
        g.delta = forward > spec.strike ? 1.0 : 0.0;
        return g;
    }
    g.delta = normal_cdf(b.d1);
    g.gamma = normal_pdf(b.d1) / (params.spot * s);
    g.vega = params.spot * normal_pdf(b.d1) * std::sqrt(t);
    return g;
}

Greeks asian_geometric_reference(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid) {
    if (spec.kind != InstrumentKind::AsianGeometric) throw ConfigError("asian_geometric_reference needs an Asian instrument");
    const auto& t = grid.times();
    const double d = static_cast<double>(t.size());
    double mean_t = 0.0;
    for (double tj : t) mean_t += tj;
    mean_t /= d;
    // Σ_{j,k} min(t_j, t_k) = Σ_j t_j·(2(D − j) + 1) for sorted t, j = 0..D−1.
    double min_sum = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) min_sum += t[j] * (2.0 * static_cast<double>(t.size() - j) - 1.0);
    const double c2 = min_sum / (d * d);  // σ_G² / σ²
    const double sigma = params.vol, df = std::exp(-params.rate * spec.maturity);
    const double s = sigma * std::sqrt(c2);
    // Forward of the geometric mean: S_0·exp((r − σ²/2)·t̄ + σ_G²/2).
    const double growth = std::exp((params.rate - 0.5 * sigma * sigma) * mean_t + 0.5 * s * s);
    const double forward = params.spot * growth;
    const BlackTerms b = black(forward, spec.strike, s);
    Greeks g;
    g.price = df * b.value;
    if (s <= 0.0) {
        g.delta = forward > spec.strike ? df * growth : 0.0;
        return g;
    }
    g.delta = df * growth * normal_cdf(b.d1);
    g.gamma = df * growth * normal_pdf(b.d1) / (params.spot * s);
    g.vega = df * forward * (normal_cdf(b.d1) * sigma * (c2 - mean_t) + normal_pdf(b.d1) * std::sqrt(c2));
    return g;
}

std::optional<Greeks> analytic_reference(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid) {
    switch (spec.kind) {
        case InstrumentKind::European: return bs_reference(spec, params);
        case InstrumentKind::AsianGeometric: return asian_geometric_reference(spec, params, grid);
        default: return std::nullopt;
    }
}

OptionFunctional::OptionFunctional(InstrumentSpec spec, ModelParams params, TimeGrid grid, Scheme scheme,
                                   Quantity quantity, double epsilon)
    : spec_(std::move(spec)),
      params_(params),
      grid_(std::move(grid)),
      scheme_(scheme),
      quantity_(quantity),
      shift_(0.0),
      discount_(std::exp(-params.rate * spec_.maturity)),
      w_(grid_.size()),
      x_(grid_.size()) {
    spec_.validate(params_);
    if (std::abs(grid_.maturity() - spec_.maturity) > 1e-12 * spec_.maturity) {
        throw ConfigError("the time grid must end at the instrument maturity");
    }
    if (quantity_ != Quantity::Price) {
        if (!(epsilon > 0.0)) throw ConfigError("finite-difference shift epsilon must be positive");
        shift_ = quantity_ == Quantity::Vega ? epsilon : epsilon * params_.spot;
        if (quantity_ == Quantity::Vega && !(params_.vol - shift_ > 0.0)) {
            throw ShiftTooLarge(fmt::format("vega shift h = {} does not leave sigma - h > 0 (sigma = {})", shift_,
                                            params_.vol));
        }
        if (quantity_ != Quantity::Vega && !(params_.spot - shift_ > 0.0)) {
            throw ShiftTooLarge(fmt::format("spot shift h = {} exceeds the spot", shift_));
        }
    }
    if (scheme_ == Scheme::BrownianBridge) bridge_ = std::make_shared<const BrownianBridge>(grid_);
}

double OptionFunctional::payoff_at(double spot, double vol) {
    log_path(w_, params_.rate, vol, grid_, x_);
    ++payoff_evaluations_;
    return payoff_log(spec_, spot, x_, params_.spot);
}

double OptionFunctional::evaluate(std::span<const double> z) {
    if (scheme_ == Scheme::Standard) {
        path_sd(z, grid_, w_);
    } else {
        bridge_->build(z, w_);
    }
    const double s0 = params_.spot, vol = params_.vol, h = shift_;
    double value = 0.0;
    switch (quantity_) {
        case Quantity::Price: value = payoff_at(s0, vol); break;
        case Quantity::Delta: {
            // Spot bumps share the log path; only the spot changes.
            log_path(w_, params_.rate, vol, grid_, x_);
            payoff_evaluations_ += 2;
            value = (payoff_log(spec_, s0 + h, x_, s0) - payoff_log(spec_, s0 - h, x_, s0)) / (2.0 * h);
            break;
        }
        case Quantity::Gamma: {
            log_path(w_, params_.rate, vol, grid_, x_);
            payoff_evaluations_ += 3;
            value = (payoff_log(spec_, s0 + h, x_, s0) - 2.0 * payoff_log(spec_, s0, x_, s0) +
                     payoff_log(spec_, s0 - h, x_, s0)) /
                    (h * h);
            break;
        }
        case Quantity::Vega: value = (payoff_at(s0, vol + h) - payoff_at(s0, vol - h)) / (2.0 * h); break;
    }
    return discount_ * value;
}

PriceEstimate price(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid, Method method,
                    std::uint64_t n, const SampleBlock& block, const RunOptions& options) {
    validate_sample_size(method, n);
    OptionFunctional f(spec, params, grid, scheme_of(method));
    return simulate(f, method, n, block, options);
}

// ---------------------------------------------------------------------------
// Reference cache

ReferenceCache::ReferenceCache(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_);
    if (!in) return;
    try {
        const auto doc = nlohmann::json::parse(in);
        for (const auto& [key, e] : doc.at("entries").items()) {
            ReferenceEntry entry;
            entry.value = e.at("value").get<double>();
            entry.std_error = e.at("std_error").get<double>();
            entry.n = e.at("n").get<std::uint64_t>();
            entry.timestamp = e.at("timestamp").get<std::string>();
            entry.generator_hash = e.at("generator_hash").get<std::string>();
            entries_[key] = entry;
        }
    } catch (const std::exception&) {
        entries_.clear();
        corrupt_ = true;
    }
}

std::optional<ReferenceEntry> ReferenceCache::find(const std::string& key, const std::string& generator_hash) const {
    std::lock_guard lock(mutex_);
    auto it = entries_.find(key);
    if (it == entries_.end() || it->second.generator_hash != generator_hash) return std::nullopt;
    return it->second;
}

void ReferenceCache::store(const std::string& key, const ReferenceEntry& entry) {
    std::lock_guard lock(mutex_);
    entries_[key] = entry;
    save();
}

void ReferenceCache::save() const {
    nlohmann::json doc;
    doc["version"] = 1;
    doc["entries"] = nlohmann::json::object();
    for (const auto& [key, e] : entries_) {
        doc["entries"][key] = {{"value", e.value},
                               {"std_error", e.std_error},
                               {"n", e.n},
                               {"timestamp", e.timestamp},
                               {"generator_hash", e.generator_hash}};
    }
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    const auto tmp = path_.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << doc.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path_);
}

Method default_reference_method(InstrumentKind kind) noexcept {
    return kind == InstrumentKind::Cliquet ? Method::QmcSd : Method::QmcBbd;
}

std::string reference_key(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid, Method method,
                          const ReferenceRequest& request, std::string_view generator_hash) {
    Fnv1a h;
    h.update(spec.canonical());
    h.update(fmt::format("|S0={:.17g};r={:.17g};vol={:.17g}|", params.spot, params.rate, params.vol));
    for (double t : grid.times()) h.update(fmt::format("{:.17g},", t));
    h.update(fmt::format("|{}|{}|eps={:.17g}|n={}|", to_string(method), to_string(request.quantity), request.epsilon,
                         request.n));
    h.update(generator_hash);
    return h.hex();
}

ReferenceEntry simulated_reference(const InstrumentSpec& spec, const ModelParams& params, const TimeGrid& grid,
                                   const ReferenceRequest& request, ReferenceCache* cache, const RunOptions& options) {
    const Method method = request.method.value_or(default_reference_method(spec.kind));
    const auto table = options.directions ? options.directions : DirectionTable::default_table();
    const std::string key = reference_key(spec, params, grid, method, request, table->hash());
    if (cache != nullptr) {
        if (auto hit = cache->find(key, table->hash())) return *hit;
    }
    // 16 consecutive sub-blocks: their mean is the full-block estimate and
    // their spread gives a (conservative) error bar.
    constexpr std::uint64_t kBatches = 16;
    if (request.n < 2 * kBatches || request.n % kBatches != 0) throw ConfigError("reference N must be a multiple of 32");
    const std::uint64_t per = request.n / kBatches;
    OptionFunctional f(spec, params, grid, scheme_of(method), request.quantity, request.epsilon);
    std::vector<double> means;
    for (std::uint64_t b = 0; b < kBatches; ++b) {
        SampleBlock block{b * per, derive_seed(0x7265666572656e63ULL, b)};
        means.push_back(simulate(f, method, per, block, options).value);
    }
    double mean = 0.0;
    for (double m : means) mean += m;
    mean /= static_cast<double>(kBatches);
    double ss = 0.0;
    for (double m : means) ss += (m - mean) * (m - mean);
    ReferenceEntry entry;
    entry.value = mean;
    entry.std_error = std::sqrt(ss / static_cast<double>(kBatches - 1) / static_cast<double>(kBatches));
    entry.n = request.n;
    entry.timestamp = fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", std::chrono::floor<std::chrono::seconds>(
                                                                std::chrono::system_clock::now()));
    entry.generator_hash = table->hash();
    if (cache != nullptr) cache->store(key, entry);
    return entry;
}

}  // namespace qmcgsa
