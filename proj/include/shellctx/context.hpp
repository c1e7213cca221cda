#pragma once

#include "shellctx/category.hpp"
#include "shellctx/corpus.hpp"
#include "shellctx/text.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace shellctx {

inline constexpr std::string_view kDefaultSeparator = "_BREAK";

/// Model input (context intents and the current intent joined by the separator) plus its target.
struct ContextualInput {
    std::string input_text;
    std::string target;
    std::string sample_id;
    ContextCategory category = ContextCategory::NoContext;

    bool operator==(const ContextualInput&) const = default;
};

/// Joins context intents and the current intent with " <separator> ".
/// The current intent is always the last segment.
inline ContextualInput build_contextual_input(const Sample& sample,
                                              std::string_view separator = kDefaultSeparator) {
    std::string padded = " " + std::string(separator) + " ";
    std::string input;
    for (const auto& ctx : sample.context_intents) {
        input += ctx;
        input += padded;
    }
    input += sample.intent;
    return {std::move(input), sample.snippet, sample.id, sample.category};
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct CountQuota {
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test = 0;

    std::size_t total() const noexcept { return train + dev + test; }
    bool operator==(const CountQuota&) const = default;
};

struct FractionQuota {
    double train = 0.0;
    double dev = 0.0;
    double test = 0.0;

    bool operator==(const FractionQuota&) const = default;
};

using Quota = std::variant<CountQuota, FractionQuota>;

inline const std::set<std::string, std::less<>>& experiment_names() {
    static const std::set<std::string, std::less<>> kNames = {
        "missing_information", "ctx_2to1", "ctx_3to1", "unn_2to1", "unn_3to1"};
    return kNames;
}

class SplitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
    std::string name;
    std::map<ContextCategory, Quota> quotas;
    std::uint64_t seed = 0;
    std::string separator = std::string(kDefaultSeparator);
    /// Samples a count quota may exceed the corpus by; the gap is filled by
    /// repeating train samples and reported as a discrepancy.
    std::map<ContextCategory, std::size_t> tolerated_shortfall;

    void validate() const {
        if (name.empty()) {
            throw SplitError("experiment name must be non-empty");
        }
        if (separator.empty()) {
            throw SplitError("separator must be non-empty");
        }
        for (const auto& [cat, q] : quotas) {
            if (const auto* f = std::get_if<FractionQuota>(&q)) {
                for (double v : {f->train, f->dev, f->test}) {
                    if (!(v >= 0.0 && v <= 1.0)) {
                        throw SplitError(std::string(to_string(cat)) + ": fraction out of [0,1]");
                    }
                }
                if (f->train + f->dev + f->test > 1.0 + 1e-9) {
                    throw SplitError(std::string(to_string(cat)) + ": fractions sum above 1");
                }
            }
        }
    }
};

namespace detail {

inline nlohmann::ordered_json quota_to_json(const Quota& q) {
    nlohmann::ordered_json j;
    if (const auto* c = std::get_if<CountQuota>(&q)) {
        j["counts"] = {{"train", c->train}, {"dev", c->dev}, {"test", c->test}};
    } else {
        const auto& f = std::get<FractionQuota>(q);
        j["fractions"] = {{"train", f.train}, {"dev", f.dev}, {"test", f.test}};
    }
    return j;
}

inline Quota quota_from_json(const nlohmann::json& j) {
    if (auto it = j.find("counts"); it != j.end()) {
        return CountQuota{it->at("train").get<std::size_t>(), it->at("dev").get<std::size_t>(),
                          it->at("test").get<std::size_t>()};
    }
    if (auto it = j.find("fractions"); it != j.end()) {
        return FractionQuota{it->at("train").get<double>(), it->at("dev").get<double>(),
                             it->at("test").get<double>()};
    }
    throw SplitError("quota needs either 'counts' or 'fractions'");
}

inline ContextCategory category_from_key(const std::string& key) {
    auto c = parse_category(key);
    if (!c) {
        throw SplitError("unknown category '" + key + "'");
    }
    return *c;
}

} // namespace detail

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::ordered_json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["separator"] = cfg.separator;
    j["quotas"] = nlohmann::ordered_json::object();
    for (const auto& [cat, q] : cfg.quotas) {
        j["quotas"][std::string(to_string(cat))] = detail::quota_to_json(q);
    }
    j["tolerated_shortfall"] = nlohmann::ordered_json::object();
    for (const auto& [cat, n] : cfg.tolerated_shortfall) {
        j["tolerated_shortfall"][std::string(to_string(cat))] = n;
    }
    return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    try {
        ExperimentConfig cfg;
        cfg.name = j.at("name").get<std::string>();
        cfg.seed = j.value("seed", std::uint64_t{0});
        cfg.separator = j.value("separator", std::string(kDefaultSeparator));
        for (const auto& [key, q] : j.at("quotas").items()) {
            cfg.quotas[detail::category_from_key(key)] = detail::quota_from_json(q);
        }
        if (auto it = j.find("tolerated_shortfall"); it != j.end()) {
            for (const auto& [key, n] : it->items()) {
                cfg.tolerated_shortfall[detail::category_from_key(key)] = n.get<std::size_t>();
            }
        }
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw SplitError(std::string("malformed experiment config: ") + e.what());
    }
}

/// The five shipped experiments with absolute per-cell counts.
inline ExperimentConfig preset(std::string_view name) {
    using C = ContextCategory;
    constexpr std::uint64_t kPresetSeed = 2024;
    const CountQuota no_context_share{867, 48, 48};

    ExperimentConfig cfg;
    cfg.name = std::string(name);
    cfg.seed = kPresetSeed;
    if (name == "missing_information") {
        cfg.quotas[C::NoContext] = CountQuota{770, 96, 96};
    } else if (name == "ctx_2to1") {
        cfg.quotas[C::NoContext] = no_context_share;
        cfg.quotas[C::Ctx2to1] = CountQuota{180, 90, 90};
    } else if (name == "ctx_3to1") {
        cfg.quotas[C::NoContext] = no_context_share;
        cfg.quotas[C::Ctx3to1] = CountQuota{81, 79, 79};
        // 81 + 79 + 79 = 239 against 238 available 3to1 samples.
        cfg.tolerated_shortfall[C::Ctx3to1] = 1;
    } else if (name == "unn_2to1") {
        cfg.quotas[C::NoContext] = no_context_share;
        cfg.quotas[C::Ctx2to1] = CountQuota{324, 18, 18};
        cfg.quotas[C::Unn2to1] = CountQuota{103, 100, 100};
    } else if (name == "unn_3to1") {
        cfg.quotas[C::NoContext] = no_context_share;
        cfg.quotas[C::Ctx3to1] = CountQuota{214, 12, 12};
        cfg.quotas[C::Unn3to1] = CountQuota{103, 100, 100};
    } else {
        throw SplitError("unknown experiment preset '" + std::string(name) + "'");
    }
    return cfg;
}

inline std::vector<ExperimentConfig> all_presets() {
    std::vector<ExperimentConfig> out;
    for (const auto& n : experiment_names()) {
        out.push_back(preset(n));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Split generation
// ---------------------------------------------------------------------------

/// A category whose requested quota total differs from what the corpus holds.
struct Discrepancy {
    ContextCategory category = ContextCategory::NoContext;
    std::size_t requested = 0;
    std::size_t available = 0;
    std::string resolution;

    bool operator==(const Discrepancy&) const = default;
};

struct CategoryAssignment {
    std::size_t available = 0;
    std::size_t train = 0;
    std::size_t dev = 0;
    std::size_t test = 0;
    /// Train entries that repeat another train sample.
    std::size_t repeated = 0;

    bool operator==(const CategoryAssignment&) const = default;
};

struct DatasetSplit {
    std::vector<ContextualInput> train;
    std::vector<ContextualInput> dev;
    std::vector<ContextualInput> test;

    ExperimentConfig config;
    std::string corpus_hash;
    std::map<ContextCategory, CategoryAssignment> assignments;
    std::vector<Discrepancy> discrepancies;
};

namespace detail {

/// Unbiased draw from [0, bound) using raw engine output, so the permutation
/// depends only on the engine's standardized sequence.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
    const std::uint64_t excess = (std::uint64_t{0} - bound) % bound; // 2^64 mod bound
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (excess != 0 && x > kMax - excess);
    return x % bound;
}

/// Fisher-Yates over mt19937_64 seeded with seed_seq{seed_lo, seed_hi, stream}.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xFFFFFFFFu),
                      static_cast<std::uint32_t>(seed >> 32), stream};
    std::mt19937_64 rng(seq);
    for (std::size_t i = items.size(); i > 1; --i) {
        auto j = static_cast<std::size_t>(bounded_draw(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

inline std::size_t floor_share(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

} // namespace detail

inline constexpr std::string_view kShuffleAlgorithm =
    "fisher-yates/mt19937_64/seed_seq{seed_lo,seed_hi,category_index}";

/// Shuffles each category with the config seed and deals train/dev/test by
/// quota. Fractional quotas give dev and test floor(f*n) and train the rest.
inline DatasetSplit generate_splits(const Corpus& corpus, const ExperimentConfig& config) {
    config.validate();

    std::map<ContextCategory, std::vector<std::size_t>> by_category;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        by_category[corpus[i].category].push_back(i);
    }

    DatasetSplit split;
    split.config = config;
    split.corpus_hash = corpus_hash(corpus);

    for (const auto& [cat, quota] : config.quotas) {
        auto& pool = by_category[cat];
        const std::size_t n = pool.size();
        const auto cat_name = std::string(to_string(cat));

        CategoryAssignment a;
        a.available = n;
        std::size_t requested = 0;
        if (const auto* c = std::get_if<CountQuota>(&quota)) {
            a.train = c->train;
            a.dev = c->dev;
            a.test = c->test;
            requested = c->total();
        } else {
            const auto& f = std::get<FractionQuota>(quota);
            a.dev = detail::floor_share(f.dev, n);
            a.test = detail::floor_share(f.test, n);
            auto taken = detail::floor_share(f.train + f.dev + f.test, n);
            a.train = taken >= a.dev + a.test ? taken - a.dev - a.test : 0;
            requested = a.train + a.dev + a.test;
        }

        if (requested > n) {
            const std::size_t shortfall = requested - n;
            auto tol = config.tolerated_shortfall.find(cat);
            const std::size_t allowed = tol == config.tolerated_shortfall.end() ? 0 : tol->second;
            if (shortfall > allowed || shortfall >= a.train) {
                throw SplitError("category " + cat_name + ": quota of " + std::to_string(requested) +
                                 " exceeds the " + std::to_string(n) + " available samples (shortfall " +
                                 std::to_string(shortfall) + ")");
            }
            a.repeated = shortfall;
            split.discrepancies.push_back(
                {cat, requested, n,
                 "train repeats " + std::to_string(shortfall) + " sample(s) to reach its quota"});
        } else if (requested < n && std::holds_alternative<CountQuota>(quota)) {
            split.discrepancies.push_back(
                {cat, requested, n, std::to_string(n - requested) + " sample(s) left unassigned"});
        }

        detail::seeded_shuffle(pool, config.seed, static_cast<std::uint32_t>(category_index(cat)));

        std::size_t cursor = 0;
        auto deal = [&](std::vector<ContextualInput>& dst, std::size_t count) {
            for (std::size_t k = 0; k < count; ++k) {
                dst.push_back(build_contextual_input(corpus[pool[cursor++]], config.separator));
            }
        };
        const std::size_t unique_train = a.train - a.repeated;
        const std::size_t train_begin = split.train.size();
        deal(split.train, unique_train);
        for (std::size_t k = 0; k < a.repeated; ++k) {
            split.train.push_back(split.train[train_begin + k]);
        }
        deal(split.dev, a.dev);
        deal(split.test, a.test);
        split.assignments[cat] = a;
    }
    return split;
}

// ---------------------------------------------------------------------------
// Split files
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json contextual_input_to_json(const ContextualInput& ci) {
    nlohmann::ordered_json j;
    j["input"] = ci.input_text;
    j["target"] = ci.target;
    j["sample_id"] = ci.sample_id;
    j["category"] = to_string(ci.category);
    return j;
}

inline ContextualInput contextual_input_from_json(const nlohmann::json& j) {
    ContextualInput ci;
    ci.input_text = j.at("input").get<std::string>();
    ci.target = j.at("target").get<std::string>();
    ci.sample_id = j.at("sample_id").get<std::string>();
    ci.category = detail::category_from_key(j.at("category").get<std::string>());
    return ci;
}

inline nlohmann::ordered_json split_manifest(const DatasetSplit& split) {
    nlohmann::ordered_json m;
    m["experiment"] = split.config.name;
    m["seed"] = split.config.seed;
    m["separator"] = split.config.separator;
    m["shuffle"] = kShuffleAlgorithm;
    m["corpus_hash"] = split.corpus_hash;
    m["config"] = config_to_json(split.config);

    m["counts"] = nlohmann::ordered_json::object();
    for (const auto& [cat, a] : split.assignments) {
        m["counts"][std::string(to_string(cat))] = {{"train", a.train}, {"dev", a.dev},
                                                    {"test", a.test}, {"available", a.available},
                                                    {"repeated_in_train", a.repeated}};
    }
    m["totals"] = {{"train", split.train.size()}, {"dev", split.dev.size()}, {"test", split.test.size()}};

    m["discrepancies"] = nlohmann::ordered_json::array();
    for (const auto& d : split.discrepancies) {
        m["discrepancies"].push_back({{"category", to_string(d.category)},
                                      {"requested", d.requested},
                                      {"available", d.available},
                                      {"resolution", d.resolution}});
    }

    auto ids = [](const std::vector<ContextualInput>& v) {
        nlohmann::ordered_json a = nlohmann::ordered_json::array();
        for (const auto& ci : v) {
            a.push_back(ci.sample_id);
        }
        return a;
    };
    m["sample_ids"] = {{"train", ids(split.train)}, {"dev", ids(split.dev)}, {"test", ids(split.test)}};
    return m;
}

inline std::string serialize_inputs(const std::vector<ContextualInput>& items) {
    std::string out;
    for (const auto& ci : items) {
        out += contextual_input_to_json(ci).dump();
        out += '\n';
    }
    return out;
}

inline constexpr std::string_view kSplitManifestName = "split_manifest.json";

/// Writes train/dev/test JSONL plus split_manifest.json into `dir`.
inline void export_split(const DatasetSplit& split, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
    }
    text::write_file((dir / "train.jsonl").string(), serialize_inputs(split.train));
    text::write_file((dir / "dev.jsonl").string(), serialize_inputs(split.dev));
    text::write_file((dir / "test.jsonl").string(), serialize_inputs(split.test));
    text::write_file((dir / kSplitManifestName).string(), split_manifest(split).dump(2) + "\n");
}

inline std::vector<ContextualInput> read_split_file(const std::string& path) {
    std::vector<ContextualInput> out;
    auto content = text::read_file(path);
    auto lines = text::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) {
            continue;
        }
        try {
            out.push_back(contextual_input_from_json(nlohmann::json::parse(lines[i])));
        } catch (const std::exception& e) {
            throw std::runtime_error(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

} // namespace shellctx
