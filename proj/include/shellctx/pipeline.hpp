#pragma once

#include "shellctx/context.hpp"
#include "shellctx/corpus.hpp"
#include "shellctx/generation.hpp"
#include "shellctx/metrics.hpp"
#include "shellctx/preprocess.hpp"
#include "shellctx/text.hpp"

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace shellctx {

// Error classes map one-to-one onto CLI exit codes.

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationFailure : public std::runtime_error {
public:
    explicit ValidationFailure(const std::string& what, ValidationReport report = {})
        : std::runtime_error(what), report_(std::move(report)) {}
    const ValidationReport& report() const noexcept { return report_; }

private:
    ValidationReport report_;
};

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,
    kExitBackend = 3,
};

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Run manifest
// ---------------------------------------------------------------------------

inline constexpr std::string_view kRunManifestName = "run_manifest.jsonl";

inline std::string utc_timestamp() {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// Appends one stage record to `<dir>/run_manifest.jsonl`. The file is only
/// ever appended to; it is the one artifact that carries timestamps.
inline void append_run_manifest(const fs::path& dir, nlohmann::ordered_json entry) {
    nlohmann::ordered_json line;
    line["stage"] = entry.value("stage", "");
    line["timestamp"] = utc_timestamp();
    for (auto& [k, v] : entry.items()) {
        if (k != "stage") {
            line[k] = v;
        }
    }
    std::ofstream out(dir / kRunManifestName, std::ios::app | std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot append to '" + (dir / kRunManifestName).string() + "'");
    }
    out << line.dump() << '\n';
}

inline void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
    }
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PreparedSample {
    Sample sample;
    StandardizationDict dict;
};

/// Stopword filtering, tokenization and standardization of one sample. Context
/// intents are filtered on their own and take the current intent's placeholders.
/// An intent made entirely of stopwords keeps its unfiltered tokens.
inline PreparedSample prepare_sample(const Sample& raw, const StopwordList& stopwords) {
    auto clean = [&](const std::string& intent) {
        auto filtered = filter_stopwords(intent, stopwords);
        if (text::trim(filtered).empty()) {
            filtered = intent;
        }
        return tokenize(filtered, TokenKind::Intent).joined();
    };
    auto std_pair = standardize(clean(raw.intent), raw.snippet);

    PreparedSample out;
    out.sample = raw;
    out.sample.intent = std::move(std_pair.intent);
    out.sample.snippet = std::move(std_pair.snippet);
    out.sample.context_intents.clear();
    for (const auto& ctx : raw.context_intents) {
        out.sample.context_intents.push_back(apply_placeholders(clean(ctx), std_pair.dict, TokenKind::Intent));
    }
    out.dict = std::move(std_pair.dict);
    return out;
}

struct PrepareOptions {
    std::string corpus_path;
    std::string stopwords_path; // empty: no filtering
    fs::path out_dir;
};

struct PrepareResult {
    Corpus processed;
    std::map<std::string, StandardizationDict> dictionaries;
    CategoryCounts histogram{};
    std::string source_hash;
    std::string processed_hash;
};

inline constexpr std::string_view kProcessedCorpusName = "processed.jsonl";
inline constexpr std::string_view kDictionariesName = "dictionaries.jsonl";
inline constexpr std::string_view kPrepareManifestName = "prepare_manifest.json";

inline nlohmann::ordered_json histogram_json(const CategoryCounts& h) {
    nlohmann::ordered_json j;
    for (auto c : kAllCategories) {
        j[std::string(to_string(c))] = h[category_index(c)];
    }
    return j;
}

inline std::map<std::string, StandardizationDict> read_dictionaries(const std::string& path) {
    std::map<std::string, StandardizationDict> out;
    auto content = text::read_file(path);
    auto lines = text::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) {
            continue;
        }
        try {
            auto j = nlohmann::json::parse(lines[i]);
            out[j.at("id").get<std::string>()] = StandardizationDict::from_json(j.at("dictionary"));
        } catch (const std::exception& e) {
            throw ValidationFailure(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

/// Validates the raw corpus, writes processed.jsonl, dictionaries.jsonl (the
/// standardization audit log) and prepare_manifest.json into out_dir.
inline PrepareResult cmd_prepare(const PrepareOptions& opt) {
    Corpus raw;
    try {
        raw = read_corpus(opt.corpus_path);
    } catch (const CorpusError& e) {
        throw ValidationFailure(e.what());
    }
    if (auto report = validate_corpus(raw); !report.ok()) {
        throw ValidationFailure("corpus '" + opt.corpus_path + "' failed validation", std::move(report));
    }
    StopwordList stopwords;
    if (!opt.stopwords_path.empty()) {
        stopwords = StopwordList::from_file(opt.stopwords_path);
    }

    PrepareResult result;
    std::vector<Sample> processed;
    processed.reserve(raw.size());
    std::string dict_log;
    for (const auto& s : raw) {
        auto p = prepare_sample(s, stopwords);
        nlohmann::ordered_json line;
        line["id"] = s.id;
        line["dictionary"] = p.dict.to_json();
        dict_log += line.dump() + "\n";
        result.dictionaries[s.id] = std::move(p.dict);
        processed.push_back(std::move(p.sample));
    }
    result.processed = Corpus(std::move(processed));
    if (auto report = validate_corpus(result.processed); !report.ok()) {
        throw ValidationFailure("processed corpus failed validation", std::move(report));
    }
    result.histogram = category_histogram(result.processed);
    result.source_hash = corpus_hash(raw);
    result.processed_hash = corpus_hash(result.processed);

    ensure_dir(opt.out_dir);
    const auto processed_path = opt.out_dir / kProcessedCorpusName;
    const auto dict_path = opt.out_dir / kDictionariesName;
    const auto manifest_path = opt.out_dir / kPrepareManifestName;
    write_corpus(result.processed, processed_path.string());
    text::write_file(dict_path.string(), dict_log);

    nlohmann::ordered_json manifest;
    manifest["source_corpus_hash"] = result.source_hash;
    manifest["processed_corpus_hash"] = result.processed_hash;
    manifest["samples"] = result.processed.size();
    manifest["histogram"] = histogram_json(result.histogram);
    manifest["pipeline"] = {"filter_stopwords", "tokenize", "standardize"};
    manifest["stopwords"] = stopwords.words();
    text::write_file(manifest_path.string(), manifest.dump(2) + "\n");

    append_run_manifest(opt.out_dir, {{"stage", "prepare"},
                                      {"corpus_hash", result.processed_hash},
                                      {"status", "ok"},
                                      {"artifacts", {processed_path.string(), dict_path.string(),
                                                     manifest_path.string()}}});
    return result;
}

// ---------------------------------------------------------------------------
// split
// ---------------------------------------------------------------------------

struct SplitOptions {
    std::string corpus_path; // processed corpus
    std::string experiment;  // preset name; ignored when config_path is set
    std::string config_path; // optional experiment config JSON
    std::optional<std::uint64_t> seed;
    std::optional<std::string> separator;
    fs::path out_dir;
};

inline DatasetSplit cmd_split(const SplitOptions& opt) {
    Corpus corpus;
    try {
        corpus = load_corpus(opt.corpus_path);
    } catch (const CorpusError& e) {
        throw ValidationFailure(e.what(), e.report());
    }
    ExperimentConfig cfg;
    if (!opt.config_path.empty()) {
        cfg = config_from_json(nlohmann::json::parse(text::read_file(opt.config_path)));
    } else {
        if (!experiment_names().contains(opt.experiment)) {
            throw UsageError("unknown experiment '" + opt.experiment + "'");
        }
        cfg = preset(opt.experiment);
    }
    if (opt.seed) {
        cfg.seed = *opt.seed;
    }
    if (opt.separator) {
        cfg.separator = *opt.separator;
    }
    DatasetSplit split;
    try {
        split = generate_splits(corpus, cfg);
    } catch (const SplitError& e) {
        throw ValidationFailure(e.what());
    }
    export_split(split, opt.out_dir);
    append_run_manifest(opt.out_dir, {{"stage", "split"},
                                      {"corpus_hash", split.corpus_hash},
                                      {"experiment", cfg.name},
                                      {"seed", cfg.seed},
                                      {"status", "ok"},
                                      {"artifacts",
                                       {(opt.out_dir / "train.jsonl").string(), (opt.out_dir / "dev.jsonl").string(),
                                        (opt.out_dir / "test.jsonl").string(),
                                        (opt.out_dir / kSplitManifestName).string()}}});
    return split;
}

// ---------------------------------------------------------------------------
// generate / evaluate
// ---------------------------------------------------------------------------

enum class BackendKind { Retrieval, Echo, Remote };

inline BackendKind parse_backend(const std::string& name) {
    if (name == "retrieval") {
        return BackendKind::Retrieval;
    }
    if (name == "echo") {
        return BackendKind::Echo;
    }
    if (name == "remote") {
        return BackendKind::Remote;
    }
    throw UsageError("unknown backend '" + name + "' (expected retrieval, echo or remote)");
}

struct BackendOptions {
    BackendKind kind = BackendKind::Retrieval;
    std::string endpoint;
    std::chrono::milliseconds timeout{60000};
    int retries = 2;
    std::size_t batch_size = kDefaultBatchSize;
    int max_new_tokens = 128;
};

inline nlohmann::json read_split_manifest(const fs::path& split_dir) {
    try {
        return nlohmann::json::parse(text::read_file((split_dir / kSplitManifestName).string()));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationFailure("malformed split manifest in '" + split_dir.string() + "': " + e.what());
    }
}

inline std::vector<ContextualInput> read_split_set(const fs::path& split_dir, const std::string& set) {
    if (set != "train" && set != "dev" && set != "test") {
        throw UsageError("unknown split set '" + set + "'");
    }
    return read_split_file((split_dir / (set + ".jsonl")).string());
}

/// Every training item must be listed under the manifest's train ids and
/// under neither dev nor test.
inline void check_train_provenance(const std::vector<ContextualInput>& train, const nlohmann::json& manifest) {
    auto ids = [&](const char* set) {
        std::set<std::string> out;
        for (const auto& id : manifest.at("sample_ids").at(set)) {
            out.insert(id.get<std::string>());
        }
        return out;
    };
    auto train_ids = ids("train");
    auto held_out = ids("dev");
    held_out.merge(ids("test"));
    for (const auto& ci : train) {
        if (!train_ids.contains(ci.sample_id) || held_out.contains(ci.sample_id)) {
            throw ValidationFailure("training item '" + ci.sample_id + "' is not a train sample per the manifest");
        }
    }
}

inline std::unique_ptr<Backend> make_backend(const BackendOptions& opt, const fs::path& split_dir) {
    switch (opt.kind) {
    case BackendKind::Echo:
        return std::make_unique<EchoBackend>();
    case BackendKind::Retrieval: {
        auto train = read_split_set(split_dir, "train");
        check_train_provenance(train, read_split_manifest(split_dir));
        if (train.empty()) {
            throw ValidationFailure("retrieval backend needs a non-empty train split");
        }
        return std::make_unique<RetrievalBackend>(build_retrieval_index(train));
    }
    case BackendKind::Remote: {
        if (opt.endpoint.empty()) {
            throw UsageError("--endpoint is required for the remote backend");
        }
        auto remote = std::make_unique<RemoteBackend>(opt.endpoint, opt.timeout, opt.retries);
        remote->check_health();
        return remote;
    }
    }
    throw UsageError("unsupported backend");
}

inline std::string backend_label(BackendKind kind) {
    switch (kind) {
    case BackendKind::Retrieval:
        return "retrieval";
    case BackendKind::Echo:
        return "echo";
    case BackendKind::Remote:
        return "remote";
    }
    return "?";
}

struct GenerateOptions {
    fs::path split_dir;
    std::string eval_set = "test";
    BackendOptions backend;
    fs::path out_dir;
};

inline constexpr std::string_view kPredictionsName = "predictions.jsonl";

/// Raw (placeholder-form) predictions for one split set, index-aligned with it.
inline std::vector<std::string> cmd_generate(const GenerateOptions& opt) {
    auto items = read_split_set(opt.split_dir, opt.eval_set);
    auto manifest = read_split_manifest(opt.split_dir);
    std::vector<std::string> inputs;
    for (const auto& ci : items) {
        inputs.push_back(ci.input_text);
    }
    auto backend = make_backend(opt.backend, opt.split_dir);
    auto predictions =
        inputs.empty() ? std::vector<std::string>{}
                       : generate_all(*backend, inputs, opt.backend.batch_size, opt.backend.max_new_tokens);

    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        nlohmann::ordered_json line;
        line["sample_id"] = items[i].sample_id;
        line["input"] = items[i].input_text;
        line["prediction"] = predictions[i];
        out += line.dump() + "\n";
    }
    ensure_dir(opt.out_dir);
    const auto path = opt.out_dir / kPredictionsName;
    text::write_file(path.string(), out);
    append_run_manifest(opt.out_dir, {{"stage", "generate"},
                                      {"corpus_hash", manifest.value("corpus_hash", "")},
                                      {"experiment", manifest.value("experiment", "")},
                                      {"seed", manifest.value("seed", 0)},
                                      {"backend", backend->name()},
                                      {"status", "ok"},
                                      {"artifacts", {path.string()}}});
    return predictions;
}

inline std::map<std::string, std::string> read_predictions(const std::string& path) {
    std::map<std::string, std::string> out;
    auto content = text::read_file(path);
    auto lines = text::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) {
            continue;
        }
        try {
            auto j = nlohmann::json::parse(lines[i]);
            out[j.at("sample_id").get<std::string>()] = j.at("prediction").get<std::string>();
        } catch (const std::exception& e) {
            throw ValidationFailure(path + ":" + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return out;
}

struct EvaluateOptions {
    fs::path split_dir;
    std::string eval_set = "test";
    std::string corpus_path; // processed corpus the split was made from
    std::string dicts_path;  // dictionaries.jsonl from prepare
    std::string predictions_path; // optional: score these instead of generating
    BackendOptions backend;
    MetricConfig metrics;
    fs::path out_dir;
};

struct EvaluateResult {
    MetricReport report;
    std::size_t hallucination_warnings = 0;
    std::string backend_name;
};

inline constexpr std::string_view kReportJsonName = "report.json";
inline constexpr std::string_view kReportTextName = "report.txt";
inline constexpr std::string_view kScoredName = "scored.jsonl";

/// Generates (or reads) predictions, de-standardizes them with each sample's
/// dictionary, scores them against the restored references and writes
/// report.json, report.txt and scored.jsonl.
inline EvaluateResult cmd_evaluate(const EvaluateOptions& opt) {
    auto manifest = read_split_manifest(opt.split_dir);
    Corpus corpus;
    try {
        corpus = load_corpus(opt.corpus_path);
    } catch (const CorpusError& e) {
        throw ValidationFailure(e.what(), e.report());
    }
    const auto hash = corpus_hash(corpus);
    if (manifest.value("corpus_hash", "") != hash) {
        throw ValidationFailure("split in '" + opt.split_dir.string() +
                                "' was generated from a different corpus (manifest hash " +
                                manifest.value("corpus_hash", "") + ", supplied corpus hash " + hash + ")");
    }
    auto dicts = read_dictionaries(opt.dicts_path);
    auto items = read_split_set(opt.split_dir, opt.eval_set);
    for (const auto& ci : items) {
        if (!dicts.contains(ci.sample_id)) {
            throw ValidationFailure("no standardization dictionary for sample '" + ci.sample_id + "'");
        }
    }

    ensure_dir(opt.out_dir);
    EvaluateResult result;
    std::vector<std::string> predictions;
    if (!opt.predictions_path.empty()) {
        auto by_id = read_predictions(opt.predictions_path);
        for (const auto& ci : items) {
            auto it = by_id.find(ci.sample_id);
            if (it == by_id.end()) {
                throw ValidationFailure("no prediction for sample '" + ci.sample_id + "'");
            }
            predictions.push_back(it->second);
        }
        result.backend_name = "predictions-file";
    } else {
        std::unique_ptr<Backend> backend;
        try {
            backend = make_backend(opt.backend, opt.split_dir);
            std::vector<std::string> inputs;
            for (const auto& ci : items) {
                inputs.push_back(ci.input_text);
            }
            if (!inputs.empty()) {
                predictions =
                    generate_all(*backend, inputs, opt.backend.batch_size, opt.backend.max_new_tokens);
            }
        } catch (const GenerationError& e) {
            append_run_manifest(opt.out_dir, {{"stage", "evaluate"},
                                              {"corpus_hash", hash},
                                              {"experiment", manifest.value("experiment", "")},
                                              {"seed", manifest.value("seed", 0)},
                                              {"backend", backend_label(opt.backend.kind)},
                                              {"status", "failed"},
                                              {"note", std::string("generation aborted before scoring: ") + e.what()},
                                              {"artifacts", nlohmann::ordered_json::array()}});
            throw;
        }
        result.backend_name = backend->name();
    }

    std::vector<EvalPair> pairs;
    std::string scored;
    for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& dict = dicts.at(items[i].sample_id);
        auto cand = destandardize(predictions[i], dict);
        auto ref = destandardize(items[i].target, dict);
        if (cand.warning()) {
            ++result.hallucination_warnings;
        }
        nlohmann::ordered_json line;
        line["sample_id"] = items[i].sample_id;
        line["category"] = to_string(items[i].category);
        line["prediction"] = predictions[i];
        line["candidate"] = cand.snippet;
        line["reference"] = ref.snippet;
        line["unknown_placeholders"] = cand.unknown_placeholders;
        scored += line.dump() + "\n";
        pairs.push_back({std::move(cand.snippet), std::move(ref.snippet), items[i].sample_id, items[i].category});
    }
    result.report = evaluate_corpus(pairs, opt.metrics);

    auto json = report_to_json(result.report);
    nlohmann::ordered_json doc;
    doc["experiment"] = manifest.value("experiment", "");
    doc["seed"] = manifest.value("seed", 0);
    doc["corpus_hash"] = hash;
    doc["eval_set"] = opt.eval_set;
    doc["backend"] = result.backend_name;
    doc["hallucination_warnings"] = result.hallucination_warnings;
    for (auto& [k, v] : json.items()) {
        doc[k] = v;
    }

    const auto json_path = opt.out_dir / kReportJsonName;
    const auto text_path = opt.out_dir / kReportTextName;
    const auto scored_path = opt.out_dir / kScoredName;
    text::write_file(json_path.string(), doc.dump(2) + "\n");
    std::string header = "experiment: " + doc["experiment"].get<std::string>() + "  set: " + opt.eval_set +
                         "  backend: " + result.backend_name + "\n" +
                         "metric config: " + result.report.config.to_json().dump() + "\n\n";
    text::write_file(text_path.string(), header + render_report(result.report));
    text::write_file(scored_path.string(), scored);

    append_run_manifest(opt.out_dir, {{"stage", "evaluate"},
                                      {"corpus_hash", hash},
                                      {"experiment", manifest.value("experiment", "")},
                                      {"seed", manifest.value("seed", 0)},
                                      {"backend", result.backend_name},
                                      {"status", "ok"},
                                      {"artifacts", {json_path.string(), text_path.string(), scored_path.string()}}});
    return result;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Renders one or more report.json files as a single table, one block per
/// report, in the order given.
inline std::string cmd_report(const std::vector<std::string>& report_paths) {
    if (report_paths.empty()) {
        throw UsageError("report needs at least one report.json");
    }
    ReportTable table;
    bool first = true;
    for (const auto& path : report_paths) {
        nlohmann::json doc;
        try {
            doc = nlohmann::json::parse(text::read_file(path));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationFailure("malformed report '" + path + "': " + e.what());
        }
        if (!first) {
            table.add_rule();
        }
        first = false;
        const std::string label = doc.value("experiment", path) + "/" + doc.value("backend", "?");
        if (doc.value("empty", false) || doc.at("overall").is_null()) {
            continue;
        }
        for (const auto& [cat, m] : doc.at("per_category").items()) {
            table.add_row(label + " " + cat, means_from_json(m));
        }
        table.add_row(label + " overall", means_from_json(doc.at("overall")));
    }
    return table.render();
}

} // namespace shellctx
