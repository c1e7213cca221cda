#pragma once

#include "shellctx/category.hpp"
#include "shellctx/text.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace shellctx {

/// One intent/snippet pair. Snippets may span several instructions joined by '\n'.
struct Sample {
    std::string id;
    std::string program_id;
    std::int64_t line_no = 0;
    std::string intent;
    std::string snippet;
    ContextCategory category = ContextCategory::NoContext;
    std::vector<std::string> context_intents;

    bool operator==(const Sample&) const = default;
};

struct Violation {
    std::string sample_id;
    std::string rule;
    std::string detail;

    bool operator==(const Violation&) const = default;
};

struct ValidationReport {
    std::vector<Violation> violations;

    bool ok() const noexcept { return violations.empty(); }

    std::string to_string() const {
        std::string out;
        for (const auto& v : violations) {
            out += "sample '" + v.sample_id + "': " + v.rule;
            if (!v.detail.empty()) {
                out += " (" + v.detail + ")";
            }
            out += '\n';
        }
        return out;
    }
};

/// Thrown by the loader. line() is the 1-based file line for parse failures
/// and 0 for invariant violations, which name the offending sample instead.
class CorpusError : public std::runtime_error {
public:
    CorpusError(std::size_t line, const std::string& what)
        : std::runtime_error(what), line_(line) {}
    CorpusError(ValidationReport report)
        : std::runtime_error("corpus validation failed:\n" + report.to_string()),
          report_(std::move(report)) {}

    std::size_t line() const noexcept { return line_; }
    const ValidationReport& report() const noexcept { return report_; }

private:
    std::size_t line_ = 0;
    ValidationReport report_;
};

/// Immutable, ordered collection of samples with a per-program index.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<Sample> samples) : samples_(std::move(samples)) {
        for (std::size_t i = 0; i < samples_.size(); ++i) {
            programs_[samples_[i].program_id].push_back(i);
        }
    }

    const std::vector<Sample>& samples() const noexcept { return samples_; }
    std::size_t size() const noexcept { return samples_.size(); }
    bool empty() const noexcept { return samples_.empty(); }
    const Sample& operator[](std::size_t i) const { return samples_.at(i); }

    /// program_id -> indices into samples(), in file order.
    const std::map<std::string, std::vector<std::size_t>>& programs() const noexcept {
        return programs_;
    }

    auto begin() const noexcept { return samples_.begin(); }
    auto end() const noexcept { return samples_.end(); }

private:
    std::vector<Sample> samples_;
    std::map<std::string, std::vector<std::size_t>> programs_;
};

namespace detail {

inline void check_sample_fields(const Sample& s, std::vector<Violation>& out) {
    if (s.id.empty()) {
        out.push_back({s.id, "empty id", ""});
    }
    if (text::trim(s.intent).empty()) {
        out.push_back({s.id, "empty intent", ""});
    }
    if (text::trim(s.snippet).empty()) {
        out.push_back({s.id, "empty snippet", ""});
    }
    auto want = context_arity(s.category);
    if (s.context_intents.size() != want) {
        out.push_back({s.id, "context_intents arity",
                       std::string(to_string(s.category)) + " requires " + std::to_string(want) +
                           ", found " + std::to_string(s.context_intents.size())});
    }
    for (const auto& c : s.context_intents) {
        if (text::trim(c).empty()) {
            out.push_back({s.id, "empty context intent", ""});
            break;
        }
    }
}

} // namespace detail

/// Lists every invariant violation; an empty report means the corpus is valid.
inline ValidationReport validate_corpus(const Corpus& corpus) {
    ValidationReport report;
    std::set<std::string> ids;
    std::set<std::pair<std::string, std::int64_t>> positions;
    std::map<std::string, std::int64_t> last_line;

    for (const auto& s : corpus) {
        detail::check_sample_fields(s, report.violations);
        if (!ids.insert(s.id).second) {
            report.violations.push_back({s.id, "duplicate id", ""});
        }
        if (!positions.insert({s.program_id, s.line_no}).second) {
            report.violations.push_back(
                {s.id, "duplicate (program_id, line_no)",
                 s.program_id + ":" + std::to_string(s.line_no)});
        } else if (auto it = last_line.find(s.program_id);
                   it != last_line.end() && s.line_no <= it->second) {
            report.violations.push_back({s.id, "line_no not increasing within program",
                                         s.program_id + ": " + std::to_string(s.line_no) +
                                             " after " + std::to_string(it->second)});
        }
        if (auto [it, inserted] = last_line.try_emplace(s.program_id, s.line_no); !inserted) {
            it->second = std::max(it->second, s.line_no);
        }
    }
    return report;
}

inline CategoryCounts category_histogram(const Corpus& corpus) {
    CategoryCounts counts{};
    for (const auto& s : corpus) {
        ++counts[category_index(s.category)];
    }
    return counts;
}

inline nlohmann::ordered_json sample_to_json(const Sample& s) {
    nlohmann::ordered_json j;
    j["id"] = s.id;
    j["program_id"] = s.program_id;
    j["line_no"] = s.line_no;
    j["intent"] = s.intent;
    j["snippet"] = s.snippet;
    j["category"] = to_string(s.category);
    j["context_intents"] = s.context_intents;
    return j;
}

/// Parses one JSONL record; `line` is only used in error messages.
inline Sample sample_from_json_line(std::string_view record, std::size_t line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(record);
    } catch (const nlohmann::json::parse_error& e) {
        throw CorpusError(line, "line " + std::to_string(line) + ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) {
        throw CorpusError(line, "line " + std::to_string(line) + ": record is not a JSON object");
    }
    auto field = [&](const char* name) -> const nlohmann::json& {
        auto it = j.find(name);
        if (it == j.end()) {
            throw CorpusError(line, "line " + std::to_string(line) + ": missing field '" + name + "'");
        }
        return *it;
    };
    auto string_field = [&](const char* name) {
        const auto& v = field(name);
        if (!v.is_string()) {
            throw CorpusError(line, "line " + std::to_string(line) + ": field '" + name +
                                        "' must be a string");
        }
        return v.get<std::string>();
    };

    Sample s;
    s.id = string_field("id");
    s.program_id = string_field("program_id");
    const auto& ln = field("line_no");
    if (!ln.is_number_integer()) {
        throw CorpusError(line, "line " + std::to_string(line) + ": field 'line_no' must be an integer");
    }
    s.line_no = ln.get<std::int64_t>();
    s.intent = string_field("intent");
    s.snippet = string_field("snippet");
    auto cat_name = string_field("category");
    auto cat = parse_category(cat_name);
    if (!cat) {
        throw CorpusError(line, "line " + std::to_string(line) + ": unknown category '" + cat_name + "'");
    }
    s.category = *cat;
    const auto& ctx = field("context_intents");
    if (!ctx.is_array()) {
        throw CorpusError(line, "line " + std::to_string(line) + ": field 'context_intents' must be an array");
    }
    for (const auto& c : ctx) {
        if (!c.is_string()) {
            throw CorpusError(line, "line " + std::to_string(line) +
                                        ": context_intents entries must be strings");
        }
        s.context_intents.push_back(c.get<std::string>());
    }
    return s;
}

/// Parses JSONL content without checking corpus invariants. Blank lines are skipped.
inline Corpus parse_corpus(std::string_view content) {
    std::vector<Sample> samples;
    auto lines = text::split_lines(content);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty()) {
            continue;
        }
        samples.push_back(sample_from_json_line(lines[i], i + 1));
    }
    return Corpus(std::move(samples));
}

inline Corpus read_corpus(const std::string& path) { return parse_corpus(text::read_file(path)); }

/// Reads and validates a JSONL corpus; throws CorpusError on the first parse
/// failure or with the full ValidationReport when invariants are broken.
inline Corpus load_corpus(const std::string& path) {
    auto corpus = read_corpus(path);
    auto report = validate_corpus(corpus);
    if (!report.ok()) {
        throw CorpusError(std::move(report));
    }
    return corpus;
}

inline std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& s : corpus) {
        out += sample_to_json(s).dump();
        out += '\n';
    }
    return out;
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
    text::write_file(path, serialize_corpus(corpus));
}

/// SHA-256 over the canonical JSONL serialization, so it is independent of
/// incidental formatting in the source file.
inline std::string corpus_hash(const Corpus& corpus) {
    return text::sha256_hex(serialize_corpus(corpus));
}

/// Incremental construction that rejects any sample breaking a corpus invariant.
class CorpusBuilder {
public:
    CorpusBuilder& add(Sample s) {
        std::vector<Violation> problems;
        detail::check_sample_fields(s, problems);
        if (ids_.contains(s.id)) {
            problems.push_back({s.id, "duplicate id", ""});
        }
        if (auto it = last_line_.find(s.program_id); it != last_line_.end() && s.line_no <= it->second) {
            problems.push_back({s.id, "line_no not increasing within program", s.program_id});
        }
        if (!problems.empty()) {
            throw std::invalid_argument(ValidationReport{std::move(problems)}.to_string());
        }
        ids_.insert(s.id);
        last_line_[s.program_id] = s.line_no;
        samples_.push_back(std::move(s));
        return *this;
    }

    /// Appends to `program_id` at the next line number with a generated id.
    CorpusBuilder& append(const std::string& program_id, std::string intent, std::string snippet,
                          ContextCategory category = ContextCategory::NoContext,
                          std::vector<std::string> context = {}) {
        Sample s;
        auto it = last_line_.find(program_id);
        s.line_no = it == last_line_.end() ? 1 : it->second + 1;
        s.program_id = program_id;
        s.id = program_id + "-" + std::to_string(s.line_no);
        s.intent = std::move(intent);
        s.snippet = std::move(snippet);
        s.category = category;
        s.context_intents = std::move(context);
        return add(std::move(s));
    }

    std::size_t size() const noexcept { return samples_.size(); }

    Corpus build() && { return Corpus(std::move(samples_)); }
    Corpus build() const& { return Corpus(samples_); }

private:
    std::vector<Sample> samples_;
    std::set<std::string> ids_;
    std::map<std::string, std::int64_t> last_line_;
};

} // namespace shellctx
