#pragma once

#include "shellctx/category.hpp"
#include "shellctx/preprocess.hpp"
#include "shellctx/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

namespace shellctx {

/// A de-standardized prediction and its ground truth.
struct EvalPair {
    std::string candidate;
    std::string reference;
    std::string sample_id;
    ContextCategory category = ContextCategory::NoContext;
};

struct MetricConfig {
    double meteor_alpha = 0.9;
    double meteor_gamma = 0.5;
    double meteor_beta = 3.0;
    double rouge_beta = 1.0;
    bool em_whitespace_normalize = true;

    void validate() const {
        if (!(meteor_alpha > 0.0 && meteor_alpha < 1.0)) {
            throw std::invalid_argument("meteor_alpha must lie in (0, 1)");
        }
        if (!(meteor_gamma > 0.0 && meteor_beta > 0.0 && rouge_beta > 0.0)) {
            throw std::invalid_argument("metric weights must be positive");
        }
    }

    nlohmann::ordered_json to_json() const {
        return {{"meteor_alpha", meteor_alpha},
                {"meteor_gamma", meteor_gamma},
                {"meteor_beta", meteor_beta},
                {"meteor_matching", "exact unigrams only (no stemming, no synonyms)"},
                {"rouge_beta", rouge_beta},
                {"rouge_tokens", "whitespace"},
                {"em_whitespace_normalize", em_whitespace_normalize},
                {"ed_normalization", "1 - levenshtein / max(len) over code points"}};
    }

    static MetricConfig from_json(const nlohmann::json& j) {
        MetricConfig c;
        c.meteor_alpha = j.value("meteor_alpha", c.meteor_alpha);
        c.meteor_gamma = j.value("meteor_gamma", c.meteor_gamma);
        c.meteor_beta = j.value("meteor_beta", c.meteor_beta);
        c.rouge_beta = j.value("rouge_beta", c.rouge_beta);
        c.em_whitespace_normalize = j.value("em_whitespace_normalize", c.em_whitespace_normalize);
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Exact match
// ---------------------------------------------------------------------------

/// Unifies line endings, collapses runs of blanks, and trims every line and the whole text.
inline std::string normalize_whitespace(std::string_view s) {
    std::vector<std::string> lines;
    std::string current;
    auto flush = [&] {
        lines.emplace_back(text::trim(current));
        current.clear();
    };
    for (std::size_t i = 0; i < s.size(); ++i) {
        char c = s[i];
        if (c == '\r') {
            if (i + 1 < s.size() && s[i + 1] == '\n') {
                ++i;
            }
            flush();
        } else if (c == '\n') {
            flush();
        } else if (c == ' ' || c == '\t' || c == '\f' || c == '\v') {
            if (current.empty() || current.back() != ' ') {
                current.push_back(' ');
            }
        } else {
            current.push_back(c);
        }
    }
    flush();
    return std::string(text::trim(text::join(lines, "\n")));
}

inline double exact_match(const EvalPair& pair, const MetricConfig& cfg = {}) {
    if (cfg.em_whitespace_normalize) {
        return normalize_whitespace(pair.candidate) == normalize_whitespace(pair.reference) ? 1.0 : 0.0;
    }
    return pair.candidate == pair.reference ? 1.0 : 0.0;
}

// ---------------------------------------------------------------------------
// Edit distance
// ---------------------------------------------------------------------------

/// Levenshtein distance with unit costs, two-row dynamic programme.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
    if (a.size() < b.size()) {
        return levenshtein(b, a);
    }
    std::vector<std::size_t> prev(b.size() + 1);
    std::vector<std::size_t> cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) {
        prev[j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

/// 1 - Lev(c, r) / max(|c|, |r|) over code points; 1 when both are empty.
inline double edit_distance_sim(std::string_view candidate, std::string_view reference) {
    auto c = text::utf8_decode(candidate);
    auto r = text::utf8_decode(reference);
    auto longest = std::max(c.size(), r.size());
    if (longest == 0) {
        return 1.0;
    }
    return 1.0 - static_cast<double>(levenshtein(c, r)) / static_cast<double>(longest);
}

inline double edit_distance_sim(const EvalPair& pair) {
    return edit_distance_sim(pair.candidate, pair.reference);
}

// ---------------------------------------------------------------------------
// METEOR
// ---------------------------------------------------------------------------

struct MeteorAlignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

namespace detail {

/// Depth-first search over one-to-one exact-unigram alignments of maximal size,
/// keeping the one with the fewest chunks. A chunk is a run of matches adjacent
/// in both sequences. The first descent is the greedy alignment; the node
/// budget only matters for long, highly repetitive inputs.
class ChunkMinimizer {
public:
    static constexpr std::size_t kNodeBudget = 2'000'000;

    ChunkMinimizer(const std::vector<std::string>& cand, const std::vector<std::string>& ref)
        : used_(ref.size(), false) {
        std::unordered_map<std::string_view, std::size_t> type_of;
        for (const auto& t : ref) {
            type_of.try_emplace(t, type_of.size());
        }
        std::vector<std::size_t> cand_count(type_of.size(), 0);
        std::vector<std::size_t> ref_count(type_of.size(), 0);
        ref_positions_.resize(type_of.size());
        for (std::size_t j = 0; j < ref.size(); ++j) {
            auto t = type_of.at(ref[j]);
            ++ref_count[t];
            ref_positions_[t].push_back(j);
        }
        cand_type_.reserve(cand.size());
        for (const auto& t : cand) {
            auto it = type_of.find(t);
            if (it == type_of.end()) {
                cand_type_.push_back(kNone);
            } else {
                cand_type_.push_back(it->second);
                ++cand_count[it->second];
            }
        }
        skip_budget_.resize(type_of.size());
        for (std::size_t t = 0; t < type_of.size(); ++t) {
            auto m = std::min(cand_count[t], ref_count[t]);
            matches_ += m;
            skip_budget_[t] = cand_count[t] - m;
        }
    }

    MeteorAlignment solve() {
        if (matches_ == 0) {
            return {0, 0};
        }
        best_ = matches_ + 1;
        search(0, kNone, 0);
        return {matches_, best_};
    }

private:
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    void search(std::size_t i, std::size_t prev_ref, std::size_t chunks) {
        if (chunks >= best_ || nodes_ >= kNodeBudget) {
            return;
        }
        ++nodes_;
        if (i == cand_type_.size()) {
            best_ = chunks;
            return;
        }
        const auto t = cand_type_[i];
        if (t == kNone) {
            search(i + 1, kNone, chunks);
            return;
        }
        if (prev_ref != kNone && prev_ref + 1 < used_.size() && !used_[prev_ref + 1]) {
            const auto& pos = ref_positions_[t];
            if (std::binary_search(pos.begin(), pos.end(), prev_ref + 1)) {
                used_[prev_ref + 1] = true;
                search(i + 1, prev_ref + 1, chunks);
                used_[prev_ref + 1] = false;
            }
        }
        for (auto j : ref_positions_[t]) {
            if (used_[j] || (prev_ref != kNone && j == prev_ref + 1)) {
                continue;
            }
            used_[j] = true;
            search(i + 1, j, chunks + 1);
            used_[j] = false;
        }
        if (skip_budget_[t] > 0) {
            --skip_budget_[t];
            search(i + 1, kNone, chunks);
            ++skip_budget_[t];
        }
    }

    std::vector<std::size_t> cand_type_;
    std::vector<std::vector<std::size_t>> ref_positions_;
    std::vector<std::size_t> skip_budget_;
    std::vector<bool> used_;
    std::size_t matches_ = 0;
    std::size_t best_ = 0;
    std::size_t nodes_ = 0;
};

} // namespace detail

/// Maximum one-to-one exact matching with the fewest chunks among maximal matchings.
inline MeteorAlignment meteor_align(const std::vector<std::string>& candidate,
                                    const std::vector<std::string>& reference) {
    return detail::ChunkMinimizer(candidate, reference).solve();
}

inline double meteor_from_alignment(const MeteorAlignment& al, std::size_t cand_len, std::size_t ref_len,
                                    const MetricConfig& cfg) {
    if (al.matches == 0) {
        return 0.0;
    }
    const double m = static_cast<double>(al.matches);
    const double p = m / static_cast<double>(cand_len);
    const double r = m / static_cast<double>(ref_len);
    const double fmean = p * r / (cfg.meteor_alpha * p + (1.0 - cfg.meteor_alpha) * r);
    const double penalty = cfg.meteor_gamma * std::pow(static_cast<double>(al.chunks) / m, cfg.meteor_beta);
    return fmean * (1.0 - penalty);
}

inline double meteor(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
                     const MetricConfig& cfg = {}) {
    return meteor_from_alignment(meteor_align(candidate, reference), candidate.size(), reference.size(), cfg);
}

/// Tokens are produced by the intent tokenizer on both sides.
inline double meteor(const EvalPair& pair, const MetricConfig& cfg = {}) {
    return meteor(tokenize(pair.candidate, TokenKind::Intent).tokens,
                  tokenize(pair.reference, TokenKind::Intent).tokens, cfg);
}

// ---------------------------------------------------------------------------
// ROUGE-L
// ---------------------------------------------------------------------------

template <typename T>
std::size_t lcs_length(const std::vector<T>& a, const std::vector<T>& b) {
    std::vector<std::size_t> prev(b.size() + 1, 0);
    std::vector<std::size_t> cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

inline double rouge_l(const std::vector<std::string_view>& candidate,
                      const std::vector<std::string_view>& reference, const MetricConfig& cfg = {}) {
    if (candidate.empty() && reference.empty()) {
        return 1.0;
    }
    const auto lcs = lcs_length(candidate, reference);
    if (lcs == 0) {
        return 0.0;
    }
    const double p = static_cast<double>(lcs) / static_cast<double>(candidate.size());
    const double r = static_cast<double>(lcs) / static_cast<double>(reference.size());
    const double b2 = cfg.rouge_beta * cfg.rouge_beta;
    return (1.0 + b2) * p * r / (r + b2 * p);
}

/// Whitespace tokens; newlines of multi-line snippets separate tokens too.
inline double rouge_l(const EvalPair& pair, const MetricConfig& cfg = {}) {
    return rouge_l(text::split_whitespace(pair.candidate), text::split_whitespace(pair.reference), cfg);
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

struct SampleScores {
    std::string sample_id;
    ContextCategory category = ContextCategory::NoContext;
    double em = 0.0;
    double ed = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;
};

/// Arithmetic means scaled by 100.
struct MetricMeans {
    std::size_t count = 0;
    double em = 0.0;
    double ed = 0.0;
    double meteor = 0.0;
    double rouge_l = 0.0;
};

struct MetricReport {
    std::vector<SampleScores> per_sample;
    std::map<ContextCategory, MetricMeans> per_category;
    std::optional<MetricMeans> overall;
    MetricConfig config;

    /// Set when evaluation received no pairs; aggregates are then empty.
    bool empty_input() const noexcept { return per_sample.empty(); }
};

inline SampleScores score_pair(const EvalPair& pair, const MetricConfig& cfg) {
    return {pair.sample_id, pair.category, exact_match(pair, cfg), edit_distance_sim(pair), meteor(pair, cfg),
            rouge_l(pair, cfg)};
}

namespace detail {

inline MetricMeans mean_of(const std::vector<const SampleScores*>& rows) {
    MetricMeans m;
    m.count = rows.size();
    if (rows.empty()) {
        return m;
    }
    for (const auto* s : rows) {
        m.em += s->em;
        m.ed += s->ed;
        m.meteor += s->meteor;
        m.rouge_l += s->rouge_l;
    }
    const double scale = 100.0 / static_cast<double>(rows.size());
    m.em *= scale;
    m.ed *= scale;
    m.meteor *= scale;
    m.rouge_l *= scale;
    return m;
}

} // namespace detail

/// Scores every pair and aggregates per category and overall. Per-pair work is
/// spread over `workers` threads; results are collected by index so the
/// report never depends on scheduling.
inline MetricReport evaluate_corpus(const std::vector<EvalPair>& pairs, const MetricConfig& cfg = {},
                                    unsigned workers = 0) {
    cfg.validate();
    MetricReport report;
    report.config = cfg;
    report.per_sample.resize(pairs.size());

    if (workers == 0) {
        workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, pairs.size() / 64)));
    auto run = [&](std::size_t begin, std::size_t step) {
        for (std::size_t i = begin; i < pairs.size(); i += step) {
            report.per_sample[i] = score_pair(pairs[i], cfg);
        }
    };
    if (workers <= 1) {
        run(0, 1);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back(run, w, workers);
        }
    }

    if (report.per_sample.empty()) {
        return report;
    }
    std::map<ContextCategory, std::vector<const SampleScores*>> groups;
    std::vector<const SampleScores*> all;
    for (const auto& s : report.per_sample) {
        groups[s.category].push_back(&s);
        all.push_back(&s);
    }
    for (const auto& [cat, rows] : groups) {
        report.per_category[cat] = detail::mean_of(rows);
    }
    report.overall = detail::mean_of(all);
    return report;
}

inline nlohmann::ordered_json means_to_json(const MetricMeans& m) {
    return {{"count", m.count}, {"em", m.em}, {"ed", m.ed}, {"meteor", m.meteor}, {"rouge_l", m.rouge_l}};
}

inline nlohmann::ordered_json report_to_json(const MetricReport& r) {
    nlohmann::ordered_json j;
    j["metric_config"] = r.config.to_json();
    j["empty"] = r.empty_input();
    j["overall"] = r.overall ? means_to_json(*r.overall) : nlohmann::ordered_json(nullptr);
    j["per_category"] = nlohmann::ordered_json::object();
    for (const auto& [cat, m] : r.per_category) {
        j["per_category"][std::string(to_string(cat))] = means_to_json(m);
    }
    j["per_sample"] = nlohmann::ordered_json::array();
    for (const auto& s : r.per_sample) {
        j["per_sample"].push_back({{"sample_id", s.sample_id},
                                   {"category", to_string(s.category)},
                                   {"em", s.em},
                                   {"ed", s.ed},
                                   {"meteor", s.meteor},
                                   {"rouge_l", s.rouge_l}});
    }
    return j;
}

inline MetricMeans means_from_json(const nlohmann::json& j) {
    return {j.at("count").get<std::size_t>(), j.at("em").get<double>(), j.at("ed").get<double>(),
            j.at("meteor").get<double>(), j.at("rouge_l").get<double>()};
}

/// Fixed-width table in the column order EM | ED | METEOR | ROUGE-L, two decimals.
class ReportTable {
public:
    void add_row(std::string label, const MetricMeans& m) { rows_.push_back({std::move(label), m}); }
    void add_rule() { rows_.push_back({"", std::nullopt}); }

    std::string render() const {
        std::size_t width = std::string_view("Row").size();
        for (const auto& r : rows_) {
            width = std::max(width, r.label.size());
        }
        std::ostringstream os;
        os << std::fixed << std::setprecision(2);
        auto rule = [&] { os << std::string(width + 52, '-') << '\n'; };
        os << std::left << std::setw(static_cast<int>(width)) << "Row" << " | " << std::right << std::setw(6) << "N"
           << " | " << std::setw(7) << "EM" << " | " << std::setw(7) << "ED" << " | " << std::setw(7) << "METEOR"
           << " | " << std::setw(7) << "ROUGE-L" << '\n';
        rule();
        for (const auto& r : rows_) {
            if (!r.means) {
                rule();
                continue;
            }
            os << std::left << std::setw(static_cast<int>(width)) << r.label << " | " << std::right << std::setw(6)
               << r.means->count << " | " << std::setw(7) << r.means->em << " | " << std::setw(7) << r.means->ed
               << " | " << std::setw(7) << r.means->meteor << " | " << std::setw(7) << r.means->rouge_l << '\n';
        }
        return os.str();
    }

private:
    struct Row {
        std::string label;
        std::optional<MetricMeans> means;
    };
    std::vector<Row> rows_;
};

inline std::string render_report(const MetricReport& r) {
    if (r.empty_input()) {
        return "(no pairs evaluated)\n";
    }
    ReportTable table;
    for (const auto& [cat, m] : r.per_category) {
        table.add_row(std::string(to_string(cat)), m);
    }
    table.add_rule();
    table.add_row("overall", *r.overall);
    return table.render();
}

} // namespace shellctx
