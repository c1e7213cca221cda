#pragma once

#include "shellctx/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

namespace shellctx {

// ---------------------------------------------------------------------------
// Tokenization
// ---------------------------------------------------------------------------

enum class TokenKind { Intent, Snippet };

/// Byte range of one token inside the text it was produced from.
struct TokenSpan {
    std::size_t offset = 0;
    std::size_t length = 0;

    std::size_t end() const noexcept { return offset + length; }
};

struct TokenStream {
    std::vector<std::string> tokens;
    TokenKind source_kind = TokenKind::Intent;

    std::string joined() const { return text::join(tokens, " "); }
};

namespace detail {

constexpr bool is_quote(char c) noexcept { return c == '\'' || c == '"'; }

constexpr bool is_leading_punct(char c) noexcept {
    return c == '(' || c == '[' || c == '{' || c == '<' || is_quote(c);
}

constexpr bool is_trailing_punct(char c) noexcept {
    switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?':
    case ')': case ']': case '}': case '>': case '\'': case '"':
        return true;
    default:
        return false;
    }
}

/// Operand punctuation split out of snippet tokens. `+ - *` extend the
/// `, [ ] :` set so that displacements inside memory operands are tokens too.
constexpr bool is_asm_punct(char c) noexcept {
    return c == ',' || c == '[' || c == ']' || c == ':' || c == '+' || c == '-' || c == '*';
}

inline void split_chunk(std::string_view s, std::size_t b, std::size_t e, TokenKind kind,
                        std::vector<TokenSpan>& out) {
    while (b < e) {
        char c = s[b];
        if (is_quote(c)) {
            auto close = s.substr(0, e).find(c, b + 1);
            if (close != std::string_view::npos) {
                out.push_back({b, close - b + 1});
                b = close + 1;
                continue;
            }
        }
        if (is_leading_punct(c)) {
            out.push_back({b, 1});
            ++b;
            continue;
        }
        break;
    }
    std::vector<TokenSpan> tail;
    while (e > b && is_trailing_punct(s[e - 1])) {
        tail.push_back({e - 1, 1});
        --e;
    }
    if (kind == TokenKind::Intent) {
        if (e > b) {
            out.push_back({b, e - b});
        }
    } else {
        std::size_t start = b;
        for (std::size_t i = b; i < e; ++i) {
            if (is_asm_punct(s[i])) {
                if (i > start) {
                    out.push_back({start, i - start});
                }
                out.push_back({i, 1});
                start = i + 1;
            }
        }
        if (e > start) {
            out.push_back({start, e - start});
        }
    }
    out.insert(out.end(), tail.rbegin(), tail.rend());
}

} // namespace detail

/// Token boundaries of `text`. Both kinds split on whitespace and peel leading
/// and trailing punctuation into their own tokens; a quoted run without
/// whitespace stays one token. Snippets additionally split on operand
/// punctuation. Nothing is case-folded.
inline std::vector<TokenSpan> token_spans(std::string_view text, TokenKind kind) {
    std::vector<TokenSpan> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && text::is_space(text[i])) {
            ++i;
        }
        std::size_t start = i;
        while (i < text.size() && !text::is_space(text[i])) {
            ++i;
        }
        if (i > start) {
            detail::split_chunk(text, start, i, kind, out);
        }
    }
    return out;
}

inline TokenStream tokenize(std::string_view text, TokenKind kind) {
    TokenStream ts;
    ts.source_kind = kind;
    for (const auto& sp : token_spans(text, kind)) {
        ts.tokens.emplace_back(text.substr(sp.offset, sp.length));
    }
    return ts;
}

// ---------------------------------------------------------------------------
// Stopwords
// ---------------------------------------------------------------------------

/// Ordered, duplicate-free set of lowercase words; lookups ignore case.
class StopwordList {
public:
    StopwordList() = default;
    StopwordList(std::initializer_list<std::string_view> words) {
        for (auto w : words) {
            add(w);
        }
    }

    /// One word per line; '#' starts a comment.
    static StopwordList parse(std::string_view content) {
        StopwordList list;
        for (auto line : text::split_lines(content)) {
            if (auto hash = line.find('#'); hash != std::string_view::npos) {
                line = line.substr(0, hash);
            }
            list.add(text::trim(line));
        }
        return list;
    }

    static StopwordList from_file(const std::string& path) { return parse(text::read_file(path)); }

    void add(std::string_view word) {
        if (word.empty()) {
            return;
        }
        auto lower = text::to_lower(word);
        if (lookup_.insert(lower).second) {
            words_.push_back(std::move(lower));
        }
    }

    bool contains(std::string_view word) const { return lookup_.contains(text::to_lower(word)); }
    const std::vector<std::string>& words() const noexcept { return words_; }
    std::size_t size() const noexcept { return words_.size(); }
    bool empty() const noexcept { return words_.empty(); }

private:
    std::vector<std::string> words_;
    std::unordered_set<std::string> lookup_;
};

/// Drops whole whitespace-delimited words found in `stopwords` and collapses
/// the remaining spacing to single spaces.
inline std::string filter_stopwords(std::string_view intent, const StopwordList& stopwords) {
    std::vector<std::string_view> kept;
    for (auto w : text::split_whitespace(intent)) {
        if (!stopwords.contains(w)) {
            kept.push_back(w);
        }
    }
    return text::join(kept, " ");
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

inline constexpr std::string_view kPlaceholderPrefix = "var";

/// True for `var` followed by one or more digits.
inline bool is_placeholder(std::string_view token) noexcept {
    if (token.size() <= kPlaceholderPrefix.size() || !token.starts_with(kPlaceholderPrefix)) {
        return false;
    }
    return std::all_of(token.begin() + kPlaceholderPrefix.size(), token.end(), text::is_digit);
}

/// True for anything a model may emit as a placeholder, including a bare `var`.
inline bool looks_like_placeholder(std::string_view token) noexcept {
    return token == kPlaceholderPrefix || is_placeholder(token);
}

inline std::string placeholder_name(std::size_t index) {
    return std::string(kPlaceholderPrefix) + std::to_string(index);
}

/// Ordered placeholder -> original mapping. Entry i is always `var<i>`.
class StandardizationDict {
public:
    struct Entry {
        std::string placeholder;
        std::string original;

        bool operator==(const Entry&) const = default;
    };

    /// Returns the placeholder for `original`, allocating the next index if new.
    const std::string& add(std::string_view original) {
        if (original.empty()) {
            throw std::invalid_argument("standardization original must be non-empty");
        }
        for (const auto& e : entries_) {
            if (e.original == original) {
                return e.placeholder;
            }
        }
        entries_.push_back({placeholder_name(entries_.size()), std::string(original)});
        return entries_.back().placeholder;
    }

    const std::string* original_of(std::string_view placeholder) const noexcept {
        for (const auto& e : entries_) {
            if (e.placeholder == placeholder) {
                return &e.original;
            }
        }
        return nullptr;
    }

    const std::string* placeholder_of(std::string_view original) const noexcept {
        for (const auto& e : entries_) {
            if (e.original == original) {
                return &e.placeholder;
            }
        }
        return nullptr;
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& e : entries_) {
            j[e.placeholder] = e.original;
        }
        return j;
    }

    /// Accepts {"var0": ..., "var1": ...}; indices must be consecutive from 0.
    static StandardizationDict from_json(const nlohmann::json& j) {
        if (!j.is_object()) {
            throw std::invalid_argument("standardization dictionary must be a JSON object");
        }
        StandardizationDict d;
        for (std::size_t i = 0; i < j.size(); ++i) {
            auto key = placeholder_name(i);
            auto it = j.find(key);
            if (it == j.end() || !it->is_string()) {
                throw std::invalid_argument("standardization dictionary is missing string entry '" +
                                            key + "'");
            }
            d.entries_.push_back({key, it->get<std::string>()});
        }
        return d;
    }

    bool operator==(const StandardizationDict&) const = default;

private:
    std::vector<Entry> entries_;
};

struct StandardizedPair {
    std::string intent;
    std::string snippet;
    StandardizationDict dict;
};

struct DestandardizedSnippet {
    std::string snippet;
    /// Placeholder-shaped tokens with no dictionary entry, in order of appearance.
    std::vector<std::string> unknown_placeholders;

    bool warning() const noexcept { return !unknown_placeholders.empty(); }
};

namespace detail {

inline bool is_register(std::string_view token) {
    static const std::set<std::string, std::less<>> kRegisters = {
        "eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp", "eip",
        "ax",  "bx",  "cx",  "dx",  "si",  "di",  "bp",  "sp",
        "al",  "ah",  "bl",  "bh",  "cl",  "ch",  "dl",  "dh",
        "cs",  "ds",  "es",  "fs",  "gs",  "ss",
    };
    return kRegisters.contains(text::to_lower(token));
}

inline bool is_hex_literal(std::string_view t) noexcept {
    return t.size() > 2 && t[0] == '0' && (t[1] == 'x' || t[1] == 'X') &&
           std::all_of(t.begin() + 2, t.end(), text::is_hex_digit);
}

inline bool is_decimal_literal(std::string_view t) noexcept {
    return !t.empty() && std::all_of(t.begin(), t.end(), text::is_digit);
}

inline bool is_string_literal(std::string_view t) noexcept {
    return t.size() >= 2 && is_quote(t.front()) && t.back() == t.front();
}

inline bool is_identifier(std::string_view t) noexcept {
    auto head = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c == '.';
    };
    return !t.empty() && head(t.front()) &&
           std::all_of(t.begin(), t.end(), [&](char c) { return head(c) || text::is_digit(c); });
}

/// Identifiers defined as labels in `snippet`: first token of a line followed by ':'.
inline std::set<std::string, std::less<>> label_definitions(std::string_view snippet,
                                                            const std::vector<TokenSpan>& spans) {
    std::set<std::string, std::less<>> labels;
    for (std::size_t i = 0; i + 1 < spans.size(); ++i) {
        auto tok = snippet.substr(spans[i].offset, spans[i].length);
        bool line_start =
            i == 0 || snippet.substr(spans[i - 1].end(), spans[i].offset - spans[i - 1].end())
                              .find('\n') != std::string_view::npos;
        bool colon_follows = snippet.substr(spans[i + 1].offset, spans[i + 1].length) == ":" &&
                             spans[i + 1].offset == spans[i].end();
        if (line_start && colon_follows && is_identifier(tok) && !is_register(tok)) {
            labels.emplace(tok);
        }
    }
    return labels;
}

/// Rewrites every span of `source` for which `replace` returns a value.
template <typename Fn>
std::string rewrite_spans(std::string_view source, const std::vector<TokenSpan>& spans, Fn&& replace) {
    std::string out;
    out.reserve(source.size());
    std::size_t pos = 0;
    for (const auto& sp : spans) {
        std::optional<std::string_view> r = replace(source.substr(sp.offset, sp.length));
        if (!r) {
            continue;
        }
        out.append(source.substr(pos, sp.offset - pos));
        out.append(*r);
        pos = sp.end();
    }
    out.append(source.substr(pos));
    return out;
}

} // namespace detail

/// True when `token` (taken from an intent) belongs to a standardizable class:
/// hex literal, decimal literal, quoted string, or a label defined in the snippet.
inline bool is_standardizable(std::string_view token,
                              const std::set<std::string, std::less<>>& snippet_labels) {
    if (is_placeholder(token)) {
        return false;
    }
    return detail::is_hex_literal(token) || detail::is_decimal_literal(token) ||
           detail::is_string_literal(token) || snippet_labels.contains(token);
}

/// Replaces `dict` originals by their placeholders on token boundaries of `text`.
inline std::string apply_placeholders(std::string_view text, const StandardizationDict& dict,
                                      TokenKind kind) {
    return detail::rewrite_spans(text, token_spans(text, kind),
                                 [&](std::string_view tok) -> std::optional<std::string_view> {
                                     if (auto p = dict.placeholder_of(tok)) {
                                         return *p;
                                     }
                                     return std::nullopt;
                                 });
}

/// Replaces each known `var#` in `snippet` by its original. Unknown
/// placeholder-shaped tokens (including a bare `var`) are left verbatim and reported.
inline DestandardizedSnippet destandardize(std::string_view snippet, const StandardizationDict& dict) {
    DestandardizedSnippet result;
    result.snippet = detail::rewrite_spans(
        snippet, token_spans(snippet, TokenKind::Snippet),
        [&](std::string_view tok) -> std::optional<std::string_view> {
            if (!looks_like_placeholder(tok)) {
                return std::nullopt;
            }
            if (auto orig = dict.original_of(tok)) {
                return *orig;
            }
            result.unknown_placeholders.emplace_back(tok);
            return std::nullopt;
        });
    return result;
}

/// Replaces standardizable intent tokens by `var#` in first-occurrence order,
/// consistently in intent and snippet. Pairs that already carry placeholder
/// tokens, or whose snippet would not restore character-exactly, come back
/// unchanged with an empty dictionary.
inline StandardizedPair standardize(std::string_view intent, std::string_view snippet) {
    StandardizedPair unchanged{std::string(intent), std::string(snippet), {}};

    auto intent_spans = token_spans(intent, TokenKind::Intent);
    auto snippet_spans = token_spans(snippet, TokenKind::Snippet);
    auto has_placeholder = [](std::string_view src, const std::vector<TokenSpan>& spans) {
        return std::any_of(spans.begin(), spans.end(), [&](const TokenSpan& sp) {
            return is_placeholder(src.substr(sp.offset, sp.length));
        });
    };
    if (has_placeholder(intent, intent_spans) || has_placeholder(snippet, snippet_spans)) {
        return unchanged;
    }

    auto labels = detail::label_definitions(snippet, snippet_spans);
    StandardizationDict dict;
    for (const auto& sp : intent_spans) {
        auto tok = intent.substr(sp.offset, sp.length);
        if (is_standardizable(tok, labels)) {
            dict.add(tok);
        }
    }
    if (dict.empty()) {
        return unchanged;
    }

    auto lookup = [&](std::string_view tok) -> std::optional<std::string_view> {
        if (auto p = dict.placeholder_of(tok)) {
            return *p;
        }
        return std::nullopt;
    };
    StandardizedPair out;
    out.intent = detail::rewrite_spans(intent, intent_spans, lookup);
    out.snippet = detail::rewrite_spans(snippet, snippet_spans, lookup);
    out.dict = std::move(dict);

    // A placeholder glued to a neighbouring character would change token
    // boundaries and break restoration.
    auto back = destandardize(out.snippet, out.dict);
    if (back.snippet != snippet || back.warning()) {
        return unchanged;
    }
    return out;
}

} // namespace shellctx
