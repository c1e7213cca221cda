#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace shellctx {

/// How much preceding context a sample's intent carries, and whether that
/// context is related to the current instruction.
enum class ContextCategory {
    NoContext,
    Ctx2to1,
    Ctx3to1,
    Unn2to1,
    Unn3to1,
};

inline constexpr std::array<ContextCategory, 5> kAllCategories = {
    ContextCategory::NoContext, ContextCategory::Ctx2to1, ContextCategory::Ctx3to1,
    ContextCategory::Unn2to1,   ContextCategory::Unn3to1,
};

inline constexpr std::size_t kCategoryCount = kAllCategories.size();

constexpr std::size_t category_index(ContextCategory c) noexcept {
    return static_cast<std::size_t>(c);
}

/// Number of preceding intents a sample of this category must carry.
constexpr std::size_t context_arity(ContextCategory c) noexcept {
    switch (c) {
    case ContextCategory::NoContext:
        return 0;
    case ContextCategory::Ctx2to1:
    case ContextCategory::Unn2to1:
        return 1;
    case ContextCategory::Ctx3to1:
    case ContextCategory::Unn3to1:
        return 2;
    }
    return 0;
}

/// Wire name used in corpus and split files.
constexpr std::string_view to_string(ContextCategory c) noexcept {
    switch (c) {
    case ContextCategory::NoContext:
        return "no_context";
    case ContextCategory::Ctx2to1:
        return "ctx_2to1";
    case ContextCategory::Ctx3to1:
        return "ctx_3to1";
    case ContextCategory::Unn2to1:
        return "unn_2to1";
    case ContextCategory::Unn3to1:
        return "unn_3to1";
    }
    return "?";
}

inline std::optional<ContextCategory> parse_category(std::string_view name) noexcept {
    for (auto c : kAllCategories) {
        if (to_string(c) == name) {
            return c;
        }
    }
    return std::nullopt;
}

/// Counts indexed by category_index().
using CategoryCounts = std::array<std::size_t, kCategoryCount>;

} // namespace shellctx
