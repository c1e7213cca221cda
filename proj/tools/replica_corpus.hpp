#pragma once

// Deterministic synthetic replica of the shellcode corpus layout: 20 source
// programs (17..46 instructions, 528 in total) plus 510 multi-line snippets,
// described 2,167 times across the five context categories
// (963 / 360 / 238 / 303 / 303). Text is template-generated IA-32; a handful
// of hand-written lines reproduce well-known motivating examples.

#include "shellctx/corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace shellctx::replica {

inline constexpr std::array<int, 20> kProgramLines = {17, 32, 27, 22, 16, 16, 32, 23, 24, 19,
                                                      29, 46, 27, 18, 42, 19, 33, 17, 24, 45};
inline constexpr std::size_t kMultiLineSnippets = 510;
inline constexpr std::array<std::size_t, 5> kCategoryTargets = {963, 360, 238, 303, 303};
inline constexpr std::uint64_t kDefaultSeed = 20240601;

struct Instruction {
    std::string intent;
    std::string snippet;
};

namespace detail {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::size_t below(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }

    template <typename C>
    const auto& pick(const C& c) {
        return c[below(c.size())];
    }

    bool chance(unsigned percent) { return below(100) < percent; }

    std::mt19937_64& engine() { return eng_; }

private:
    std::mt19937_64 eng_;
};

inline const std::vector<std::string>& registers32() {
    static const std::vector<std::string> r = {"eax", "ebx", "ecx", "edx", "esi", "edi"};
    return r;
}

inline const std::vector<std::string>& registers8() {
    static const std::vector<std::string> r = {"al", "bl", "cl", "dl", "ah", "bh"};
    return r;
}

inline const std::vector<std::string>& label_pool() {
    static const std::vector<std::string> l = {
        "decode", "decoder", "encoded_shellcode", "loop_start", "next_byte", "call_decoder", "shellcode",
        "switch", "main", "exit_loop", "decrypt", "done", "skip", "find_egg", "next_page", "inc_page",
        "get_address", "xor_loop", "rot_decode", "format", "setup", "spawn", "child", "parent", "connect",
        "read_loop", "write_out", "check_byte", "end_decode", "jmp_call"};
    return l;
}

inline const std::vector<std::string>& string_pool() {
    static const std::vector<std::string> s = {"'//sh'", "'/bin'", "'hs//'", "'nib/'", "'-le'", "'/nc'",
                                               "'ls'",   "'-lvp'", "'4444'", "'bash'", "'/tmp'", "'cat'"};
    return s;
}

inline std::string hex_value(Rng& rng) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::size_t digits = 1 + rng.below(8);
    std::string out = "0x";
    for (std::size_t i = 0; i < digits; ++i) {
        out.push_back(kHex[rng.below(16)]);
    }
    return out;
}

inline std::string decimal_value(Rng& rng) { return std::to_string(1 + rng.below(255)); }

inline std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') {
        s[0] = static_cast<char>(s[0] - 'a' + 'A');
    }
    return s;
}

/// One instruction from a fixed template table. `labels` are labels the
/// program defines, used as jump targets.
inline Instruction single_line(Rng& rng, const std::vector<std::string>& labels) {
    const auto r = rng.pick(registers32());
    auto r2 = rng.pick(registers32());
    while (r2 == r) {
        r2 = rng.pick(registers32());
    }
    const auto b = rng.pick(registers8());
    const auto h = hex_value(rng);
    const auto d = decimal_value(rng);
    const auto l = labels.empty() ? rng.pick(label_pool()) : rng.pick(labels);
    const auto s = rng.pick(string_pool());

    switch (rng.below(30)) {
    case 0: return {"clear the " + r + " register", "xor " + r + ", " + r};
    case 1: return {"move " + h + " into " + r, "mov " + r + ", " + h};
    case 2: return {"push " + r + " onto the stack", "push " + r};
    case 3: return {"pop the top of the stack into " + r, "pop " + r};
    case 4: return {"increment " + r, "inc " + r};
    case 5: return {"decrement " + r, "dec " + r};
    case 6: return {"add " + d + " to " + r, "add " + r + ", " + d};
    case 7: return {"subtract " + d + " from " + r, "sub " + r + ", " + d};
    case 8: return {"xor the byte at " + r + " with " + h, "xor byte [" + r + "], " + h};
    case 9: return {"move " + r + " into " + r2, "mov " + r2 + ", " + r};
    case 10: return {"make the system call", "int 0x80"};
    case 11: return {"jump to " + l, "jmp " + l};
    case 12: return {"jump short to " + l, "jmp short " + l};
    case 13: return {"call " + l, "call " + l};
    case 14: return {"loop to " + l + " while ecx is not zero", "loop " + l};
    case 15: return {"compare " + b + " with " + h, "cmp " + b + ", " + h};
    case 16: return {"jump to " + l + " if equal", "je " + l};
    case 17: return {"jump to " + l + " if the result is not zero", "jnz " + l};
    case 18: return {"push the dword " + h + " on the stack", "push " + h};
    case 19: return {"move " + d + " into " + b, "mov " + b + ", " + d};
    case 20: return {"shift " + r + " left by " + d + " bits", "shl " + r + ", " + d};
    case 21: return {"rotate the byte at " + r + " right by " + d, "ror byte [" + r + "], " + d};
    case 22: return {"load the address of " + r + " plus " + d + " into " + r2, "lea " + r2 + ", [" + r + "+" + d + "]"};
    case 23: return {"exchange " + r + " with " + r2, "xchg " + r + ", " + r2};
    case 24: return {"negate " + r, "neg " + r};
    case 25: return {"push the string " + s + " on the stack", "push " + s};
    case 26: return {"move the byte at " + r + " into " + b, "mov " + b + ", byte [" + r + "]"};
    case 27: return {"store " + b + " at the address in " + r, "mov byte [" + r + "], " + b};
    case 28: return {"add " + h + " to the byte at " + r, "add byte [" + r + "], " + h};
    default: return {"test whether " + r + " is zero", "test " + r + ", " + r};
    }
}

inline Instruction label_definition(const std::string& label) {
    return {"define the " + label + " label", label + ":"};
}

inline Instruction multi_line(Rng& rng) {
    const auto r = rng.pick(registers32());
    auto r2 = rng.pick(registers32());
    while (r2 == r) {
        r2 = rng.pick(registers32());
    }
    const auto b = rng.pick(registers8());
    const auto h = hex_value(rng);
    const auto d = decimal_value(rng);
    const auto l = rng.pick(label_pool());
    const auto s = rng.pick(string_pool());

    switch (rng.below(14)) {
    case 0:
        return {"jump to the label " + l + " if the contents of the " + r + " register is not zero else subtract the value " + h +
                    " from the contents of the " + r2 + " register",
                "test " + r + ", " + r + "\njnz " + l + "\nsub " + r2 + ", " + h};
    case 1:
        return {"zero out the " + r + " and " + r2 + " registers", "xor " + r + ", " + r + "\nxor " + r2 + ", " + r2};
    case 2:
        return {"make the system call number " + d, "mov eax, " + d + "\nint 0x80"};
    case 3:
        return {"copy " + r + " into " + r2 + " through the stack", "push " + r + "\npop " + r2};
    case 4:
        return {"decrement " + r + " and loop to " + l, "dec " + r + "\nloop " + l};
    case 5:
        return {"push the string " + s + " followed by a null terminator", "push " + r + "\npush " + s};
    case 6:
        return {"define the " + l + " label and clear " + r, l + ":\nxor " + r + ", " + r};
    case 7:
        return {"compare " + b + " with " + h + " and jump to " + l + " if equal", "cmp " + b + ", " + h + "\nje " + l};
    case 8:
        return {"xor the byte at " + r + " with " + h + " and move to the next byte",
                "xor byte [" + r + "], " + h + "\ninc " + r};
    case 9:
        return {"move " + d + " into " + b + " and make the system call", "mov " + b + ", " + d + "\nint 0x80"};
    case 10:
        return {"define the " + l + " label, pop the address into " + r + " and jump short to it",
                l + ":\npop " + r + "\njmp short " + r};
    case 11:
        return {"push " + h + " and move the stack pointer into " + r, "push " + h + "\nmov " + r + ", esp"};
    case 12:
        return {"subtract " + d + " from the byte at " + r + " and jump to " + l + " if not zero",
                "sub byte [" + r + "], " + d + "\njnz " + l};
    default:
        return {"clear " + r + ", set the lower byte to " + d + " and push it",
                "xor " + r + ", " + r + "\nmov " + b + ", " + d + "\npush " + r};
    }
}

/// Hand-written opening of program 1; indices 1, 3, 6, 9 carry the 2to1/3to1 examples.
inline std::vector<Instruction> program_one_prefix() {
    return {
        {"Clear the eax register", "xor eax, eax"},
        {"Move 22 into the lower byte", "mov al, 22"},
        {"Move esi in eax", "mov eax, esi"},
        {"Increment it", "inc eax"},
        {"Subtract 8 from the current byte in esi", "sub byte [esi], 8"},
        {"Negate the result", "not esi"},
        {"Move eax in it", "move byte[esi],eax"},
        {"Move eax to edx", "mov edx, eax"},
        {"Right shift the register by byte 16", "shr edx, 16"},
        {"Add the result to eax", "add eax, edx"},
        {"Increment the value in the register", "inc eax"},
    };
}

/// Hand-written opening of program 2, used for the unnecessary-context examples.
inline std::vector<Instruction> program_two_prefix() {
    return {
        {"Define the decode label", "decode:"},
        {"Subtract 8 from the current byte of the shellcode", "sub byte[esi], 8"},
        {"Increment edi", "inc edi"},
        {"Add 3 to al", "add al, 3"},
        {"Jump short to switch", "jmp short switch"},
    };
}

inline std::vector<std::vector<Instruction>> make_programs(Rng& rng) {
    std::vector<std::vector<Instruction>> programs;
    for (std::size_t p = 0; p < kProgramLines.size(); ++p) {
        std::vector<Instruction> lines;
        if (p == 0) {
            lines = program_one_prefix();
        } else if (p == 1) {
            lines = program_two_prefix();
        }
        std::vector<std::string> defined;
        while (lines.size() < static_cast<std::size_t>(kProgramLines[p])) {
            if (rng.chance(12)) {
                auto l = rng.pick(label_pool());
                if (std::find(defined.begin(), defined.end(), l) == defined.end()) {
                    defined.push_back(l);
                    lines.push_back(label_definition(l));
                    continue;
                }
            }
            auto ins = single_line(rng, defined);
            if (rng.chance(40)) {
                ins.intent = capitalize(ins.intent);
            }
            lines.push_back(std::move(ins));
        }
        programs.push_back(std::move(lines));
    }
    return programs;
}

/// `count` distinct values from `pool`, always including `forced`, returned sorted.
inline std::vector<std::size_t> choose(Rng& rng, std::vector<std::size_t> pool, std::size_t count,
                                       const std::set<std::size_t>& forced) {
    std::vector<std::size_t> out(forced.begin(), forced.end());
    pool.erase(std::remove_if(pool.begin(), pool.end(), [&](std::size_t v) { return forced.contains(v); }),
               pool.end());
    std::shuffle(pool.begin(), pool.end(), rng.engine());
    for (std::size_t i = 0; out.size() < count && i < pool.size(); ++i) {
        out.push_back(pool[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::string program_name(std::size_t p) {
    std::string n = std::to_string(p + 1);
    return "sc" + std::string(n.size() < 2 ? "0" : "") + n;
}

} // namespace detail

/// Builds the replica. Ids look like `sc07.ctx2.0012`: program, category view, line.
inline Corpus make_replica_corpus(std::uint64_t seed = kDefaultSeed) {
    using detail::Rng;
    Rng rng(seed);
    const auto programs = detail::make_programs(rng);

    // (program, line) positions eligible for each kind of context.
    std::vector<std::pair<std::size_t, std::size_t>> all_lines;
    for (std::size_t p = 0; p < programs.size(); ++p) {
        for (std::size_t k = 0; k < programs[p].size(); ++k) {
            all_lines.emplace_back(p, k);
        }
    }
    auto flat_index = [&](std::size_t p, std::size_t k) {
        std::size_t idx = 0;
        for (std::size_t q = 0; q < p; ++q) {
            idx += programs[q].size();
        }
        return idx + k;
    };
    std::vector<std::size_t> any_line(all_lines.size());
    std::vector<std::size_t> second_or_later;
    std::vector<std::size_t> third_or_later;
    for (std::size_t i = 0; i < all_lines.size(); ++i) {
        any_line[i] = i;
        if (all_lines[i].second >= 1) {
            second_or_later.push_back(i);
        }
        if (all_lines[i].second >= 2) {
            third_or_later.push_back(i);
        }
    }

    const std::size_t no_ctx_program_lines = kCategoryTargets[0] - kMultiLineSnippets;
    auto no_ctx = detail::choose(rng, any_line, no_ctx_program_lines, {flat_index(0, 10)});
    auto ctx2 = detail::choose(rng, second_or_later, kCategoryTargets[1], {flat_index(0, 1), flat_index(0, 3)});
    auto ctx3 = detail::choose(rng, third_or_later, kCategoryTargets[2], {flat_index(0, 6), flat_index(0, 9)});
    auto unn2 = detail::choose(rng, any_line, kCategoryTargets[3], {flat_index(1, 1)});
    auto unn3 = detail::choose(rng, any_line, kCategoryTargets[4], {flat_index(1, 4)});

    auto unrelated_intent = [&](std::size_t program) {
        for (;;) {
            auto q = rng.below(programs.size());
            if (q != program) {
                return rng.pick(programs[q]).intent;
            }
        }
    };

    CorpusBuilder builder;
    auto emit_view = [&](const std::vector<std::size_t>& picks, ContextCategory cat, std::string_view view) {
        for (auto i : picks) {
            auto [p, k] = all_lines[i];
            const auto& ins = programs[p][k];
            Sample s;
            s.program_id = detail::program_name(p) + "." + std::string(view);
            s.line_no = static_cast<std::int64_t>(k + 1);
            std::string line = std::to_string(k + 1);
            s.id = s.program_id + "." + std::string(4 - std::min<std::size_t>(4, line.size()), '0') + line;
            s.intent = ins.intent;
            s.snippet = ins.snippet;
            s.category = cat;
            switch (cat) {
            case ContextCategory::Ctx2to1:
                s.context_intents = {programs[p][k - 1].intent};
                break;
            case ContextCategory::Ctx3to1:
                s.context_intents = {programs[p][k - 2].intent, programs[p][k - 1].intent};
                break;
            case ContextCategory::Unn2to1:
                s.context_intents = {p == 1 && k == 1 ? programs[1][0].intent : unrelated_intent(p)};
                break;
            case ContextCategory::Unn3to1:
                if (p == 1 && k == 4) {
                    s.context_intents = {programs[1][2].intent, programs[1][3].intent};
                } else {
                    s.context_intents = {unrelated_intent(p), unrelated_intent(p)};
                }
                break;
            case ContextCategory::NoContext:
                break;
            }
            builder.add(std::move(s));
        }
    };

    // Program views are emitted program by program so line numbers increase.
    emit_view(no_ctx, ContextCategory::NoContext, "base");
    emit_view(ctx2, ContextCategory::Ctx2to1, "ctx2");
    emit_view(ctx3, ContextCategory::Ctx3to1, "ctx3");
    emit_view(unn2, ContextCategory::Unn2to1, "unn2");
    emit_view(unn3, ContextCategory::Unn3to1, "unn3");

    for (std::size_t i = 0; i < kMultiLineSnippets; ++i) {
        Instruction ins = i == 0 ? Instruction{"jump to the label recv http request if the contents of the eax register "
                                               "is not zero else subtract the value 0x6 from the contents of the ecx "
                                               "register",
                                               "test eax, eax\njnz recv_http request\nsub ecx, 0x6"}
                                 : detail::multi_line(rng);
        builder.append("shellcode_ia32_ml", std::move(ins.intent), std::move(ins.snippet));
    }
    return std::move(builder).build();
}

} // namespace shellctx::replica
