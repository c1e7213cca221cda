#pragma once

// Hand-computed METEOR values (alpha 0.9, gamma 0.5, beta 3) with the
// arithmetic spelled out as exact fractions.

#include <string>
#include <vector>

namespace fixtures {

struct MeteorCase {
    std::string candidate;
    std::string reference;
    double expected;
};

inline const std::vector<MeteorCase>& meteor_cases() {
    static const std::vector<MeteorCase> cases = {
        // m=4 P=R=1 chunks=1: 1 - 0.5/64
        {"mov eax , ebx", "mov eax , ebx", 0.9921875},
        // zero overlap
        {"push eax", "pop ebx", 0.0},
        // [mov eax , 1] vs [mov ebx , 1]: m=3 F=3/4 chunks=2: 3/4 * (1 - 0.5*(2/3)^3) = 23/36
        {"mov eax, 1", "mov ebx, 1", 23.0 / 36.0},
        // P=1 R=1/2: F = 0.5/(0.9+0.05) = 10/19, penalty 1/54: 10/19 * 53/54
        {"a b c", "a b c d e f", 265.0 / 513.0},
        // P=1/2 R=1: F = 0.5/(0.45+0.1) = 10/11, penalty 1/54: 10/11 * 53/54
        {"a b c d e f", "a b c", 265.0 / 297.0},
        // reversed order: three chunks of one, penalty 0.5
        {"c b a", "a b c", 0.5},
        // repeated tokens: best alignment a->2, a->0, b->1 gives 2 chunks: 1 - 4/27
        {"a a b", "a b a", 23.0 / 27.0},
        // P=3/5 R=1: F = 0.6/0.64 = 15/16; chunks [a b][c]: 15/16 * 23/27
        {"x a b y c", "a b c", 15.0 / 16.0 * 23.0 / 27.0},
        // m=1 P=1/2 R=1: F = 10/11, penalty 0.5
        {"the eax", "eax", 5.0 / 11.0},
        // case-sensitive: only eax matches, P=R=1/2, F=1/2, penalty 0.5
        {"MOV eax", "mov eax", 0.25},
        // multi-line: [xor eax , eax int] matches as one chunk, P=R=5/6: 5/6 * (1 - 0.5*(1/5)^3)
        {"xor eax, eax\nint 0x80", "xor eax, eax\nint 0x81", 5.0 / 6.0 * 0.996},
    };
    return cases;
}

} // namespace fixtures
