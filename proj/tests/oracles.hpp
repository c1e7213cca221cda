#pragma once

// Slow, obviously-correct reference implementations used to check the metrics.

#include <algorithm>
#include <cstddef>
#include <string>
#include <vector>

namespace oracle {

/// Full (n+1)x(m+1) Levenshtein table.
template <typename Seq>
std::size_t levenshtein(const Seq& a, const Seq& b) {
    std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
    for (std::size_t i = 0; i <= a.size(); ++i) {
        d[i][0] = i;
    }
    for (std::size_t j = 0; j <= b.size(); ++j) {
        d[0][j] = j;
    }
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
        }
    }
    return d[a.size()][b.size()];
}

template <typename T>
bool is_subsequence(const std::vector<T>& needle, const std::vector<T>& hay) {
    std::size_t k = 0;
    for (std::size_t i = 0; i < hay.size() && k < needle.size(); ++i) {
        if (hay[i] == needle[k]) {
            ++k;
        }
    }
    return k == needle.size();
}

/// Longest subsequence of `a` (all 2^|a| of them) that is also a subsequence of `b`.
template <typename T>
std::size_t lcs(const std::vector<T>& a, const std::vector<T>& b) {
    std::size_t best = 0;
    for (std::size_t mask = 0; mask < (std::size_t{1} << a.size()); ++mask) {
        std::vector<T> sub;
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (mask & (std::size_t{1} << i)) {
                sub.push_back(a[i]);
            }
        }
        if (sub.size() > best && is_subsequence(sub, b)) {
            best = sub.size();
        }
    }
    return best;
}

struct Alignment {
    std::size_t matches = 0;
    std::size_t chunks = 0;
};

namespace detail {

inline void enumerate(const std::vector<std::string>& cand, const std::vector<std::string>& ref, std::size_t i,
                      std::vector<long>& target, std::vector<bool>& used, Alignment& best) {
    if (i == cand.size()) {
        std::size_t m = 0;
        std::size_t chunks = 0;
        long prev_c = -2;
        long prev_r = -2;
        for (std::size_t c = 0; c < cand.size(); ++c) {
            if (target[c] < 0) {
                continue;
            }
            ++m;
            if (!(static_cast<long>(c) == prev_c + 1 && target[c] == prev_r + 1)) {
                ++chunks;
            }
            prev_c = static_cast<long>(c);
            prev_r = target[c];
        }
        if (m > best.matches || (m == best.matches && m > 0 && chunks < best.chunks)) {
            best = {m, chunks};
        }
        return;
    }
    target[i] = -1;
    enumerate(cand, ref, i + 1, target, used, best);
    for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!used[j] && ref[j] == cand[i]) {
            used[j] = true;
            target[i] = static_cast<long>(j);
            enumerate(cand, ref, i + 1, target, used, best);
            used[j] = false;
        }
    }
    target[i] = -1;
}

} // namespace detail

/// Every one-to-one exact alignment; keeps max matches, then min chunks.
inline Alignment meteor_alignment(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    Alignment best;
    std::vector<long> target(cand.size(), -1);
    std::vector<bool> used(ref.size(), false);
    detail::enumerate(cand, ref, 0, target, used, best);
    return best;
}

/// The METEOR formula written out directly (alpha 0.9, gamma 0.5, beta 3).
inline double meteor(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
    auto al = meteor_alignment(cand, ref);
    if (al.matches == 0) {
        return 0.0;
    }
    double m = static_cast<double>(al.matches);
    double p = m / static_cast<double>(cand.size());
    double r = m / static_cast<double>(ref.size());
    double fmean = 10.0 * p * r / (r + 9.0 * p);
    double frag = static_cast<double>(al.chunks) / m;
    return fmean * (1.0 - 0.5 * frag * frag * frag);
}

inline double rouge_l_f1(std::size_t lcs_len, std::size_t cand_len, std::size_t ref_len) {
    if (lcs_len == 0) {
        return 0.0;
    }
    double p = static_cast<double>(lcs_len) / static_cast<double>(cand_len);
    double r = static_cast<double>(lcs_len) / static_cast<double>(ref_len);
    return 2.0 * p * r / (p + r);
}

} // namespace oracle
