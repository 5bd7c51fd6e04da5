#pragma once

#include <stdexcept>
#include <vector>

namespace decs {

using TokenId = int;

// Token classes: answer tokens, high-entropy separators, filler tokens, plus
// the two control tokens. The classes are disjoint and cover [0, size).
struct Vocab {
    std::vector<TokenId> answer_tokens;
    std::vector<TokenId> high_entropy_tokens;
    std::vector<TokenId> filler_tokens;
    TokenId think_end = -1;
    TokenId eos = -1;

    int size() const {
        return static_cast<int>(answer_tokens.size() + high_entropy_tokens.size() +
                                filler_tokens.size()) +
               2;
    }

    bool is_answer(TokenId t) const { return contains(answer_tokens, t); }
    bool is_high_entropy(TokenId t) const { return contains(high_entropy_tokens, t); }
    bool is_filler(TokenId t) const { return contains(filler_tokens, t); }

    // Layout: answers, then high-entropy, then filler, then think_end, eos.
    static Vocab make(int n_answer, int n_high, int n_filler) {
        if (n_answer < 2 || n_high < 1 || n_filler < 0)
            throw std::invalid_argument("vocab needs >=2 answer tokens and >=1 high-entropy token");
        Vocab v;
        TokenId id = 0;
        for (int i = 0; i < n_answer; ++i) v.answer_tokens.push_back(id++);
        for (int i = 0; i < n_high; ++i) v.high_entropy_tokens.push_back(id++);
        for (int i = 0; i < n_filler; ++i) v.filler_tokens.push_back(id++);
        v.think_end = id++;
        v.eos = id++;
        return v;
    }

private:
    static bool contains(const std::vector<TokenId>& xs, TokenId t) {
        for (TokenId x : xs)
            if (x == t) return true;
        return false;
    }
};

}  // namespace decs
