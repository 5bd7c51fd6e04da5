#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "decs/env.hpp"

namespace decs {

// A contiguous span of the thinking segment; start/end are 1-based inclusive.
// Every chunk except possibly the first begins with a high-entropy separator.
struct Chunk {
    int index = 0;  // 1-based
    int start = 0;
    int end = 0;
    std::vector<TokenId> tokens;
};

enum class Judgment { yes, no };

struct JudgeUnavailable : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Split the thinking segment at high-entropy separators; the separator starts
// its chunk. Concatenating chunks reproduces the input exactly.
std::vector<Chunk> segment(std::span<const TokenId> thinking, const Vocab& vocab);

class Judge {
public:
    virtual ~Judge() = default;
    // Throws JudgeUnavailable on transport failure or malformed responses.
    virtual Judgment judge(const Prompt& prompt, const Chunk& chunk) = 0;
};

// Exact oracle: yes iff the chunk contains the target answer token.
class OracleJudge : public Judge {
public:
    explicit OracleJudge(const Vocab& vocab) : vocab_(vocab) {}
    Judgment judge(const Prompt& prompt, const Chunk& chunk) override;

private:
    Vocab vocab_;
};

// Line-delimited JSON client for an external judge backend.
// Request:  {"problem": string, "segment": string, "answer": string}
// Response: {"judgment": "yes"|"no"}
class RemoteJudge : public Judge {
public:
    RemoteJudge(std::string endpoint, int timeout_ms);
    Judgment judge(const Prompt& prompt, const Chunk& chunk) override;

private:
    std::string host_;
    int port_ = 0;
    int timeout_ms_ = 0;
};

// First chunk judged yes; K* is the end index of that chunk. Null when no yes.
std::optional<int> extract_nrp(const std::vector<Judgment>& judgments,
                               const std::vector<Chunk>& chunks);

// Full pipeline over one rollout's thinking segment.
std::optional<int> chunk_kstar(const Rollout& rollout, const Prompt& prompt, const Vocab& vocab,
                               Judge& judge);

}  // namespace decs
