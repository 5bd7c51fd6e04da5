#include "decs/nrp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <sstream>

#include <json.hpp>

namespace decs {

std::vector<Chunk> segment(std::span<const TokenId> thinking, const Vocab& vocab) {
    std::vector<Chunk> chunks;
    Chunk cur;
    for (size_t i = 0; i < thinking.size(); ++i) {
        const TokenId tok = thinking[i];
        if (vocab.is_high_entropy(tok) && !cur.tokens.empty()) {
            cur.end = static_cast<int>(i);
            chunks.push_back(std::move(cur));
            cur = Chunk{};
        }
        if (cur.tokens.empty()) cur.start = static_cast<int>(i) + 1;
        cur.tokens.push_back(tok);
    }
    if (!cur.tokens.empty()) {
        cur.end = static_cast<int>(thinking.size());
        chunks.push_back(std::move(cur));
    }
    for (size_t i = 0; i < chunks.size(); ++i) chunks[i].index = static_cast<int>(i) + 1;
    return chunks;
}

Judgment OracleJudge::judge(const Prompt& prompt, const Chunk& chunk) {
    for (TokenId t : chunk.tokens)
        if (t == prompt.target_answer) return Judgment::yes;
    return Judgment::no;
}

std::optional<int> extract_nrp(const std::vector<Judgment>& judgments,
                               const std::vector<Chunk>& chunks) {
    if (judgments.size() != chunks.size())
        throw std::invalid_argument("one judgment per chunk required");
    for (size_t c = 0; c < judgments.size(); ++c)
        if (judgments[c] == Judgment::yes) return chunks[c].end;
    return std::nullopt;
}

std::optional<int> chunk_kstar(const Rollout& rollout, const Prompt& prompt, const Vocab& vocab,
                               Judge& judge) {
    auto thinking = rollout.thinking_tokens();
    auto chunks = segment(thinking, vocab);
    std::vector<Judgment> judgments;
    judgments.reserve(chunks.size());
    for (const auto& c : chunks) judgments.push_back(judge.judge(prompt, c));
    return extract_nrp(judgments, chunks);
}

RemoteJudge::RemoteJudge(std::string endpoint, int timeout_ms) : timeout_ms_(timeout_ms) {
    const auto colon = endpoint.rfind(':');
    if (colon == std::string::npos)
        throw std::invalid_argument("judge endpoint must be host:port");
    host_ = endpoint.substr(0, colon);
    port_ = std::stoi(endpoint.substr(colon + 1));
}

namespace {

std::string tokens_to_string(const std::vector<TokenId>& tokens) {
    std::ostringstream os;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (i) os << ' ';
        os << tokens[i];
    }
    return os.str();
}

struct Fd {
    int fd = -1;
    ~Fd() {
        if (fd >= 0) ::close(fd);
    }
};

}  // namespace

Judgment RemoteJudge::judge(const Prompt& prompt, const Chunk& chunk) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(port_);
    if (::getaddrinfo(host_.c_str(), port.c_str(), &hints, &res) != 0 || !res)
        throw JudgeUnavailable("judge endpoint resolution failed: " + host_);

    Fd sock;
    sock.fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    int rc = sock.fd >= 0 ? ::connect(sock.fd, res->ai_addr, res->ai_addrlen) : -1;
    ::freeaddrinfo(res);
    if (rc != 0) throw JudgeUnavailable("judge connection failed");

    timeval tv{timeout_ms_ / 1000, (timeout_ms_ % 1000) * 1000};
    ::setsockopt(sock.fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(sock.fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));

    nlohmann::json req = {{"problem", std::to_string(prompt.prompt_class)},
                          {"segment", tokens_to_string(chunk.tokens)},
                          {"answer", std::to_string(prompt.target_answer)}};
    std::string line = req.dump() + "\n";
    size_t sent = 0;
    while (sent < line.size()) {
        const ssize_t k = ::send(sock.fd, line.data() + sent, line.size() - sent, 0);
        if (k <= 0) throw JudgeUnavailable("judge request send failed");
        sent += static_cast<size_t>(k);
    }

    std::string reply;
    char buf[256];
    while (reply.find('\n') == std::string::npos) {
        const ssize_t k = ::recv(sock.fd, buf, sizeof(buf), 0);
        if (k <= 0) throw JudgeUnavailable("judge response timeout or disconnect");
        reply.append(buf, static_cast<size_t>(k));
    }
    reply = reply.substr(0, reply.find('\n'));

    try {
        auto j = nlohmann::json::parse(reply);
        const std::string verdict = j.at("judgment").get<std::string>();
        if (verdict == "yes") return Judgment::yes;
        if (verdict == "no") return Judgment::no;
    } catch (const nlohmann::json::exception&) {
        // fall through to the unavailable signal
    }
    throw JudgeUnavailable("malformed judge response: " + reply);
}

}  // namespace decs
