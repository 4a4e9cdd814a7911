#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "guardkit/jsonl.hpp"

namespace guardkit {

// One scripted behavior of the test-double endpoint. Rules are consumed in
// file order; a rule with a `match` string only fires when the request's
// message contents contain it. repeat = -1 keeps a rule alive forever.
struct MockRule {
    std::string match;
    std::string completion;
    bool echo = false;    // completion = last user message content
    std::string fault;    // "", http_500, http_400, malformed_body, empty_choices, timeout, connect
    int repeat = 1;
    int delay_ms = 0;     // server-side sleep before answering
    std::optional<long> latency_ms;  // simulated latency reported to the client
    std::optional<long> prompt_tokens;
    std::optional<long> completion_tokens;
};

struct MockReply {
    bool transport_ok = true;
    bool timed_out = false;
    int status = 200;
    std::string body;
    int delay_ms = 0;
    std::optional<long> latency_ms;
};

// Deterministic scripted chat-completions double with fault injection and a
// request log. Shared by the in-process transport and the HTTP server.
class MockScript {
public:
    MockScript() = default;
    // Moves are only used before the script is shared with workers.
    MockScript(MockScript&& other) noexcept
        : rules_(std::move(other.rules_)), log_(std::move(other.log_)), served_(other.served_) {}
    MockScript& operator=(MockScript&& other) noexcept {
        rules_ = std::move(other.rules_);
        log_ = std::move(other.log_);
        served_ = other.served_;
        return *this;
    }

    static MockScript from_json(const json& doc);
    static MockScript load(const std::filesystem::path& path);

    MockReply next(const std::string& request_body);

    std::size_t request_count() const;
    json request_at(std::size_t i) const;

private:
    std::vector<MockRule> rules_;
    mutable std::mutex mutex_;
    std::vector<json> log_;
    long served_ = 0;
};

}  // namespace guardkit
