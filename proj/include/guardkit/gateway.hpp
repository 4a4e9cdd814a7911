#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "guardkit/jsonl.hpp"

namespace guardkit {

enum class ModelRole { PromptGenerator, ResponseGenerator, Judge, GuardUnderTest };

const char* model_role_name(ModelRole role);

struct RetryPolicy {
    int max_attempts = 3;                        // >= 1
    std::chrono::milliseconds backoff_base{250};  // doubled per retry
};

struct EndpointProfile {
    std::string base_url;   // http(s)://host[:port][/prefix], or mock:<script path>
    std::string model;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    std::chrono::milliseconds timeout{30000};
    RetryPolicy retry;
    std::string api_key_env;  // env var carrying the bearer token; empty = none
};

void validate_endpoint(const EndpointProfile& profile);

struct ChatMessage {
    std::string role;  // system | user | assistant
    std::string content;
};

struct TokenUsage {
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

struct ChatExchange {
    std::vector<ChatMessage> messages;
    std::string completion;
    TokenUsage usage;
    std::chrono::nanoseconds latency{0};
};

// Raw transport result, before chat-protocol interpretation.
struct TransportReply {
    bool transport_ok = true;  // false: connection-level failure
    bool timed_out = false;
    int status = 0;
    std::string body;
    std::string detail;  // transport failure description
    std::optional<std::chrono::nanoseconds> simulated_latency;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportReply send(const EndpointProfile& profile, const std::string& request_body) = 0;
};

// POSTs to {base_url}/chat/completions. Measures wall-clock latency.
std::shared_ptr<Transport> make_http_transport();

struct LatencyReport {
    int runs = 0;
    std::vector<double> durations_ms;  // run order
    double mean_ms = 0.0;
    double p50_ms = 0.0;  // nearest-rank
    double p95_ms = 0.0;  // nearest-rank
};

// Nearest-rank percentiles: the ceil(p/100 * n)-th smallest value.
LatencyReport summarize_latencies(const std::vector<double>& durations_ms);

json latency_report_to_json(const LatencyReport& r);
std::string format_latency_line(const LatencyReport& r);

// Chat-completions client. Dispatches on base_url: mock:<path> endpoints are
// served in process from a script file, everything else over HTTP.
class Gateway {
public:
    Gateway();
    explicit Gateway(std::shared_ptr<Transport> transport);

    // First completion with usage and latency. Transient failures
    // (connection errors, timeouts, 429, 5xx) are retried with exponential
    // backoff, at most retry.max_attempts requests in total. A well-formed
    // non-retryable response raises EndpointError without another attempt.
    ChatExchange complete(const EndpointProfile& profile, const std::vector<ChatMessage>& messages);

    // Strictly sequential identical completions; every raw duration kept.
    // Any error discards partial results and propagates.
    LatencyReport run_latency_bench(const EndpointProfile& profile,
                                    const std::vector<ChatMessage>& messages, int runs);

private:
    Transport& transport_for(const EndpointProfile& profile);

    std::shared_ptr<Transport> override_transport_;
    std::shared_ptr<Transport> http_transport_;
    std::map<std::string, std::shared_ptr<Transport>> mock_transports_;
    std::mutex mutex_;
};

json chat_request_body(const EndpointProfile& profile, const std::vector<ChatMessage>& messages);

// Whitespace-separated token estimate used when an endpoint omits usage.
long approximate_token_count(const std::string& text);

}  // namespace guardkit
