#include "guardkit/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "httplib.h"

#include "guardkit/errors.hpp"
#include "guardkit/scripted_endpoint.hpp"

namespace guardkit {

namespace {

struct ParsedUrl {
    std::string scheme_host_port;  // e.g. http://127.0.0.1:8089
    std::string path_prefix;       // e.g. /v1
};

ParsedUrl split_base_url(const std::string& base_url) {
    const std::size_t scheme = base_url.find("://");
    if (scheme == std::string::npos) {
        throw ConfigError("endpoint base_url must start with http:// or https://: " + base_url);
    }
    const std::size_t path = base_url.find('/', scheme + 3);
    ParsedUrl out;
    if (path == std::string::npos) {
        out.scheme_host_port = base_url;
    } else {
        out.scheme_host_port = base_url.substr(0, path);
        out.path_prefix = base_url.substr(path);
        while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
            out.path_prefix.pop_back();
        }
    }
    return out;
}

class HttpTransport : public Transport {
public:
    TransportReply send(const EndpointProfile& profile, const std::string& request_body) override {
        const ParsedUrl url = split_base_url(profile.base_url);
        httplib::Client client(url.scheme_host_port);
        const auto timeout_s = std::chrono::duration_cast<std::chrono::seconds>(profile.timeout);
        const auto timeout_us =
            std::chrono::duration_cast<std::chrono::microseconds>(profile.timeout) -
            std::chrono::duration_cast<std::chrono::microseconds>(timeout_s);
        client.set_connection_timeout(static_cast<time_t>(timeout_s.count()),
                                      static_cast<time_t>(timeout_us.count()));
        client.set_read_timeout(static_cast<time_t>(timeout_s.count()),
                                static_cast<time_t>(timeout_us.count()));
        client.set_write_timeout(static_cast<time_t>(timeout_s.count()),
                                 static_cast<time_t>(timeout_us.count()));
        httplib::Headers headers;
        if (!profile.api_key_env.empty()) {
            if (const char* key = std::getenv(profile.api_key_env.c_str())) {
                headers.emplace("Authorization", std::string("Bearer ") + key);
            }
        }
        auto res = client.Post(url.path_prefix + "/chat/completions", headers, request_body,
                               "application/json");
        TransportReply reply;
        if (!res) {
            reply.transport_ok = false;
            const auto err = res.error();
            reply.timed_out = err == httplib::Error::ConnectionTimeout ||
                              err == httplib::Error::Read || err == httplib::Error::Write;
            reply.detail = httplib::to_string(err);
            return reply;
        }
        reply.status = res->status;
        reply.body = res->body;
        return reply;
    }
};

std::string error_message_from_body(const std::string& body, int status) {
    json j = json::parse(body, nullptr, false);
    if (!j.is_discarded() && j.is_object() && j.contains("error")) {
        const auto& e = j["error"];
        if (e.is_object() && e.contains("message")) {
            return e["message"].get<std::string>();
        }
        if (e.is_string()) {
            return e.get<std::string>();
        }
    }
    return "endpoint returned status " + std::to_string(status);
}

bool retryable_status(int status) {
    return status == 429 || (status >= 500 && status < 600);
}

}  // namespace

const char* model_role_name(ModelRole role) {
    switch (role) {
        case ModelRole::PromptGenerator: return "prompt_generator";
        case ModelRole::ResponseGenerator: return "response_generator";
        case ModelRole::Judge: return "judge";
        case ModelRole::GuardUnderTest: return "guard";
    }
    return "unknown";
}

void validate_endpoint(const EndpointProfile& profile) {
    if (profile.base_url.empty()) {
        throw ConfigError("endpoint base_url is empty");
    }
    if (profile.model.empty()) {
        throw ConfigError("endpoint model is empty");
    }
    if (profile.temperature < 0.0) {
        throw ConfigError("temperature must be >= 0");
    }
    if (!(profile.top_p > 0.0 && profile.top_p <= 1.0)) {
        throw ConfigError("top_p must be in (0, 1]");
    }
    if (profile.max_tokens <= 0) {
        throw ConfigError("max_tokens must be positive");
    }
    if (profile.timeout.count() <= 0) {
        throw ConfigError("timeout must be positive");
    }
    if (profile.retry.max_attempts < 1) {
        throw ConfigError("retry.max_attempts must be >= 1");
    }
}

std::shared_ptr<Transport> make_http_transport() {
    return std::make_shared<HttpTransport>();
}

json chat_request_body(const EndpointProfile& profile, const std::vector<ChatMessage>& messages) {
    json msgs = json::array();
    for (const auto& m : messages) {
        msgs.push_back(json{{"role", m.role}, {"content", m.content}});
    }
    return json{{"model", profile.model},
                {"messages", std::move(msgs)},
                {"temperature", profile.temperature},
                {"top_p", profile.top_p},
                {"max_tokens", profile.max_tokens}};
}

long approximate_token_count(const std::string& text) {
    long count = 0;
    bool in_token = false;
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++count;
        }
    }
    return count;
}

Gateway::Gateway() = default;

Gateway::Gateway(std::shared_ptr<Transport> transport) : override_transport_(std::move(transport)) {}

Transport& Gateway::transport_for(const EndpointProfile& profile) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (override_transport_) {
        return *override_transport_;
    }
    if (profile.base_url.rfind("mock:", 0) == 0) {
        const std::string path = profile.base_url.substr(5);
        auto it = mock_transports_.find(path);
        if (it == mock_transports_.end()) {
            it = mock_transports_
                     .emplace(path, std::make_shared<ScriptedEndpoint>(MockScript::load(path)))
                     .first;
        }
        return *it->second;
    }
    if (!http_transport_) {
        http_transport_ = make_http_transport();
    }
    return *http_transport_;
}

ChatExchange Gateway::complete(const EndpointProfile& profile,
                               const std::vector<ChatMessage>& messages) {
    validate_endpoint(profile);
    if (messages.empty()) {
        throw ConfigError("complete() requires at least one message");
    }
    const std::string& first_role = messages.front().role;
    if (first_role != "system" && first_role != "user") {
        throw ConfigError("first chat message must be system or user");
    }

    Transport& transport = transport_for(profile);
    const std::string request_body = dump_canonical(chat_request_body(profile, messages));

    std::string last_failure = "no attempt made";
    bool last_was_timeout = false;
    for (int attempt = 1; attempt <= profile.retry.max_attempts; ++attempt) {
        if (attempt > 1) {
            const auto backoff = profile.retry.backoff_base * (1LL << (attempt - 2));
            std::this_thread::sleep_for(backoff);
        }
        const auto started = std::chrono::steady_clock::now();
        TransportReply reply = transport.send(profile, request_body);
        const auto elapsed = std::chrono::steady_clock::now() - started;

        if (!reply.transport_ok) {
            last_failure = reply.detail.empty() ? "connection failure" : reply.detail;
            last_was_timeout = reply.timed_out;
            continue;
        }
        if (retryable_status(reply.status)) {
            last_failure = "endpoint returned status " + std::to_string(reply.status);
            last_was_timeout = false;
            continue;
        }
        if (reply.status != 200) {
            throw EndpointError(error_message_from_body(reply.body, reply.status));
        }

        json body = json::parse(reply.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
            throw EndpointError("endpoint returned an undecodable completion payload");
        }
        if (body.contains("error")) {
            throw EndpointError(error_message_from_body(reply.body, reply.status));
        }
        if (!body.contains("choices") || !body["choices"].is_array() || body["choices"].empty()) {
            throw EndpointError("endpoint returned no choices");
        }
        const auto& message = body["choices"][0]["message"];
        if (!message.is_object() || !message.contains("content")) {
            throw EndpointError("endpoint choice carries no message content");
        }

        ChatExchange exchange;
        exchange.messages = messages;
        exchange.completion = message["content"].get<std::string>();
        if (body.contains("usage") && body["usage"].is_object()) {
            exchange.usage.prompt_tokens = body["usage"].value("prompt_tokens", 0L);
            exchange.usage.completion_tokens = body["usage"].value("completion_tokens", 0L);
        } else {
            long prompt_tokens = 0;
            for (const auto& m : messages) {
                prompt_tokens += approximate_token_count(m.content);
            }
            exchange.usage.prompt_tokens = prompt_tokens;
            exchange.usage.completion_tokens = approximate_token_count(exchange.completion);
        }
        exchange.latency = reply.simulated_latency
                               ? *reply.simulated_latency
                               : std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed);
        return exchange;
    }

    const std::string msg = "exhausted " + std::to_string(profile.retry.max_attempts) +
                            " attempt(s): " + last_failure;
    if (last_was_timeout) {
        throw TimeoutError(msg);
    }
    throw TransportError(msg);
}

LatencyReport summarize_latencies(const std::vector<double>& durations_ms) {
    if (durations_ms.empty()) {
        throw ValidationError("latency summary needs at least one duration");
    }
    LatencyReport report;
    report.runs = static_cast<int>(durations_ms.size());
    report.durations_ms = durations_ms;
    double sum = 0.0;
    for (double d : durations_ms) {
        sum += d;
    }
    report.mean_ms = sum / static_cast<double>(durations_ms.size());
    std::vector<double> sorted = durations_ms;
    std::sort(sorted.begin(), sorted.end());
    const auto nearest_rank = [&](int percentile) {
        const std::size_t n = sorted.size();
        std::size_t rank = (static_cast<std::size_t>(percentile) * n + 99) / 100;  // ceil(p*n/100)
        if (rank == 0) rank = 1;
        return sorted[rank - 1];
    };
    report.p50_ms = nearest_rank(50);
    report.p95_ms = nearest_rank(95);
    return report;
}

LatencyReport Gateway::run_latency_bench(const EndpointProfile& profile,
                                         const std::vector<ChatMessage>& messages, int runs) {
    if (runs < 1) {
        throw ConfigError("latency bench needs runs >= 1");
    }
    std::vector<double> durations_ms;
    durations_ms.reserve(static_cast<std::size_t>(runs));
    for (int i = 0; i < runs; ++i) {
        const ChatExchange exchange = complete(profile, messages);
        durations_ms.push_back(
            std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(exchange.latency)
                .count());
    }
    return summarize_latencies(durations_ms);
}

json latency_report_to_json(const LatencyReport& r) {
    return json{{"schema", "guardkit/latency@1"},
                {"runs", r.runs},
                {"durations_ms", r.durations_ms},
                {"mean_ms", r.mean_ms},
                {"p50_ms", r.p50_ms},
                {"p95_ms", r.p95_ms}};
}

std::string format_latency_line(const LatencyReport& r) {
    auto fmt = [](double v) {
        // one decimal, half-up
        const long long scaled = std::llround(v * 10.0);
        std::string out = std::to_string(scaled / 10);
        out += '.';
        out += std::to_string(std::llabs(scaled % 10));
        return out;
    };
    return "average latency of " + fmt(r.mean_ms) + "ms over " + std::to_string(r.runs) +
           " runs (p50 " + fmt(r.p50_ms) + "ms, p95 " + fmt(r.p95_ms) + "ms)";
}

}  // namespace guardkit
