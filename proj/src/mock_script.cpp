#include "guardkit/mock_script.hpp"

#include "guardkit/errors.hpp"
#include "guardkit/gateway.hpp"
#include "guardkit/scripted_endpoint.hpp"

namespace guardkit {

TransportReply ScriptedEndpoint::send(const EndpointProfile&, const std::string& request_body) {
    const MockReply mock = script_.next(request_body);
    TransportReply reply;
    reply.transport_ok = mock.transport_ok;
    reply.timed_out = mock.timed_out;
    reply.status = mock.status;
    reply.body = mock.body;
    if (!mock.transport_ok) {
        reply.detail = mock.timed_out ? "scripted timeout" : "scripted connection failure";
    }
    if (mock.latency_ms) {
        reply.simulated_latency = std::chrono::milliseconds(*mock.latency_ms);
    }
    return reply;
}

MockScript MockScript::from_json(const json& doc) {
    MockScript script;
    if (!doc.is_object() || !doc.contains("responses") || !doc["responses"].is_array()) {
        throw ConfigError("mock script needs a top-level `responses` array");
    }
    for (const auto& r : doc["responses"]) {
        MockRule rule;
        rule.match = r.value("match", "");
        rule.completion = r.value("completion", "");
        rule.echo = r.value("echo", false);
        rule.fault = r.value("fault", "");
        rule.repeat = r.value("repeat", 1);
        rule.delay_ms = r.value("delay_ms", 0);
        if (r.contains("latency_ms")) rule.latency_ms = r["latency_ms"].get<long>();
        if (r.contains("prompt_tokens")) rule.prompt_tokens = r["prompt_tokens"].get<long>();
        if (r.contains("completion_tokens")) rule.completion_tokens = r["completion_tokens"].get<long>();
        static const char* kFaults[] = {"",        "http_500",       "http_400", "malformed_body",
                                        "empty_choices", "timeout", "connect"};
        bool known = false;
        for (const char* f : kFaults) {
            if (rule.fault == f) known = true;
        }
        if (!known) {
            throw ConfigError("mock script: unknown fault kind: " + rule.fault);
        }
        script.rules_.push_back(std::move(rule));
    }
    return script;
}

MockScript MockScript::load(const std::filesystem::path& path) {
    return from_json(read_json_file(path));
}

MockReply MockScript::next(const std::string& request_body) {
    std::lock_guard<std::mutex> lock(mutex_);
    json req = json::parse(request_body, nullptr, false);
    if (req.is_discarded()) {
        req = json{{"unparsed_body", request_body}};
    }
    log_.push_back(req);

    std::string request_text;
    std::string last_user;
    if (req.contains("messages") && req["messages"].is_array()) {
        for (const auto& m : req["messages"]) {
            const std::string content = m.value("content", "");
            request_text += content;
            request_text += '\n';
            if (m.value("role", "") == "user") {
                last_user = content;
            }
        }
    }

    MockRule* rule = nullptr;
    for (auto& r : rules_) {
        if (r.repeat == 0) {
            continue;
        }
        if (!r.match.empty() && request_text.find(r.match) == std::string::npos) {
            continue;
        }
        rule = &r;
        break;
    }

    MockReply reply;
    if (!rule) {
        reply.status = 400;
        reply.body = dump_canonical(json{
            {"error", {{"message", "mock script has no matching rule left"},
                       {"type", "invalid_request_error"}}}});
        return reply;
    }
    if (rule->repeat > 0) {
        --rule->repeat;
    }
    ++served_;

    reply.delay_ms = rule->delay_ms;
    reply.latency_ms = rule->latency_ms;

    if (rule->fault == "timeout") {
        reply.transport_ok = false;
        reply.timed_out = true;
        return reply;
    }
    if (rule->fault == "connect") {
        reply.transport_ok = false;
        return reply;
    }
    if (rule->fault == "http_500") {
        reply.status = 500;
        reply.body = dump_canonical(json{
            {"error", {{"message", "injected server error"}, {"type", "server_error"}}}});
        return reply;
    }
    if (rule->fault == "http_400") {
        reply.status = 400;
        reply.body = dump_canonical(json{
            {"error", {{"message", "injected validation rejection"},
                       {"type", "invalid_request_error"}}}});
        return reply;
    }
    if (rule->fault == "malformed_body") {
        reply.status = 200;
        reply.body = "{\"choices\": [ this is not json";
        return reply;
    }

    const std::string completion = rule->echo ? last_user : rule->completion;
    const long prompt_tokens =
        rule->prompt_tokens ? *rule->prompt_tokens : approximate_token_count(request_text);
    const long completion_tokens =
        rule->completion_tokens ? *rule->completion_tokens : approximate_token_count(completion);

    json body{{"id", "mock-" + std::to_string(served_)},
              {"object", "chat.completion"},
              {"model", req.value("model", "mock")},
              {"usage", {{"prompt_tokens", prompt_tokens},
                         {"completion_tokens", completion_tokens},
                         {"total_tokens", prompt_tokens + completion_tokens}}}};
    if (rule->fault == "empty_choices") {
        body["choices"] = json::array();
    } else {
        body["choices"] = json::array({json{
            {"index", 0},
            {"message", {{"role", "assistant"}, {"content", completion}}},
            {"finish_reason", "stop"}}});
    }
    reply.body = dump_canonical(body);
    return reply;
}

std::size_t MockScript::request_count() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_.size();
}

json MockScript::request_at(std::size_t i) const {
    std::lock_guard<std::mutex> lock(mutex_);
    return log_.at(i);
}

}  // namespace guardkit
