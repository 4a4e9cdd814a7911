#pragma once

#include "guardkit/gateway.hpp"
#include "guardkit/mock_script.hpp"

namespace guardkit {

// In-process flavor of the test double: a Transport backed by a MockScript.
// Scripted latency_ms values are reported as the exchange latency, which is
// what makes latency fixtures exact.
class ScriptedEndpoint : public Transport {
public:
    explicit ScriptedEndpoint(MockScript script) : script_(std::move(script)) {}

    TransportReply send(const EndpointProfile& profile, const std::string& request_body) override;

    MockScript& script() { return script_; }
    const MockScript& script() const { return script_; }

private:
    MockScript script_;
};

}  // namespace guardkit
