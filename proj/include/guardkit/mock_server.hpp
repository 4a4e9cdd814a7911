#pragma once

#include <memory>
#include <string>

#include "guardkit/mock_script.hpp"

namespace guardkit {

// The bundled test-double endpoint: a local HTTP server speaking the
// chat-completions protocol from a MockScript. Lets the whole pipeline run
// offline over real HTTP. port 0 picks a free port.
class MockServer {
public:
    explicit MockServer(MockScript script, const std::string& host = "127.0.0.1", int port = 0);
    ~MockServer();

    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    std::string base_url() const;  // http://host:port/v1
    int port() const;

    std::size_t request_count() const;
    json request_at(std::size_t i) const;

    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace guardkit
