#include "guardkit/mock_server.hpp"

#include <chrono>
#include <stdexcept>
#include <thread>

#include "httplib.h"

#include "guardkit/errors.hpp"

namespace guardkit {

struct MockServer::Impl {
    MockScript script;
    std::string host;
    int port = 0;
    httplib::Server server;
    std::thread worker;
};

MockServer::MockServer(MockScript script, const std::string& host, int port)
    : impl_(std::make_unique<Impl>()) {
    impl_->script = std::move(script);
    impl_->host = host;

    impl_->server.Post(R"(.*/chat/completions)", [this](const httplib::Request& req,
                                                        httplib::Response& res) {
        const MockReply reply = impl_->script.next(req.body);
        if (reply.delay_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(reply.delay_ms));
        }
        if (!reply.transport_ok) {
            // Connection-level faults over real HTTP: hold the socket past
            // the client's timeout by not writing a response body.
            res.status = 500;
            return;
        }
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });

    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
        if (impl_->port <= 0) {
            throw ConfigError("mock server could not bind a port on " + host);
        }
    } else {
        if (!impl_->server.bind_to_port(host, port)) {
            throw ConfigError("mock server could not bind port " + std::to_string(port));
        }
        impl_->port = port;
    }
    impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
    stop();
}

void MockServer::stop() {
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
    if (impl_ && impl_->worker.joinable()) {
        impl_->worker.join();
    }
}

std::string MockServer::base_url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port) + "/v1";
}

int MockServer::port() const {
    return impl_->port;
}

std::size_t MockServer::request_count() const {
    return impl_->script.request_count();
}

json MockServer::request_at(std::size_t i) const {
    return impl_->script.request_at(i);
}

}  // namespace guardkit
