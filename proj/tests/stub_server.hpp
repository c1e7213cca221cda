#pragma once

// In-process HTTP server speaking the generation wire protocol. The identity
// mode returns inputs unchanged; other modes break the contract on purpose.

#include "shellctx/generation.hpp"

#include <httplib.h>

#include <atomic>
#include <string>
#include <thread>

namespace testutil {

class StubServer {
public:
    enum class Mode { Identity, DropLast, WrongId, ServerError, Garbage };

    explicit StubServer(Mode mode = Mode::Identity) : mode_(mode) {
        svr_.Get(std::string(shellctx::kHealthPath), [](const httplib::Request&, httplib::Response& res) {
            res.set_content(R"({"status":"ok","backend_name":"identity"})", "application/json");
        });
        svr_.Post(std::string(shellctx::kGeneratePath), [this](const httplib::Request& req, httplib::Response& res) {
            ++requests_;
            handle(req, res);
        });
        port_ = svr_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { svr_.listen_after_bind(); });
        svr_.wait_until_ready();
    }

    ~StubServer() {
        svr_.stop();
        thread_.join();
    }

    StubServer(const StubServer&) = delete;
    StubServer& operator=(const StubServer&) = delete;

    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }
    int requests() const { return requests_; }

private:
    void handle(const httplib::Request& req, httplib::Response& res) {
        shellctx::GenerationRequest parsed;
        try {
            parsed = shellctx::request_from_json(nlohmann::json::parse(req.body));
        } catch (const std::exception& e) {
            res.status = 400;
            res.set_content(nlohmann::json{{"error", e.what()}}.dump(), "application/json");
            return;
        }
        shellctx::GenerationResponse out{parsed.request_id, "identity", parsed.inputs, {}};
        switch (mode_) {
        case Mode::Identity:
            break;
        case Mode::DropLast:
            out.snippets.pop_back();
            break;
        case Mode::WrongId:
            out.request_id += "-other";
            break;
        case Mode::ServerError:
            res.status = 500;
            res.set_content(R"({"error":"model crashed"})", "application/json");
            return;
        case Mode::Garbage:
            res.set_content("<html>not json</html>", "text/html");
            return;
        }
        res.set_content(shellctx::response_to_json(out).dump(), "application/json");
    }

    Mode mode_;
    httplib::Server svr_;
    int port_ = 0;
    std::thread thread_;
    std::atomic<int> requests_{0};
};

/// A localhost port nothing listens on (bound, then released).
inline int unused_port() {
    httplib::Server probe;
    int port = probe.bind_to_any_port("127.0.0.1");
    probe.stop();
    return port;
}

} // namespace testutil
