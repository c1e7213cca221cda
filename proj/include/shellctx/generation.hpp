#pragma once

#include "shellctx/context.hpp"
#include "shellctx/preprocess.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <iterator>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace shellctx {

struct GenerationRequest {
    std::string request_id;
    std::vector<std::string> inputs;
    int max_new_tokens = 128;

    void validate() const {
        if (inputs.empty()) {
            throw std::invalid_argument("generation request needs at least one input");
        }
        if (max_new_tokens <= 0) {
            throw std::invalid_argument("max_new_tokens must be positive");
        }
    }
};

struct GenerationResponse {
    std::string request_id;
    std::string backend_name;
    std::vector<std::string> snippets;
    std::vector<double> latency_ms;
};

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The backend could not be reached; carries the number of attempts made.
class TransportError : public GenerationError {
public:
    TransportError(const std::string& what, int attempts) : GenerationError(what), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// The backend answered with something that breaks the wire contract.
class ProtocolError : public GenerationError {
public:
    using GenerationError::GenerationError;
};

/// The backend answered with a non-200 status and an error body.
class BackendError : public GenerationError {
public:
    BackendError(int status, const std::string& what) : GenerationError(what), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string name() const = 0;
    virtual GenerationResponse generate(const GenerationRequest& req) = 0;
};

/// Returns every input unchanged.
class EchoBackend final : public Backend {
public:
    std::string name() const override { return "echo"; }

    GenerationResponse generate(const GenerationRequest& req) override {
        req.validate();
        return {req.request_id, name(), req.inputs, std::vector<double>(req.inputs.size(), 0.0)};
    }
};

// ---------------------------------------------------------------------------
// Retrieval baseline
// ---------------------------------------------------------------------------

struct RetrievalEntry {
    std::vector<std::string> token_set; // sorted, unique
    std::string target;
    std::size_t train_index = 0;
    std::string sample_id;
};

inline std::vector<std::string> token_set(std::string_view input_text) {
    auto tokens = tokenize(input_text, TokenKind::Intent).tokens;
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

/// |a ∩ b| / |a ∪ b| over sorted unique token sets; 1 when both are empty.
inline double jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    if (a.empty() && b.empty()) {
        return 1.0;
    }
    std::size_t common = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) {
            ++ia;
        } else if (*ib < *ia) {
            ++ib;
        } else {
            ++common;
            ++ia;
            ++ib;
        }
    }
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

/// Immutable nearest-neighbour table over a training split.
class RetrievalIndex {
public:
    explicit RetrievalIndex(std::vector<RetrievalEntry> entries) : entries_(std::move(entries)) {}

    const std::vector<RetrievalEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<RetrievalEntry> entries_;
};

inline RetrievalIndex build_retrieval_index(const std::vector<ContextualInput>& train) {
    if (train.empty()) {
        throw std::invalid_argument("retrieval index needs a non-empty training split");
    }
    std::vector<RetrievalEntry> entries;
    entries.reserve(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        entries.push_back({token_set(train[i].input_text), train[i].target, i, train[i].sample_id});
    }
    return RetrievalIndex(std::move(entries));
}

/// Target of the entry with the highest Jaccard similarity; ties go to the
/// lowest training index.
inline std::string retrieve_generate(const RetrievalIndex& index, std::string_view input_text) {
    if (index.size() == 0) {
        throw std::invalid_argument("retrieval index is empty");
    }
    auto query = token_set(input_text);
    const RetrievalEntry* best = &index.entries().front();
    double best_score = -1.0;
    for (const auto& e : index.entries()) {
        double s = jaccard(query, e.token_set);
        if (s > best_score) {
            best_score = s;
            best = &e;
        }
    }
    return best->target;
}

class RetrievalBackend final : public Backend {
public:
    explicit RetrievalBackend(RetrievalIndex index) : index_(std::move(index)) {}

    std::string name() const override { return "retrieval"; }

    GenerationResponse generate(const GenerationRequest& req) override {
        req.validate();
        GenerationResponse resp{req.request_id, name(), {}, {}};
        for (const auto& in : req.inputs) {
            auto t0 = std::chrono::steady_clock::now();
            resp.snippets.push_back(retrieve_generate(index_, in));
            resp.latency_ms.push_back(
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        return resp;
    }

    const RetrievalIndex& index() const noexcept { return index_; }

private:
    RetrievalIndex index_;
};

// ---------------------------------------------------------------------------
// Wire protocol
// ---------------------------------------------------------------------------

inline constexpr std::string_view kGeneratePath = "/v1/generate";
inline constexpr std::string_view kHealthPath = "/v1/health";

inline nlohmann::ordered_json request_to_json(const GenerationRequest& req) {
    nlohmann::ordered_json j;
    j["request_id"] = req.request_id;
    j["inputs"] = req.inputs;
    j["max_new_tokens"] = req.max_new_tokens;
    return j;
}

inline GenerationRequest request_from_json(const nlohmann::json& j) {
    try {
        GenerationRequest req;
        req.request_id = j.at("request_id").get<std::string>();
        req.inputs = j.at("inputs").get<std::vector<std::string>>();
        req.max_new_tokens = j.at("max_new_tokens").get<int>();
        req.validate();
        return req;
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed generation request: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ProtocolError(std::string("invalid generation request: ") + e.what());
    }
}

inline nlohmann::ordered_json response_to_json(const GenerationResponse& resp) {
    nlohmann::ordered_json j;
    j["request_id"] = resp.request_id;
    j["backend_name"] = resp.backend_name;
    j["snippets"] = resp.snippets;
    return j;
}

/// Parses a 200 body and checks it answers `req`.
inline GenerationResponse response_from_body(std::string_view body, const GenerationRequest& req) {
    GenerationResponse resp;
    try {
        auto j = nlohmann::json::parse(body);
        resp.request_id = j.at("request_id").get<std::string>();
        resp.backend_name = j.at("backend_name").get<std::string>();
        resp.snippets = j.at("snippets").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed generation response: ") + e.what());
    }
    if (resp.request_id != req.request_id) {
        throw ProtocolError("response request_id '" + resp.request_id + "' does not match '" + req.request_id +
                            "'");
    }
    if (resp.snippets.size() != req.inputs.size()) {
        throw ProtocolError("backend returned " + std::to_string(resp.snippets.size()) + " snippets for " +
                            std::to_string(req.inputs.size()) + " inputs");
    }
    return resp;
}

/// `http://host:port[/prefix]` split into the client base and a path prefix.
struct Endpoint {
    std::string base;
    std::string prefix;

    static Endpoint parse(std::string_view url) {
        auto scheme = url.find("://");
        auto host_start = scheme == std::string_view::npos ? 0 : scheme + 3;
        auto slash = url.find('/', host_start);
        Endpoint e;
        e.base = std::string(url.substr(0, slash));
        if (slash != std::string_view::npos) {
            e.prefix = std::string(url.substr(slash));
            while (!e.prefix.empty() && e.prefix.back() == '/') {
                e.prefix.pop_back();
            }
        }
        if (e.base.empty()) {
            throw std::invalid_argument("empty endpoint URL");
        }
        return e;
    }
};

namespace detail {

inline httplib::Client make_client(const Endpoint& ep, std::chrono::milliseconds timeout) {
    httplib::Client cli(ep.base);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    return cli;
}

inline std::string error_message(const httplib::Result& res) {
    std::string msg = "HTTP " + std::to_string(res->status);
    try {
        auto j = nlohmann::json::parse(res->body);
        if (j.contains("error")) {
            msg += ": " + j.at("error").get<std::string>();
        }
    } catch (const nlohmann::json::exception&) {
        // body is not JSON; the status alone is reported
    }
    return msg;
}

} // namespace detail

/// POSTs `req` to `<endpoint>/v1/generate`. Transport failures are retried up
/// to `retries` times (so at most retries + 1 attempts); HTTP errors and
/// contract violations are not.
inline GenerationResponse remote_generate(const std::string& endpoint, const GenerationRequest& req,
                                          std::chrono::milliseconds timeout, int retries) {
    req.validate();
    auto ep = Endpoint::parse(endpoint);
    auto cli = detail::make_client(ep, timeout);
    const auto body = request_to_json(req).dump();
    const auto path = ep.prefix + std::string(kGeneratePath);

    const int attempts = std::max(0, retries) + 1;
    std::string last_error;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        auto t0 = std::chrono::steady_clock::now();
        auto res = cli.Post(path, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            throw BackendError(res->status, detail::error_message(res));
        }
        auto resp = response_from_body(res->body, req);
        double elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        resp.latency_ms.assign(resp.snippets.size(), elapsed / static_cast<double>(resp.snippets.size()));
        return resp;
    }
    throw TransportError("cannot reach " + endpoint + " after " + std::to_string(attempts) +
                             " attempt(s): " + last_error,
                         attempts);
}

/// GETs `<endpoint>/v1/health`; returns the backend name when status is "ok".
inline std::string remote_health(const std::string& endpoint, std::chrono::milliseconds timeout) {
    auto ep = Endpoint::parse(endpoint);
    auto cli = detail::make_client(ep, timeout);
    auto res = cli.Get(ep.prefix + std::string(kHealthPath));
    if (!res) {
        throw TransportError("cannot reach " + endpoint + ": " + httplib::to_string(res.error()), 1);
    }
    if (res->status != 200) {
        throw BackendError(res->status, detail::error_message(res));
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        if (j.at("status").get<std::string>() != "ok") {
            throw ProtocolError("backend reports status '" + j.at("status").get<std::string>() + "'");
        }
        return j.at("backend_name").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("malformed health response: ") + e.what());
    }
}

class RemoteBackend final : public Backend {
public:
    RemoteBackend(std::string endpoint, std::chrono::milliseconds timeout = std::chrono::seconds(60),
                  int retries = 2)
        : endpoint_(std::move(endpoint)), timeout_(timeout), retries_(retries) {}

    std::string name() const override { return remote_name_.empty() ? "remote" : remote_name_; }

    /// Probes /v1/health and remembers the server's backend name.
    void check_health() { remote_name_ = remote_health(endpoint_, timeout_); }

    GenerationResponse generate(const GenerationRequest& req) override {
        auto resp = remote_generate(endpoint_, req, timeout_, retries_);
        remote_name_ = resp.backend_name;
        return resp;
    }

private:
    std::string endpoint_;
    std::chrono::milliseconds timeout_;
    int retries_;
    std::string remote_name_;
};

inline constexpr std::size_t kDefaultBatchSize = 32;

/// Runs `inputs` through `backend` in batches and returns index-aligned
/// snippets. Each batch carries `<prefix>-<batch>` as request id and every
/// response is matched back by that id.
inline std::vector<std::string> generate_all(Backend& backend, const std::vector<std::string>& inputs,
                                             std::size_t batch_size = kDefaultBatchSize, int max_new_tokens = 128,
                                             const std::string& request_prefix = "req") {
    if (batch_size == 0) {
        throw std::invalid_argument("batch size must be positive");
    }
    std::vector<std::string> out;
    out.reserve(inputs.size());
    for (std::size_t begin = 0, batch = 0; begin < inputs.size(); begin += batch_size, ++batch) {
        auto end = std::min(inputs.size(), begin + batch_size);
        GenerationRequest req{request_prefix + "-" + std::to_string(batch),
                              {inputs.begin() + static_cast<std::ptrdiff_t>(begin),
                               inputs.begin() + static_cast<std::ptrdiff_t>(end)},
                              max_new_tokens};
        auto resp = backend.generate(req);
        if (resp.request_id != req.request_id) {
            throw ProtocolError("response for '" + resp.request_id + "' received while waiting for '" +
                                req.request_id + "'");
        }
        if (resp.snippets.size() != req.inputs.size()) {
            throw ProtocolError("backend returned " + std::to_string(resp.snippets.size()) + " snippets for " +
                                std::to_string(req.inputs.size()) + " inputs");
        }
        std::move(resp.snippets.begin(), resp.snippets.end(), std::back_inserter(out));
    }
    return out;
}

} // namespace shellctx
