#include "shellctx/generation.hpp"
#include "stub_server.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace shellctx;
using Strings = std::vector<std::string>;
using namespace std::chrono_literals;

namespace {

ContextualInput ci(std::string input, std::string target, std::string id = "x") {
    return {std::move(input), std::move(target), std::move(id), ContextCategory::NoContext};
}

std::string trimmed(const std::string& s) { return std::string(text::trim(s)); }

} // namespace

TEST_CASE("retrieval index construction", "[generation]") {
    CHECK_THROWS_AS(build_retrieval_index({}), std::invalid_argument);
    CHECK(build_retrieval_index({ci("clear eax register", "xor eax, eax")}).size() == 1);

    auto dup = build_retrieval_index({ci("increment it", "inc eax", "a"), ci("increment it", "inc ebx", "b")});
    REQUIRE(dup.size() == 2);
    CHECK(dup.entries()[0].target == "inc eax");
    CHECK(dup.entries()[1].train_index == 1);
    CHECK(retrieve_generate(dup, "increment it") == "inc eax");

    std::vector<ContextualInput> hundred;
    for (int i = 0; i < 100; ++i) {
        hundred.push_back(ci("input " + std::to_string(i), "nop"));
    }
    CHECK(build_retrieval_index(hundred).size() == 100);
}

TEST_CASE("retrieve_generate picks the most similar entry", "[generation]") {
    auto index = build_retrieval_index({ci("clear eax register", "A"), ci("increment it", "B")});
    CHECK(retrieve_generate(index, "clear eax register") == "A");
    CHECK(retrieve_generate(index, "increment it") == "B");
    CHECK(retrieve_generate(index, "push string") == "A");
    CHECK(jaccard(token_set("clear eax register"), token_set("clear eax register")) == 1.0);
    CHECK(jaccard(token_set("clear eax register"), token_set("increment it")) == 0.0);
    CHECK(jaccard(token_set("a b c"), token_set("b c d")) == 0.5);
    CHECK(retrieve_generate(index, "increment it") == retrieve_generate(index, "increment it"));
}

TEST_CASE("echo and retrieval backends through generate_all", "[generation]") {
    EchoBackend echo;
    Strings inputs;
    for (int i = 0; i < 70; ++i) {
        inputs.push_back("in " + std::to_string(i));
    }
    CHECK(generate_all(echo, inputs, 32) == inputs);
    CHECK(generate_all(echo, {}, 32).empty());
    CHECK_THROWS_AS(generate_all(echo, inputs, 0), std::invalid_argument);

    RetrievalBackend retrieval(build_retrieval_index({ci("a b", "first"), ci("c d", "second")}));
    CHECK(generate_all(retrieval, {"c d", "a b", "a"}, 2) == Strings{"second", "first", "first"});
    CHECK_THROWS_AS(echo.generate({"r", {}, 128}), std::invalid_argument);
}

TEST_CASE("request validation", "[generation]") {
    CHECK_THROWS_AS((GenerationRequest{"r", {}, 10}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((GenerationRequest{"r", {"x"}, 0}.validate()), std::invalid_argument);
    CHECK_NOTHROW((GenerationRequest{"r", {"x"}, 1}.validate()));
}

TEST_CASE("golden protocol fixtures", "[generation][protocol]") {
    auto cases = nlohmann::json::parse(text::read_file(testutil::fixture_path("protocol/cases.json")));
    testutil::StubServer server;
    auto health = nlohmann::json::parse(text::read_file(testutil::fixture_path("protocol/health.response.json")));
    CHECK(remote_health(server.url(), 2s) == health.at("backend_name").get<std::string>());

    for (const auto& c : cases.at("cases")) {
        INFO(c.at("name").get<std::string>());
        auto request_text = text::read_file(testutil::fixture_path("protocol/" + c.at("request").get<std::string>()));
        auto request_json = nlohmann::json::parse(request_text);
        if (c.at("status") == 200) {
            auto req = request_from_json(request_json);
            // serialization is bit-exact with the fixture
            CHECK(request_to_json(req).dump() == trimmed(request_text));
            auto response_text =
                text::read_file(testutil::fixture_path("protocol/" + c.at("response").get<std::string>()));
            auto resp = remote_generate(server.url(), req, 2s, 0);
            CHECK(response_to_json(resp).dump() == trimmed(response_text));
            CHECK(resp.latency_ms.size() == resp.snippets.size());
        } else {
            CHECK_THROWS_AS(request_from_json(request_json), ProtocolError);
            httplib::Client cli(server.url());
            auto res = cli.Post(std::string(kGeneratePath), request_text, "application/json");
            REQUIRE(res);
            CHECK(res->status == c.at("status").get<int>());
            CHECK(nlohmann::json::parse(res->body).contains("error"));
        }
    }
}

TEST_CASE("remote echo contract", "[generation][remote]") {
    testutil::StubServer server;
    auto resp = remote_generate(server.url(), {"r1", {"x", "y"}, 128}, 2s, 2);
    CHECK(resp.snippets == Strings{"x", "y"});
    CHECK(resp.request_id == "r1");
    CHECK(resp.backend_name == "identity");

    RemoteBackend backend(server.url() + "/", 2s, 0);
    backend.check_health();
    CHECK(backend.name() == "identity");
    Strings inputs(75, "same input");
    CHECK(generate_all(backend, inputs, 32) == inputs);
    CHECK(server.requests() == 4);
}

TEST_CASE("remote contract violations are reported distinctly", "[generation][remote]") {
    SECTION("length mismatch") {
        testutil::StubServer server(testutil::StubServer::Mode::DropLast);
        try {
            remote_generate(server.url(), {"r", {"x", "y"}, 16}, 2s, 2);
            FAIL("expected ProtocolError");
        } catch (const ProtocolError& e) {
            CHECK(std::string(e.what()).find("1 snippets for 2 inputs") != std::string::npos);
        }
        CHECK(server.requests() == 1);
    }
    SECTION("request id mismatch") {
        testutil::StubServer server(testutil::StubServer::Mode::WrongId);
        CHECK_THROWS_AS(remote_generate(server.url(), {"r", {"x"}, 16}, 2s, 2), ProtocolError);
    }
    SECTION("malformed body") {
        testutil::StubServer server(testutil::StubServer::Mode::Garbage);
        CHECK_THROWS_AS(remote_generate(server.url(), {"r", {"x"}, 16}, 2s, 2), ProtocolError);
    }
    SECTION("server error is not retried") {
        testutil::StubServer server(testutil::StubServer::Mode::ServerError);
        try {
            remote_generate(server.url(), {"r", {"x"}, 16}, 2s, 2);
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            CHECK(e.status() == 500);
            CHECK(std::string(e.what()).find("model crashed") != std::string::npos);
        }
        CHECK(server.requests() == 1);
    }
}

TEST_CASE("unreachable endpoint fails after retries + 1 attempts", "[generation][remote]") {
    auto url = "http://127.0.0.1:" + std::to_string(testutil::unused_port());
    try {
        remote_generate(url, {"r", {"x"}, 16}, 500ms, 2);
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK(e.attempts() == 3);
        CHECK(std::string(e.what()).find("3 attempt") != std::string::npos);
    }
    CHECK_THROWS_AS(remote_health(url, 500ms), TransportError);
}

TEST_CASE("endpoint parsing", "[generation]") {
    auto e = Endpoint::parse("http://localhost:8080/api/");
    CHECK(e.base == "http://localhost:8080");
    CHECK(e.prefix == "/api");
    CHECK(Endpoint::parse("http://h:1").prefix.empty());
    CHECK_THROWS_AS(Endpoint::parse(""), std::invalid_argument);
}
