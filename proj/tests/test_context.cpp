#include "shellctx/context.hpp"
#include "replica_corpus.hpp"
#include "test_util.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <set>

using namespace shellctx;
using C = ContextCategory;

namespace {

Sample sample(std::string id, std::string intent, std::string snippet, C cat = C::NoContext,
              std::vector<std::string> ctx = {}) {
    static std::int64_t line = 0;
    Sample s;
    s.id = std::move(id);
    s.program_id = "p";
    s.line_no = ++line;
    s.intent = std::move(intent);
    s.snippet = std::move(snippet);
    s.category = cat;
    s.context_intents = std::move(ctx);
    return s;
}

Corpus no_context_corpus(std::size_t n) {
    CorpusBuilder b;
    for (std::size_t i = 0; i < n; ++i) {
        b.append("p", "intent " + std::to_string(i), "nop");
    }
    return std::move(b).build();
}

std::set<std::string> ids(const std::vector<ContextualInput>& v) {
    std::set<std::string> out;
    for (const auto& ci : v) {
        out.insert(ci.sample_id);
    }
    return out;
}

std::size_t count_of(const std::vector<ContextualInput>& v, C cat) {
    return static_cast<std::size_t>(
        std::count_if(v.begin(), v.end(), [&](const ContextualInput& ci) { return ci.category == cat; }));
}

} // namespace

TEST_CASE("build_contextual_input examples", "[context]") {
    auto two = build_contextual_input(
        sample("a", "move 22 into the lower byte", "mov al,22", C::Ctx2to1, {"clear the eax register"}));
    CHECK(two.input_text == "clear the eax register _BREAK move 22 into the lower byte");
    CHECK(two.target == "mov al,22");

    auto inc = build_contextual_input(sample("b", "increment it", "inc eax", C::Ctx2to1, {"move esi in eax"}));
    CHECK(inc.input_text == "move esi in eax _BREAK increment it");
    CHECK(inc.input_text.ends_with("_BREAK increment it"));
    CHECK(inc.target == "inc eax");

    auto none = build_contextual_input(sample("c", "negate the result", "not esi"));
    CHECK(none.input_text == "negate the result");
    CHECK(none.sample_id == "c");
    CHECK(none.category == C::NoContext);

    auto three = build_contextual_input(
        sample("d", "Move eax in it", "move byte[esi],eax", C::Ctx3to1,
               {"Subtract 8 from the current byte in esi", "Negate the result"}));
    CHECK(three.input_text == "Subtract 8 from the current byte in esi _BREAK Negate the result _BREAK Move eax in it");
}

TEST_CASE("separator is configurable", "[context]") {
    auto ci = build_contextual_input(sample("a", "b", "nop", C::Unn3to1, {"x", "y"}), "<sep>");
    CHECK(ci.input_text == "x <sep> y <sep> b");
}

TEST_CASE("ten samples at 0.8/0.1/0.1 give 8/1/1", "[context]") {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.quotas[C::NoContext] = FractionQuota{0.8, 0.1, 0.1};
    auto s = generate_splits(no_context_corpus(10), cfg);
    CHECK(s.train.size() == 8);
    CHECK(s.dev.size() == 1);
    CHECK(s.test.size() == 1);
    CHECK(s.discrepancies.empty());
}

TEST_CASE("fraction rounding floors dev and test and gives train the rest", "[context]") {
    ExperimentConfig cfg;
    cfg.name = "rounding";
    cfg.quotas[C::NoContext] = FractionQuota{0.8, 0.1, 0.1};
    auto s = generate_splits(no_context_corpus(963), cfg);
    CHECK(s.dev.size() == 96);
    CHECK(s.test.size() == 96);
    CHECK(s.train.size() == 771);
    for (std::size_t n : {0u, 1u, 7u, 19u, 101u, 333u}) {
        auto t = generate_splits(no_context_corpus(n), cfg);
        CHECK(t.dev.size() == n / 10);
        CHECK(t.test.size() == n / 10);
        CHECK(t.train.size() + t.dev.size() + t.test.size() == n);
    }
}

TEST_CASE("quota beyond the corpus names category and shortfall", "[context]") {
    ExperimentConfig cfg;
    cfg.name = "greedy";
    cfg.quotas[C::NoContext] = CountQuota{8, 2, 2};
    try {
        generate_splits(no_context_corpus(10), cfg);
        FAIL("expected SplitError");
    } catch (const SplitError& e) {
        std::string msg = e.what();
        CHECK(msg.find("no_context") != std::string::npos);
        CHECK(msg.find("shortfall 2") != std::string::npos);
    }
}

TEST_CASE("config validation", "[context]") {
    ExperimentConfig cfg;
    cfg.name = "bad";
    cfg.quotas[C::NoContext] = FractionQuota{0.9, 0.1, 0.1};
    CHECK_THROWS_AS(cfg.validate(), SplitError);
    cfg.quotas[C::NoContext] = FractionQuota{1.2, 0.0, 0.0};
    CHECK_THROWS_AS(cfg.validate(), SplitError);
    cfg.quotas[C::NoContext] = FractionQuota{0.8, 0.1, 0.1};
    CHECK_NOTHROW(cfg.validate());
    cfg.separator.clear();
    CHECK_THROWS_AS(cfg.validate(), SplitError);
    CHECK_THROWS_AS(preset("unknown"), SplitError);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"name":"x","quotas":{"four_to_one":{}}})")),
                    SplitError);
}

TEST_CASE("config JSON round trips", "[context]") {
    for (const auto& p : all_presets()) {
        auto j = config_to_json(p);
        auto back = config_from_json(nlohmann::json::parse(j.dump()));
        CHECK(config_to_json(back).dump() == j.dump());
        CHECK(back.quotas == p.quotas);
        CHECK(back.tolerated_shortfall == p.tolerated_shortfall);
    }
    ExperimentConfig f;
    f.name = "fractions";
    f.seed = 99;
    f.separator = "<s>";
    f.quotas[C::Ctx2to1] = FractionQuota{0.5, 0.25, 0.25};
    auto back = config_from_json(nlohmann::json::parse(config_to_json(f).dump()));
    CHECK(back.quotas == f.quotas);
    CHECK(back.separator == "<s>");
    CHECK(back.seed == 99);
}

TEST_CASE("shipped preset files equal the built-in presets", "[context]") {
    CHECK(experiment_names().size() == 5);
    for (const auto& name : experiment_names()) {
        auto file = config_from_json(nlohmann::json::parse(text::read_file(testutil::preset_path(name + ".json"))));
        CHECK(config_to_json(file).dump() == config_to_json(preset(name)).dump());
    }
}

TEST_CASE("presets reproduce the published split table", "[context][replica]") {
    auto corpus = replica::make_replica_corpus();
    struct Cell {
        C cat;
        std::size_t train, dev, test;
    };
    const std::map<std::string, std::vector<Cell>> table = {
        {"missing_information", {{C::NoContext, 770, 96, 96}}},
        {"ctx_2to1", {{C::NoContext, 867, 48, 48}, {C::Ctx2to1, 180, 90, 90}}},
        {"ctx_3to1", {{C::NoContext, 867, 48, 48}, {C::Ctx3to1, 81, 79, 79}}},
        {"unn_2to1", {{C::NoContext, 867, 48, 48}, {C::Ctx2to1, 324, 18, 18}, {C::Unn2to1, 103, 100, 100}}},
        {"unn_3to1", {{C::NoContext, 867, 48, 48}, {C::Ctx3to1, 214, 12, 12}, {C::Unn3to1, 103, 100, 100}}},
    };
    for (const auto& [name, cells] : table) {
        INFO(name);
        auto s = generate_splits(corpus, preset(name));
        std::size_t train = 0;
        for (const auto& cell : cells) {
            CHECK(count_of(s.train, cell.cat) == cell.train);
            CHECK(count_of(s.dev, cell.cat) == cell.dev);
            CHECK(count_of(s.test, cell.cat) == cell.test);
            train += cell.train;
        }
        CHECK(s.train.size() == train);

        auto tr = ids(s.train), dv = ids(s.dev), te = ids(s.test);
        for (const auto& id : dv) {
            CHECK_FALSE(tr.contains(id));
            CHECK_FALSE(te.contains(id));
        }
        for (const auto& id : te) {
            CHECK_FALSE(tr.contains(id));
        }
    }

    auto mi = generate_splits(corpus, preset("missing_information"));
    REQUIRE(mi.discrepancies.size() == 1);
    CHECK(mi.discrepancies[0] == Discrepancy{C::NoContext, 962, 963, "1 sample(s) left unassigned"});

    auto c3 = generate_splits(corpus, preset("ctx_3to1"));
    REQUIRE(c3.discrepancies.size() == 1);
    CHECK(c3.discrepancies[0].category == C::Ctx3to1);
    CHECK(c3.discrepancies[0].requested == 239);
    CHECK(c3.discrepancies[0].available == 238);
    CHECK(c3.assignments.at(C::Ctx3to1).repeated == 1);
    CHECK(ids(c3.train).size() == c3.train.size() - 1);

    for (const auto& name : {"ctx_2to1", "unn_2to1", "unn_3to1"}) {
        CHECK(generate_splits(corpus, preset(name)).discrepancies.empty());
    }
}

TEST_CASE("splits are deterministic and seed-dependent", "[context]") {
    auto corpus = replica::make_replica_corpus();
    auto a = generate_splits(corpus, preset("unn_2to1"));
    auto b = generate_splits(corpus, preset("unn_2to1"));
    CHECK(a.train == b.train);
    CHECK(a.dev == b.dev);
    CHECK(a.test == b.test);
    auto cfg = preset("unn_2to1");
    cfg.seed = 7;
    auto c = generate_splits(corpus, cfg);
    CHECK(c.test != a.test);
    CHECK(c.test.size() == a.test.size());
}

TEST_CASE("separator count matches category on every exported line", "[context]") {
    auto corpus = replica::make_replica_corpus();
    for (const auto& p : all_presets()) {
        auto s = generate_splits(corpus, p);
        for (const auto* set : {&s.train, &s.dev, &s.test}) {
            for (const auto& ci : *set) {
                CHECK(text::count_occurrences(ci.input_text, "_BREAK") == context_arity(ci.category));
            }
        }
    }
}

TEST_CASE("bounded draw and shuffle", "[context]") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        CHECK(detail::bounded_draw(rng, 1) == 0);
        CHECK(detail::bounded_draw(rng, 3) < 3);
    }
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    detail::seeded_shuffle(w, 2024, 0);
    auto sorted = w;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == v);
    CHECK(w != v);

    // every permutation of three items shows up with roughly equal frequency
    std::map<std::vector<int>, int> seen;
    for (std::uint64_t seed = 0; seed < 6000; ++seed) {
        std::vector<int> t{0, 1, 2};
        detail::seeded_shuffle(t, seed, 0);
        ++seen[t];
    }
    CHECK(seen.size() == 6);
    for (const auto& [perm, n] : seen) {
        CHECK(n > 850);
        CHECK(n < 1150);
    }
}

TEST_CASE("export_split writes files and manifest", "[context]") {
    testutil::TempDir dir;
    SECTION("empty split") {
        ExperimentConfig cfg;
        cfg.name = "empty";
        cfg.quotas[C::NoContext] = FractionQuota{0.8, 0.1, 0.1};
        auto s = generate_splits(Corpus{}, cfg);
        export_split(s, dir.path() / "out");
        for (auto f : {"train.jsonl", "dev.jsonl", "test.jsonl"}) {
            CHECK(text::read_file((dir.path() / "out" / f).string()).empty());
        }
        auto m = nlohmann::json::parse(text::read_file((dir.path() / "out" / "split_manifest.json").string()));
        CHECK(m["counts"]["no_context"]["train"] == 0);
        CHECK(m["totals"]["test"] == 0);
    }
    SECTION("three samples, re-export is byte-identical") {
        Corpus c({sample("x1", "a", "nop"), sample("x2", "b", "nop"), sample("x3", "c", "nop", C::Ctx2to1, {"b"})});
        ExperimentConfig cfg;
        cfg.name = "three";
        cfg.seed = 5;
        cfg.quotas[C::NoContext] = CountQuota{1, 1, 0};
        cfg.quotas[C::Ctx2to1] = CountQuota{0, 0, 1};
        auto s = generate_splits(c, cfg);
        export_split(s, dir.path() / "one");
        export_split(generate_splits(c, cfg), dir.path() / "two");
        std::map<std::string, std::size_t> expect = {{"train.jsonl", 1}, {"dev.jsonl", 1}, {"test.jsonl", 1}};
        for (const auto& [f, lines] : expect) {
            auto a = text::read_file((dir.path() / "one" / f).string());
            CHECK(a == text::read_file((dir.path() / "two" / f).string()));
            CHECK(static_cast<std::size_t>(std::count(a.begin(), a.end(), '\n')) == lines);
        }
        CHECK(text::read_file((dir.path() / "one" / "split_manifest.json").string()) ==
              text::read_file((dir.path() / "two" / "split_manifest.json").string()));
        auto back = read_split_file((dir.path() / "one" / "test.jsonl").string());
        REQUIRE(back.size() == 1);
        CHECK(back[0] == s.test[0]);
        CHECK(back[0].input_text == "b _BREAK c");

        auto m = nlohmann::json::parse(text::read_file((dir.path() / "one" / "split_manifest.json").string()));
        CHECK(m["experiment"] == "three");
        CHECK(m["seed"] == 5);
        CHECK(m["corpus_hash"] == corpus_hash(c));
        CHECK(m["sample_ids"]["test"][0] == "x3");
    }
}
