// Writes the synthetic replica corpus as JSONL.

#include "replica_corpus.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Generate the replica corpus"};
    std::string out;
    std::uint64_t seed = shellctx::replica::kDefaultSeed;
    app.add_option("--out", out, "Output JSONL path")->required();
    app.add_option("--seed", seed, "Generator seed");
    CLI11_PARSE(app, argc, argv);

    try {
        auto corpus = shellctx::replica::make_replica_corpus(seed);
        shellctx::write_corpus(corpus, out);
        std::cout << "wrote " << corpus.size() << " samples to " << out << " (sha256 " << shellctx::corpus_hash(corpus)
                  << ")\n";
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
