// Command-line entry point: prepare, split, generate, evaluate, report.

#include "shellctx/shellctx.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>
#include <vector>

namespace {

using namespace shellctx;

void print_histogram(const CategoryCounts& h) {
    std::size_t total = 0;
    for (auto c : kAllCategories) {
        std::cout << "  " << to_string(c) << ": " << h[category_index(c)] << '\n';
        total += h[category_index(c)];
    }
    std::cout << "  total: " << total << '\n';
}

void add_backend_options(CLI::App* cmd, std::string& backend, BackendOptions& opt, int& timeout_ms) {
    cmd->add_option("--backend", backend, "Generation backend")
        ->check(CLI::IsMember({"retrieval", "echo", "remote"}))
        ->default_val("retrieval");
    cmd->add_option("--endpoint", opt.endpoint, "Base URL of a remote generation server");
    cmd->add_option("--timeout-ms", timeout_ms, "Per-request timeout for the remote backend")->default_val(60000);
    cmd->add_option("--retries", opt.retries, "Transport retries for the remote backend")->default_val(2);
    cmd->add_option("--batch-size", opt.batch_size, "Inputs per generation request")
        ->default_val(kDefaultBatchSize)
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-new-tokens", opt.max_new_tokens, "Generation length limit sent to backends")
        ->default_val(128)
        ->check(CLI::PositiveNumber);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Context-aware NL-to-assembly corpus processing and evaluation"};
    app.set_config("--config", "", "Configuration file; command-line flags take precedence");
    app.require_subcommand(1);

    // prepare
    PrepareOptions prep;
    std::string prep_out;
    auto* prepare = app.add_subcommand("prepare", "Validate, filter, tokenize and standardize a corpus");
    prepare->add_option("--corpus", prep.corpus_path, "Raw corpus JSONL")->required();
    prepare->add_option("--stopwords", prep.stopwords_path, "Stopword list, one word per line");
    prepare->add_option("--out", prep_out, "Output directory")->required();

    // split
    SplitOptions split_opt;
    std::string split_out;
    std::uint64_t seed = 0;
    std::string separator;
    auto* split = app.add_subcommand("split", "Materialize train/dev/test sets for one experiment");
    split->add_option("--corpus", split_opt.corpus_path, "Processed corpus JSONL")->required();
    auto* exp_opt = split->add_option("--experiment", split_opt.experiment, "Experiment preset")
                        ->check(CLI::IsMember(experiment_names()));
    auto* exp_cfg = split->add_option("--experiment-config", split_opt.config_path, "Experiment config JSON");
    exp_opt->excludes(exp_cfg);
    auto* seed_opt = split->add_option("--seed", seed, "Shuffle seed (overrides the preset)");
    auto* sep_opt = split->add_option("--separator", separator, "Context separator token");
    split->add_option("--out", split_out, "Output directory")->required();

    // generate
    GenerateOptions gen;
    std::string gen_backend;
    std::string gen_out;
    std::string gen_split;
    int gen_timeout = 60000;
    auto* generate = app.add_subcommand("generate", "Produce raw predictions for a split set");
    generate->add_option("--split", gen_split, "Split directory")->required();
    generate->add_option("--set", gen.eval_set, "Split set to generate for")
        ->check(CLI::IsMember({"train", "dev", "test"}))
        ->default_val("test");
    add_backend_options(generate, gen_backend, gen.backend, gen_timeout);
    generate->add_option("--out", gen_out, "Output directory")->required();

    // evaluate
    EvaluateOptions ev;
    std::string ev_backend;
    std::string ev_out;
    std::string ev_split;
    std::string metric_config;
    bool no_em_normalize = false;
    int ev_timeout = 60000;
    auto* evaluate = app.add_subcommand("evaluate", "Generate, de-standardize and score a split set");
    evaluate->add_option("--split", ev_split, "Split directory")->required();
    evaluate->add_option("--set", ev.eval_set, "Split set to score")
        ->check(CLI::IsMember({"train", "dev", "test"}))
        ->default_val("test");
    evaluate->add_option("--corpus", ev.corpus_path, "Processed corpus the split was made from")->required();
    evaluate->add_option("--dicts", ev.dicts_path, "dictionaries.jsonl written by prepare")->required();
    evaluate->add_option("--predictions", ev.predictions_path, "Score an existing predictions.jsonl");
    evaluate->add_option("--metric-config", metric_config, "Metric config JSON");
    evaluate->add_flag("--no-em-normalize", no_em_normalize, "Compare exact match without whitespace normalization");
    add_backend_options(evaluate, ev_backend, ev.backend, ev_timeout);
    evaluate->add_option("--out", ev_out, "Output directory")->required();

    // report
    std::vector<std::string> reports;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Tabulate one or more report.json files");
    report->add_option("reports", reports, "report.json files")->required();
    report->add_option("--out", report_out, "Also write the table to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*prepare) {
            prep.out_dir = prep_out;
            auto r = cmd_prepare(prep);
            std::cout << "prepared " << r.processed.size() << " samples into " << prep_out << '\n';
            print_histogram(r.histogram);
        } else if (*split) {
            if (split_opt.experiment.empty() && split_opt.config_path.empty()) {
                throw UsageError("split needs --experiment or --experiment-config");
            }
            split_opt.out_dir = split_out;
            if (*seed_opt) {
                split_opt.seed = seed;
            }
            if (*sep_opt) {
                split_opt.separator = separator;
            }
            auto s = cmd_split(split_opt);
            std::cout << s.config.name << " (seed " << s.config.seed << "): train " << s.train.size() << ", dev "
                      << s.dev.size() << ", test " << s.test.size() << '\n';
            for (const auto& d : s.discrepancies) {
                std::cout << "  note: " << to_string(d.category) << " requested " << d.requested << " of "
                          << d.available << " available; " << d.resolution << '\n';
            }
        } else if (*generate) {
            gen.split_dir = gen_split;
            gen.out_dir = gen_out;
            gen.backend.kind = parse_backend(gen_backend);
            gen.backend.timeout = std::chrono::milliseconds(gen_timeout);
            auto preds = cmd_generate(gen);
            std::cout << "wrote " << preds.size() << " predictions to " << gen_out << '\n';
        } else if (*evaluate) {
            ev.split_dir = ev_split;
            ev.out_dir = ev_out;
            ev.backend.kind = parse_backend(ev_backend);
            ev.backend.timeout = std::chrono::milliseconds(ev_timeout);
            if (!metric_config.empty()) {
                ev.metrics = MetricConfig::from_json(nlohmann::json::parse(text::read_file(metric_config)));
            }
            if (no_em_normalize) {
                ev.metrics.em_whitespace_normalize = false;
            }
            auto r = cmd_evaluate(ev);
            std::cout << render_report(r.report);
            if (r.hallucination_warnings > 0) {
                std::cout << r.hallucination_warnings << " prediction(s) contained unknown placeholders\n";
            }
        } else if (*report) {
            auto table = cmd_report(reports);
            std::cout << table;
            if (!report_out.empty()) {
                text::write_file(report_out, table);
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ValidationFailure& e) {
        std::cerr << "validation error: " << e.what() << '\n' << e.report().to_string();
        return kExitValidation;
    } catch (const GenerationError& e) {
        std::cerr << "backend error: " << e.what() << '\n';
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitOk;
}
