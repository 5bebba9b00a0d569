#include "plandistill/config.hpp"
#include "plandistill/corpus.hpp"
#include "plandistill/dataset.hpp"
#include "plandistill/error.hpp"
#include "plandistill/evaluation.hpp"
#include "plandistill/log.hpp"
#include "plandistill/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace pd = plandistill;

namespace {

// Flags shared by the commands that talk to a backend. Each maps to a config
// key and, when given, overrides the config file.
struct RunFlags {
    std::string config;
    std::map<std::string, std::optional<std::string>> overrides = {
        {"seed", {}},           {"backend.kind", {}},  {"backend.base_url", {}},
        {"backend.model", {}},  {"k", {}},             {"delta", {}},
        {"max_in_flight", {}},  {"backend.cache_dir", {}}, {"stopwords", {}},
        {"workers", {}},        {"backend.mock_table", {}},
    };
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    auto& o = f.overrides;
    cmd->add_option("--config", f.config, "Config file (key = value lines)")->check(CLI::ExistingFile);
    cmd->add_option("--seed", o["seed"], "Run seed");
    cmd->add_option("--backend", o["backend.kind"], "http or mock")->check(CLI::IsMember({"http", "mock"}));
    cmd->add_option("--base-url", o["backend.base_url"], "Base URL of an OpenAI-compatible API");
    cmd->add_option("--model", o["backend.model"], "Completion model");
    cmd->add_option("--k", o["k"], "Script samples per specific goal");
    cmd->add_option("--delta", o["delta"], "Keyword bonus added to the positive cosine");
    cmd->add_option("--max-in-flight", o["max_in_flight"], "Upper bound on concurrent backend calls");
    cmd->add_option("--cache-dir", o["backend.cache_dir"], "Response cache directory");
    cmd->add_option("--stopwords", o["stopwords"], "Stopword list file");
    cmd->add_option("--workers", o["workers"], "Abstract goals processed in parallel");
    cmd->add_option("--mock-table", o["backend.mock_table"], "JSONL of {digest, text} canned completions");
}

pd::PipelineConfig resolve_config(const RunFlags& f) {
    pd::PipelineConfig c;
    if (!f.config.empty()) pd::load_config_into(c, f.config);
    for (const auto& [key, value] : f.overrides) {
        if (value) pd::apply_config_entry(c, key, *value);
    }
    c.validate();
    return c;
}

template <typename Lines>
void write_lines(const std::string& path, const Lines& items, auto serialize) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw pd::InputError("cannot write " + path);
    for (const auto& item : items) out << serialize(item) << '\n';
}

void write_run_outputs(const std::string& out, const pd::DistillResult& r) {
    pd::write_dataset(std::filesystem::path(out), r.dataset);
    write_lines(out + ".rejections.jsonl", r.rejections, pd::serialize_rejection);
    write_lines(out + ".diagnostics.jsonl", r.diagnostics, pd::serialize_diagnostic);
    std::ofstream(out + ".report.json", std::ios::binary | std::ios::trunc) << pd::serialize_report(r.report) << '\n';
    std::cout << pd::serialize_report(r.report) << '\n';
    if (!r.report.conserved()) pd::log::error("goal counts are not conserved");
}

struct Session {
    pd::PipelineConfig config;
    pd::Corpus corpus;
    pd::Resources resources;
    pd::BackendBundle bundle;

    Session(const RunFlags& flags, const std::string& corpus_path)
        : config(resolve_config(flags)),
          corpus(pd::load_corpus(corpus_path)),
          resources(pd::load_resources(config)),
          bundle(pd::make_backend(config)) {}

    pd::Distiller distiller() { return pd::Distiller(corpus, config, *bundle.backend, resources); }
};

int run(int argc, char** argv) {
    CLI::App app{"Constrained script dataset distillation"};
    app.require_subcommand(1);
    std::string log_level = "warn";
    app.add_option("--log-level", log_level, "debug, info, warn, error or off")
        ->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

    std::string corpus_path, out, in, goals_path;

    auto* ingest = app.add_subcommand("ingest", "Validate a seed corpus and write it in canonical form");
    ingest->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    ingest->add_option("--out", out, "Canonical corpus (stdout when omitted)");

    RunFlags goal_flags;
    auto* gen_goals = app.add_subcommand("gen-goals", "Generate specific goals for every abstract goal");
    gen_goals->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    gen_goals->add_option("--out", out)->required();
    add_run_flags(gen_goals, goal_flags);

    RunFlags script_flags;
    auto* gen_scripts = app.add_subcommand("gen-scripts", "Generate and filter scripts for a goal file");
    gen_scripts->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    gen_scripts->add_option("--goals", goals_path)->required()->check(CLI::ExistingFile);
    gen_scripts->add_option("--out", out)->required();
    add_run_flags(gen_scripts, script_flags);

    RunFlags distill_flags;
    auto* distill = app.add_subcommand("distill", "Both generation stages and the filter");
    distill->add_option("--corpus", corpus_path)->required()->check(CLI::ExistingFile);
    distill->add_option("--out", out)->required();
    add_run_flags(distill, distill_flags);

    std::string split_config, train_size;
    std::optional<std::size_t> validation_size, test_size;
    std::uint64_t seed = 0;
    auto* split = app.add_subcommand("split", "Shuffle a dataset into train, validation and test files");
    split->add_option("--in", in)->required()->check(CLI::ExistingFile);
    split->add_option("--out", out, "Output prefix; writes <out>.train.jsonl etc.")->required();
    split->add_option("--config", split_config)->check(CLI::ExistingFile);
    split->add_option("--seed", seed);
    split->add_option("--train", train_size, "Count, or 'rest'");
    split->add_option("--validation", validation_size);
    split->add_option("--test", test_size);

    std::string mix_a, mix_b;
    double alpha = 0.5;
    std::size_t mix_size = 0;
    auto* mix = app.add_subcommand("mix", "Draw a fixed-size mixture of two datasets");
    mix->add_option("--a", mix_a)->required()->check(CLI::ExistingFile);
    mix->add_option("--b", mix_b)->required()->check(CLI::ExistingFile);
    mix->add_option("--alpha", alpha, "Fraction taken from --a")->check(CLI::Range(0.0, 1.0));
    mix->add_option("--size", mix_size)->required();
    mix->add_option("--out", out)->required();
    mix->add_option("--seed", seed);

    auto* stats = app.add_subcommand("stats", "Dataset statistics and constraint distribution");
    stats->add_option("--in", in)->required()->check(CLI::ExistingFile);

    std::string predictions, reference, smoothing = "none";
    auto* eval = app.add_subcommand("eval", "ROUGE-L and BLEU of predicted scripts against a reference dataset");
    eval->add_option("--predictions", predictions)->required()->check(CLI::ExistingFile);
    eval->add_option("--reference", reference)->required()->check(CLI::ExistingFile);
    eval->add_option("--smoothing", smoothing)->check(CLI::IsMember({"none", "add-one"}));
    eval->add_option("--out", out, "Per-prediction reports (stdout when omitted)");

    CLI11_PARSE(app, argc, argv);

    static const std::map<std::string, pd::log::Level> levels = {
        {"debug", pd::log::Level::debug}, {"info", pd::log::Level::info}, {"warn", pd::log::Level::warn},
        {"error", pd::log::Level::error}, {"off", pd::log::Level::off}};
    pd::log::set_level(levels.at(log_level));

    if (*ingest) {
        const pd::Corpus corpus = pd::load_corpus(corpus_path);
        if (out.empty()) {
            pd::write_corpus(std::cout, corpus);
        } else {
            std::ofstream f(out, std::ios::binary | std::ios::trunc);
            if (!f) throw pd::InputError("cannot write " + out);
            pd::write_corpus(f, corpus);
        }
        std::cerr << corpus.size() << " abstract goals\n";
    } else if (*gen_goals) {
        Session s(goal_flags, corpus_path);
        std::vector<pd::Diagnostic> diagnostics;
        const auto goals = s.distiller().generate_all_goals(&diagnostics);
        write_lines(out, goals, pd::serialize_generated_goal);
        write_lines(out + ".diagnostics.jsonl", diagnostics, pd::serialize_diagnostic);
        std::cerr << goals.size() << " specific goals, " << s.bundle.backend->stats().upstream_calls
                  << " upstream calls\n";
    } else if (*gen_scripts) {
        Session s(script_flags, corpus_path);
        const auto goals = pd::read_generated_goals(goals_path);
        write_run_outputs(out, s.distiller().distill_goal_list(goals));
    } else if (*distill) {
        Session s(distill_flags, corpus_path);
        write_run_outputs(out, s.distiller().distill());
    } else if (*split) {
        pd::PipelineConfig c;
        if (!split_config.empty()) pd::load_config_into(c, split_config);
        if (split->count("--seed")) c.seed = seed;
        if (!train_size.empty()) pd::apply_config_entry(c, "split.train", train_size);
        if (validation_size) c.split.validation = *validation_size;
        if (test_size) c.split.test = *test_size;
        const auto dataset = pd::read_dataset(std::filesystem::path(in));
        const auto parts = pd::split_dataset(dataset, c.split, c.seed);
        pd::write_dataset(std::filesystem::path(out + ".train.jsonl"), parts.train);
        pd::write_dataset(std::filesystem::path(out + ".validation.jsonl"), parts.validation);
        pd::write_dataset(std::filesystem::path(out + ".test.jsonl"), parts.test);
        std::cout << "train " << parts.train.size() << "\nvalidation " << parts.validation.size() << "\ntest "
                  << parts.test.size() << '\n';
    } else if (*mix) {
        const auto a = pd::read_dataset(std::filesystem::path(mix_a), {.lenient = true});
        const auto b = pd::read_dataset(std::filesystem::path(mix_b), {.lenient = true});
        const auto mixed = pd::mix_datasets(a, b, alpha, mix_size, seed);
        pd::write_dataset(std::filesystem::path(out), mixed);
        std::cout << pd::mix_count_from_a(alpha, mix_size) << " from a, "
                  << mix_size - pd::mix_count_from_a(alpha, mix_size) << " from b\n";
    } else if (*stats) {
        const auto dataset = pd::read_dataset(std::filesystem::path(in), {.lenient = true});
        std::cout << pd::format_stats(pd::dataset_stats(dataset));
    } else if (*eval) {
        const auto preds = pd::read_predictions(predictions);
        const auto ref = pd::read_dataset(std::filesystem::path(reference), {.lenient = true});
        const auto summary = pd::evaluate_predictions(
            preds, ref, smoothing == "add-one" ? pd::BleuSmoothing::add_one : pd::BleuSmoothing::none);
        std::ofstream file;
        if (!out.empty()) {
            file.open(out, std::ios::binary | std::ios::trunc);
            if (!file) throw pd::InputError("cannot write " + out);
        }
        std::ostream& dst = out.empty() ? std::cout : file;
        for (const auto& r : summary.results) dst << pd::serialize_metric_report(r.metrics) << '\n';
        std::cout << "matched " << summary.matched << " of " << summary.results.size() << "\nmean "
                  << pd::serialize_metric_report(summary.mean) << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const pd::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const pd::LoadError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
