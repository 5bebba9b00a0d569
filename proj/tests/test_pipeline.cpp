#include "oracles.hpp"

#include "plandistill/config.hpp"
#include "plandistill/error.hpp"
#include "plandistill/mock_transport.hpp"
#include "plandistill/pipeline.hpp"

#include <nlohmann/json.hpp>

#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

using namespace plandistill;

namespace {

MockOptions seeded(std::uint64_t seed) {
    MockOptions o;
    o.seed = seed;
    return o;
}

std::string dump(const std::vector<DatasetRecord>& data) {
    std::ostringstream out;
    write_dataset(out, data);
    return out.str();
}

PipelineConfig quiet_config(std::uint64_t seed = 7) {
    PipelineConfig c;
    c.seed = seed;
    c.backend.base_delay_ms = 0;
    return c;
}

struct Run {
    Corpus corpus = load_corpus(oracle::fixture("corpus5.jsonl"));
    PipelineConfig config;
    Resources resources;
    BackendBundle bundle;

    explicit Run(PipelineConfig c, std::shared_ptr<Transport> transport = nullptr)
        : config(std::move(c)),
          bundle(transport ? make_backend(config, std::move(transport)) : make_backend(config)) {}

    Distiller distiller() { return Distiller(corpus, config, *bundle.backend, resources); }
};

// Fails every script completion with the given status; goal prompts and
// embeddings go to the mock.
class FailingScripts : public Transport {
public:
    explicit FailingScripts(int status) : status_(status) {}
    UpstreamResponse post(const UpstreamRequest& r) override {
        if (r.endpoint == "completions" && r.body.find("List the steps of") != std::string::npos) {
            return {status_, "{}"};
        }
        return mock_.post(r);
    }

private:
    int status_;
    MockTransport mock_{seeded(7)};
};

SpecificGoal sg(std::string id, std::string text) {
    return {std::move(id), "a", {ConstraintType::modifier, "x"}, std::move(text)};
}

}  // namespace

TEST_CASE("distill over the fixture corpus conserves goals") {
    Run run(quiet_config());
    const auto r = run.distiller().distill();
    CHECK(r.report.abstract_goals == 5);
    CHECK(r.report.generated_goals >= r.report.deduplicated_goals);
    CHECK(r.report.conserved());
    CHECK(r.report.accepted == r.dataset.size());
    CHECK(r.report.rejected + r.report.failed == r.rejections.size());
    CHECK(r.report.accepted > 0);
    CHECK(r.dataset.size() == r.record_abstract_ids.size());
    for (const auto& rec : r.dataset) {
        CHECK_FALSE(rec.steps.empty());
        CHECK(rec.provenance.sample_index < run.config.k);
        CHECK(rec.provenance.goal_digest.size() == 64);
        CHECK(rec.provenance.script_digest.size() == 64);
    }
}

TEST_CASE("distill is deterministic and independent of worker count") {
    Run a(quiet_config());
    auto cfg = quiet_config();
    cfg.workers = 4;
    Run b(cfg);
    const auto ra = a.distiller().distill();
    const auto rb = b.distiller().distill();
    CHECK(dump(ra.dataset) == dump(rb.dataset));
    CHECK(ra.rejections.size() == rb.rejections.size());

    Run c(quiet_config(8));
    CHECK(dump(c.distiller().distill().dataset) != dump(ra.dataset));
}

TEST_CASE("two-stage run equals the one-shot run") {
    Run a(quiet_config());
    const auto once = a.distiller().distill();
    Run b(quiet_config());
    auto d = b.distiller();
    const auto goals = d.generate_all_goals();
    CHECK(goals.size() == once.report.deduplicated_goals);
    const auto staged = d.distill_goal_list(goals);
    CHECK(dump(staged.dataset) == dump(once.dataset));
    CHECK(staged.report.conserved());
}

TEST_CASE("generated goals round-trip through their file format") {
    Run run(quiet_config());
    const auto goals = run.distiller().generate_all_goals();
    REQUIRE_FALSE(goals.empty());
    const auto path = std::filesystem::temp_directory_path() / "pd-goals-roundtrip.jsonl";
    {
        std::ofstream out(path);
        for (const auto& g : goals) out << serialize_generated_goal(g) << '\n';
    }
    const auto back = read_generated_goals(path);
    std::filesystem::remove(path);
    REQUIRE(back.size() == goals.size());
    for (std::size_t i = 0; i < goals.size(); ++i) {
        CHECK(back[i].goal == goals[i].goal);
        CHECK(back[i].completion_digest == goals[i].completion_digest);
    }
}

TEST_CASE("specific goal ids and types") {
    Run run(quiet_config());
    const auto gen = run.distiller().generate_specific_goals(run.corpus[0]);
    REQUIRE_FALSE(gen.goals.empty());
    for (const auto& g : gen.goals) {
        CHECK(g.goal.abstract_goal_id == "g1");
        CHECK(g.goal.id.starts_with("g1:" + std::string(to_string(g.goal.constraint.type)) + ":"));
        CHECK_FALSE(g.goal.text.empty());
        CHECK_FALSE(g.goal.constraint.text.empty());
    }
}

TEST_CASE("overgeneration draws K samples from one prompt") {
    auto cfg = quiet_config();
    cfg.k = 4;
    Run run(cfg);
    auto d = run.distiller();
    const SpecificGoal goal{"g1:modifier:0", "g1", {ConstraintType::modifier, "Chocolate"}, "Make a chocolate cake"};
    const auto gen = d.overgenerate_scripts(run.corpus[0], goal);
    CHECK(gen.example_ids.size() == 2);
    CHECK(gen.example_ids[0] == "g1");
    CHECK(gen.prompt.starts_with("List the steps of making a cake"));
    CHECK(gen.candidates.size() + gen.diagnostics.size() == 4);
    std::set<std::uint32_t> samples;
    for (const auto& c : gen.candidates) samples.insert(c.sample_index);
    CHECK(samples.size() == gen.candidates.size());
}

TEST_CASE("dedup keeps the first of each normalized class and is a fixed point") {
    const std::vector<SpecificGoal> goals = {sg("1", "Make a chocolate cake"), sg("2", "make a  Chocolate cake."),
                                             sg("3", "Make a vanilla cake"), sg("4", "Make a chocolate cake!")};
    const auto once = dedup_goals(goals);
    REQUIRE(once.size() == 2);
    CHECK(once[0].id == "1");
    CHECK(once[1].id == "3");
    CHECK(dedup_goals(once) == once);
}

TEST_CASE("script backend failures are counted, not fatal") {
    Run run(quiet_config(), std::make_shared<FailingScripts>(500));
    const auto r = run.distiller().distill();
    CHECK(r.dataset.empty());
    CHECK(r.report.failed == r.report.deduplicated_goals);
    CHECK(r.report.conserved());
    for (const auto& e : r.rejections) CHECK(e.reason == "backend_error");
}

TEST_CASE("credential errors abort the run") {
    Run run(quiet_config(), std::make_shared<FailingScripts>(401));
    CHECK_THROWS_AS(run.distiller().distill(), ConfigError);
}

TEST_CASE("a warm cache makes no upstream calls") {
    const auto dir = std::filesystem::temp_directory_path() / "pd-pipeline-cache";
    std::filesystem::remove_all(dir);
    auto cfg = quiet_config();
    cfg.backend.cache_dir = dir.string();
    Run cold(cfg);
    const auto first = cold.distiller().distill();
    CHECK(first.report.upstream_calls > 0);
    Run warm(cfg);
    const auto second = warm.distiller().distill();
    CHECK(second.report.upstream_calls == 0);
    CHECK(warm.bundle.instrumented->calls() == 0);
    CHECK(dump(first.dataset) == dump(second.dataset));
    std::filesystem::remove_all(dir);
}

TEST_CASE("rejections and reports serialize") {
    Run run(quiet_config());
    const auto r = run.distiller().distill();
    for (const auto& e : r.rejections) {
        const auto j = nlohmann::json::parse(serialize_rejection(e));
        CHECK(j.contains("reason"));
        if (e.reason == "filtered") CHECK(j["candidates"].is_array());
    }
    const auto rep = nlohmann::json::parse(serialize_report(r.report));
    CHECK(rep["conserved"] == true);
    CHECK(rep["accepted"] == r.report.accepted);
}

TEST_CASE("config file and overrides") {
    const auto path = std::filesystem::temp_directory_path() / "pd-config.txt";
    {
        std::ofstream out(path);
        out << "# run settings\nk = 3\ndelta = 0.1\nseed=42\nbackend.kind = http\nbackend.base_url = http://localhost:9/v1\n"
               "split.train = 100\nsplit.validation = 5\n";
    }
    auto c = load_config(path);
    CHECK(c.k == 3);
    CHECK(c.delta == 0.1);
    CHECK(c.seed == 42);
    CHECK(c.backend.kind == "http");
    CHECK(c.split.train == 100u);
    CHECK(c.split.validation == 5);
    apply_config_entry(c, "k", "5");
    apply_config_entry(c, "split.train", "rest");
    CHECK(c.k == 5);
    CHECK_FALSE(c.split.train);
    CHECK_THROWS_AS(apply_config_entry(c, "nope", "1"), ConfigError);
    CHECK_THROWS_AS(apply_config_entry(c, "k", "three"), ConfigError);
    c.k = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.k = 2;
    c.backend.kind = "grpc";
    CHECK_THROWS_AS(c.validate(), ConfigError);
    std::filesystem::remove(path);
}
