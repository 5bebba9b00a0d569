#include "plandistill/pipeline.hpp"

#include "plandistill/error.hpp"
#include "plandistill/log.hpp"
#include "plandistill/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

namespace plandistill {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Bad credentials or endpoints will fail every item; stop instead.
bool is_fatal(const BackendError& e) {
    return e.status() == 401 || e.status() == 403 || e.status() == 404;
}

[[noreturn]] void abort_run(const BackendError& e) {
    throw ConfigError(std::string("backend rejected the configuration: ") + e.what());
}

void append(DistillResult& into, DistillResult&& from) {
    auto move_all = [](auto& dst, auto& src) {
        dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
    };
    move_all(into.dataset, from.dataset);
    move_all(into.record_abstract_ids, from.record_abstract_ids);
    move_all(into.rejections, from.rejections);
    move_all(into.diagnostics, from.diagnostics);
    auto& a = into.report;
    const auto& b = from.report;
    a.abstract_goals += b.abstract_goals;
    a.generated_goals += b.generated_goals;
    a.deduplicated_goals += b.deduplicated_goals;
    a.accepted += b.accepted;
    a.rejected += b.rejected;
    a.failed += b.failed;
    a.goal_type_errors += b.goal_type_errors;
}

// Runs work(i) for i in [0, count) on up to `workers` threads. The first
// exception stops new work and is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& work) {
    if (count == 0) return;
    const std::size_t n = std::min(std::max<std::size_t>(workers, 1), count);
    if (n == 1) {
        for (std::size_t i = 0; i < count; ++i) work(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr error;
    std::mutex error_mu;
    {
        std::vector<std::jthread> pool;
        pool.reserve(n);
        for (std::size_t t = 0; t < n; ++t) {
            pool.emplace_back([&] {
                while (!stop.load()) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count) return;
                    try {
                        work(i);
                    } catch (...) {
                        std::lock_guard lock(error_mu);
                        if (!error) error = std::current_exception();
                        stop = true;
                    }
                }
            });
        }
    }
    if (error) std::rethrow_exception(error);
}

ordered_json score_table_json(const ScoreTable& t) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : t.rows) {
        ordered_json row;
        row["sample_index"] = r.sample_index;
        row["cosines"] = r.cosines;
        row["keyword_hit"] = r.keyword_hit;
        row["adjusted_positive"] = r.adjusted_positive;
        row["argmax"] = r.argmax ? ordered_json(r.argmax_id) : ordered_json(nullptr);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace

Resources load_resources(const PipelineConfig& config) {
    Resources r;
    if (!config.stopwords.empty()) r.stopwords = StopwordList::load(config.stopwords);
    if (!config.example_pool.empty()) r.pool = ExamplePool::load(config.example_pool);
    if (!config.goal_template.empty()) r.goal_template = PromptTemplate::load(config.goal_template);
    if (!config.script_template.empty()) r.script_template = PromptTemplate::load(config.script_template);
    return r;
}

std::vector<SpecificGoal> dedup_goals(const std::vector<SpecificGoal>& goals) {
    std::vector<SpecificGoal> out;
    std::unordered_set<std::string> seen;
    for (const auto& g : goals) {
        if (seen.insert(normalize_goal_text(g.text)).second) out.push_back(g);
    }
    return out;
}

std::vector<GeneratedGoal> dedup_goals(const std::vector<GeneratedGoal>& goals) {
    std::vector<GeneratedGoal> out;
    std::unordered_set<std::string> seen;
    for (const auto& g : goals) {
        if (seen.insert(normalize_goal_text(g.goal.text)).second) out.push_back(g);
    }
    return out;
}

Distiller::Distiller(const Corpus& corpus, const PipelineConfig& config, Backend& backend,
                     const Resources& resources)
    : corpus_(corpus), config_(config), backend_(backend), resources_(resources), index_(corpus) {
    config_.validate();
}

CompletionRequest Distiller::base_request() const {
    CompletionRequest r;
    r.temperature = config_.temperature;
    r.top_p = config_.top_p;
    r.max_tokens = config_.max_tokens;
    r.presence_penalty = config_.presence_penalty;
    r.frequency_penalty = config_.frequency_penalty;
    r.model_tag = config_.backend.model;
    return r;
}

GoalGeneration Distiller::generate_specific_goals(const AbstractGoal& goal) {
    GoalGeneration out;
    for (auto type : kConstraintTypes) {
        const std::string type_name(to_string(type));
        const auto examples = resources_.pool.sample(
            type, config_.goal_examples, derive_seed(config_.seed, "examples:" + goal.id + ":" + type_name));
        CompletionRequest req = base_request();
        req.prompt = render_goal_prompt(goal, type, examples, resources_.goal_template);

        Completion completion;
        try {
            completion = backend_.complete(req);
        } catch (const BackendError& e) {
            if (is_fatal(e)) abort_run(e);
            out.errors.push_back({goal.id, "", "goals", type_name + ": " + e.what()});
            continue;
        }

        // The prompt ends on an open "Constraint:" cue, so the reply usually
        // starts with the constraint text itself.
        std::string text = completion.text;
        const std::string head = to_lower_ascii(trim(text).substr(0, 11));
        if (head != "constraint:") text = "Constraint:" + text;

        GoalParse parsed = parse_goal_completion(text);
        for (const auto& d : parsed.diagnostics) {
            out.diagnostics.push_back({goal.id, "", "goals", type_name + ": " + d});
        }
        for (std::size_t i = 0; i < parsed.pairs.size(); ++i) {
            SpecificGoal sg;
            sg.id = goal.id + ":" + type_name + ":" + std::to_string(i);
            sg.abstract_goal_id = goal.id;
            sg.constraint = {type, parsed.pairs[i].constraint};
            sg.text = parsed.pairs[i].specific_goal;
            out.goals.push_back({std::move(sg), completion.request_digest});
        }
    }
    return out;
}

ScriptGeneration Distiller::overgenerate_scripts(const AbstractGoal& parent, const SpecificGoal& goal) {
    ScriptGeneration out;
    KeywordSet keywords = extract_keywords(parent.title, resources_.stopwords);
    if (keywords.empty()) {
        out.diagnostics.push_back({parent.id, goal.id, "retrieval",
                                   "abstract goal has only stopwords; querying with all title tokens"});
        keywords.keywords = tokenize(parent.title);
    }
    std::vector<AbstractGoal> examples;
    if (keywords.empty()) {
        examples.push_back(parent);
    } else {
        for (const auto& hit : index_.retrieve(keywords, config_.script_examples)) examples.push_back(*hit.goal);
    }
    for (const auto& e : examples) out.example_ids.push_back(e.id);

    out.prompt = render_script_prompt(parent, goal, examples, resources_.script_template);
    CompletionRequest req = base_request();
    req.prompt = out.prompt;
    for (std::uint32_t s = 0; s < config_.k; ++s) {
        req.sample_index = s;
        Completion c;
        try {
            c = backend_.complete(req);
        } catch (const BackendError& e) {
            if (is_fatal(e)) abort_run(e);
            ++out.backend_failures;
            out.diagnostics.push_back({parent.id, goal.id, "scripts",
                                       "sample " + std::to_string(s) + ": " + e.what()});
            continue;
        }
        try {
            CandidateScript cand;
            cand.goal_id = goal.id;
            cand.steps = parse_script_completion(c.text);
            cand.sample_index = s;
            cand.raw_text = c.text;
            cand.request_digest = c.request_digest;
            out.candidates.push_back(std::move(cand));
        } catch (const ParseError& e) {
            out.diagnostics.push_back({parent.id, goal.id, "scripts",
                                       "sample " + std::to_string(s) + " unparseable: " + e.what()});
        }
    }
    return out;
}

DistillResult Distiller::distill_goals(const AbstractGoal& parent, const std::vector<GeneratedGoal>& goals) {
    DistillResult out;
    out.report.deduplicated_goals = goals.size();

    std::vector<SpecificGoal> plain;
    plain.reserve(goals.size());
    for (const auto& g : goals) plain.push_back(g.goal);

    for (std::size_t i = 0; i < goals.size(); ++i) {
        const SpecificGoal& goal = goals[i].goal;
        std::vector<SpecificGoal> siblings;
        for (std::size_t j = 0; j < plain.size(); ++j) {
            if (j != i) siblings.push_back(plain[j]);
        }

        ScriptGeneration gen = overgenerate_scripts(parent, goal);
        out.diagnostics.insert(out.diagnostics.end(), gen.diagnostics.begin(), gen.diagnostics.end());
        if (gen.candidates.empty()) {
            ++out.report.failed;
            const bool backend = gen.backend_failures == config_.k;
            out.rejections.push_back({parent.id, goal.id, goal.text, backend ? "backend_error" : "unparseable",
                                      std::nullopt});
            continue;
        }

        FilterOutcome outcome;
        try {
            const GoalSet set = build_goal_set(goal, siblings);
            ScoreTable table = score_candidates(gen.candidates, set, backend_, config_.delta, resources_.stopwords);
            outcome = select_script(gen.candidates, std::move(table), derive_seed(config_.seed, "select:" + goal.id));
        } catch (const BackendError& e) {
            if (is_fatal(e)) abort_run(e);
            ++out.report.failed;
            out.diagnostics.push_back({parent.id, goal.id, "filter", e.what()});
            out.rejections.push_back({parent.id, goal.id, goal.text, "backend_error", std::nullopt});
            continue;
        }

        if (!outcome.accepted) {
            ++out.report.rejected;
            out.rejections.push_back({parent.id, goal.id, goal.text, "filtered", std::move(outcome.table)});
            continue;
        }
        ++out.report.accepted;
        const CandidateScript& chosen = gen.candidates[*outcome.chosen];
        DatasetRecord rec;
        rec.abstract_goal = parent.title;
        rec.category = parent.category;
        rec.constraint_type = goal.constraint.type;
        rec.constraint = goal.constraint.text;
        rec.specific_goal = goal.text;
        rec.steps = chosen.steps;
        rec.provenance = {chosen.sample_index, goals[i].completion_digest, chosen.request_digest};
        out.dataset.push_back(std::move(rec));
        out.record_abstract_ids.push_back(parent.id);
    }
    return out;
}

DistillResult Distiller::run_parallel(std::size_t count, const std::function<DistillResult(std::size_t)>& work) {
    const BackendStats before = backend_.stats();
    std::vector<DistillResult> parts(count);
    parallel_for(count, config_.workers, [&](std::size_t i) { parts[i] = work(i); });

    DistillResult out;
    for (auto& p : parts) append(out, std::move(p));
    sort_dataset(out);

    const BackendStats after = backend_.stats();
    out.report.upstream_calls = after.upstream_calls - before.upstream_calls;
    out.report.completion_cache_hits = after.completion_cache_hits - before.completion_cache_hits;
    out.report.embedding_cache_hits = after.embedding_cache_hits - before.embedding_cache_hits;
    return out;
}

DistillResult Distiller::distill() {
    return run_parallel(corpus_.size(), [&](std::size_t i) {
        const AbstractGoal& parent = corpus_[i];
        GoalGeneration gen = generate_specific_goals(parent);
        const auto deduped = dedup_goals(gen.goals);
        DistillResult r = distill_goals(parent, deduped);
        r.report.abstract_goals = 1;
        r.report.generated_goals = gen.goals.size();
        r.report.goal_type_errors = gen.errors.size();
        std::vector<Diagnostic> diags = std::move(gen.errors);
        diags.insert(diags.end(), gen.diagnostics.begin(), gen.diagnostics.end());
        diags.insert(diags.end(), r.diagnostics.begin(), r.diagnostics.end());
        r.diagnostics = std::move(diags);
        return r;
    });
}

std::vector<GeneratedGoal> Distiller::generate_all_goals(std::vector<Diagnostic>* diagnostics) {
    std::vector<GoalGeneration> parts(corpus_.size());
    parallel_for(corpus_.size(), config_.workers,
                 [&](std::size_t i) { parts[i] = generate_specific_goals(corpus_[i]); });
    std::vector<GeneratedGoal> out;
    for (auto& p : parts) {
        auto deduped = dedup_goals(p.goals);
        out.insert(out.end(), deduped.begin(), deduped.end());
        if (diagnostics) {
            diagnostics->insert(diagnostics->end(), p.errors.begin(), p.errors.end());
            diagnostics->insert(diagnostics->end(), p.diagnostics.begin(), p.diagnostics.end());
        }
    }
    return out;
}

DistillResult Distiller::distill_goal_list(const std::vector<GeneratedGoal>& goals) {
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<GeneratedGoal>> groups;
    for (const auto& g : goals) {
        auto [it, fresh] = groups.try_emplace(g.goal.abstract_goal_id);
        if (fresh) order.push_back(g.goal.abstract_goal_id);
        it->second.push_back(g);
    }
    return run_parallel(order.size(), [&](std::size_t i) {
        const auto& group = groups.at(order[i]);
        const AbstractGoal* parent = corpus_.find(order[i]);
        if (!parent) {
            DistillResult r;
            r.report.deduplicated_goals = group.size();
            r.report.failed = group.size();
            for (const auto& g : group) {
                r.rejections.push_back({order[i], g.goal.id, g.goal.text, "unknown_abstract_goal", std::nullopt});
            }
            r.diagnostics.push_back({order[i], "", "scripts", "abstract goal id not in corpus"});
            return r;
        }
        DistillResult r = distill_goals(*parent, dedup_goals(group));
        r.report.abstract_goals = 1;
        r.report.generated_goals = group.size();
        // Duplicates dropped here count as generated, not as goals to place.
        return r;
    });
}

void sort_dataset(DistillResult& result) {
    std::vector<std::size_t> order(result.dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto& ra = result.dataset[a];
        const auto& rb = result.dataset[b];
        if (result.record_abstract_ids[a] != result.record_abstract_ids[b]) {
            return result.record_abstract_ids[a] < result.record_abstract_ids[b];
        }
        if (ra.constraint_type != rb.constraint_type) return ra.constraint_type < rb.constraint_type;
        return ra.specific_goal < rb.specific_goal;
    });
    std::vector<DatasetRecord> dataset;
    std::vector<std::string> ids;
    dataset.reserve(order.size());
    ids.reserve(order.size());
    for (std::size_t i : order) {
        dataset.push_back(std::move(result.dataset[i]));
        ids.push_back(std::move(result.record_abstract_ids[i]));
    }
    result.dataset = std::move(dataset);
    result.record_abstract_ids = std::move(ids);
}

std::string serialize_rejection(const RejectionEntry& e) {
    ordered_json obj;
    obj["abstract_goal_id"] = e.abstract_goal_id;
    obj["specific_goal_id"] = e.specific_goal_id;
    obj["specific_goal"] = e.specific_goal;
    obj["reason"] = e.reason;
    if (e.table) {
        obj["member_ids"] = e.table->member_ids;
        obj["degenerate"] = e.table->degenerate;
        obj["candidates"] = score_table_json(*e.table);
    }
    return obj.dump();
}

std::string serialize_diagnostic(const Diagnostic& d) {
    ordered_json obj;
    obj["abstract_goal_id"] = d.abstract_goal_id;
    obj["specific_goal_id"] = d.specific_goal_id;
    obj["stage"] = d.stage;
    obj["message"] = d.message;
    return obj.dump();
}

std::string serialize_report(const RunReport& r) {
    ordered_json obj;
    obj["abstract_goals"] = r.abstract_goals;
    obj["generated_goals"] = r.generated_goals;
    obj["deduplicated_goals"] = r.deduplicated_goals;
    obj["accepted"] = r.accepted;
    obj["rejected"] = r.rejected;
    obj["failed"] = r.failed;
    obj["goal_type_errors"] = r.goal_type_errors;
    obj["upstream_calls"] = r.upstream_calls;
    obj["completion_cache_hits"] = r.completion_cache_hits;
    obj["embedding_cache_hits"] = r.embedding_cache_hits;
    obj["conserved"] = r.conserved();
    return obj.dump(2);
}

std::string serialize_generated_goal(const GeneratedGoal& g) {
    ordered_json obj;
    obj["id"] = g.goal.id;
    obj["abstract_goal_id"] = g.goal.abstract_goal_id;
    obj["constraint_type"] = std::string(to_string(g.goal.constraint.type));
    obj["constraint"] = g.goal.constraint.text;
    obj["specific_goal"] = g.goal.text;
    obj["goal_digest"] = g.completion_digest;
    return obj.dump();
}

std::vector<GeneratedGoal> read_generated_goals(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read goals file " + path.string());
    std::vector<GeneratedGoal> out;
    std::string line;
    std::size_t n = 0;
    const auto field = [&](const json& obj, const char* name) {
        auto it = obj.find(name);
        if (it == obj.end() || !it->is_string()) throw LoadError(n, name, "missing or not a string");
        return it->get<std::string>();
    };
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        const json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw LoadError(n, "record", "not a JSON object");
        GeneratedGoal g;
        g.goal.id = field(obj, "id");
        g.goal.abstract_goal_id = field(obj, "abstract_goal_id");
        const auto type = parse_constraint_type(field(obj, "constraint_type"));
        if (!type) throw LoadError(n, "constraint_type", "unknown type");
        g.goal.constraint = {*type, field(obj, "constraint")};
        g.goal.text = field(obj, "specific_goal");
        if (trim(g.goal.text).empty()) throw LoadError(n, "specific_goal", "empty");
        if (auto it = obj.find("goal_digest"); it != obj.end() && it->is_string()) g.completion_digest = it->get<std::string>();
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace plandistill
