#include "plandistill/backend.hpp"
#include "plandistill/mock_transport.hpp"

#include <nlohmann/json.hpp>

#include <doctest.h>

#include <deque>
#include <filesystem>
#include <thread>

using namespace plandistill;
using nlohmann::json;

namespace {

MockOptions seeded(std::uint64_t seed) {
    MockOptions o;
    o.seed = seed;
    return o;
}

std::string completion_body(const std::string& text) {
    return json{{"choices", json::array({{{"index", 0}, {"text", text}}})}}.dump();
}

// Replays a fixed list of outcomes, then answers 200 with "ok".
class ScriptedTransport : public Transport {
public:
    struct Step {
        int status;
        bool throw_transport = false;
    };
    explicit ScriptedTransport(std::deque<Step> steps) : steps_(std::move(steps)) {}

    UpstreamResponse post(const UpstreamRequest&) override {
        std::lock_guard lock(mu_);
        ++calls;
        if (steps_.empty()) return {200, completion_body("ok")};
        const Step s = steps_.front();
        steps_.pop_front();
        if (s.throw_transport) throw TransportError("connection reset");
        return {s.status, s.status == 200 ? completion_body("ok") : R"({"error":"x"})"};
    }

    int calls = 0;

private:
    std::mutex mu_;
    std::deque<Step> steps_;
};

class SlowTransport : public Transport {
public:
    UpstreamResponse post(const UpstreamRequest& r) override {
        std::this_thread::sleep_for(std::chrono::milliseconds(15));
        return inner_.post(r);
    }

private:
    MockTransport inner_;
};

// Embeddings whose dimension grows with every call.
class GrowingEmbeddings : public Transport {
public:
    UpstreamResponse post(const UpstreamRequest& r) override {
        const json body = json::parse(r.body);
        json data = json::array();
        for (std::size_t i = 0; i < body["input"].size(); ++i) {
            data.push_back({{"index", i}, {"embedding", std::vector<double>(4 + calls, 1.0)}});
        }
        ++calls;
        return {200, json{{"data", data}}.dump()};
    }
    std::size_t calls = 0;
};

struct Recorded {
    std::vector<std::chrono::milliseconds> sleeps;
};

BackendOptions fast_options(Recorded* rec = nullptr) {
    BackendOptions o;
    o.sleep = [rec](std::chrono::milliseconds d) {
        if (rec) rec->sleeps.push_back(d);
    };
    return o;
}

CompletionRequest request(const std::string& prompt, std::uint32_t sample = 0) {
    CompletionRequest r;
    r.prompt = prompt;
    r.sample_index = sample;
    r.model_tag = "m";
    return r;
}

struct TempDir {
    std::filesystem::path path;
    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("pd-test-" + std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

}  // namespace

TEST_CASE("request defaults and validation") {
    CompletionRequest r;
    CHECK(r.temperature == 1.0);
    CHECK(r.top_p == 1.0);
    CHECK(r.max_tokens == 512);
    CHECK(r.presence_penalty == 0.0);
    CHECK(r.frequency_penalty == 0.0);
    CHECK_THROWS_AS(r.validate(), InputError);  // empty prompt
    r.prompt = "p";
    r.validate();
    r.top_p = 0.0;
    CHECK_THROWS_AS(r.validate(), InputError);
    r.top_p = 1.0;
    r.temperature = -0.1;
    CHECK_THROWS_AS(r.validate(), InputError);
    r.temperature = 1.0;
    r.max_tokens = 0;
    CHECK_THROWS_AS(r.validate(), InputError);
}

TEST_CASE("digest covers every field and the wire body omits sample_index") {
    const auto base = request("hello");
    CHECK(base.digest() == request("hello").digest());
    CHECK(base.digest().size() == 64);
    CHECK(base.digest() != request("hello", 1).digest());
    CHECK(base.digest() != request("hello!").digest());
    auto t = base;
    t.temperature = 0.7;
    CHECK(t.digest() != base.digest());
    auto m = base;
    m.model_tag = "other";
    CHECK(m.digest() != base.digest());

    const json wire = json::parse(request("hello", 3).wire_body());
    CHECK(wire["prompt"] == "hello");
    CHECK(wire["model"] == "m");
    CHECK(wire["max_tokens"] == 512);
    CHECK_FALSE(wire.contains("sample_index"));
    CHECK(request("hello", 3).wire_body() == request("hello", 0).wire_body());
}

TEST_CASE("cosine") {
    CHECK(cosine({{1, 0}}, {{1, 0}}) == doctest::Approx(1.0));
    CHECK(cosine({{1, 0}}, {{0, 1}}) == doctest::Approx(0.0));
    CHECK(cosine({{1, 0}}, {{-2, 0}}) == doctest::Approx(-1.0));
    CHECK(cosine({{0, 0}}, {{1, 0}}) == 0.0);
    CHECK_THROWS_AS(cosine({{1, 0}}, {{1, 0, 0}}), InputError);
}

TEST_CASE("retry delays double with equal jitter") {
    RetryPolicy p;
    CHECK(p.delay(1, 0.0).count() == 500);
    CHECK(p.delay(1, 0.999999).count() >= 999);
    CHECK(p.delay(2, 0.0).count() == 1000);
    CHECK(p.delay(3, 0.0).count() == 2000);
}

TEST_CASE("mock table entries are served by digest") {
    const auto req = request("what is in the table");
    MockOptions mo;
    mo.table[req.digest()] = "from the table";
    Backend b(std::make_shared<MockTransport>(mo), std::make_shared<ResponseCache>(), fast_options());
    CHECK(b.complete(req).text == "from the table");
    CHECK(b.complete(request("something else")).text != "from the table");
}

TEST_CASE("mock is a pure function of seed and request") {
    const auto req = request("Abstract Goal: Make a cake\nConstraint:");
    MockTransport a(seeded(5)), b(seeded(5)), c(seeded(6));
    CHECK(a.completion_for(req.prompt, req.digest()) == b.completion_for(req.prompt, req.digest()));
    CHECK(a.embedding_for("x") == b.embedding_for("x"));
    CHECK(a.embedding_for("x") != c.embedding_for("x"));
    CHECK(a.embedding_for("x").size() == 64);
}

TEST_CASE("cache: second identical request is served locally") {
    auto inst = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>());
    Backend b(inst, std::make_shared<ResponseCache>(), fast_options());
    const auto first = b.complete(request("p"));
    const auto second = b.complete(request("p"));
    CHECK_FALSE(first.from_cache);
    CHECK(second.from_cache);
    CHECK(first.text == second.text);
    CHECK(inst->calls() == 1);
    b.complete(request("p", 1));
    CHECK(inst->calls() == 2);
    CHECK(b.stats().completion_cache_hits == 1);
}

TEST_CASE("cache directory survives the process") {
    TempDir dir;
    std::string text;
    {
        auto inst = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>());
        Backend b(inst, std::make_shared<ResponseCache>(dir.path), fast_options());
        text = b.complete(request("persist me")).text;
        b.embed({"alpha", "beta"});
        CHECK(inst->calls() == 2);
    }
    auto inst = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>());
    Backend b(inst, std::make_shared<ResponseCache>(dir.path), fast_options());
    const auto again = b.complete(request("persist me"));
    CHECK(again.text == text);
    CHECK(again.from_cache);
    b.embed({"beta", "alpha"});
    CHECK(inst->calls() == 0);
}

TEST_CASE("cache is append-only") {
    ResponseCache c;
    c.put("d", "one");
    c.put("d", "two");
    CHECK(c.get("d") == "one");
    CHECK(c.size() == 1);
    CHECK_FALSE(c.get("missing"));
}

TEST_CASE("429 twice then success takes three attempts") {
    auto t = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{{429}, {429}});
    Recorded rec;
    Backend b(t, std::make_shared<ResponseCache>(), fast_options(&rec));
    CHECK(b.complete(request("x")).text == "ok");
    CHECK(t->calls == 3);
    REQUIRE(rec.sleeps.size() == 2);
    CHECK(rec.sleeps[0].count() >= 500);
    CHECK(rec.sleeps[0].count() <= 1000);
    CHECK(rec.sleeps[1].count() >= 1000);
    CHECK(rec.sleeps[1].count() <= 2000);
    CHECK(b.stats().retries == 2);
}

TEST_CASE("transport errors are retried") {
    auto t = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{{0, true}});
    Backend b(t, std::make_shared<ResponseCache>(), fast_options());
    CHECK(b.complete(request("x")).text == "ok");
    CHECK(t->calls == 2);
}

TEST_CASE("persistent 429 gives up after the attempt budget") {
    std::deque<ScriptedTransport::Step> steps(10, {429});
    auto t = std::make_shared<ScriptedTransport>(steps);
    Backend b(t, std::make_shared<ResponseCache>(), fast_options());
    try {
        b.complete(request("x"));
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.status() == 429);
        CHECK(e.attempts() == 5);
    }
    CHECK(t->calls == 5);
}

TEST_CASE("other statuses fail at once") {
    for (int status : {400, 401, 500, 503}) {
        auto t = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{{status}});
        Backend b(t, std::make_shared<ResponseCache>(), fast_options());
        try {
            b.complete(request("x"));
            FAIL("expected BackendError");
        } catch (const BackendError& e) {
            CHECK(e.status() == status);
            CHECK(e.attempts() == 1);
        }
        CHECK(t->calls == 1);
    }
}

TEST_CASE("failed calls are not cached") {
    auto t = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{{500}});
    Backend b(t, std::make_shared<ResponseCache>(), fast_options());
    CHECK_THROWS_AS(b.complete(request("x")), BackendError);
    CHECK(b.complete(request("x")).text == "ok");
}

TEST_CASE("in-flight limit holds under load") {
    auto inst = std::make_shared<InstrumentedTransport>(std::make_shared<SlowTransport>());
    auto opts = fast_options();
    opts.max_in_flight = 3;
    Backend b(inst, std::make_shared<ResponseCache>(), opts);
    std::vector<std::jthread> threads;
    for (int i = 0; i < 12; ++i) {
        threads.emplace_back([&b, i] { b.complete(request("prompt " + std::to_string(i))); });
    }
    threads.clear();
    CHECK(inst->calls() == 12);
    CHECK(inst->max_concurrent() <= 3);
    CHECK(inst->max_concurrent() >= 2);
}

TEST_CASE("concurrent identical requests share one upstream call") {
    auto inst = std::make_shared<InstrumentedTransport>(std::make_shared<SlowTransport>());
    Backend b(inst, std::make_shared<ResponseCache>(), fast_options());
    std::vector<std::string> texts(8);
    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < 8; ++i) threads.emplace_back([&, i] { texts[i] = b.complete(request("same")).text; });
    }
    CHECK(inst->calls() == 1);
    for (const auto& t : texts) CHECK(t == texts[0]);
}

TEST_CASE("embed deduplicates and keeps input order") {
    auto inst = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>());
    Backend b(inst, std::make_shared<ResponseCache>(), fast_options());
    const auto v = b.embed({"a", "b", "a"});
    REQUIRE(v.size() == 3);
    CHECK(v[0] == v[2]);
    CHECK_FALSE(v[0] == v[1]);
    CHECK(inst->calls() == 1);
    CHECK(inst->seen_digests().size() == 2);
    CHECK(b.embedding_dimension() == 64);
}

TEST_CASE("embed batches large inputs") {
    auto inst = std::make_shared<InstrumentedTransport>(std::make_shared<MockTransport>());
    auto opts = fast_options();
    opts.embedding_batch = 4;
    Backend b(inst, std::make_shared<ResponseCache>(), opts);
    std::vector<std::string> texts;
    for (int i = 0; i < 10; ++i) texts.push_back("t" + std::to_string(i));
    CHECK(b.embed(texts).size() == 10);
    CHECK(inst->calls() == 3);
}

TEST_CASE("embed rejects empty text with its position") {
    Backend b(std::make_shared<MockTransport>(), std::make_shared<ResponseCache>(), fast_options());
    try {
        b.embed({"a", ""});
        FAIL("expected InputError");
    } catch (const InputError& e) {
        CHECK(std::string(e.what()).find("position 1") != std::string::npos);
    }
}

TEST_CASE("embedding dimension change is an error") {
    Backend b(std::make_shared<GrowingEmbeddings>(), std::make_shared<ResponseCache>(), fast_options());
    CHECK(b.embed({"a"})[0].dimension() == 4);
    CHECK_THROWS_AS(b.embed({"b"}), BackendError);
}

TEST_CASE("mock answers unknown endpoints with 404") {
    MockTransport m;
    CHECK(m.post({"nope", "{}", {}}).status == 404);
}
