#include "oracles.hpp"

#include "plandistill/corpus.hpp"
#include "plandistill/error.hpp"
#include "plandistill/random.hpp"
#include "plandistill/retrieval.hpp"
#include "plandistill/text.hpp"

#include <doctest.h>

#include <fstream>
#include <sstream>

using namespace plandistill;

namespace {

Corpus corpus_from(const std::string& text) {
    std::istringstream in(text);
    return parse_corpus(in);
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("tokenize lowercases and keeps inner hyphens and apostrophes") {
    CHECK(tokenize("Make a Sugar-free cake, don't burn it!") ==
          std::vector<std::string>{"make", "a", "sugar-free", "cake", "don't", "burn", "it"});
    CHECK(tokenize("--cake-- 'quoted'") == std::vector<std::string>{"cake", "quoted"});
    CHECK(tokenize("  ").empty());
    CHECK(tokenize("crème brûlée") == std::vector<std::string>{"crème", "brûlée"});
}

TEST_CASE("normalize_goal_text") {
    CHECK(normalize_goal_text("  Make a  Chocolate cake. ") == "make a chocolate cake");
    CHECK(normalize_goal_text("Make a cake?!") == "make a cake");
}

TEST_CASE("keywords drop stopwords and keep order") {
    CHECK(extract_keywords("Make a cake").keywords == std::vector<std::string>{"make", "cake"});
    CHECK(extract_keywords("Say Goodbye in Different Language").keywords ==
          std::vector<std::string>{"say", "goodbye", "different", "language"});
    CHECK(extract_keywords("the of and").empty());
    CHECK(extract_keywords("cake Cake CAKE").keywords == std::vector<std::string>{"cake"});
}

TEST_CASE("keyword extraction is idempotent over the fixture corpus") {
    const Corpus corpus = load_corpus(oracle::fixture("corpus5.jsonl"));
    for (const auto& g : corpus) {
        const KeywordSet once = extract_keywords(g.title);
        CHECK(extract_keywords(once.joined()) == once);
        for (const auto& s : g.steps) {
            const KeywordSet k = extract_keywords(s);
            CHECK(extract_keywords(k.joined()) == k);
        }
    }
}

TEST_CASE("builtin stopwords match the shipped list") {
    const auto& builtin = StopwordList::builtin();
    const auto file = StopwordList::load(oracle::source_dir() / "data" / "stopwords.txt");
    CHECK(builtin.size() == file.size());
    CHECK(builtin.version() == file.version());
    CHECK(builtin.contains("the"));
    CHECK_FALSE(builtin.contains("cake"));
}

TEST_CASE("custom stopwords change keywords") {
    const auto sw = StopwordList::from_words({"make"});
    CHECK(extract_keywords("Make a cake", sw).keywords == std::vector<std::string>{"a", "cake"});
}

TEST_CASE("corpus loads the fixture") {
    const Corpus corpus = load_corpus(oracle::fixture("corpus5.jsonl"));
    REQUIRE(corpus.size() == 5);
    CHECK(corpus[0].id == "g1");
    CHECK(corpus[0].title == "Make a cake");
    CHECK(corpus[0].steps.size() == 5);
    REQUIRE(corpus.find("g3") != nullptr);
    CHECK(corpus.find("g3")->title == "Fly a kite");
    CHECK(corpus.find("nope") == nullptr);
}

TEST_CASE("corpus errors name line and field") {
    SUBCASE("missing steps") {
        try {
            corpus_from(R"({"id":"a","title":"Make a cake","category":"Food"})" "\n");
            FAIL("expected LoadError");
        } catch (const LoadError& e) {
            CHECK(e.line() == 1);
            CHECK(e.field() == "steps");
        }
    }
    SUBCASE("bad json on line 2") {
        try {
            corpus_from(R"({"id":"a","title":"A","steps":["x"]})" "\n{oops\n");
            FAIL("expected LoadError");
        } catch (const LoadError& e) {
            CHECK(e.line() == 2);
        }
    }
    SUBCASE("duplicate id") {
        try {
            corpus_from(R"({"id":"a","title":"A","steps":["x"]})" "\n" R"({"id":"a","title":"B","steps":["y"]})" "\n");
            FAIL("expected LoadError");
        } catch (const LoadError& e) {
            CHECK(e.line() == 2);
            CHECK(e.field() == "id");
        }
    }
    SUBCASE("title must be a string") {
        CHECK_THROWS_AS(corpus_from(R"({"id":"a","title":3,"steps":["x"]})"), LoadError);
    }
}

TEST_CASE("corpus without ids falls back to line numbers") {
    const Corpus c = corpus_from(R"({"title":"A","steps":["x"]})" "\n\n" R"({"title":"B","steps":["y"]})" "\n");
    REQUIRE(c.size() == 2);
    CHECK(c[0].id == "1");
    CHECK(c[1].id == "3");
    CHECK(c[0].category.empty());
}

TEST_CASE("corpus round-trips byte for byte") {
    const std::string text = read_file(oracle::fixture("corpus5.jsonl"));
    std::ostringstream out;
    write_corpus(out, corpus_from(text));
    CHECK(out.str() == text);
}

TEST_CASE("bm25 worked examples") {
    const Corpus two = corpus_from(R"({"id":"b","title":"Fly a kite","steps":["x"]})" "\n" R"({"id":"a","title":"Make a cake","steps":["y"]})");
    const Bm25Index idx(two);
    auto hits = idx.retrieve(extract_keywords("Make a cake"), 5);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].goal->title == "Make a cake");
    CHECK(hits[0].score > 0.0);
    CHECK(hits[1].score == 0.0);

    const Corpus one = corpus_from(R"({"id":"z","title":"Make a cake","steps":["y"]})");
    const Bm25Index single(one);
    hits = single.retrieve(extract_keywords("Bake a cake"), 2);
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].goal->id == "z");
}

TEST_CASE("bm25 errors") {
    const Corpus c = corpus_from(R"({"id":"a","title":"Make a cake","steps":["y"]})");
    const Bm25Index idx(c);
    CHECK_THROWS_AS(idx.retrieve(KeywordSet{}, 2), RetrievalError);
    CHECK_THROWS_AS(idx.retrieve(extract_keywords("cake"), 0), InputError);
    CHECK_THROWS_AS(Bm25Index(c, {0.0, 0.75}), InputError);
    CHECK_THROWS_AS(Bm25Index(c, {1.2, 1.5}), InputError);
}

TEST_CASE("bm25 ties break by id") {
    const Corpus c = corpus_from(R"({"id":"b","title":"Make a cake","steps":["y"]})" "\n" R"({"id":"a","title":"Make a cake","steps":["y"]})");
    const auto hits = Bm25Index(c).retrieve(extract_keywords("cake"), 2);
    CHECK(hits[0].goal->id == "a");
    CHECK(hits[1].goal->id == "b");
}

TEST_CASE("bm25 agrees with the exhaustive oracle on random corpora") {
    const std::vector<std::string> vocab = {"make", "cake", "bake", "bread", "fly", "kite", "clean", "floor",
                                            "write", "letter", "paint", "wall", "the", "a", "chocolate"};
    Rng rng(99);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<AbstractGoal> goals;
        const std::size_t n = 1 + rng.bounded(40);
        for (std::size_t d = 0; d < n; ++d) {
            std::string title;
            for (std::size_t w = 0, len = 1 + rng.bounded(5); w < len; ++w) title += vocab[rng.bounded(vocab.size())] + " ";
            goals.push_back({"d" + std::to_string(rng.bounded(1000)) + "_" + std::to_string(d), title, {"s"}, ""});
        }
        const Corpus corpus(goals);
        const Bm25Index idx(corpus);
        KeywordSet q;
        for (std::size_t w = 0, len = 1 + rng.bounded(3); w < len; ++w) {
            const auto& t = vocab[rng.bounded(vocab.size())];
            if (std::find(q.keywords.begin(), q.keywords.end(), t) == q.keywords.end()) q.keywords.push_back(t);
        }
        const std::size_t k = 1 + rng.bounded(n + 2);
        std::vector<std::string> got;
        for (const auto& h : idx.retrieve(q, k)) got.push_back(h.goal->id);
        CHECK(got == oracle::bm25_rank(corpus, q.keywords, k));
    }
}
