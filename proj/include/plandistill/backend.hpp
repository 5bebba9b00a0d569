#pragma once

#include "plandistill/error.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace plandistill {

// Sampling parameters for one completion. Defaults are the script-generation
// settings used for distillation.
struct CompletionRequest {
    std::string prompt;
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 512;
    double presence_penalty = 0.0;
    double frequency_penalty = 0.0;
    // Distinguishes the K over-generation samples. Part of the digest, never
    // sent upstream.
    std::uint32_t sample_index = 0;
    std::string model_tag;

    // Throws InputError when a field is out of range.
    void validate() const;
    // SHA-256 over a canonical JSON rendering of every field above.
    std::string digest() const;
    // Body of the POST to <base_url>/completions.
    std::string wire_body() const;
};

struct Completion {
    std::string text;
    std::string request_digest;
    bool from_cache = false;
};

struct EmbeddingVector {
    std::vector<double> values;

    std::size_t dimension() const noexcept { return values.size(); }
    bool operator==(const EmbeddingVector&) const = default;
};

// Cosine similarity; 0 when either side has zero norm (a warning is logged).
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

std::string embedding_digest(const std::string& model, const std::string& text);

// ---------------------------------------------------------------------------
// Transport

struct UpstreamRequest {
    std::string endpoint;  // "completions" or "embeddings"
    std::string body;      // JSON payload as sent on the wire
    // Per-item request digests: one for a completion, one per input text for
    // an embedding batch. Not part of the wire payload.
    std::vector<std::string> digests;
};

struct UpstreamResponse {
    int status = 0;
    std::string body;
};

// Connection-level failure (refused, reset, timed out). Retried.
class TransportError : public Error {
public:
    using Error::Error;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual UpstreamResponse post(const UpstreamRequest& request) = 0;
};

// Wraps another transport and records traffic. Used by tests and by the CLI
// run report.
class InstrumentedTransport : public Transport {
public:
    explicit InstrumentedTransport(std::shared_ptr<Transport> inner) : inner_(std::move(inner)) {}

    UpstreamResponse post(const UpstreamRequest& request) override;

    std::size_t calls() const noexcept { return calls_.load(); }
    std::size_t max_concurrent() const noexcept { return max_concurrent_.load(); }
    std::vector<std::string> seen_digests() const;
    void reset();

private:
    std::shared_ptr<Transport> inner_;
    std::atomic<std::size_t> calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> max_concurrent_{0};
    mutable std::mutex mu_;
    std::vector<std::string> digests_;
};

// ---------------------------------------------------------------------------
// Cache

// Append-only content-addressed store. With a directory, every entry is a
// file named by its hex digest; without one it
// lives in memory only. Completion entries hold the raw response body,
// embedding entries one {"embedding": [...]} object per input text. Reads are
// concurrent, writes are serialized, and a process always sees its own writes.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<std::string> get(const std::string& digest) const;
    // First write wins; later puts for the same digest are ignored.
    void put(const std::string& digest, const std::string& body);
    bool contains(const std::string& digest) const;
    std::size_t size() const;
    const std::optional<std::filesystem::path>& directory() const noexcept { return dir_; }

private:
    std::optional<std::filesystem::path> dir_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::string, std::string> memory_;
};

// ---------------------------------------------------------------------------
// Backend

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double factor = 2.0;

    // Delay before attempt `attempt + 1`: base * factor^(attempt-1), scaled
    // into [0.5, 1.0] of that by `jitter` in [0, 1).
    std::chrono::milliseconds delay(int attempt, double jitter) const;
};

// Counting limit on outstanding upstream calls.
class InFlightLimiter {
public:
    explicit InFlightLimiter(std::size_t limit);

    void acquire();
    void release();
    std::size_t limit() const noexcept { return limit_; }

    class Guard {
    public:
        explicit Guard(InFlightLimiter& l) : l_(l) { l_.acquire(); }
        ~Guard() { l_.release(); }
        Guard(const Guard&) = delete;
        Guard& operator=(const Guard&) = delete;

    private:
        InFlightLimiter& l_;
    };

private:
    std::size_t limit_;
    std::size_t used_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

class Embedder {
public:
    virtual ~Embedder() = default;
    // One vector per input, in input order.
    virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

struct BackendOptions {
    std::string completion_model = "text-davinci-002";
    std::string embedding_model = "text-embedding-ada-002";
    RetryPolicy retry;
    std::size_t max_in_flight = 4;
    std::size_t embedding_batch = 64;
    std::uint64_t jitter_seed = 0;
    // Replaced in tests to skip real waiting.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct BackendStats {
    std::size_t upstream_calls = 0;
    std::size_t completion_cache_hits = 0;
    std::size_t embedding_cache_hits = 0;
    std::size_t retries = 0;
};

// Completion and embedding access with caching, retry and a concurrency
// limit. Safe to share between threads.
class Backend : public Embedder {
public:
    Backend(std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache,
            BackendOptions options = {});

    // An empty model_tag is filled with the configured completion model.
    Completion complete(CompletionRequest request);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

    BackendStats stats() const;
    const BackendOptions& options() const noexcept { return options_; }
    ResponseCache& cache() noexcept { return *cache_; }
    std::optional<std::size_t> embedding_dimension() const;

private:
    std::string call_with_retry(const UpstreamRequest& request);
    EmbeddingVector decode_embedding(const std::string& body, const std::string& digest);
    void check_dimension(std::size_t dim);

    std::shared_ptr<Transport> transport_;
    std::shared_ptr<ResponseCache> cache_;
    BackendOptions options_;
    InFlightLimiter limiter_;

    // Collapses concurrent requests for one digest into a single upstream call.
    std::mutex pending_mu_;
    std::unordered_map<std::string, std::shared_future<std::string>> pending_;

    mutable std::mutex dim_mu_;
    std::optional<std::size_t> dimension_;

    std::atomic<std::size_t> upstream_calls_{0};
    std::atomic<std::size_t> completion_hits_{0};
    std::atomic<std::size_t> embedding_hits_{0};
    std::atomic<std::size_t> retries_{0};
};

}  // namespace plandistill
