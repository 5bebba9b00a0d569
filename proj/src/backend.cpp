#include "plandistill/backend.hpp"

#include "plandistill/log.hpp"
#include "plandistill/random.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace plandistill {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Requests

void CompletionRequest::validate() const {
    if (prompt.empty()) throw InputError("completion prompt is empty");
    if (!(temperature >= 0.0)) throw InputError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw InputError("top_p must lie in (0, 1]");
    if (max_tokens <= 0) throw InputError("max_tokens must be positive");
    if (!std::isfinite(presence_penalty) || !std::isfinite(frequency_penalty)) {
        throw InputError("penalties must be finite");
    }
}

std::string CompletionRequest::digest() const {
    // json objects keep keys sorted, which makes this rendering canonical.
    const json canon = {
        {"kind", "completion"},
        {"model", model_tag},
        {"prompt", prompt},
        {"temperature", temperature},
        {"top_p", top_p},
        {"max_tokens", max_tokens},
        {"presence_penalty", presence_penalty},
        {"frequency_penalty", frequency_penalty},
        {"sample_index", sample_index},
    };
    return sha256_hex(canon.dump());
}

std::string CompletionRequest::wire_body() const {
    nlohmann::ordered_json body;
    body["model"] = model_tag;
    body["prompt"] = prompt;
    body["temperature"] = temperature;
    body["top_p"] = top_p;
    body["max_tokens"] = max_tokens;
    body["presence_penalty"] = presence_penalty;
    body["frequency_penalty"] = frequency_penalty;
    return body.dump();
}

std::string embedding_digest(const std::string& model, const std::string& text) {
    const json canon = {{"kind", "embedding"}, {"model", model}, {"input", text}};
    return sha256_hex(canon.dump());
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw InputError("cosine: dimension mismatch (" + std::to_string(a.dimension()) +
                         " vs " + std::to_string(b.dimension()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) {
        log::warn("cosine with a zero vector; scoring it as 0");
        return 0.0;
    }
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// InstrumentedTransport

UpstreamResponse InstrumentedTransport::post(const UpstreamRequest& request) {
    calls_.fetch_add(1);
    const std::size_t now = in_flight_.fetch_add(1) + 1;
    std::size_t seen = max_concurrent_.load();
    while (now > seen && !max_concurrent_.compare_exchange_weak(seen, now)) {
    }
    {
        std::lock_guard lock(mu_);
        digests_.insert(digests_.end(), request.digests.begin(), request.digests.end());
    }
    struct Exit {
        std::atomic<std::size_t>& n;
        ~Exit() { n.fetch_sub(1); }
    } exit{in_flight_};
    return inner_->post(request);
}

std::vector<std::string> InstrumentedTransport::seen_digests() const {
    std::lock_guard lock(mu_);
    return digests_;
}

void InstrumentedTransport::reset() {
    std::lock_guard lock(mu_);
    digests_.clear();
    calls_ = 0;
    max_concurrent_ = 0;
}

// ---------------------------------------------------------------------------
// ResponseCache

namespace {

bool is_hex_digest(const std::string& d) {
    return !d.empty() && std::all_of(d.begin(), d.end(), [](char c) {
        return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
    });
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(*dir_, ec);
    if (ec) throw ConfigError("cannot create cache directory " + dir_->string() + ": " + ec.message());
}

std::optional<std::string> ResponseCache::get(const std::string& digest) const {
    {
        std::shared_lock lock(mu_);
        if (auto it = memory_.find(digest); it != memory_.end()) return it->second;
    }
    if (!dir_ || !is_hex_digest(digest)) return std::nullopt;
    std::ifstream in(*dir_ / digest, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    std::unique_lock lock(mu_);
    auto [it, _] = memory_.emplace(digest, buf.str());
    return it->second;
}

bool ResponseCache::contains(const std::string& digest) const { return get(digest).has_value(); }

void ResponseCache::put(const std::string& digest, const std::string& body) {
    std::unique_lock lock(mu_);
    if (!memory_.emplace(digest, body).second) return;
    if (!dir_) return;
    if (!is_hex_digest(digest)) throw InputError("cache key is not a hex digest: " + digest);
    const auto final_path = *dir_ / digest;
    if (std::filesystem::exists(final_path)) return;
    std::ostringstream tmp_name;
    tmp_name << digest << ".tmp." << std::this_thread::get_id();
    const auto tmp_path = *dir_ / tmp_name.str();
    {
        std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write cache entry " + tmp_path.string());
        out << body;
        if (!out) throw Error("cannot write cache entry " + tmp_path.string());
    }
    std::filesystem::rename(tmp_path, final_path);
}

std::size_t ResponseCache::size() const {
    if (!dir_) {
        std::shared_lock lock(mu_);
        return memory_.size();
    }
    std::size_t n = 0;
    for (const auto& e : std::filesystem::directory_iterator(*dir_)) {
        if (e.is_regular_file() && is_hex_digest(e.path().filename().string())) ++n;
    }
    return n;
}

// ---------------------------------------------------------------------------
// Retry and limiter

std::chrono::milliseconds RetryPolicy::delay(int attempt, double jitter) const {
    const double full = static_cast<double>(base_delay.count()) * std::pow(factor, attempt - 1);
    return std::chrono::milliseconds(static_cast<long long>(full * (0.5 + 0.5 * jitter)));
}

InFlightLimiter::InFlightLimiter(std::size_t limit) : limit_(limit) {
    if (limit_ == 0) throw ConfigError("max_in_flight must be positive");
}

void InFlightLimiter::acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return used_ < limit_; });
    ++used_;
}

void InFlightLimiter::release() {
    {
        std::lock_guard lock(mu_);
        --used_;
    }
    cv_.notify_one();
}

// ---------------------------------------------------------------------------
// Backend

namespace {

std::string completion_text(const std::string& body) {
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded()) throw BackendError("completion response is not JSON", 200, 1);
    const auto choices = parsed.find("choices");
    if (choices == parsed.end() || !choices->is_array() || choices->empty()) {
        throw BackendError("completion response has no choices", 200, 1);
    }
    const auto& first = (*choices)[0];
    if (auto t = first.find("text"); t != first.end() && t->is_string()) return t->get<std::string>();
    throw BackendError("completion response choice has no text", 200, 1);
}

std::vector<double> embedding_values(const json& arr) {
    if (!arr.is_array()) throw BackendError("embedding is not an array", 200, 1);
    std::vector<double> v;
    v.reserve(arr.size());
    for (const auto& x : arr) {
        if (!x.is_number()) throw BackendError("embedding holds a non-number", 200, 1);
        const double d = x.get<double>();
        if (!std::isfinite(d)) throw BackendError("embedding holds a non-finite value", 200, 1);
        v.push_back(d);
    }
    if (v.empty()) throw BackendError("embedding is empty", 200, 1);
    return v;
}

void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

}  // namespace

Backend::Backend(std::shared_ptr<Transport> transport, std::shared_ptr<ResponseCache> cache,
                 BackendOptions options)
    : transport_(std::move(transport)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      options_(std::move(options)),
      limiter_(options_.max_in_flight) {
    if (!transport_) throw ConfigError("backend has no transport");
    if (options_.retry.max_attempts < 1) throw ConfigError("retry budget must be at least 1");
    if (options_.embedding_batch == 0) options_.embedding_batch = 1;
    if (!options_.sleep) options_.sleep = default_sleep;
}

std::string Backend::call_with_retry(const UpstreamRequest& request) {
    const std::string key = request.digests.empty() ? request.body : request.digests.front();
    Rng jitter(derive_seed(options_.jitter_seed, key));
    const int budget = options_.retry.max_attempts;
    for (int attempt = 1;; ++attempt) {
        UpstreamResponse resp;
        std::string failure;
        bool transient = false;
        upstream_calls_.fetch_add(1);
        try {
            InFlightLimiter::Guard guard(limiter_);
            resp = transport_->post(request);
        } catch (const TransportError& e) {
            failure = e.what();
            transient = true;
        }
        if (!transient) {
            if (resp.status >= 200 && resp.status < 300) return resp.body;
            if (resp.status != 429) {
                throw BackendError(request.endpoint + ": upstream returned HTTP " +
                                       std::to_string(resp.status),
                                   resp.status, attempt);
            }
            failure = "rate limited (HTTP 429)";
        }
        if (attempt >= budget) {
            throw BackendError(request.endpoint + ": giving up after " + std::to_string(attempt) +
                                   " attempts: " + failure,
                               transient ? 0 : resp.status, attempt);
        }
        retries_.fetch_add(1);
        const auto wait = options_.retry.delay(attempt, jitter.uniform01());
        log::info(request.endpoint + ": " + failure + "; retrying in " +
                  std::to_string(wait.count()) + "ms");
        options_.sleep(wait);
    }
}

Completion Backend::complete(CompletionRequest request) {
    if (request.model_tag.empty()) request.model_tag = options_.completion_model;
    request.validate();
    const std::string digest = request.digest();

    if (auto hit = cache_->get(digest)) {
        completion_hits_.fetch_add(1);
        return {completion_text(*hit), digest, true};
    }

    std::promise<std::string> promise;
    {
        std::unique_lock lock(pending_mu_);
        if (auto it = pending_.find(digest); it != pending_.end()) {
            auto fut = it->second;
            lock.unlock();
            completion_hits_.fetch_add(1);
            return {completion_text(fut.get()), digest, true};
        }
        // Re-check under the lock: the previous leader may have just finished.
        if (auto hit = cache_->get(digest)) {
            completion_hits_.fetch_add(1);
            return {completion_text(*hit), digest, true};
        }
        pending_.emplace(digest, promise.get_future().share());
    }

    try {
        const std::string body = call_with_retry({"completions", request.wire_body(), {digest}});
        std::string text = completion_text(body);
        cache_->put(digest, body);
        {
            std::lock_guard lock(pending_mu_);
            pending_.erase(digest);
        }
        promise.set_value(body);
        return {std::move(text), digest, false};
    } catch (...) {
        {
            std::lock_guard lock(pending_mu_);
            pending_.erase(digest);
        }
        promise.set_exception(std::current_exception());
        throw;
    }
}

void Backend::check_dimension(std::size_t dim) {
    std::lock_guard lock(dim_mu_);
    if (!dimension_) {
        dimension_ = dim;
    } else if (*dimension_ != dim) {
        throw BackendError("embedding dimension changed from " + std::to_string(*dimension_) +
                               " to " + std::to_string(dim),
                           200, 1);
    }
}

std::optional<std::size_t> Backend::embedding_dimension() const {
    std::lock_guard lock(dim_mu_);
    return dimension_;
}

EmbeddingVector Backend::decode_embedding(const std::string& body, const std::string& digest) {
    json parsed = json::parse(body, nullptr, false);
    if (parsed.is_discarded() || !parsed.contains("embedding")) {
        throw BackendError("corrupt embedding cache entry " + digest, 200, 1);
    }
    EmbeddingVector v{embedding_values(parsed["embedding"])};
    check_dimension(v.dimension());
    return v;
}

std::vector<EmbeddingVector> Backend::embed(const std::vector<std::string>& texts) {
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (texts[i].empty()) throw InputError("embed: text at position " + std::to_string(i) + " is empty");
    }
    std::vector<std::string> digests;
    digests.reserve(texts.size());
    for (const auto& t : texts) digests.push_back(embedding_digest(options_.embedding_model, t));

    // Per unique digest: cached body, someone else's pending call, or ours.
    std::unordered_map<std::string, std::string> bodies;
    std::unordered_map<std::string, std::shared_future<std::string>> waits;
    std::vector<std::size_t> lead;  // first position of each digest we fetch
    std::unordered_map<std::string, std::promise<std::string>> promises;
    {
        std::unique_lock lock(pending_mu_);
        for (std::size_t i = 0; i < texts.size(); ++i) {
            const auto& d = digests[i];
            if (bodies.count(d) || waits.count(d) || promises.count(d)) continue;
            if (auto hit = cache_->get(d)) {
                embedding_hits_.fetch_add(1);
                bodies.emplace(d, std::move(*hit));
            } else if (auto it = pending_.find(d); it != pending_.end()) {
                embedding_hits_.fetch_add(1);
                waits.emplace(d, it->second);
            } else {
                auto& p = promises[d];
                pending_.emplace(d, p.get_future().share());
                lead.push_back(i);
            }
        }
    }

    auto fail_remaining = [&](std::exception_ptr err) {
        std::lock_guard lock(pending_mu_);
        for (auto& [d, p] : promises) {
            if (bodies.count(d)) continue;
            pending_.erase(d);
            p.set_exception(err);
        }
    };

    try {
        for (std::size_t start = 0; start < lead.size(); start += options_.embedding_batch) {
            const std::size_t stop = std::min(lead.size(), start + options_.embedding_batch);
            nlohmann::ordered_json body;
            body["model"] = options_.embedding_model;
            body["input"] = json::array();
            UpstreamRequest req{"embeddings", {}, {}};
            for (std::size_t j = start; j < stop; ++j) {
                body["input"].push_back(texts[lead[j]]);
                req.digests.push_back(digests[lead[j]]);
            }
            req.body = body.dump();

            const json parsed = json::parse(call_with_retry(req), nullptr, false);
            if (parsed.is_discarded() || !parsed.contains("data") || !parsed["data"].is_array()) {
                throw BackendError("embedding response has no data array", 200, 1);
            }
            const auto& data = parsed["data"];
            if (data.size() != stop - start) {
                throw BackendError("embedding response has " + std::to_string(data.size()) +
                                       " items for " + std::to_string(stop - start) + " inputs",
                                   200, 1);
            }
            std::vector<const json*> by_index(data.size(), nullptr);
            for (std::size_t j = 0; j < data.size(); ++j) {
                std::size_t idx = j;
                if (auto it = data[j].find("index"); it != data[j].end() && it->is_number_unsigned()) {
                    idx = it->get<std::size_t>();
                }
                if (idx >= by_index.size() || by_index[idx]) {
                    throw BackendError("embedding response has bad item indices", 200, 1);
                }
                by_index[idx] = &data[j];
            }
            for (std::size_t j = 0; j < by_index.size(); ++j) {
                const auto& item = *by_index[j];
                if (!item.contains("embedding")) throw BackendError("embedding item has no vector", 200, 1);
                const json entry = {{"embedding", json(embedding_values(item["embedding"]))}};
                const std::string& d = req.digests[j];
                std::string stored = entry.dump();
                cache_->put(d, stored);
                bodies.emplace(d, stored);
                {
                    std::lock_guard lock(pending_mu_);
                    pending_.erase(d);
                }
                promises[d].set_value(std::move(stored));
            }
        }
    } catch (...) {
        fail_remaining(std::current_exception());
        throw;
    }

    for (auto& [d, fut] : waits) bodies.emplace(d, fut.get());

    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) out.push_back(decode_embedding(bodies.at(digests[i]), digests[i]));
    return out;
}

BackendStats Backend::stats() const {
    return {upstream_calls_.load(), completion_hits_.load(), embedding_hits_.load(), retries_.load()};
}

}  // namespace plandistill
