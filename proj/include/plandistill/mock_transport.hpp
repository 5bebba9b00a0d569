#pragma once

#include "plandistill/backend.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>

namespace plandistill {

struct MockOptions {
    std::uint64_t seed = 0;
    std::size_t dimension = 64;
    // digest -> completion text; consulted before the built-in responder.
    std::unordered_map<std::string, std::string> table;
    // When false, completions missing from the table come back empty.
    bool synthesize = true;
};

// Reads a mock table: one JSON object {"digest": ..., "text": ...} per line.
std::unordered_map<std::string, std::string> load_mock_table(const std::filesystem::path& path);

// Deterministic stand-in for an OpenAI-style server. Every response is a pure
// function of (seed, request digest):
//
//  - completions: the table entry for the digest, otherwise a synthesized
//    reply. Goal prompts get 2-3 constraint/goal pairs for the target
//    abstract goal; script prompts get a numbered script adapted from the
//    first example, which mentions the constraint most of the time and is
//    occasionally unusable.
//  - embeddings: a unit vector of `dimension` components, the normalized sum
//    of seeded per-keyword vectors and a small per-text vector.
class MockTransport : public Transport {
public:
    explicit MockTransport(MockOptions options = {}) : options_(std::move(options)) {}

    UpstreamResponse post(const UpstreamRequest& request) override;

    std::string completion_for(const std::string& prompt, const std::string& digest) const;
    std::vector<double> embedding_for(const std::string& text) const;
    const MockOptions& options() const noexcept { return options_; }

private:
    MockOptions options_;
};

}  // namespace plandistill
