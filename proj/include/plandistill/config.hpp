#pragma once

#include "plandistill/backend.hpp"
#include "plandistill/dataset.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>

namespace plandistill {

struct BackendConfig {
    std::string kind = "mock";  // "mock" or "http"
    std::string base_url = "https://api.openai.com/v1";
    std::string model = "text-davinci-002";
    std::string embedding_model = "text-embedding-ada-002";
    std::string api_key_env = "OPENAI_API_KEY";
    std::string cache_dir;  // empty: in-memory cache only
    std::size_t mock_dimension = 64;
    std::string mock_table;
    int max_attempts = 5;
    long base_delay_ms = 1000;
};

struct PipelineConfig {
    std::size_t k = 2;
    std::size_t goal_examples = 3;
    std::size_t script_examples = 2;
    double delta = 0.05;
    std::uint64_t seed = 0;
    SplitSizes split;
    BackendConfig backend;
    std::size_t max_in_flight = 4;
    std::size_t workers = 1;

    // Sampling parameters for every completion.
    double temperature = 1.0;
    double top_p = 1.0;
    int max_tokens = 512;
    double presence_penalty = 0.0;
    double frequency_penalty = 0.0;

    // Resource overrides; empty means the built-in copy.
    std::string stopwords;
    std::string example_pool;
    std::string goal_template;
    std::string script_template;

    // Throws ConfigError on out-of-range values.
    void validate() const;
};

// Sets one key of the flat config format. Keys match the field names above;
// backend fields take a "backend." prefix (e.g. backend.base_url), split sizes
// are split.train ("rest" or a count), split.validation and split.test.
// Throws ConfigError for unknown keys or unparsable values.
void apply_config_entry(PipelineConfig& config, std::string_view key, std::string_view value);

// "key = value" lines; blank lines and '#' comments are skipped.
PipelineConfig load_config(const std::filesystem::path& path);
void load_config_into(PipelineConfig& config, const std::filesystem::path& path);

// Transport, cache and backend as described by the config.
struct BackendBundle {
    std::shared_ptr<Transport> upstream;
    std::shared_ptr<InstrumentedTransport> instrumented;
    std::shared_ptr<ResponseCache> cache;
    std::shared_ptr<Backend> backend;
};

BackendBundle make_backend(const PipelineConfig& config);
// Same, over a caller-supplied transport (used by tests).
BackendBundle make_backend(const PipelineConfig& config, std::shared_ptr<Transport> upstream);

}  // namespace plandistill
