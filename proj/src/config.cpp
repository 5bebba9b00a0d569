#include "plandistill/config.hpp"

#include "plandistill/error.hpp"
#include "plandistill/http_transport.hpp"
#include "plandistill/mock_transport.hpp"
#include "plandistill/text.hpp"

#include <charconv>
#include <fstream>

namespace plandistill {

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("config: '" + std::string(key) + "' expects a number, got '" + v + "'");
    }
    return out;
}

double parse_real(std::string_view key, std::string_view value) {
    const std::string v = trim(value);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("trailing");
        return d;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + std::string(key) + "' expects a real number, got '" + v + "'");
    }
}

}  // namespace

void PipelineConfig::validate() const {
    if (k < 1) throw ConfigError("k must be at least 1");
    if (goal_examples < 1) throw ConfigError("goal_examples must be at least 1");
    if (script_examples < 1) throw ConfigError("script_examples must be at least 1");
    if (!(delta >= 0.0)) throw ConfigError("delta must be >= 0");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be at least 1");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    if (backend.kind != "mock" && backend.kind != "http") {
        throw ConfigError("backend must be 'mock' or 'http', got '" + backend.kind + "'");
    }
    if (backend.mock_dimension < 1) throw ConfigError("backend.mock_dimension must be positive");
    if (backend.max_attempts < 1) throw ConfigError("backend.max_attempts must be at least 1");
    if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
    if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
    if (max_tokens < 1) throw ConfigError("max_tokens must be positive");
}

void apply_config_entry(PipelineConfig& c, std::string_view key_in, std::string_view value_in) {
    const std::string key = trim(key_in);
    const std::string value = trim(value_in);
    auto& b = c.backend;
    if (key == "k") c.k = parse_number<std::size_t>(key, value);
    else if (key == "goal_examples") c.goal_examples = parse_number<std::size_t>(key, value);
    else if (key == "script_examples") c.script_examples = parse_number<std::size_t>(key, value);
    else if (key == "delta") c.delta = parse_real(key, value);
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "max_in_flight") c.max_in_flight = parse_number<std::size_t>(key, value);
    else if (key == "workers") c.workers = parse_number<std::size_t>(key, value);
    else if (key == "temperature") c.temperature = parse_real(key, value);
    else if (key == "top_p") c.top_p = parse_real(key, value);
    else if (key == "max_tokens") c.max_tokens = parse_number<int>(key, value);
    else if (key == "presence_penalty") c.presence_penalty = parse_real(key, value);
    else if (key == "frequency_penalty") c.frequency_penalty = parse_real(key, value);
    else if (key == "stopwords") c.stopwords = value;
    else if (key == "example_pool") c.example_pool = value;
    else if (key == "goal_template") c.goal_template = value;
    else if (key == "script_template") c.script_template = value;
    else if (key == "split.train") {
        if (value == "rest") c.split.train.reset();
        else c.split.train = parse_number<std::size_t>(key, value);
    } else if (key == "split.validation") c.split.validation = parse_number<std::size_t>(key, value);
    else if (key == "split.test") c.split.test = parse_number<std::size_t>(key, value);
    else if (key == "backend" || key == "backend.kind") b.kind = value;
    else if (key == "backend.base_url") b.base_url = value;
    else if (key == "backend.model") b.model = value;
    else if (key == "backend.embedding_model") b.embedding_model = value;
    else if (key == "backend.api_key_env") b.api_key_env = value;
    else if (key == "backend.cache_dir") b.cache_dir = value;
    else if (key == "backend.mock_dimension") b.mock_dimension = parse_number<std::size_t>(key, value);
    else if (key == "backend.mock_table") b.mock_table = value;
    else if (key == "backend.max_attempts") b.max_attempts = parse_number<int>(key, value);
    else if (key == "backend.base_delay_ms") b.base_delay_ms = parse_number<long>(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
}

void load_config_into(PipelineConfig& config, const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(n) + ": expected key = value");
        }
        apply_config_entry(config, std::string_view(t).substr(0, eq), std::string_view(t).substr(eq + 1));
    }
}

PipelineConfig load_config(const std::filesystem::path& path) {
    PipelineConfig c;
    load_config_into(c, path);
    return c;
}

BackendBundle make_backend(const PipelineConfig& config, std::shared_ptr<Transport> upstream) {
    BackendBundle bundle;
    bundle.upstream = std::move(upstream);
    bundle.instrumented = std::make_shared<InstrumentedTransport>(bundle.upstream);
    bundle.cache = config.backend.cache_dir.empty()
                       ? std::make_shared<ResponseCache>()
                       : std::make_shared<ResponseCache>(config.backend.cache_dir);
    BackendOptions opts;
    opts.completion_model = config.backend.model;
    opts.embedding_model = config.backend.embedding_model;
    opts.retry.max_attempts = config.backend.max_attempts;
    opts.retry.base_delay = std::chrono::milliseconds(config.backend.base_delay_ms);
    opts.max_in_flight = config.max_in_flight;
    opts.jitter_seed = config.seed;
    bundle.backend = std::make_shared<Backend>(bundle.instrumented, bundle.cache, opts);
    return bundle;
}

BackendBundle make_backend(const PipelineConfig& config) {
    config.validate();
    std::shared_ptr<Transport> upstream;
    if (config.backend.kind == "mock") {
        MockOptions m;
        m.seed = config.seed;
        m.dimension = config.backend.mock_dimension;
        if (!config.backend.mock_table.empty()) m.table = load_mock_table(config.backend.mock_table);
        upstream = std::make_shared<MockTransport>(std::move(m));
    } else {
        HttpOptions h;
        h.base_url = config.backend.base_url;
        h.api_key = api_key_from_env(config.backend.api_key_env);
        upstream = std::make_shared<HttpTransport>(std::move(h));
    }
    return make_backend(config, std::move(upstream));
}

}  // namespace plandistill
