#include "plandistill/mock_transport.hpp"

#include "plandistill/error.hpp"
#include "plandistill/prompting.hpp"
#include "plandistill/random.hpp"
#include "plandistill/text.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <string_view>

namespace plandistill {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 10> kModifiers = {
    "chocolate", "vanilla", "strawberry", "gluten-free", "vegan",
    "small",     "large",   "spicy",      "homemade",    "colorful"};
constexpr std::array<std::string_view, 8> kMethods = {
    "with a microwave", "by hand",      "with an app",    "online",
    "with a kit",       "without tools", "using a blender", "in ten minutes"};
constexpr std::array<std::string_view, 8> kIntents = {
    "for a birthday party", "for kids",     "for a wedding",    "for beginners",
    "for a friend",         "to save money", "for a holiday", "if someone is lactose intolerant"};

std::string last_labeled(const std::string& prompt, std::string_view label) {
    std::string found;
    std::size_t pos = 0;
    while ((pos = prompt.find(label, pos)) != std::string::npos) {
        if (pos == 0 || prompt[pos - 1] == '\n') {
            const std::size_t start = pos + label.size();
            const std::size_t nl = prompt.find('\n', start);
            found = trim(std::string_view(prompt).substr(start, nl == std::string::npos ? std::string::npos : nl - start));
        }
        pos += label.size();
    }
    return found;
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string goal_reply(const std::string& prompt, Rng& rng) {
    const std::string title = last_labeled(prompt, "Abstract Goal: ");
    ConstraintType type = ConstraintType::modifier;
    for (auto t : kConstraintTypes) {
        if (prompt.find("Constraint Type is " + std::string(display_name(t)) + ".") != std::string::npos) type = t;
    }
    std::vector<std::string_view> vocab;
    switch (type) {
        case ConstraintType::modifier: vocab.assign(kModifiers.begin(), kModifiers.end()); break;
        case ConstraintType::method: vocab.assign(kMethods.begin(), kMethods.end()); break;
        case ConstraintType::intent: vocab.assign(kIntents.begin(), kIntents.end()); break;
    }

    const std::size_t count = 2 + rng.bounded(2);
    std::vector<std::pair<std::string, std::string>> pairs;
    for (std::size_t idx : rng.sample_indices(vocab.size(), count)) {
        const std::string phrase(vocab[idx]);
        std::string goal;
        if (type == ConstraintType::modifier) {
            const std::size_t sp = title.rfind(' ');
            goal = sp == std::string::npos ? phrase + " " + title
                                           : title.substr(0, sp + 1) + phrase + title.substr(sp);
        } else {
            goal = title + " " + phrase;
        }
        pairs.emplace_back(capitalize(phrase), goal);
    }
    // Sometimes repeat the first goal with different casing and punctuation.
    if (rng.bounded(4) == 0) {
        pairs.emplace_back(pairs.front().first, to_lower_ascii(pairs.front().second) + ".");
    }

    std::string out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const bool two_lines = rng.bounded(3) == 0;
        out += i == 0 ? " " : "\nConstraint: ";
        out += pairs[i].first;
        out += two_lines ? "\nSpecific Goal: " : "; Specific Goal: ";
        out += pairs[i].second;
    }
    if (rng.bounded(4) == 0) out += "\n\nAbstract Goal: " + title;
    return out;
}

std::string script_reply(const std::string& prompt, Rng& rng) {
    if (rng.bounded(12) == 0) return " I'm sorry, I cannot list steps for that goal.";

    const std::string constraint = to_lower_ascii(last_labeled(prompt, "Constraint: "));
    std::vector<std::string> base;
    const std::size_t first_steps = prompt.find("\nSteps: ");
    if (first_steps != std::string::npos) {
        const std::size_t start = first_steps + 8;
        const std::size_t nl = prompt.find('\n', start);
        try {
            base = parse_script_completion(std::string_view(prompt).substr(
                start, nl == std::string::npos ? std::string::npos : nl - start));
        } catch (const ParseError&) {
        }
    }
    if (base.empty()) base = {"Gather what you need.", "Follow the usual routine.", "Check the result."};
    if (base.size() > 5) base.resize(5);
    if (base.size() > 2 && rng.bounded(3) == 0) base.erase(base.begin() + static_cast<std::ptrdiff_t>(rng.bounded(base.size())));

    if (!constraint.empty() && rng.uniform01() < 0.6) {
        static constexpr std::array<std::string_view, 3> kForms = {
            "Make sure everything is ", "Keep the plan ", "Adjust each step "};
        const std::size_t at = 1 + rng.bounded(base.size());
        base.insert(base.begin() + static_cast<std::ptrdiff_t>(at),
                    std::string(kForms[rng.bounded(kForms.size())]) + constraint + ".");
    }

    const bool multiline = rng.bounded(2) == 0;
    std::string out;
    for (std::size_t i = 0; i < base.size(); ++i) {
        out += (i == 0) ? " " : (multiline ? "\n" : " ");
        out += std::to_string(i + 1) + ". " + base[i];
    }
    return out;
}

}  // namespace

std::unordered_map<std::string, std::string> load_mock_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot read mock table " + path.string());
    std::unordered_map<std::string, std::string> table;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        const json obj = json::parse(line, nullptr, false);
        if (obj.is_discarded() || !obj.is_object()) throw LoadError(n, "record", "not a JSON object");
        if (!obj.contains("digest") || !obj["digest"].is_string()) throw LoadError(n, "digest", "missing");
        if (!obj.contains("text") || !obj["text"].is_string()) throw LoadError(n, "text", "missing");
        table[obj["digest"].get<std::string>()] = obj["text"].get<std::string>();
    }
    return table;
}

std::string MockTransport::completion_for(const std::string& prompt, const std::string& digest) const {
    if (auto it = options_.table.find(digest); it != options_.table.end()) return it->second;
    if (!options_.synthesize) return {};
    Rng rng(derive_seed(options_.seed, "completion:" + digest));
    if (prompt.find("Create possible Specific Goals") != std::string::npos) return goal_reply(prompt, rng);
    if (prompt.find("List the steps of") != std::string::npos) return script_reply(prompt, rng);
    return {};
}

std::vector<double> MockTransport::embedding_for(const std::string& text) const {
    // Sum of per-token vectors over content words plus a small per-text term,
    // so texts sharing words point the same way but never coincide.
    std::vector<double> v(options_.dimension, 0.0);
    const auto add = [&](const std::string& label, double weight) {
        Rng rng(derive_seed(options_.seed, label));
        for (auto& x : v) x += weight * (2.0 * rng.uniform01() - 1.0);
    };
    for (const auto& word : extract_keywords(text).keywords) add("token:" + word, 1.0);
    add("embedding:" + text, 0.25);
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
        for (auto& x : v) x /= norm;
    }
    return v;
}

UpstreamResponse MockTransport::post(const UpstreamRequest& request) {
    const json body = json::parse(request.body, nullptr, false);
    if (body.is_discarded()) return {400, R"({"error":"bad json"})"};

    if (request.endpoint == "completions") {
        if (!body.contains("prompt") || !body["prompt"].is_string() || request.digests.empty()) {
            return {400, R"({"error":"missing prompt"})"};
        }
        const std::string text = completion_for(body["prompt"].get<std::string>(), request.digests.front());
        const json reply = {{"object", "text_completion"},
                            {"model", body.value("model", "")},
                            {"choices", json::array({{{"index", 0}, {"text", text}}})}};
        return {200, reply.dump()};
    }
    if (request.endpoint == "embeddings") {
        if (!body.contains("input") || !body["input"].is_array()) return {400, R"({"error":"missing input"})"};
        json data = json::array();
        std::size_t i = 0;
        for (const auto& t : body["input"]) {
            data.push_back({{"object", "embedding"}, {"index", i++}, {"embedding", embedding_for(t.get<std::string>())}});
        }
        const json reply = {{"object", "list"}, {"model", body.value("model", "")}, {"data", data}};
        return {200, reply.dump()};
    }
    return {404, R"({"error":"unknown endpoint"})"};
}

}  // namespace plandistill
