#include "plandistill/corpus.hpp"

#include "plandistill/error.hpp"
#include "plandistill/text.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <istream>
#include <ostream>

namespace plandistill {

using nlohmann::json;

namespace {

std::string validate(const AbstractGoal& g) {
    if (trim(g.title).empty()) return "title";
    if (g.steps.empty()) return "steps";
    for (const auto& s : g.steps) {
        if (trim(s).empty()) return "steps";
    }
    return {};
}

const json& require(const json& obj, const char* field, std::size_t line) {
    auto it = obj.find(field);
    if (it == obj.end()) throw LoadError(line, field, "missing");
    return *it;
}

std::string require_string(const json& obj, const char* field, std::size_t line) {
    const json& v = require(obj, field, line);
    if (!v.is_string()) throw LoadError(line, field, "expected a string");
    return v.get<std::string>();
}

AbstractGoal decode_line(const std::string& text, std::size_t line) {
    json obj;
    try {
        obj = json::parse(text);
    } catch (const json::parse_error& e) {
        throw LoadError(line, "record", e.what());
    }
    if (!obj.is_object()) throw LoadError(line, "record", "expected a JSON object");

    AbstractGoal g;
    if (auto it = obj.find("id"); it != obj.end()) {
        if (!it->is_string()) throw LoadError(line, "id", "expected a string");
        g.id = it->get<std::string>();
    } else {
        g.id = std::to_string(line);
    }
    g.title = require_string(obj, "title", line);
    if (trim(g.title).empty()) throw LoadError(line, "title", "empty");

    const json& steps = require(obj, "steps", line);
    if (!steps.is_array()) throw LoadError(line, "steps", "expected an array of strings");
    for (const auto& s : steps) {
        if (!s.is_string()) throw LoadError(line, "steps", "expected an array of strings");
        g.steps.push_back(s.get<std::string>());
    }
    if (g.steps.empty()) throw LoadError(line, "steps", "empty");
    for (const auto& s : g.steps) {
        if (trim(s).empty()) throw LoadError(line, "steps", "empty step text");
    }

    if (auto it = obj.find("category"); it != obj.end()) {
        if (!it->is_string()) throw LoadError(line, "category", "expected a string");
        g.category = it->get<std::string>();
    }
    return g;
}

}  // namespace

Corpus::Corpus(std::vector<AbstractGoal> goals) : goals_(std::move(goals)) {
    by_id_.reserve(goals_.size());
    for (std::size_t i = 0; i < goals_.size(); ++i) {
        if (auto bad = validate(goals_[i]); !bad.empty()) {
            throw InputError("goal '" + goals_[i].id + "': invalid " + bad);
        }
        if (!by_id_.emplace(goals_[i].id, i).second) {
            throw InputError("duplicate goal id '" + goals_[i].id + "'");
        }
    }
}

const AbstractGoal* Corpus::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &goals_[it->second];
}

Corpus parse_corpus(std::istream& in) {
    std::vector<AbstractGoal> goals;
    std::unordered_map<std::string, std::size_t> first_seen;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (trim(text).empty()) continue;
        AbstractGoal g = decode_line(text, line);
        if (auto [it, fresh] = first_seen.emplace(g.id, line); !fresh) {
            throw LoadError(line, "id",
                            "duplicate id '" + g.id + "' (first on line " +
                                std::to_string(it->second) + ")");
        }
        goals.push_back(std::move(g));
    }
    return Corpus(std::move(goals));
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read corpus: " + path.string());
    return parse_corpus(in);
}

std::string serialize_goal(const AbstractGoal& goal) {
    nlohmann::ordered_json obj;
    obj["id"] = goal.id;
    obj["title"] = goal.title;
    obj["steps"] = goal.steps;
    obj["category"] = goal.category;
    return obj.dump();
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& g : corpus) out << serialize_goal(g) << '\n';
}

}  // namespace plandistill
