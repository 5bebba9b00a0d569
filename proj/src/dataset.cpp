#include "plandistill/dataset.hpp"

#include "plandistill/error.hpp"
#include "plandistill/random.hpp"
#include "plandistill/text.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace plandistill {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 6> kErrorCodeNames = {
    "WRONG_ORDER", "REPEAT_STEPS", "MISSING_STEPS", "NO_CONSTRAINT", "INCOHERENT_STEPS", "UNRELATED_STEPS"};

std::string get_string(const json& obj, const char* field, std::size_t line, bool required) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        if (required) throw LoadError(line, field, "missing");
        return {};
    }
    if (!it->is_string()) throw LoadError(line, field, "expected a string");
    return it->get<std::string>();
}

}  // namespace

std::string_view to_string(ErrorCode code) { return kErrorCodeNames[static_cast<std::size_t>(code)]; }

std::optional<ErrorCode> parse_error_code(std::string_view text) {
    for (std::size_t i = 0; i < kErrorCodeNames.size(); ++i) {
        if (kErrorCodeNames[i] == text) return static_cast<ErrorCode>(i);
    }
    return std::nullopt;
}

std::string serialize_record(const DatasetRecord& r) {
    nlohmann::ordered_json obj;
    obj["abstract_goal"] = r.abstract_goal;
    obj["category"] = r.category;
    obj["constraint_type"] = std::string(to_string(r.constraint_type));
    obj["constraint"] = r.constraint;
    obj["specific_goal"] = r.specific_goal;
    obj["steps"] = r.steps;
    nlohmann::ordered_json prov;
    prov["sample_index"] = r.provenance.sample_index;
    prov["goal_digest"] = r.provenance.goal_digest;
    prov["script_digest"] = r.provenance.script_digest;
    obj["provenance"] = prov;
    if (r.error_codes) {
        auto codes = json::array();
        for (auto c : *r.error_codes) codes.push_back(std::string(to_string(c)));
        obj["error_codes"] = codes;
    }
    return obj.dump();
}

void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records) {
    for (const auto& r : records) out << serialize_record(r) << '\n';
}

void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    write_dataset(out, records);
}

DatasetRecord parse_record(std::string_view line, std::size_t line_no, ReadOptions options) {
    const json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded() || !obj.is_object()) throw LoadError(line_no, "record", "not a JSON object");
    const bool strict = !options.lenient;

    DatasetRecord r;
    r.abstract_goal = get_string(obj, "abstract_goal", line_no, true);
    r.category = get_string(obj, "category", line_no, strict);
    const std::string type = get_string(obj, "constraint_type", line_no, strict);
    if (!type.empty() || strict) {
        auto t = parse_constraint_type(type);
        if (!t) throw LoadError(line_no, "constraint_type", "unknown type '" + type + "'");
        r.constraint_type = *t;
    }
    r.constraint = get_string(obj, "constraint", line_no, strict);
    r.specific_goal = get_string(obj, "specific_goal", line_no, true);

    auto steps = obj.find("steps");
    if (steps == obj.end() || !steps->is_array()) throw LoadError(line_no, "steps", "expected an array of strings");
    for (const auto& s : *steps) {
        if (!s.is_string()) throw LoadError(line_no, "steps", "expected an array of strings");
        r.steps.push_back(s.get<std::string>());
    }
    if (r.steps.empty()) throw LoadError(line_no, "steps", "empty");

    if (auto prov = obj.find("provenance"); prov != obj.end()) {
        if (!prov->is_object()) throw LoadError(line_no, "provenance", "expected an object");
        if (auto si = prov->find("sample_index"); si != prov->end()) {
            if (!si->is_number_unsigned()) throw LoadError(line_no, "provenance", "bad sample_index");
            r.provenance.sample_index = si->get<std::uint32_t>();
        }
        r.provenance.goal_digest = get_string(*prov, "goal_digest", line_no, false);
        r.provenance.script_digest = get_string(*prov, "script_digest", line_no, false);
    } else if (strict) {
        throw LoadError(line_no, "provenance", "missing");
    }

    if (auto codes = obj.find("error_codes"); codes != obj.end() && !codes->is_null()) {
        if (!codes->is_array()) throw LoadError(line_no, "error_codes", "expected an array");
        std::vector<ErrorCode> parsed;
        for (const auto& c : *codes) {
            auto code = c.is_string() ? parse_error_code(c.get<std::string>()) : std::nullopt;
            if (!code) throw LoadError(line_no, "error_codes", "unknown code " + c.dump());
            parsed.push_back(*code);
        }
        r.error_codes = std::move(parsed);
    }
    return r;
}

std::vector<DatasetRecord> read_dataset(std::istream& in, ReadOptions options) {
    std::vector<DatasetRecord> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        out.push_back(parse_record(line, n, options));
    }
    return out;
}

std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path, ReadOptions options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot read dataset " + path.string());
    return read_dataset(in, options);
}

DatasetSplits split_dataset(const std::vector<DatasetRecord>& dataset, const SplitSizes& sizes,
                            std::uint64_t seed) {
    const std::size_t fixed = sizes.validation + sizes.test + sizes.train.value_or(0);
    if (fixed > dataset.size()) {
        throw InputError("split sizes need " + std::to_string(fixed) + " records, dataset has " +
                         std::to_string(dataset.size()));
    }
    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(order);

    DatasetSplits out;
    std::size_t at = 0;
    const auto take = [&](std::vector<DatasetRecord>& dst, std::size_t n) {
        dst.reserve(n);
        for (std::size_t i = 0; i < n; ++i) dst.push_back(dataset[order[at++]]);
    };
    take(out.validation, sizes.validation);
    take(out.test, sizes.test);
    take(out.train, sizes.train.value_or(dataset.size() - at));
    return out;
}

std::size_t mix_count_from_a(double alpha, std::size_t size) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("alpha must lie in [0, 1]");
    // The nudge keeps products such as 0.29 * 100 = 28.999999999999996 on 29.
    const auto n = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(size) + 1e-9));
    return n > size ? size : n;
}

std::vector<MixPick> mix_plan(std::size_t a_size, std::size_t b_size, double alpha,
                              std::size_t size, std::uint64_t seed) {
    const std::size_t from_a = mix_count_from_a(alpha, size);
    const std::size_t from_b = size - from_a;
    if (from_a > a_size) {
        throw InputError("mix needs " + std::to_string(from_a) + " records from the first dataset, it has " +
                         std::to_string(a_size));
    }
    if (from_b > b_size) {
        throw InputError("mix needs " + std::to_string(from_b) + " records from the second dataset, it has " +
                         std::to_string(b_size));
    }
    Rng rng(derive_seed(seed, "mix"));
    std::vector<MixPick> picks;
    picks.reserve(size);
    for (std::size_t i : rng.sample_indices(a_size, from_a)) picks.push_back({true, i});
    for (std::size_t i : rng.sample_indices(b_size, from_b)) picks.push_back({false, i});
    rng.shuffle(picks);
    return picks;
}

std::vector<DatasetRecord> mix_datasets(const std::vector<DatasetRecord>& a,
                                        const std::vector<DatasetRecord>& b, double alpha,
                                        std::size_t size, std::uint64_t seed) {
    std::vector<DatasetRecord> out;
    out.reserve(size);
    for (const auto& p : mix_plan(a.size(), b.size(), alpha, size, seed)) {
        out.push_back(p.from_a ? a[p.index] : b[p.index]);
    }
    return out;
}

}  // namespace plandistill
