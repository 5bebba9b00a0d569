#pragma once

#include "plandistill/prompting.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace plandistill {

// Human annotation codes for curated splits. Never filled in automatically.
enum class ErrorCode {
    wrong_order,
    repeat_steps,
    missing_steps,
    no_constraint,
    incoherent_steps,
    unrelated_steps,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view text);

struct Provenance {
    std::uint32_t sample_index = 0;
    std::string goal_digest;    // completion that produced the specific goal
    std::string script_digest;  // completion that produced the steps

    bool operator==(const Provenance&) const = default;
};

struct DatasetRecord {
    std::string abstract_goal;
    std::string category;
    ConstraintType constraint_type = ConstraintType::modifier;
    std::string constraint;
    std::string specific_goal;
    std::vector<std::string> steps;
    Provenance provenance;
    std::optional<std::vector<ErrorCode>> error_codes;

    bool operator==(const DatasetRecord&) const = default;
};

// One compact JSON object with keys abstract_goal, category,
// constraint_type, constraint, specific_goal, steps, provenance and, when
// present, error_codes, in that order.
std::string serialize_record(const DatasetRecord& record);
void write_dataset(std::ostream& out, const std::vector<DatasetRecord>& records);
void write_dataset(const std::filesystem::path& path, const std::vector<DatasetRecord>& records);

struct ReadOptions {
    // Accept records lacking provenance, category or constraint_type (e.g.
    // datasets produced by other tools). Missing types default to modifier.
    bool lenient = false;
};

DatasetRecord parse_record(std::string_view line, std::size_t line_no, ReadOptions options = {});
std::vector<DatasetRecord> read_dataset(std::istream& in, ReadOptions options = {});
std::vector<DatasetRecord> read_dataset(const std::filesystem::path& path, ReadOptions options = {});

// ---------------------------------------------------------------------------
// Splitting and mixing

struct SplitSizes {
    // nullopt: train takes whatever validation and test leave.
    std::optional<std::size_t> train;
    std::size_t validation = 2000;
    std::size_t test = 3000;
};

struct DatasetSplits {
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> validation;
    std::vector<DatasetRecord> test;
};

// Seeded shuffle, then validation, test and train are cut in that order.
// Throws InputError when the sizes exceed the dataset.
DatasetSplits split_dataset(const std::vector<DatasetRecord>& dataset, const SplitSizes& sizes,
                            std::uint64_t seed);

// floor(alpha * size) records drawn from `a`, the rest of `size` from `b`,
// shuffled together. Throws InputError when a source is too small.
std::vector<DatasetRecord> mix_datasets(const std::vector<DatasetRecord>& a,
                                        const std::vector<DatasetRecord>& b, double alpha,
                                        std::size_t size, std::uint64_t seed);

// The draw behind mix_datasets, as source picks in output order. Lets the
// CLI mix corpora of any record type.
struct MixPick {
    bool from_a;
    std::size_t index;
};
std::vector<MixPick> mix_plan(std::size_t a_size, std::size_t b_size, double alpha,
                              std::size_t size, std::uint64_t seed);

std::size_t mix_count_from_a(double alpha, std::size_t size);

}  // namespace plandistill
