#pragma once

#include <string_view>

// Contents of the files under data/, compiled in at build time.
namespace plandistill::embedded {

extern const std::string_view kStopwords;
extern const std::string_view kExamplePool;
extern const std::string_view kGoalTemplate;
extern const std::string_view kScriptTemplate;

}  // namespace plandistill::embedded
