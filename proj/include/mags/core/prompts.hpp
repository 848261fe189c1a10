#pragma once

#include <string_view>

// Prompt text is stored byte-for-byte. Editing any of these changes what the
// policy is asked to emit and therefore what the reward functions measure.
namespace mags::prompts {

extern const std::string_view kStage1System;
extern const std::string_view kStage1Suffix;
extern const std::string_view kStage2System;
extern const std::string_view kStage2Suffix;

// Evaluation judges.
extern const std::string_view kExtractorSystem;
extern const std::string_view kRubricSystem;
extern const std::string_view kDifficultySystem;

}  // namespace mags::prompts
