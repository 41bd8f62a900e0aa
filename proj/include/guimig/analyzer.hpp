// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/gateway.hpp>
#include <guimig/model.hpp>

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace guimig
{

/// "<action> the <widget> to <effect>" for one source action.
struct DescribedAction
{
    std::size_t event_index = 0; // index into TestCase::events
    std::string description;

    bool operator==(const DescribedAction&) const = default;
};

enum class StepCategory
{
    unclassified,
    key,
    supporting
};

[[nodiscard]] std::string_view to_string(StepCategory c) noexcept;

/// A run of consecutive source actions serving one intention. Ranges are
/// positions in the action sequence (oracles are not part of any step).
struct LogicStep
{
    std::string step_id;
    std::string description;
    std::size_t first = 0;
    std::size_t last = 0;
    StepCategory category = StepCategory::unclassified;
    std::uint64_t before_seq = 0; // page before `first`
    std::uint64_t after_seq = 0;  // page after `last`

    bool operator==(const LogicStep&) const = default;
};

struct AugmentResult
{
    std::vector<DescribedAction> actions;
    std::string functionality;
    std::string stop_condition_draft;
};

struct TestSkeleton
{
    std::string functionality;
    std::vector<LogicStep> key_steps;
    std::string stop_condition;       // synthesized from the terminal oracle
    std::string stop_condition_draft; // VLM wording, kept for the prompts
    OracleEvent source_oracle;
    GuiPage source_final_page;
};

struct AnalyzerOptions
{
    bool no_analyzer = false; // degenerate skeleton: one key step per action
    bool no_vision = false;
    std::size_t prune_budget = 60;
};

/// One analyzer_augment call. Descriptions come back in action order.
[[nodiscard]] AugmentResult augment_actions(Gateway& gateway, const TestCase& tc, const VisualExecutionLog& log,
                                            const AnalyzerOptions& options = {});

/// One analyzer_group call; replies whose ranges do not partition the actions
/// are re-queried.
[[nodiscard]] std::vector<LogicStep> group_logic_steps(Gateway& gateway, const std::vector<DescribedAction>& described,
                                                       const VisualExecutionLog& log,
                                                       const AnalyzerOptions& options = {});

/// Two analyzer_classify calls. A step is dropped only when both replies call
/// it supporting; everything else is kept as key.
[[nodiscard]] std::vector<LogicStep> classify_steps(Gateway& gateway, const std::vector<LogicStep>& steps,
                                                    const std::string& functionality, const VisualExecutionLog& log,
                                                    const AnalyzerOptions& options = {});

[[nodiscard]] TestSkeleton build_skeleton(Gateway& gateway, const TestCase& tc, const VisualExecutionLog& log,
                                          const AnalyzerOptions& options = {});

/// "the page shows '65.09' on widget resource_id='total'".
[[nodiscard]] std::string synthesize_stop_condition(const OracleEvent& oracle);

[[nodiscard]] nlohmann::ordered_json skeleton_to_json(const TestSkeleton& s);
/// Pretty-printed JSON with a trailing newline.
[[nodiscard]] std::string save_skeleton(const TestSkeleton& s);

/// Skeleton section of a prompt. `status` lines are added when given.
[[nodiscard]] std::string skeleton_prompt_text(const TestSkeleton& s,
                                               const std::map<std::string, std::string>& status = {});

} // namespace guimig
