// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/analyzer.hpp>
#include <guimig/device.hpp>
#include <guimig/gateway.hpp>
#include <guimig/page_view.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace guimig
{

enum class StepStatus
{
    pending,
    in_progress,
    done,
    waived
};

[[nodiscard]] std::string_view to_string(StepStatus s) noexcept;
[[nodiscard]] std::optional<StepStatus> parse_step_status(std::string_view s) noexcept;

/// An action the feedback agent accepted, with the page it led to.
struct HistoryItem
{
    Action action;
    std::string description;
    std::string outcome; // short note shown in later prompts
    GuiPage after;
};

struct ExplorationState
{
    GuiPage initial_page; // page before any accepted action
    GuiPage page;         // current page
    Widget pruned;
    AnnotatedPage annotated;
    std::vector<HistoryItem> history;
    std::map<std::string, StepStatus> step_status;
    /// History length at the moment a step left `pending`. Truncation below
    /// that length reverts the step.
    std::map<std::string, std::size_t> status_since;
    int iteration = 0;
    int consecutive_rejections = 0;

    [[nodiscard]] std::vector<Action> actions() const;
};

/// Fresh state with every key step pending.
[[nodiscard]] ExplorationState initial_exploration_state(const TestSkeleton& skeleton, const GuiPage& page,
                                                         std::size_t prune_budget);

/// Re-prunes and re-annotates `page` as the current page.
void observe_page(ExplorationState& state, const GuiPage& page, std::size_t prune_budget);

struct PlannerOptions
{
    bool no_vision = false;
    std::size_t prune_budget = 60;
};

struct CompletenessVerdict
{
    bool complete = false;
    std::map<std::string, StepStatus> step_status; // after the monotonic merge
    bool stop_condition_met = false;
    bool extra_navigation_needed = false;
    std::string note;
};

/// One completeness_checker call (plus re-queries). A reply that claims
/// completion while a step is neither done nor waived, or that waives a step
/// without the necessity double-check, is re-queried. Statuses are merged
/// into `state` monotonically: done and waived never revert.
CompletenessVerdict check_completeness(Gateway& gateway, const TestSkeleton& skeleton, ExplorationState& state,
                                       const PlannerOptions& options = {});

enum class CandidateSource
{
    vlm,
    feedback_suggestion
};

struct CandidateAction
{
    Action action;
    std::string rationale;
    CandidateSource source = CandidateSource::vlm;
    std::optional<int> label;
};

/// Either a candidate or a stuck signal (no_action reply).
struct ActionProposal
{
    std::optional<CandidateAction> candidate;
    std::string stuck_reason;
};

/// One action_generator call. The reply's widget label is resolved through the
/// current annotation map; unknown labels are re-queried.
ActionProposal generate_action(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                               const std::vector<std::string>& notes, const PlannerOptions& options = {});

struct OracleDecision
{
    OracleEvent oracle;
    bool rule_path = false;
};

/// Rule path first: a visible widget on the final (current) page whose text,
/// or for exists its resource_id/content_desc, equals the source oracle's.
/// Otherwise one oracle_generator call whose oracle must resolve and hold on
/// the final page. The source oracle is taken from the skeleton.
OracleDecision generate_oracle(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                               const PlannerOptions& options = {});

/// Rule-path search alone; nullopt when no identical element is on `page`.
[[nodiscard]] std::optional<OracleEvent> rule_path_oracle(const OracleEvent& source_oracle, const GuiPage& page);

/// Selector for a labelled widget: node_path plus stable attributes.
[[nodiscard]] Selector selector_for(const Widget& w);

// Prompt pieces shared with the feedback agent.
[[nodiscard]] std::map<std::string, std::string> status_strings(const ExplorationState& state);
[[nodiscard]] std::string history_text(const ExplorationState& state);
[[nodiscard]] std::string target_page_text(const GuiPage& page, const Widget& pruned);

} // namespace guimig
