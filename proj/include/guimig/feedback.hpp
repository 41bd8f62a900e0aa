// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/planner.hpp>

#include <optional>
#include <string>
#include <vector>

namespace guimig
{

/// Exploration cannot continue consistently (e.g. an accepted prefix no
/// longer replays).
class MigrationError: public Error
{
  public:
    using Error::Error;
};

struct FeedbackVerdict
{
    bool accepted = false;
    std::string reason; // non-empty when rejected
    std::vector<std::string> suggestions;
    bool consulted = false; // a feedback_action call was made
};

struct Reflection
{
    std::optional<std::size_t> misleading_index; // 1-based history position
    std::string reason;
    bool consulted = false;
};

struct FeedbackOptions
{
    bool no_vision = false;
    std::size_t prune_budget = 60;
};

/// Non-executed actions are rejected without a call. Otherwise one
/// feedback_action call over the before/after pages; a gateway failure after
/// re-queries counts as a rejection ("feedback unavailable").
FeedbackVerdict assess_action(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                              const Action& action, const ExecutionOutcome& outcome,
                              const FeedbackOptions& options = {});

/// One feedback_reflect call over the accepted history; none (and no call)
/// when the history is empty.
Reflection reflect_test(Gateway& gateway, const TestSkeleton& skeleton, const ExplorationState& state,
                        const FeedbackOptions& options = {});

struct TruncationReport
{
    std::size_t kept = 0;
    std::size_t dropped = 0;
    bool page_matches_record = false; // replayed page equals the page recorded at acceptance
    std::vector<std::string> reverted_steps;
};

/// Keeps the history strictly before `r.misleading_index`, resets the device
/// and replays that prefix. Steps marked after the prefix revert to pending.
/// MigrationError when the prefix does not replay.
TruncationReport apply_truncation(ExplorationState& state, const Reflection& r, DeviceSession& session,
                                  std::size_t prune_budget = 60);

} // namespace guimig
