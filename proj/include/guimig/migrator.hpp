// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/analyzer.hpp>
#include <guimig/device.hpp>
#include <guimig/feedback.hpp>
#include <guimig/gateway.hpp>
#include <guimig/planner.hpp>

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace guimig
{

struct MigrationConfig
{
    int max_iterations = 25;
    int max_rejections_per_iteration = 5;
    int reflection_threshold = 3;
    std::size_t prune_budget = default_prune_budget;
    int requery_budget = 2;
    bool no_vision = false;
    bool no_analyzer = false;
    bool no_feedback = false;
    std::string model = "gpt-4o";
    std::string gateway = "scripted"; // scripted | remote
    std::string device = "simulated"; // simulated | live
    std::int64_t seed = 0;

    /// Empty when every budget is at least 1.
    [[nodiscard]] std::vector<std::string> violations() const;
    /// Name used in reports: "full", "no_vision", "no_analyzer+no_feedback", ...
    [[nodiscard]] std::string variant_name() const;
};

/// Reads the keys present in `j` over the defaults in `base`.
[[nodiscard]] MigrationConfig config_from_json(const nlohmann::json& j, MigrationConfig base = {});
[[nodiscard]] nlohmann::ordered_json config_to_json(const MigrationConfig& c);

enum class MigrationStatus
{
    completed,
    budget_exhausted,
    error
};

[[nodiscard]] std::string_view to_string(MigrationStatus s) noexcept;
[[nodiscard]] std::optional<MigrationStatus> parse_migration_status(std::string_view s) noexcept;

/// One trace line. `ts` is a logical clock so traces are byte-reproducible.
struct TraceRecord
{
    std::uint64_t ts = 0;
    std::string kind;
    nlohmann::ordered_json payload;
};

struct MigrationResult
{
    TestCase generated;
    MigrationStatus status = MigrationStatus::error;
    std::string error;
    std::vector<TraceRecord> trace;
    std::vector<GuiPage> recorded_pages;
    double wall_time = 0.0; // seconds
    std::optional<TestSkeleton> skeleton;
    int iterations = 0;
    int action_attempts = 0;
    int vlm_calls = 0;
    int images_sent = 0;
    bool oracle_rule_path = false;
};

/// Runs one migration: skeleton, then check/act/assess iterations, then the
/// oracle. Never throws for task-level failures; they end up in `status`.
[[nodiscard]] MigrationResult migrate(const TestCase& source, const VisualExecutionLog& log, DeviceSession& target,
                                      CompletionBackend& backend, const MigrationConfig& cfg);

[[nodiscard]] std::string trace_to_jsonl(const std::vector<TraceRecord>& trace);
[[nodiscard]] nlohmann::ordered_json result_to_json(const MigrationResult& r);
/// Generated test, status and recorded pages (screenshots come back as digests).
[[nodiscard]] MigrationResult result_from_json(const nlohmann::json& j);

} // namespace guimig
