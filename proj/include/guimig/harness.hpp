// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/app_model.hpp>
#include <guimig/device.hpp>
#include <guimig/migrator.hpp>

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace guimig
{

enum class Label
{
    failed_not_executable,
    success_exact_match,
    success_anchor_found,
    needs_manual_review,
    failed
};

[[nodiscard]] std::string_view to_string(Label l) noexcept;
[[nodiscard]] bool is_success(Label l) noexcept;

struct VerificationLabel
{
    Label label = Label::failed;
    int step_reached = 1;
    std::string detail;
};

/// Four checks in order, stopping at the first that decides:
///   1. the generated test replays on `target` (reset first) and its oracle holds;
///   2. it is semantically equal to the ground truth (kinds, resolved widgets,
///      payloads, oracle);
///   3. the ground-truth oracle holds on the replayed final page or on the
///      last page the migration recorded;
///   4. otherwise a human has to look at it.
/// A migration that did not complete is labelled `failed` at step 1.
[[nodiscard]] VerificationLabel verify_result(const MigrationResult& result, const TestCase& ground_truth,
                                              DeviceSession& target);

struct MigrationTask
{
    std::string task_id;
    std::string category;
    std::string source_app;
    std::string target_app;
    std::string functionality_id;
    std::shared_ptr<const AppModel> source_model;
    std::shared_ptr<const AppModel> target_model;
    TestCase source_test;
    TestCase ground_truth;
};

struct Dataset
{
    std::string root;
    std::vector<MigrationTask> tasks;
};

/// `<category>/<app>/model.json`, `<category>/<app>/tests/<fid>.json` and
/// `tasks.json`. ValidationError lists every broken task.
[[nodiscard]] Dataset load_dataset(const std::string& root);

/// Transcript path for a task: `<root>/transcripts/<task_id>.json`.
[[nodiscard]] std::string transcript_path(const Dataset& ds, const MigrationTask& task);

struct TaskOutcome
{
    std::string task_id;
    std::string category;
    std::string variant;
    int repeat = 0;
    MigrationStatus status = MigrationStatus::error;
    VerificationLabel verification;
    int iterations = 0;
    int action_attempts = 0;
    int vlm_calls = 0;
    int images_sent = 0;
    double wall_time = 0.0;
    std::string error;
    std::optional<MigrationResult> result;
};

using BackendFactory =
    std::function<std::unique_ptr<CompletionBackend>(const MigrationTask&, const MigrationConfig&)>;

/// Scripted backend reading each task's transcript.
[[nodiscard]] BackendFactory scripted_backend_factory(const Dataset& ds);

struct BenchOptions
{
    std::vector<MigrationConfig> variants {MigrationConfig {}};
    int jobs = 1;
    int repeat = 1;
    std::string out_dir; // per-task trace/result/skeleton files when set
    /// When false the mean runtime is written as null, so reports of repeated
    /// runs compare byte for byte.
    bool timing = true;
};

struct BenchReport
{
    std::vector<MigrationConfig> variants;
    std::vector<std::string> categories;
    std::vector<TaskOutcome> outcomes; // sorted by variant order, task_id, repeat
    bool timing = true;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
    /// Rows are configurations, columns the categories plus "All".
    [[nodiscard]] std::string table() const;
};

/// Runs migrate + verify_result for every task, variant and repeat. Task
/// failures become labels; the batch never aborts.
[[nodiscard]] BenchReport run_benchmark(const Dataset& ds, const BenchOptions& options, const BackendFactory& backends);

/// Runs one task end to end: records the source log, migrates on a fresh
/// simulated target, verifies.
[[nodiscard]] TaskOutcome run_task(const MigrationTask& task, const MigrationConfig& cfg, CompletionBackend& backend);

} // namespace guimig
