// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <guimig/model.hpp>

#include <atomic>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace guimig
{

enum class AgentKind
{
    analyzer_augment,
    analyzer_group,
    analyzer_classify,
    completeness_checker,
    action_generator,
    feedback_action,
    feedback_reflect,
    oracle_generator
};

inline constexpr AgentKind all_agent_kinds[] = {
    AgentKind::analyzer_augment,     AgentKind::analyzer_group,   AgentKind::analyzer_classify,
    AgentKind::completeness_checker, AgentKind::action_generator, AgentKind::feedback_action,
    AgentKind::feedback_reflect,     AgentKind::oracle_generator,
};

[[nodiscard]] std::string_view to_string(AgentKind kind) noexcept;
[[nodiscard]] std::optional<AgentKind> parse_agent_kind(std::string_view s) noexcept;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Prompt context lacks a section the agent requires.
class AssemblyError: public Error
{
  public:
    AssemblyError(AgentKind kind, std::string section);
    [[nodiscard]] const std::string& section() const noexcept { return _section; }

  private:
    std::string _section;
};

/// Backend could not produce a usable reply (transport failure, retries or
/// re-query budget exhausted).
class GatewayError: public Error
{
  public:
    GatewayError(std::string message, int retries);
    [[nodiscard]] int retries() const noexcept { return _retries; }

  private:
    int _retries;
};

/// 401/403-class rejection from a remote backend; never retried.
class AuthError: public GatewayError
{
  public:
    using GatewayError::GatewayError;
};

/// Scripted transcript exhausted or out of step with the engine.
class ScriptError: public Error
{
  public:
    using Error::Error;
};

/// Reply without a valid structured block. Keeps the raw text.
class ReplyParseError: public Error
{
  public:
    ReplyParseError(std::string reason, std::string raw);
    [[nodiscard]] const std::string& reason() const noexcept { return _reason; }
    [[nodiscard]] const std::string& raw() const noexcept { return _raw; }

  private:
    std::string _reason;
    std::string _raw;
};

// ---------------------------------------------------------------------------
// Prompts
// ---------------------------------------------------------------------------

namespace section
{
inline constexpr std::string_view test_skeleton = "test_skeleton";
inline constexpr std::string_view source_context = "source_context";
inline constexpr std::string_view target_context = "target_context";
inline constexpr std::string_view event_history = "event_history";
inline constexpr std::string_view chain_of_thought = "chain_of_thought";
inline constexpr std::string_view instruction = "instruction";
} // namespace section

struct PromptImage
{
    std::string label;   // "source" | "target"
    std::string caption; // e.g. "page before action"
    Screenshot image;
};

struct PromptSection
{
    std::string name;
    std::string text;
};

struct PromptBundle
{
    AgentKind kind = AgentKind::analyzer_augment;
    std::vector<PromptSection> sections;
    std::vector<PromptImage> images;

    [[nodiscard]] const PromptSection* find(std::string_view name) const;
    [[nodiscard]] std::vector<std::string> section_names() const;
    /// Sections rendered with headings, in order.
    [[nodiscard]] std::string text() const;
};

/// Raw material for a prompt. Sections the agent does not use are ignored.
struct PromptContext
{
    std::optional<std::string> test_skeleton;
    std::optional<std::string> source_context;
    std::optional<std::string> target_context;
    std::optional<std::string> event_history;
    std::vector<PromptImage> source_images;
    std::vector<PromptImage> target_images;
    std::vector<std::string> notes; // appended to the instruction
};

/// Which sections (and minimum images, when vision is on) each agent uses.
struct SectionRule
{
    bool test_skeleton = false;
    bool source_context = false;
    bool target_context = false;
    bool event_history = false;
    std::size_t min_source_images = 0;
    std::size_t min_target_images = 0;
};

[[nodiscard]] const SectionRule& section_rule(AgentKind kind);
[[nodiscard]] const std::vector<std::string>& chain_of_thought_steps(AgentKind kind);
[[nodiscard]] const std::vector<std::string>& instruction_items(AgentKind kind);
[[nodiscard]] std::string_view reply_format(AgentKind kind);

/// Builds the ordered prompt: skeleton, source, target, history, CoT,
/// instruction. With no_vision every image is dropped.
[[nodiscard]] PromptBundle assemble_prompt(AgentKind kind, const PromptContext& ctx, bool no_vision = false);

// ---------------------------------------------------------------------------
// Replies and backends
// ---------------------------------------------------------------------------

struct TokenUsage
{
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct VlmReply
{
    std::string raw;
    std::optional<nlohmann::json> parsed;
    TokenUsage usage;
};

/// Extracts the last fenced block and checks it against the agent's schema.
[[nodiscard]] nlohmann::json parse_structured_reply(const VlmReply& reply, AgentKind kind);

class CompletionBackend
{
  public:
    virtual ~CompletionBackend() = default;
    virtual VlmReply complete(const PromptBundle& bundle) = 0;
};

struct TranscriptEntry
{
    AgentKind agent_kind = AgentKind::analyzer_augment;
    std::optional<std::string> contains;
    std::string reply;
};

[[nodiscard]] std::vector<TranscriptEntry> load_transcript(std::string_view document);

/// Replays canned replies. Each call takes the earliest unconsumed entry whose
/// matcher accepts the prompt (same agent kind and, when given, a substring of
/// the prompt text). Safe for concurrent callers.
class ScriptedBackend final: public CompletionBackend
{
  public:
    explicit ScriptedBackend(std::vector<TranscriptEntry> entries);

    VlmReply complete(const PromptBundle& bundle) override;

    [[nodiscard]] std::size_t consumed() const;
    [[nodiscard]] std::size_t remaining() const;

  private:
    mutable std::mutex _mutex;
    std::vector<TranscriptEntry> _entries;
    std::vector<bool> _used;
};

struct RemoteConfig
{
    std::string endpoint; // full URL of the chat-completions route
    std::string api_key;
    std::string model = "gpt-4o";
    double temperature = 0.0;
    int max_retries = 2;
    int timeout_ms = 120000;
    std::optional<std::int64_t> seed;

    /// VLM_ENDPOINT and VLM_API_KEY.
    [[nodiscard]] static RemoteConfig from_env(std::string model);
};

/// OpenAI-compatible chat completions over HTTP(S).
class RemoteBackend final: public CompletionBackend
{
  public:
    explicit RemoteBackend(RemoteConfig config);

    VlmReply complete(const PromptBundle& bundle) override;

    /// Request body sent for a bundle.
    [[nodiscard]] nlohmann::json request_body(const PromptBundle& bundle) const;

  private:
    RemoteConfig _config;
};

[[nodiscard]] std::string base64_encode(std::string_view data);

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

/// What the gateway observed for one backend call.
struct CallRecord
{
    AgentKind kind = AgentKind::analyzer_augment;
    int attempt = 1;
    std::vector<std::string> sections;
    std::vector<std::string> image_labels;
    std::string prompt_digest;
    std::string raw;
    bool accepted = false;
    std::string error;
};

/// Sends prompts, parses replies and re-queries on malformed or invalid
/// replies. Counts calls per agent kind.
class Gateway
{
  public:
    using Observer = std::function<void(const CallRecord&)>;
    /// Semantic check on a schema-valid reply; throw ReplyParseError to re-query.
    using Validator = std::function<void(const nlohmann::json&)>;

    Gateway(CompletionBackend& backend, int requery_budget = 2);

    void set_observer(Observer observer);

    /// Up to 1 + requery_budget attempts; GatewayError afterwards.
    nlohmann::json ask(const PromptBundle& bundle, const Validator& validate = {});

    [[nodiscard]] int calls(AgentKind kind) const;
    [[nodiscard]] int total_calls() const;
    [[nodiscard]] int images_sent() const;
    [[nodiscard]] int requery_budget() const noexcept { return _requery_budget; }

  private:
    CompletionBackend& _backend;
    int _requery_budget;
    Observer _observer;
    mutable std::mutex _mutex;
    std::map<AgentKind, int> _calls;
    int _images = 0;
};

} // namespace guimig
