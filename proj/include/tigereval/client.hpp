// Transport-agnostic chat-completion client. The HTTP transport speaks the
// common chat-completions JSON shape; the mock transport replays canned
// fixtures for fully offline, deterministic runs.
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tigereval/core.hpp"
#include "tigereval/templates.hpp"

namespace tigereval::client {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);

struct ChatTurn {
    Role role = Role::User;
    std::string content;
};

struct GenerationParams {
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 1024;
    std::optional<std::int64_t> seed;
};

struct EndpointConfig {
    std::string base_url;  // http(s)://... or mock:<fixture-path>
    std::string model_name = "tigereval";
    std::string api_key_env = "TIGEREVAL_API_KEY";
    int timeout_ms = 60000;
    int max_retries = 3;      // <= 10
    int max_concurrency = 4;  // >= 1
    int backoff_base_ms = 1000;
    // No system turn by default; set to prepend one to every conversation.
    std::optional<std::string> system_prompt;
};

/// Throws core::Error if retry/concurrency bounds are out of range.
void validate_config(const EndpointConfig& config);

/// Throws core::Error if temperature, top_p or max_tokens is out of range.
void validate_params(const GenerationParams& params);

struct TransportRequest {
    std::string url;
    std::string body;         // chat-completions JSON
    std::string api_key;      // empty when unset
    int timeout_ms = 60000;
    std::string all_content;  // concatenated message contents, for mock matching
    std::string content_hash; // fnv1a64 hex of all_content
};

struct TransportResponse {
    int status = 0;       // 0 = transport-level failure (timeout, refused, ...)
    std::string body;
    std::string error;    // description when status == 0
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual TransportResponse send(const TransportRequest& request) = 0;
};

class TransportError : public core::Error {
public:
    using core::Error::Error;
};

class AuthError : public core::Error {
public:
    using core::Error::Error;
};

class ContentError : public core::Error {
public:
    using core::Error::Error;
};

/// POSTs to the endpoint URL. HTTPS requires OpenSSL (compiled in).
class HttpTransport final : public Transport {
public:
    TransportResponse send(const TransportRequest& request) override;
};

/// One canned fixture entry. An entry matches a request when its hash (if
/// any) equals the request hash and every `contains` substring occurs in the
/// concatenated message contents. `times` caps how often the entry may
/// match (-1 = unlimited), which gives sequential consumption for retry
/// fixtures.
struct MockEntry {
    std::optional<std::string> match_hash;
    std::vector<std::string> contains;
    std::string reply;
    int status = 200;
    int times = -1;
    int latency_ms = 0;
};

class MockTransport final : public Transport {
public:
    explicit MockTransport(std::vector<MockEntry> entries);
    /// Reads one MockEntry JSON object per line.
    static std::shared_ptr<MockTransport> from_file(const std::filesystem::path& path);

    TransportResponse send(const TransportRequest& request) override;

    int request_count() const { return request_count_.load(); }
    int max_in_flight() const { return max_in_flight_.load(); }
    std::vector<std::string> seen_contents() const;

private:
    std::vector<MockEntry> entries_;
    std::vector<int> remaining_;
    mutable std::mutex mutex_;
    std::vector<std::string> seen_;
    std::atomic<int> request_count_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_in_flight_{0};
};

/// Per-attempt record, for retry-contract inspection.
struct Attempt {
    int status = 0;
    int base_delay_ms = 0;      // schedule before jitter (0 for the first attempt)
    int jittered_delay_ms = 0;  // what was actually slept
};

template <typename T>
struct Result {
    std::optional<T> value;
    std::string error;       // non-empty iff no value
    std::string error_kind;  // "transport", "auth", "content", "parse", ...
    bool ok() const { return value.has_value(); }
};

/// Runs fn(0..count-1) with at most max_concurrency workers, indices handed
/// out in order. The first exception thrown by fn is rethrown once all
/// workers drain; fn should catch per-item failures it wants to keep.
template <typename Fn>
void run_bounded(std::size_t count, int max_concurrency, Fn&& fn);

class ChatClient {
public:
    ChatClient(std::shared_ptr<Transport> transport, EndpointConfig config);

    /// Picks the transport from the URL scheme: "mock:<path>" loads fixture
    /// entries, anything else goes over HTTP.
    static ChatClient for_config(const EndpointConfig& config);

    /// Sends one conversation and returns the assistant text. Retries
    /// transient failures (timeouts, 429, 5xx) with exponential backoff
    /// (base from config, factor 2, jitter +/-20%) up to max_retries.
    /// Throws AuthError on 401/403 (no retry), ContentError on an empty or
    /// malformed completion, TransportError otherwise.
    std::string complete(const std::vector<ChatTurn>& conversation,
                         const GenerationParams& params,
                         std::vector<Attempt>* attempts_out = nullptr);

    /// Runs conversations with at most max_concurrency in flight; results
    /// come back in request order.
    std::vector<Result<std::string>> complete_many(
        const std::vector<std::vector<ChatTurn>>& conversations,
        const GenerationParams& params);

    /// Generic bounded-concurrency map preserving input order. `fn` may
    /// throw; exceptions become error results.
    std::vector<Result<std::string>> map_ordered(
        std::size_t count, const std::function<std::string(std::size_t)>& fn);

    /// First turn renders the per-task generation template and lets the
    /// model answer freely; the second turn replays that answer and asks
    /// for the JSON format. Returns (free_text, formatted).
    std::pair<std::string, std::string> two_step_error_analysis(
        const core::EvalInstance& instance, const core::AspectTaxonomy& taxonomy,
        const GenerationParams& params, const templates::TemplateRegistry& registry);

    /// Renders the inference template, completes once, parses the reply and
    /// scores it. Parse failures propagate with the raw reply attached.
    core::ScoredInstance single_step_score(const core::EvalInstance& instance,
                                           const GenerationParams& params,
                                           const templates::TemplateRegistry& registry);

    const EndpointConfig& config() const { return config_; }
    Transport& transport() { return *transport_; }

    /// Test hook replacing the real sleep between retries.
    void set_sleeper(std::function<void(int ms)> sleeper) { sleeper_ = std::move(sleeper); }

private:
    std::shared_ptr<Transport> transport_;
    EndpointConfig config_;
    std::function<void(int)> sleeper_;
    std::string api_key_;
};

/// Generation template for a task; custom tasks use the
/// instruction-following template.
templates::TemplateId generation_template_for(const core::TaskKind& task);

/// Bindings for the per-task generation templates, filtered to the
/// placeholders the chosen template actually uses.
templates::TemplateContext generation_context(const core::EvalInstance& instance,
                                              const core::AspectTaxonomy& taxonomy,
                                              const templates::TemplateRegistry& registry,
                                              templates::TemplateId id);

namespace detail {
void run_bounded_impl(std::size_t count, int max_concurrency,
                      const std::function<void(std::size_t)>& fn);
}

template <typename Fn>
void run_bounded(std::size_t count, int max_concurrency, Fn&& fn) {
    detail::run_bounded_impl(count, max_concurrency, std::function<void(std::size_t)>(fn));
}

}  // namespace tigereval::client
