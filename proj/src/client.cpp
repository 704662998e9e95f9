#include "tigereval/client.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <random>
#include <thread>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <nlohmann/json.hpp>

#include "tigereval/parser.hpp"
#include "tigereval/text.hpp"

namespace tigereval::client {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

void validate_config(const EndpointConfig& config) {
    if (config.max_retries < 0 || config.max_retries > 10)
        throw core::Error("max_retries must be in [0, 10]");
    if (config.max_concurrency < 1)
        throw core::Error("max_concurrency must be >= 1");
    if (config.timeout_ms <= 0)
        throw core::Error("timeout_ms must be positive");
}

void validate_params(const GenerationParams& params) {
    if (params.temperature < 0.0)
        throw core::Error("temperature must be >= 0");
    if (!(params.top_p > 0.0 && params.top_p <= 1.0))
        throw core::Error("top_p must be in (0, 1]");
    if (params.max_tokens <= 0)
        throw core::Error("max_tokens must be positive");
}

namespace {

bool trace_enabled() {
    const char* v = std::getenv("TIGEREVAL_TRACE");
    return v != nullptr && std::string_view(v) == "1";
}

void trace(const std::string& line) {
    if (trace_enabled()) std::cerr << "[tigereval trace] " << line << "\n";
}

std::string build_request_body(const EndpointConfig& config,
                               const std::vector<ChatTurn>& conversation,
                               const GenerationParams& params) {
    ordered_json body;
    body["model"] = config.model_name;
    ordered_json messages = ordered_json::array();
    for (const auto& turn : conversation) {
        ordered_json msg;
        msg["role"] = std::string(to_string(turn.role));
        msg["content"] = turn.content;
        messages.push_back(std::move(msg));
    }
    body["messages"] = std::move(messages);
    body["temperature"] = params.temperature;
    body["top_p"] = params.top_p;
    body["max_tokens"] = params.max_tokens;
    if (params.seed) body["seed"] = *params.seed;
    return body.dump();
}

std::string concat_contents(const std::vector<ChatTurn>& conversation) {
    std::string all;
    for (const auto& turn : conversation) {
        if (!all.empty()) all += "\n---\n";
        all += turn.content;
    }
    return all;
}

std::string extract_completion(const std::string& body) {
    json reply;
    try {
        reply = json::parse(body);
    } catch (const json::exception& e) {
        throw ContentError(std::string("unparseable completion body: ") + e.what());
    }
    if (!reply.contains("choices") || !reply["choices"].is_array() ||
        reply["choices"].empty())
        throw ContentError("completion body has no choices");
    const json& first = reply["choices"][0];
    if (!first.contains("message") || !first["message"].contains("content") ||
        !first["message"]["content"].is_string())
        throw ContentError("completion body has no message content");
    return first["message"]["content"].get<std::string>();
}

bool retryable_status(int status) {
    return status == 0 || status == 429 || (status >= 500 && status <= 599);
}

}  // namespace

TransportResponse HttpTransport::send(const TransportRequest& request) {
    std::string url = request.url;
    std::size_t scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        return {0, "", "malformed endpoint URL: " + url};
    std::size_t path_start = url.find('/', scheme_end + 3);
    std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path =
        path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);

    httplib::Client cli(origin);
    cli.set_connection_timeout(0, request.timeout_ms * 1000L);
    cli.set_read_timeout(request.timeout_ms / 1000, (request.timeout_ms % 1000) * 1000);
    cli.set_write_timeout(request.timeout_ms / 1000, (request.timeout_ms % 1000) * 1000);

    httplib::Headers headers;
    if (!request.api_key.empty())
        headers.emplace("Authorization", "Bearer " + request.api_key);

    auto res = cli.Post(path, headers, request.body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
}

MockTransport::MockTransport(std::vector<MockEntry> entries)
    : entries_(std::move(entries)) {
    remaining_.reserve(entries_.size());
    for (const auto& e : entries_) remaining_.push_back(e.times);
}

std::shared_ptr<MockTransport> MockTransport::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw core::Error("cannot read mock fixture file: " + path.string());
    std::vector<MockEntry> entries;
    std::string line;
    while (std::getline(in, line)) {
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw core::Error("malformed fixture line: " + std::string(e.what()));
        }
        MockEntry entry;
        if (j.contains("match_hash")) entry.match_hash = j["match_hash"].get<std::string>();
        if (j.contains("contains")) {
            if (j["contains"].is_string())
                entry.contains.push_back(j["contains"].get<std::string>());
            else
                entry.contains = j["contains"].get<std::vector<std::string>>();
        }
        entry.reply = j.value("reply", std::string{});
        entry.status = j.value("status", 200);
        entry.times = j.value("times", -1);
        entry.latency_ms = j.value("latency_ms", 0);
        entries.push_back(std::move(entry));
    }
    return std::make_shared<MockTransport>(std::move(entries));
}

TransportResponse MockTransport::send(const TransportRequest& request) {
    int now = in_flight_.fetch_add(1) + 1;
    int seen_max = max_in_flight_.load();
    while (now > seen_max && !max_in_flight_.compare_exchange_weak(seen_max, now)) {
    }
    request_count_.fetch_add(1);

    int latency = 0;
    TransportResponse response;
    {
        std::lock_guard<std::mutex> lock(mutex_);
        seen_.push_back(request.all_content);
        bool matched = false;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            const MockEntry& e = entries_[i];
            if (remaining_[i] == 0) continue;
            if (e.match_hash && *e.match_hash != request.content_hash) continue;
            bool all_present = true;
            for (const auto& needle : e.contains) {
                if (request.all_content.find(needle) == std::string::npos) {
                    all_present = false;
                    break;
                }
            }
            if (!all_present) continue;
            if (remaining_[i] > 0) --remaining_[i];
            latency = e.latency_ms;
            if (e.status == 200) {
                ordered_json body;
                body["choices"] = ordered_json::array();
                ordered_json message;
                message["role"] = "assistant";
                message["content"] = e.reply;
                ordered_json choice;
                choice["message"] = std::move(message);
                body["choices"].push_back(std::move(choice));
                response = {200, body.dump(), ""};
            } else {
                response = {e.status, e.reply, ""};
            }
            matched = true;
            break;
        }
        if (!matched) response = {400, "", "no mock fixture entry matched the request"};
    }
    if (latency > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(latency));
    in_flight_.fetch_sub(1);
    return response;
}

std::vector<std::string> MockTransport::seen_contents() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return seen_;
}

ChatClient::ChatClient(std::shared_ptr<Transport> transport, EndpointConfig config)
    : transport_(std::move(transport)), config_(std::move(config)) {
    validate_config(config_);
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr)
            api_key_ = key;
    }
    sleeper_ = [](int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); };
}

ChatClient ChatClient::for_config(const EndpointConfig& config) {
    if (config.base_url.rfind("mock:", 0) == 0) {
        auto transport = MockTransport::from_file(config.base_url.substr(5));
        return ChatClient(transport, config);
    }
    return ChatClient(std::make_shared<HttpTransport>(), config);
}

std::string ChatClient::complete(const std::vector<ChatTurn>& conversation,
                                 const GenerationParams& params,
                                 std::vector<Attempt>* attempts_out) {
    if (conversation.empty() || conversation.back().role != Role::User)
        throw core::Error("conversation must end with a user turn");
    for (const auto& turn : conversation) {
        if (turn.role != Role::System && turn.content.empty())
            throw core::Error("user/assistant turns must be non-empty");
    }
    validate_params(params);

    std::vector<ChatTurn> turns;
    if (config_.system_prompt)
        turns.push_back({Role::System, *config_.system_prompt});
    turns.insert(turns.end(), conversation.begin(), conversation.end());

    TransportRequest request;
    request.url = config_.base_url;
    request.body = build_request_body(config_, turns, params);
    request.api_key = api_key_;
    request.timeout_ms = config_.timeout_ms;
    request.all_content = concat_contents(turns);
    request.content_hash = text::fnv1a64_hex(request.all_content);

    std::mt19937_64 jitter_rng(static_cast<std::uint64_t>(params.seed.value_or(0)) ^
                               text::fnv1a64(request.all_content));

    trace("request " + request.content_hash + " -> " + request.url +
          " (api key redacted) body=" + request.body);

    TransportResponse response;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        int base_delay = 0;
        int jittered = 0;
        if (attempt > 0) {
            base_delay = config_.backoff_base_ms * (1 << (attempt - 1));
            std::uniform_real_distribution<double> dist(-0.2, 0.2);
            jittered = static_cast<int>(base_delay * (1.0 + dist(jitter_rng)));
            if (jittered < 0) jittered = 0;
            sleeper_(jittered);
        }
        response = transport_->send(request);
        if (attempts_out != nullptr)
            attempts_out->push_back({response.status, base_delay, jittered});
        trace("response status=" + std::to_string(response.status));

        if (response.status == 401 || response.status == 403)
            throw AuthError("endpoint rejected credentials (status " +
                            std::to_string(response.status) + ")");
        if (response.status == 200) {
            std::string content = extract_completion(response.body);
            if (content.empty()) throw ContentError("endpoint returned an empty completion");
            return content;
        }
        if (!retryable_status(response.status))
            throw TransportError("endpoint error status " + std::to_string(response.status) +
                                 ": " + (response.error.empty() ? response.body : response.error));
    }
    throw TransportError("retries exhausted (" + std::to_string(config_.max_retries + 1) +
                         " attempts, last status " + std::to_string(response.status) + ": " +
                         (response.error.empty() ? response.body : response.error) + ")");
}

namespace detail {

void run_bounded_impl(std::size_t count, int max_concurrency,
                      const std::function<void(std::size_t)>& fn) {
    if (count == 0) return;
    std::size_t workers =
        std::min<std::size_t>(static_cast<std::size_t>(std::max(1, max_concurrency)), count);
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto work = [&] {
        while (true) {
            std::size_t index = next.fetch_add(1);
            if (index >= count) return;
            try {
                fn(index);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

std::vector<Result<std::string>> ChatClient::map_ordered(
    std::size_t count, const std::function<std::string(std::size_t)>& fn) {
    std::vector<Result<std::string>> results(count);
    run_bounded(count, config_.max_concurrency, [&](std::size_t index) {
        try {
            results[index].value = fn(index);
        } catch (const AuthError& e) {
            results[index].error = e.what();
            results[index].error_kind = "auth";
        } catch (const TransportError& e) {
            results[index].error = e.what();
            results[index].error_kind = "transport";
        } catch (const ContentError& e) {
            results[index].error = e.what();
            results[index].error_kind = "content";
        } catch (const parser::ParseFailure& e) {
            results[index].error = e.what();
            results[index].error_kind = "parse";
        } catch (const std::exception& e) {
            results[index].error = e.what();
            results[index].error_kind = "error";
        }
    });
    return results;
}

std::vector<Result<std::string>> ChatClient::complete_many(
    const std::vector<std::vector<ChatTurn>>& conversations,
    const GenerationParams& params) {
    return map_ordered(conversations.size(),
                       [&](std::size_t i) { return complete(conversations[i], params); });
}

templates::TemplateId generation_template_for(const core::TaskKind& task) {
    if (!task.is_builtin()) return templates::TemplateId::GenInstruct;
    switch (task.builtin()) {
        case core::BuiltinTask::Summarization: return templates::TemplateId::GenSumm;
        case core::BuiltinTask::Translation: return templates::TemplateId::GenTrans;
        case core::BuiltinTask::Data2Text: return templates::TemplateId::GenD2T;
        case core::BuiltinTask::LongFormQA: return templates::TemplateId::GenLFQA;
        case core::BuiltinTask::MathQA: return templates::TemplateId::GenMathQA;
        case core::BuiltinTask::InstructionFollowing:
            return templates::TemplateId::GenInstruct;
    }
    return templates::TemplateId::GenInstruct;
}

templates::TemplateContext generation_context(const core::EvalInstance& instance,
                                              const core::AspectTaxonomy& taxonomy,
                                              const templates::TemplateRegistry& registry,
                                              templates::TemplateId id) {
    std::string instruction_and_source = instance.instruction;
    if (!instance.input.empty()) instruction_and_source += "\n" + instance.input;

    templates::TemplateContext candidates = {
        {"generation_instruction", instance.instruction},
        {"input_context", instance.input},
        {"hypothesis_output", instance.hypothesis},
        {"reference_output", instance.reference.value_or("")},
        {"task", instance.task.display_name()},
        {"aspects_descriptions",
         aspects_block(taxonomy, templates::AspectStyle::NamesWithDefinitions)},
        {"aspects_list", aspects_block(taxonomy, templates::AspectStyle::NamesOnly)},
        {"generation_instruction_and_source", instruction_and_source},
    };
    templates::TemplateContext ctx;
    for (const auto& name : registry.placeholders(id)) {
        auto it = candidates.find(name);
        if (it != candidates.end()) ctx.emplace(name, it->second);
    }
    return ctx;
}

std::pair<std::string, std::string> ChatClient::two_step_error_analysis(
    const core::EvalInstance& instance, const core::AspectTaxonomy& taxonomy,
    const GenerationParams& params, const templates::TemplateRegistry& registry) {
    core::validate_instance(instance);

    templates::TemplateId gen_id = generation_template_for(instance.task);
    std::string gen_prompt =
        registry.render(gen_id, generation_context(instance, taxonomy, registry, gen_id));

    std::string free_text;
    try {
        free_text = complete({{Role::User, gen_prompt}}, params);
    } catch (const AuthError&) {
        throw;
    } catch (const core::Error& e) {
        throw TransportError("two-step generation turn failed: " + std::string(e.what()));
    }

    templates::TemplateContext format_ctx = {
        {"aspects_list", aspects_block(taxonomy, templates::AspectStyle::NamesOnly)}};
    std::string format_prompt =
        registry.render(templates::TemplateId::JsonFormat, format_ctx);

    std::string formatted;
    try {
        formatted = complete({{Role::User, gen_prompt},
                              {Role::Assistant, free_text},
                              {Role::User, format_prompt}},
                             params);
    } catch (const AuthError&) {
        throw;
    } catch (const core::Error& e) {
        throw TransportError("two-step formatting turn failed: " + std::string(e.what()));
    }
    return {free_text, formatted};
}

core::ScoredInstance ChatClient::single_step_score(
    const core::EvalInstance& instance, const GenerationParams& params,
    const templates::TemplateRegistry& registry) {
    core::validate_instance(instance);
    templates::TemplateContext ctx = {
        {"generation_instruction", instance.instruction},
        {"input_context", instance.input},
        {"hypothesis_output", instance.hypothesis},
    };
    std::string prompt = registry.render(templates::TemplateId::TigerscoreInference, ctx);
    std::string reply = complete({{Role::User, prompt}}, params);
    parser::ParseOutcome outcome = parser::parse_auto(reply);
    core::ScoredInstance scored;
    scored.instance = instance;
    scored.analysis = std::move(outcome.analysis);
    scored.score = core::score(scored.analysis);
    return scored;
}

}  // namespace tigereval::client
