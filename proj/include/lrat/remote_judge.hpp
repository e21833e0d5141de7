#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <functional>
#include <memory>
#include <string>

#include <httplib.h>

#include "judge.hpp"

namespace lrat {

/// Sends one request body and returns the raw reply.
using Transport = std::function<HttpReply(const std::string& body)>;

/// POSTs JSON to `url` ("http://host:port/path"). A URL without a path posts
/// to /v1/chat/completions.
inline Transport http_transport(const std::string& url, const std::string& bearer, std::uint64_t timeout_ms) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw InputError("judge endpoint must include a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base = url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/v1/chat/completions" : url.substr(path_start);
    return [base, path, bearer, timeout_ms](const std::string& body) {
        httplib::Client client(base);
        const auto secs = static_cast<time_t>(timeout_ms / 1000);
        const auto usecs = static_cast<time_t>((timeout_ms % 1000) * 1000);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        httplib::Headers headers;
        if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
        HttpReply reply;
        auto res = client.Post(path, headers, body, "application/json");
        if (!res) {
            reply.error = httplib::to_string(res.error());
            return reply;
        }
        reply.transport_ok = true;
        reply.status = res->status;
        reply.body = res->body;
        return reply;
    };
}

/// LLM-as-judge over a chat-completion endpoint, with retries and an optional
/// digest-keyed verdict cache.
class RemoteJudge final : public Judge {
public:
    explicit RemoteJudge(JudgeConfig config, Transport transport = {}) : config_(std::move(config)) {
        config_.check();
        if (!transport) {
            if (config_.endpoint_url.empty()) {
                if (const char* env = std::getenv("LRAT_JUDGE_URL")) config_.endpoint_url = env;
            }
            if (config_.endpoint_url.empty()) throw InputError("remote judge requires an endpoint (set LRAT_JUDGE_URL)");
            std::string key;
            if (const char* env = std::getenv(config_.api_key_env.c_str())) key = env;
            if (key.empty()) throw InputError("remote judge requires an API key in $" + config_.api_key_env);
            transport = http_transport(config_.endpoint_url, key, config_.timeout_ms);
        }
        transport_ = std::move(transport);
        if (config_.cache_path) cache_ = std::make_unique<VerdictCache>(*config_.cache_path);
    }

    JudgeVerdict judge_relevance(std::string_view query, const Document& document, std::string_view reasoning) override {
        const std::string doc_text = token_prefix(document.text, config_.document_token_budget);
        const std::string user = prompts::render(prompts::kRelevanceUser, {{"query", query},
                                                                            {"title", document.title},
                                                                            {"document", doc_text},
                                                                            {"reasoning", reasoning}});
        const std::string digest =
            Digest().add(prompts::relevance_template_hash()).add(config_.model_name).add(query).add(document.doc_id).add(doc_text).add(reasoning).hex();
        JudgeVerdict v;
        v.digest = digest;
        if (cache_) {
            if (auto hit = cache_->get(digest)) {
                v.decision = parse_decision(hit->decision).value_or(Decision::undecided);
                v.raw_response = hit->raw;
                v.cached = true;
                return v;
            }
        }
        const auto start = std::chrono::steady_clock::now();
        const auto reply = exchange(prompts::kRelevanceSystem, user);
        v.latency_ms = static_cast<std::uint64_t>(
            std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count());
        if (!reply.content) {
            v.error = reply.error;
            return v;
        }
        v.raw_response = *reply.content;
        v.decision = parse_relevance_response(*reply.content);
        if (v.decision == Decision::undecided) {
            v.error = "response has no RELEVANT/IRRELEVANT label";
        } else if (cache_) {
            cache_->put(digest, {std::string(to_string(v.decision)), v.raw_response});
        }
        return v;
    }

    bool verify_answer(std::string_view question, std::string_view predicted, std::string_view gold) override {
        const std::string user = prompts::render(prompts::kAnswerUser, {{"question", question}, {"gold", gold}, {"predicted", predicted}});
        const std::string digest =
            Digest().add(prompts::answer_template_hash()).add(config_.model_name).add(question).add(predicted).add(gold).hex();
        if (cache_) {
            if (auto hit = cache_->get(digest)) return hit->decision == "correct";
        }
        const auto reply = exchange(prompts::kAnswerSystem, user);
        std::optional<bool> verdict;
        if (reply.content) verdict = parse_answer_response(*reply.content);
        if (!verdict) {
            std::lock_guard lock(warnings_mutex_);
            warnings_.push_back("answer verdict undecided for digest " + digest + ": " +
                                (reply.content ? std::string("unparseable response") : reply.error));
            return false;
        }
        if (cache_) cache_->put(digest, {*verdict ? "correct" : "incorrect", *reply.content});
        return *verdict;
    }

    std::string template_hash() const override { return prompts::relevance_template_hash(); }
    std::string name() const override { return "remote"; }

    /// Transport calls made so far (including retries).
    std::size_t attempts() const { return attempts_.load(); }

    std::vector<std::string> warnings() const {
        std::lock_guard lock(warnings_mutex_);
        return warnings_;
    }

private:
    struct Exchange {
        std::optional<std::string> content;
        std::string error;
    };

    // Transport failures and 429/5xx are retried; any other reply is final.
    Exchange exchange(std::string_view system, const std::string& user) {
        const std::string body = chat_request(config_.model_name, system, user).dump();
        Exchange ex;
        for (std::size_t attempt = 0; attempt <= config_.max_retries; ++attempt) {
            ++attempts_;
            const HttpReply reply = transport_(body);
            if (!reply.transport_ok) {
                ex.error = "transport error: " + reply.error;
                continue;
            }
            if (reply.status == 429 || reply.status >= 500) {
                ex.error = "HTTP " + std::to_string(reply.status);
                continue;
            }
            if (reply.status != 200) {
                ex.error = "HTTP " + std::to_string(reply.status);
                return ex;
            }
            ex.content = chat_content(reply.body);
            if (!ex.content) ex.error = "malformed chat-completion response";
            return ex;
        }
        return ex;
    }

    JudgeConfig config_;
    Transport transport_;
    std::unique_ptr<VerdictCache> cache_;
    std::atomic<std::size_t> attempts_{0};
    mutable std::mutex warnings_mutex_;
    std::vector<std::string> warnings_;
};

}  // namespace lrat
