#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "corpus.hpp"
#include "error.hpp"
#include "hash.hpp"
#include "io.hpp"
#include "prompts.hpp"
#include "text.hpp"

namespace lrat {

enum class Decision { relevant, irrelevant, undecided };

inline std::string_view to_string(Decision d) {
    switch (d) {
        case Decision::relevant: return "relevant";
        case Decision::irrelevant: return "irrelevant";
        case Decision::undecided: return "undecided";
    }
    return "undecided";
}

inline std::optional<Decision> parse_decision(std::string_view s) {
    if (s == "relevant") return Decision::relevant;
    if (s == "irrelevant") return Decision::irrelevant;
    if (s == "undecided") return Decision::undecided;
    return std::nullopt;
}

struct JudgeVerdict {
    Decision decision = Decision::undecided;
    std::string raw_response;
    std::uint64_t latency_ms = 0;
    std::string digest;  // request digest
    std::string error;   // transport or parse problem, when undecided
    bool cached = false;
};

struct HeuristicThresholds {
    std::size_t min_reasoning_tokens = 8;
    double min_overlap = 0.15;
};

struct JudgeConfig {
    std::string endpoint_url;  // falls back to $LRAT_JUDGE_URL
    std::string model_name = "judge";
    std::string api_key_env = "LRAT_JUDGE_KEY";
    std::uint64_t timeout_ms = 60000;
    std::size_t max_retries = 2;
    std::optional<std::filesystem::path> cache_path;
    HeuristicThresholds heuristic;
    std::size_t document_token_budget = 512;

    void check() const {
        if (!(heuristic.min_overlap >= 0.0 && heuristic.min_overlap <= 1.0)) throw InputError("min_overlap must be in [0, 1]");
    }
};

/// Last occurrence of either label as a whole word, case-insensitive.
/// Returns the index into `labels`, or nothing when neither appears.
inline std::optional<std::size_t> last_label(std::string_view response, std::initializer_list<std::string_view> labels) {
    std::string upper(response);
    std::transform(upper.begin(), upper.end(), upper.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    const auto word_char = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    std::optional<std::size_t> best;
    std::size_t best_pos = 0;
    std::size_t idx = 0;
    for (const auto label : labels) {
        for (std::size_t pos = upper.find(label); pos != std::string::npos; pos = upper.find(label, pos + 1)) {
            const bool left_ok = pos == 0 || !word_char(upper[pos - 1]);
            const std::size_t end = pos + label.size();
            const bool right_ok = end >= upper.size() || !word_char(upper[end]);
            if (left_ok && right_ok && (!best || pos >= best_pos)) {
                best = idx;
                best_pos = pos;
            }
        }
        ++idx;
    }
    return best;
}

inline Decision parse_relevance_response(std::string_view response) {
    const auto label = last_label(response, {"RELEVANT", "IRRELEVANT"});
    if (!label) return Decision::undecided;
    return *label == 0 ? Decision::relevant : Decision::irrelevant;
}

/// true = CORRECT, false = INCORRECT, nothing = unparseable.
inline std::optional<bool> parse_answer_response(std::string_view response) {
    const auto label = last_label(response, {"CORRECT", "INCORRECT"});
    if (!label) return std::nullopt;
    return *label == 0;
}

/// |A ∩ B| / min(|A|, |B|) over distinct token sets; 0 when either is empty.
inline double overlap_coefficient(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    const std::set<std::string> sa(a.begin(), a.end());
    const std::set<std::string> sb(b.begin(), b.end());
    if (sa.empty() || sb.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& t : sa) common += sb.count(t);
    return static_cast<double>(common) / static_cast<double>(std::min(sa.size(), sb.size()));
}

/// Casefolded token-sequence containment either way; empty strings never match.
inline bool answers_match(std::string_view predicted, std::string_view gold) {
    const auto p = tokenize(predicted);
    const auto g = tokenize(gold);
    if (p.empty() || g.empty()) return false;
    const auto contains = [](const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
        return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
    };
    return contains(p, g) || contains(g, p);
}

class Judge {
public:
    virtual ~Judge() = default;
    virtual JudgeVerdict judge_relevance(std::string_view query, const Document& document, std::string_view reasoning) = 0;
    virtual bool verify_answer(std::string_view question, std::string_view predicted, std::string_view gold) = 0;
    virtual std::string template_hash() const = 0;
    virtual std::string name() const = 0;
};

/// Deterministic lexical stand-in for the LLM judge.
class HeuristicJudge final : public Judge {
public:
    explicit HeuristicJudge(HeuristicThresholds thresholds = {}) : thresholds_(thresholds) {
        if (!(thresholds.min_overlap >= 0.0 && thresholds.min_overlap <= 1.0)) throw InputError("min_overlap must be in [0, 1]");
    }

    JudgeVerdict judge_relevance(std::string_view query, const Document& document, std::string_view reasoning) override {
        const auto r = tokenize(reasoning);
        const double overlap = overlap_coefficient(r, tokenize(document.indexed_text()));
        JudgeVerdict v;
        v.decision = (r.size() >= thresholds_.min_reasoning_tokens && overlap >= thresholds_.min_overlap) ? Decision::relevant
                                                                                                         : Decision::irrelevant;
        v.raw_response = "tokens=" + std::to_string(r.size()) + " overlap=" + std::to_string(overlap);
        v.digest = Digest().add(template_hash()).add(query).add(document.doc_id).add(document.text).add(reasoning).hex();
        return v;
    }

    bool verify_answer(std::string_view, std::string_view predicted, std::string_view gold) override {
        return answers_match(predicted, gold);
    }

    std::string template_hash() const override {
        return Digest()
            .add("heuristic-v1")
            .add(std::to_string(thresholds_.min_reasoning_tokens))
            .add(std::to_string(thresholds_.min_overlap))
            .hex();
    }

    std::string name() const override { return "heuristic"; }

    const HeuristicThresholds& thresholds() const { return thresholds_; }

private:
    HeuristicThresholds thresholds_;
};

/// Append-only verdict cache keyed by request digest. Readers and the
/// single appender are serialized by one mutex.
class VerdictCache {
public:
    struct Entry {
        std::string decision;
        std::string raw;
    };

    explicit VerdictCache(std::filesystem::path path) : path_(std::move(path)) {
        if (std::filesystem::exists(path_)) {
            auto in = open_input(path_);
            for_each_json_line(in, [&](std::size_t line, const Json& j) {
                entries_[field::string_at(j, "digest", line, "")] = {field::string_at(j, "decision", line, ""),
                                                                     field::string_at(j, "raw", line, "")};
            });
        }
    }

    std::optional<Entry> get(const std::string& digest) const {
        std::lock_guard lock(mutex_);
        auto it = entries_.find(digest);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    void put(const std::string& digest, const Entry& e) {
        std::lock_guard lock(mutex_);
        if (!entries_.emplace(digest, e).second) return;
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        std::ofstream out(path_, std::ios::app);
        Json j;
        j["digest"] = digest;
        j["decision"] = e.decision;
        j["raw"] = e.raw;
        out << dump_line(j) << '\n';
    }

    std::size_t size() const {
        std::lock_guard lock(mutex_);
        return entries_.size();
    }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, Entry> entries_;
};

/// Result of one HTTP exchange as seen by the remote judge.
struct HttpReply {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string error;
};

/// Chat-completion request body (system + user message, temperature 0).
inline Json chat_request(std::string_view model, std::string_view system, std::string_view user) {
    Json req;
    req["model"] = model;
    req["temperature"] = 0;
    req["messages"] = Json::array();
    req["messages"].push_back(Json{{"role", "system"}, {"content", system}});
    req["messages"].push_back(Json{{"role", "user"}, {"content", user}});
    return req;
}

/// Extracts choices[0].message.content; nothing when the shape is wrong.
inline std::optional<std::string> chat_content(std::string_view body) {
    try {
        const auto j = nlohmann::json::parse(body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        if (!content.is_string()) return std::nullopt;
        return content.get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

}  // namespace lrat
