#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <utility>
#include <string_view>

#include "hash.hpp"

namespace lrat::prompts {

// Versioned judge templates. Changing any text here changes template_hash()
// and therefore every cache digest; bump the version suffix alongside.

inline constexpr std::string_view kRelevanceVersion = "relevance-v1";

inline constexpr std::string_view kRelevanceSystem =
    "You are a strict relevance assessor for a search agent. You are shown a search query, a document the "
    "agent opened, and the reasoning the agent wrote immediately after reading it. Decide whether the "
    "reasoning actually uses the document's content to make progress on the query.";

inline constexpr std::string_view kRelevanceUser =
    "Query:\n{query}\n\n"
    "Document title:\n{title}\n\n"
    "Document content:\n{document}\n\n"
    "Agent reasoning after reading the document:\n{reasoning}\n\n"
    "Label the (query, document) pair. Answer RELEVANT if the reasoning relies on information from the document "
    "to support progress on the task, and IRRELEVANT if the reasoning dismisses the document or does not use it. "
    "End your reply with a final line containing exactly one word: RELEVANT or IRRELEVANT.";

inline constexpr std::string_view kAnswerVersion = "answer-v1";

inline constexpr std::string_view kAnswerSystem =
    "You grade answers to information-seeking questions by semantic equivalence with a reference answer.";

inline constexpr std::string_view kAnswerUser =
    "Question:\n{question}\n\n"
    "Reference answer:\n{gold}\n\n"
    "Predicted answer:\n{predicted}\n\n"
    "Does the predicted answer state the same entity or fact as the reference answer? Minor formatting "
    "differences and extra context are acceptable. End your reply with a final line containing exactly one "
    "word: CORRECT or INCORRECT.";

/// Single-pass substitution of {name} placeholders; substituted values are
/// never rescanned.
inline std::string render(std::string_view tmpl, std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
    std::string out;
    std::size_t pos = 0;
    while (pos < tmpl.size()) {
        const std::size_t open = tmpl.find('{', pos);
        if (open == std::string_view::npos) break;
        const std::size_t close = tmpl.find('}', open);
        if (close == std::string_view::npos) break;
        out.append(tmpl.substr(pos, open - pos));
        const std::string_view name = tmpl.substr(open + 1, close - open - 1);
        bool replaced = false;
        for (const auto& [key, value] : values) {
            if (key == name) {
                out.append(value);
                replaced = true;
                break;
            }
        }
        if (!replaced) out.append(tmpl.substr(open, close - open + 1));
        pos = close + 1;
    }
    out.append(tmpl.substr(std::min(pos, tmpl.size())));
    return out;
}

inline std::string relevance_template_hash() {
    return Digest().add(kRelevanceVersion).add(kRelevanceSystem).add(kRelevanceUser).hex();
}

inline std::string answer_template_hash() { return Digest().add(kAnswerVersion).add(kAnswerSystem).add(kAnswerUser).hex(); }

}  // namespace lrat::prompts
