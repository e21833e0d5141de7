#pragma once

#include <algorithm>
#include <cstddef>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "text.hpp"

namespace lrat {

enum class Label { correct, incorrect, overflow, unknown };

inline std::string_view to_string(Label label) {
    switch (label) {
        case Label::correct: return "correct";
        case Label::incorrect: return "incorrect";
        case Label::overflow: return "overflow";
        case Label::unknown: return "unknown";
    }
    return "unknown";
}

inline std::optional<Label> parse_label(std::string_view s) {
    if (s == "correct") return Label::correct;
    if (s == "incorrect") return Label::incorrect;
    if (s == "overflow") return Label::overflow;
    if (s == "unknown") return Label::unknown;
    return std::nullopt;
}

struct SearchResultItem {
    std::string doc_id;
    std::size_t rank = 0;  // 1-based
    std::string snippet;

    friend bool operator==(const SearchResultItem&, const SearchResultItem&) = default;
};

struct SearchAction {
    std::string query;
    friend bool operator==(const SearchAction&, const SearchAction&) = default;
};

struct BrowseAction {
    std::string doc_id;
    std::size_t source_turn = 0;
    friend bool operator==(const BrowseAction&, const BrowseAction&) = default;
};

struct AnswerAction {
    std::string text;
    friend bool operator==(const AnswerAction&, const AnswerAction&) = default;
};

using Action = std::variant<SearchAction, BrowseAction, AnswerAction>;

struct ResultsObservation {
    std::vector<SearchResultItem> items;
    friend bool operator==(const ResultsObservation&, const ResultsObservation&) = default;
};

struct DocumentObservation {
    std::string doc_id;
    std::string content;
    friend bool operator==(const DocumentObservation&, const DocumentObservation&) = default;
};

using Observation = std::variant<std::monostate, ResultsObservation, DocumentObservation>;

struct Turn {
    std::size_t index = 0;
    std::string think;
    Action action;
    Observation observation;

    bool is_search() const { return std::holds_alternative<SearchAction>(action); }
    bool is_browse() const { return std::holds_alternative<BrowseAction>(action); }
    bool is_answer() const { return std::holds_alternative<AnswerAction>(action); }

    /// Result list of a Search turn; nullptr otherwise.
    const std::vector<SearchResultItem>* results() const {
        const auto* r = std::get_if<ResultsObservation>(&observation);
        return r ? &r->items : nullptr;
    }

    friend bool operator==(const Turn&, const Turn&) = default;
};

struct Trajectory {
    std::string id;
    std::string question;
    std::optional<std::string> gold_answer;
    Label label = Label::unknown;
    std::vector<Turn> turns;

    std::size_t count_searches() const {
        return static_cast<std::size_t>(std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.is_search(); }));
    }
    std::size_t count_browses() const {
        return static_cast<std::size_t>(std::count_if(turns.begin(), turns.end(), [](const Turn& t) { return t.is_browse(); }));
    }
    /// Text of the final Answer, if the trajectory has one.
    std::optional<std::string> answer() const {
        if (turns.empty()) return std::nullopt;
        if (const auto* a = std::get_if<AnswerAction>(&turns.back().action)) return a->text;
        return std::nullopt;
    }

    friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

/// Environment limits a trajectory is checked against.
struct TrajectoryRules {
    std::size_t step_cap = 50;        // turn count of Overflow trajectories
    std::size_t max_results = 10;     // K, the result-list size
    std::size_t snippet_tokens = 64;  // snippet token budget
};

struct Violation {
    std::optional<std::size_t> turn;  // empty for trajectory-level rules
    std::string rule;
    std::string detail;
};

/// Checks every model invariant. Rule ids:
///   index-sequence, empty-query, answer-not-final, multiple-answers,
///   observation-mismatch, document-id-mismatch, browse-source-order,
///   browse-source-not-search, browse-doc-not-in-results, rank-collision,
///   rank-gap, rank-range, snippet-too-long, overflow-length
inline std::vector<Violation> validate_trajectory(const Trajectory& t, const TrajectoryRules& rules = {}) {
    std::vector<Violation> out;
    const auto add = [&](std::optional<std::size_t> turn, std::string rule, std::string detail) {
        out.push_back({turn, std::move(rule), std::move(detail)});
    };
    const std::size_t n = t.turns.size();
    std::size_t answers = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Turn& turn = t.turns[i];
        if (turn.index != i) add(i, "index-sequence", "expected index " + std::to_string(i) + ", found " + std::to_string(turn.index));

        if (const auto* search = std::get_if<SearchAction>(&turn.action)) {
            if (trim(search->query).empty()) add(i, "empty-query", "search query is empty");
            const auto* results = std::get_if<ResultsObservation>(&turn.observation);
            if (!results) {
                add(i, "observation-mismatch", "search turn must observe a result list");
                continue;
            }
            std::vector<std::size_t> ranks;
            for (const auto& item : results->items) {
                ranks.push_back(item.rank);
                if (count_tokens(item.snippet) > rules.snippet_tokens) {
                    add(i, "snippet-too-long", "snippet of " + item.doc_id + " exceeds " + std::to_string(rules.snippet_tokens) + " tokens");
                }
            }
            std::sort(ranks.begin(), ranks.end());
            if (std::adjacent_find(ranks.begin(), ranks.end()) != ranks.end()) {
                add(i, "rank-collision", "duplicate rank in result list");
            } else {
                for (std::size_t r = 0; r < ranks.size(); ++r) {
                    if (ranks[r] != r + 1) {
                        add(i, "rank-gap", "ranks are not contiguous from 1");
                        break;
                    }
                }
            }
            if (results->items.size() > rules.max_results) {
                add(i, "rank-range", "result list longer than " + std::to_string(rules.max_results));
            }
        } else if (const auto* browse = std::get_if<BrowseAction>(&turn.action)) {
            const auto* doc = std::get_if<DocumentObservation>(&turn.observation);
            if (!doc) {
                add(i, "observation-mismatch", "browse turn must observe a document");
            } else if (doc->doc_id != browse->doc_id) {
                add(i, "document-id-mismatch", "observed " + doc->doc_id + " but browsed " + browse->doc_id);
            }
            if (browse->source_turn >= i) {
                add(i, "browse-source-order", "source_turn " + std::to_string(browse->source_turn) + " is not earlier");
            } else if (const auto* src = t.turns[browse->source_turn].results(); !src || !t.turns[browse->source_turn].is_search()) {
                add(i, "browse-source-not-search", "source_turn " + std::to_string(browse->source_turn) + " is not a search turn");
            } else if (std::none_of(src->begin(), src->end(), [&](const SearchResultItem& it) { return it.doc_id == browse->doc_id; })) {
                add(i, "browse-doc-not-in-results", browse->doc_id + " absent from results of turn " + std::to_string(browse->source_turn));
            }
        } else {
            ++answers;
            if (!std::holds_alternative<std::monostate>(turn.observation)) {
                add(i, "observation-mismatch", "answer turn must have no observation");
            }
            if (answers > 1) {
                add(i, "multiple-answers", "more than one answer action");
            } else if (i + 1 != n) {
                add(i, "answer-not-final", "answer at turn " + std::to_string(i) + " of " + std::to_string(n));
            }
        }
    }
    if (t.label == Label::overflow && n != rules.step_cap) {
        add(std::nullopt, "overflow-length", "overflow trajectory has " + std::to_string(n) + " turns, step cap is " + std::to_string(rules.step_cap));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Line-delimited record format

inline Json to_json(const SearchResultItem& item) {
    Json j;
    j["doc_id"] = item.doc_id;
    j["rank"] = item.rank;
    j["snippet"] = item.snippet;
    return j;
}

inline Json to_json(const Turn& turn) {
    Json j;
    j["index"] = turn.index;
    j["think"] = turn.think;
    Json action;
    if (const auto* s = std::get_if<SearchAction>(&turn.action)) {
        action["type"] = "search";
        action["query"] = s->query;
    } else if (const auto* b = std::get_if<BrowseAction>(&turn.action)) {
        action["type"] = "browse";
        action["doc_id"] = b->doc_id;
        action["source_turn"] = b->source_turn;
    } else {
        action["type"] = "answer";
        action["text"] = std::get<AnswerAction>(turn.action).text;
    }
    j["action"] = std::move(action);
    if (const auto* r = std::get_if<ResultsObservation>(&turn.observation)) {
        Json obs;
        obs["type"] = "results";
        obs["items"] = Json::array();
        for (const auto& item : r->items) obs["items"].push_back(to_json(item));
        j["observation"] = std::move(obs);
    } else if (const auto* d = std::get_if<DocumentObservation>(&turn.observation)) {
        Json obs;
        obs["type"] = "document";
        obs["doc_id"] = d->doc_id;
        obs["content"] = d->content;
        j["observation"] = std::move(obs);
    } else {
        j["observation"] = nullptr;
    }
    return j;
}

inline Json to_json(const Trajectory& t) {
    Json j;
    j["id"] = t.id;
    j["question"] = t.question;
    j["gold_answer"] = t.gold_answer ? Json(*t.gold_answer) : Json(nullptr);
    j["label"] = std::string(to_string(t.label));
    j["turns"] = Json::array();
    for (const auto& turn : t.turns) j["turns"].push_back(to_json(turn));
    return j;
}

/// Canonical single-line form: schema key order, no whitespace.
inline std::string serialize_trajectory(const Trajectory& t) { return dump_line(to_json(t)); }

inline void write_trajectories(std::ostream& out, const std::vector<Trajectory>& ts) {
    for (const auto& t : ts) out << serialize_trajectory(t) << '\n';
}

namespace detail {

inline Turn turn_from_json(const Json& j, std::size_t line, const std::string& path, const std::vector<Turn>& earlier) {
    Turn turn;
    turn.index = field::index_at(j, "index", line, path);
    turn.think = field::string_at(j, "think", line, path);

    const Json& action = field::require(j, "action", line, path);
    const std::string apath = path + ".action";
    const std::string type = field::string_at(action, "type", line, apath);
    if (type == "search") {
        turn.action = SearchAction{field::string_at(action, "query", line, apath)};
    } else if (type == "browse") {
        BrowseAction browse;
        browse.doc_id = field::string_at(action, "doc_id", line, apath);
        if (action.contains("source_turn") && !action["source_turn"].is_null()) {
            browse.source_turn = field::index_at(action, "source_turn", line, apath);
        } else {
            // Most recent earlier result list containing the document wins.
            bool found = false;
            for (std::size_t k = earlier.size(); k-- > 0;) {
                const auto* items = earlier[k].results();
                if (items && std::any_of(items->begin(), items->end(), [&](const SearchResultItem& it) { return it.doc_id == browse.doc_id; })) {
                    browse.source_turn = k;
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw ParseError(line, "field '" + apath + ".source_turn': " + browse.doc_id + " does not appear in any earlier result list");
            }
        }
        turn.action = std::move(browse);
    } else if (type == "answer") {
        turn.action = AnswerAction{field::string_at(action, "text", line, apath)};
    } else {
        throw ParseError(line, "field '" + apath + ".type': unknown action type '" + type + "'");
    }

    const Json& obs = field::require(j, "observation", line, path);
    const std::string opath = path + ".observation";
    if (obs.is_null()) {
        turn.observation = std::monostate{};
    } else {
        const std::string otype = field::string_at(obs, "type", line, opath);
        if (otype == "results") {
            const Json& items = field::require(obs, "items", line, opath);
            if (!items.is_array()) throw ParseError(line, "field '" + opath + ".items': expected array");
            ResultsObservation r;
            for (std::size_t k = 0; k < items.size(); ++k) {
                const std::string ipath = opath + ".items[" + std::to_string(k) + "]";
                SearchResultItem item;
                item.doc_id = field::string_at(items[k], "doc_id", line, ipath);
                item.rank = field::index_at(items[k], "rank", line, ipath);
                item.snippet = field::string_at(items[k], "snippet", line, ipath);
                r.items.push_back(std::move(item));
            }
            turn.observation = std::move(r);
        } else if (otype == "document") {
            turn.observation = DocumentObservation{field::string_at(obs, "doc_id", line, opath),
                                                   field::string_at(obs, "content", line, opath)};
        } else {
            throw ParseError(line, "field '" + opath + ".type': unknown observation type '" + otype + "'");
        }
    }
    return turn;
}

}  // namespace detail

/// Decodes one record without checking model invariants.
inline Trajectory trajectory_from_json(const Json& j, std::size_t line = 0) {
    Trajectory t;
    t.id = field::string_at(j, "id", line, "");
    t.question = field::string_at(j, "question", line, "");
    const Json& gold = field::require(j, "gold_answer", line, "");
    if (!gold.is_null()) {
        if (!gold.is_string()) throw ParseError(line, "field 'gold_answer': expected string or null");
        t.gold_answer = gold.get<std::string>();
    }
    const std::string label = field::string_at(j, "label", line, "");
    const auto parsed = parse_label(label);
    if (!parsed) throw ParseError(line, "field 'label': unknown label '" + label + "'");
    t.label = *parsed;
    const Json& turns = field::require(j, "turns", line, "");
    if (!turns.is_array()) throw ParseError(line, "field 'turns': expected array");
    for (std::size_t k = 0; k < turns.size(); ++k) {
        t.turns.push_back(detail::turn_from_json(turns[k], line, "turns[" + std::to_string(k) + "]", t.turns));
    }
    return t;
}

/// Decodes and validates every record; the first failure aborts with an
/// error naming the line and either the field or the trajectory/turn.
inline std::vector<Trajectory> parse_trajectories(std::istream& in, const TrajectoryRules& rules = {}) {
    std::vector<Trajectory> out;
    for_each_json_line(in, [&](std::size_t line, const Json& j) {
        Trajectory t = trajectory_from_json(j, line);
        const auto violations = validate_trajectory(t, rules);
        if (!violations.empty()) {
            const auto& v = violations.front();
            throw ParseError(line, "trajectory " + t.id + (v.turn ? " turn " + std::to_string(*v.turn) : std::string()) + ": " + v.rule + " (" + v.detail + ")");
        }
        out.push_back(std::move(t));
    });
    return out;
}

inline std::vector<Trajectory> parse_trajectories(std::string_view text, const TrajectoryRules& rules = {}) {
    std::istringstream in{std::string(text)};
    return parse_trajectories(in, rules);
}

inline std::vector<Trajectory> load_trajectories(const std::filesystem::path& path, const TrajectoryRules& rules = {}) {
    auto in = open_input(path);
    return parse_trajectories(in, rules);
}

}  // namespace lrat
