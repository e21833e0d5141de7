#pragma once

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "io.hpp"
#include "judge.hpp"
#include "trajectory.hpp"

namespace lrat {

struct EvalTask {
    std::string id;
    std::string question;
    std::string gold_answer;
    std::set<std::string> evidence_doc_ids;
};

struct EvalOptions {
    bool require_all_evidence = true;  // false: any evidence doc suffices
    bool require_browsed = false;      // strict: retrieved and browsed
};

struct TaskRecord {
    std::string task_id;
    std::string trajectory_id;
    bool success = false;
    bool evidence_hit = false;
    std::size_t steps = 0;
};

struct EvalReport {
    double success_rate = 0.0;
    double evidence_recall = 0.0;
    double avg_steps = 0.0;
    EvalOptions options;
    std::vector<TaskRecord> records;  // task order
};

inline std::set<std::string> retrieved_doc_ids(const Trajectory& t) {
    std::set<std::string> out;
    for (const auto& turn : t.turns) {
        if (const auto* items = turn.results()) {
            for (const auto& it : *items) out.insert(it.doc_id);
        }
    }
    return out;
}

inline std::set<std::string> browsed_doc_ids(const Trajectory& t) {
    std::set<std::string> out;
    for (const auto& turn : t.turns) {
        if (const auto* b = std::get_if<BrowseAction>(&turn.action)) out.insert(b->doc_id);
    }
    return out;
}

/// Evidence counted as retrieved when it appears in any result list (and, in
/// strict mode, was also browsed). Empty evidence sets count as hits.
inline bool evidence_hit(const Trajectory& t, const std::set<std::string>& evidence, const EvalOptions& opts) {
    if (evidence.empty()) return true;
    const auto retrieved = retrieved_doc_ids(t);
    const auto browsed = opts.require_browsed ? browsed_doc_ids(t) : std::set<std::string>{};
    const auto found = [&](const std::string& id) { return retrieved.count(id) && (!opts.require_browsed || browsed.count(id)); };
    if (opts.require_all_evidence) return std::all_of(evidence.begin(), evidence.end(), found);
    return std::any_of(evidence.begin(), evidence.end(), found);
}

/// Success rate, evidence recall and mean turn count. Trajectories pair with
/// tasks through the question text, one trajectory per task.
inline EvalReport evaluate(const std::vector<Trajectory>& trajectories, const std::vector<EvalTask>& tasks, Judge& judge,
                           const EvalOptions& opts = {}) {
    std::unordered_map<std::string, std::size_t> by_question;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (trim(tasks[i].question).empty()) throw InputError("task " + tasks[i].id + " has an empty question");
        if (!by_question.emplace(tasks[i].question, i).second) throw InputError("duplicate task question for task " + tasks[i].id);
    }
    std::vector<const Trajectory*> matched(tasks.size(), nullptr);
    std::vector<std::string> unmatched;
    for (const auto& t : trajectories) {
        auto it = by_question.find(t.question);
        if (it == by_question.end()) {
            unmatched.push_back("trajectory " + t.id);
            continue;
        }
        if (matched[it->second]) throw InputError("task " + tasks[it->second].id + " has more than one trajectory");
        matched[it->second] = &t;
    }
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (!matched[i]) unmatched.push_back("task " + tasks[i].id);
    }
    if (!unmatched.empty()) {
        std::string msg;
        for (const auto& u : unmatched) msg += (msg.empty() ? "" : ", ") + u;
        throw InputError("unmatched trajectories/tasks: " + msg);
    }

    EvalReport report;
    report.options = opts;
    if (tasks.empty()) return report;
    double succ = 0, hits = 0, steps = 0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        const Trajectory& t = *matched[i];
        TaskRecord r;
        r.task_id = tasks[i].id;
        r.trajectory_id = t.id;
        const auto answer = t.answer();
        r.success = answer && judge.verify_answer(tasks[i].question, *answer, tasks[i].gold_answer);
        r.evidence_hit = evidence_hit(t, tasks[i].evidence_doc_ids, opts);
        r.steps = t.turns.size();
        succ += r.success;
        hits += r.evidence_hit;
        steps += static_cast<double>(r.steps);
        report.records.push_back(std::move(r));
    }
    const double n = static_cast<double>(tasks.size());
    report.success_rate = succ / n;
    report.evidence_recall = hits / n;
    report.avg_steps = steps / n;
    return report;
}

inline Json to_json(const EvalTask& t) {
    Json j;
    j["id"] = t.id;
    j["question"] = t.question;
    j["gold_answer"] = t.gold_answer;
    j["evidence_doc_ids"] = Json::array();
    for (const auto& e : t.evidence_doc_ids) j["evidence_doc_ids"].push_back(e);
    return j;
}

inline std::vector<EvalTask> parse_tasks(std::istream& in) {
    std::vector<EvalTask> out;
    for_each_json_line(in, [&](std::size_t line, const Json& j) {
        EvalTask t;
        t.id = field::string_at(j, "id", line, "");
        t.question = field::string_at(j, "question", line, "");
        if (trim(t.question).empty()) throw ParseError(line, "field 'question': must be non-empty");
        t.gold_answer = field::string_at(j, "gold_answer", line, "");
        const Json& ev = field::require(j, "evidence_doc_ids", line, "");
        if (!ev.is_array()) throw ParseError(line, "field 'evidence_doc_ids': expected array");
        for (const auto& e : ev) {
            if (!e.is_string()) throw ParseError(line, "field 'evidence_doc_ids': expected strings");
            t.evidence_doc_ids.insert(e.get<std::string>());
        }
        out.push_back(std::move(t));
    });
    return out;
}

inline void write_tasks(std::ostream& out, const std::vector<EvalTask>& tasks) {
    for (const auto& t : tasks) out << dump_line(to_json(t)) << '\n';
}

inline Json to_json(const EvalReport& r) {
    Json j;
    j["success_rate"] = r.success_rate;
    j["evidence_recall"] = r.evidence_recall;
    j["avg_steps"] = r.avg_steps;
    j["evidence_semantics"] = r.options.require_all_evidence ? "all" : "any";
    j["require_browsed"] = r.options.require_browsed;
    j["tasks"] = Json::array();
    for (const auto& rec : r.records) {
        j["tasks"].push_back(Json{{"task_id", rec.task_id},
                                  {"trajectory_id", rec.trajectory_id},
                                  {"success", rec.success},
                                  {"evidence_hit", rec.evidence_hit},
                                  {"steps", rec.steps}});
    }
    return j;
}

inline void write_report_csv(std::ostream& out, const EvalReport& r) {
    char buf[128];
    out << "metric,value\n";
    std::snprintf(buf, sizeof buf, "success_rate,%.6f\nevidence_recall,%.6f\navg_steps,%.6f\n", r.success_rate, r.evidence_recall, r.avg_steps);
    out << buf;
}

}  // namespace lrat
