// lrat: command-line pipeline over trajectory mining, weighting, training,
// evaluation, analytics and the synthetic flywheel.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <lrat.hpp>
#include <lrat/remote_judge.hpp>

namespace {

using namespace lrat;
namespace fs = std::filesystem;

constexpr double kTransformerLearningRate = 1e-6;

std::string option_name(const CLI::Option* opt) {
    if (!opt->get_lnames().empty()) return opt->get_lnames().front();
    if (!opt->get_snames().empty()) return opt->get_snames().front();
    return opt->get_name();
}

// Effective values of every option of a subcommand (file + overrides + defaults).
Json effective_config(const CLI::App& app, const CLI::App& sub) {
    Json j = Json::object();
    const auto collect = [&](const CLI::App& a, Json& into) {
        for (const CLI::Option* opt : a.get_options()) {
            const std::string name = option_name(opt);
            if (name == "help" || name == "config") continue;
            if (opt->get_expected_min() == 0) {
                into[name] = opt->count() > 0;
            } else if (opt->count() > 0) {
                const auto& r = opt->results();
                if (r.size() == 1) {
                    into[name] = r.front();
                } else {
                    into[name] = r;
                }
            } else {
                into[name] = opt->get_default_str();
            }
        }
    };
    collect(app, j["global"]);
    collect(sub, j[sub.get_name()]);
    return j;
}

struct RunRecord {
    Manifest manifest;
    fs::path path;

    void begin() { write_manifest(path, manifest); }
    void finish() {
        manifest.status = "ok";
        write_manifest(path, manifest);
    }
};

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".manifest.json"); }

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw InputError("cannot open input file: " + p.string());
}

std::unique_ptr<Judge> make_judge(JudgeMode mode, const JudgeConfig& cfg) {
    switch (mode) {
        case JudgeMode::off: return nullptr;
        case JudgeMode::heuristic: return std::make_unique<HeuristicJudge>(cfg.heuristic);
        case JudgeMode::remote: return std::make_unique<RemoteJudge>(cfg);
    }
    return nullptr;
}

JudgeMode judge_mode_of(const std::string& s) {
    const auto m = parse_judge_mode(s);
    if (!m) throw InputError("unknown judge mode: " + s);
    return *m;
}

struct JudgeOptions {
    std::string mode;
    std::string url;
    std::string model = "judge";
    std::string cache;
    std::size_t max_retries = 2;
    std::uint64_t timeout_ms = 60000;
    std::size_t min_reasoning_tokens = 8;
    double min_overlap = 0.15;

    void add(CLI::App* sub, std::string default_mode) {
        mode = std::move(default_mode);
        sub->add_option("--judge", mode, "Judge backend: off, heuristic or remote")->check(CLI::IsMember({"off", "heuristic", "remote"}));
        sub->add_option("--judge-url", url, "Chat-completion endpoint (falls back to $LRAT_JUDGE_URL)");
        sub->add_option("--judge-model", model, "Model name sent to the remote judge");
        sub->add_option("--judge-cache", cache, "Verdict cache file (JSONL, append-only)");
        sub->add_option("--judge-retries", max_retries, "Retries after transport errors, 429 and 5xx");
        sub->add_option("--judge-timeout-ms", timeout_ms, "Per-request timeout");
        sub->add_option("--min-reasoning-tokens", min_reasoning_tokens, "Heuristic judge: minimum post-browse reasoning length");
        sub->add_option("--min-overlap", min_overlap, "Heuristic judge: minimum reasoning/document overlap coefficient");
    }

    JudgeConfig config() const {
        JudgeConfig c;
        c.endpoint_url = url;
        c.model_name = model;
        c.max_retries = max_retries;
        c.timeout_ms = timeout_ms;
        if (!cache.empty()) c.cache_path = cache;
        c.heuristic = {min_reasoning_tokens, min_overlap};
        c.check();
        return c;
    }
};

struct TrainOptions {
    TrainConfig cfg;
    std::size_t vocab = kDefaultVocab;
    std::size_t dim = kDefaultDim;
    std::uint64_t hash_seed = 2025;
    std::uint64_t init_seed = 2025;
    std::string init_checkpoint;

    void add(CLI::App* sub) {
        sub->add_option("--tau", cfg.tau, "Softmax temperature");
        sub->add_option("--group-size", cfg.group_size, "Positive plus trajectory negatives per sample");
        sub->add_option("--epochs", cfg.epochs, "Passes over the dataset");
        sub->add_option("--batch-size", cfg.batch_size, "Samples per batch");
        sub->add_option("--lr", cfg.learning_rate, "SGD learning rate (desk-scale default)");
        sub->add_option("--max-tokens", cfg.max_tokens, "Token cap per encoded text");
        sub->add_option("--seed", cfg.seed, "Training seed (shuffling, negative padding)");
        sub->add_flag("--no-in-batch", [this](std::int64_t) { cfg.use_in_batch_negatives = false; }, "Disable in-batch negatives");
        sub->add_option("--vocab", vocab, "Hashed vocabulary size V");
        sub->add_option("--dim", dim, "Embedding dimension h");
        sub->add_option("--hash-seed", hash_seed, "Token hashing seed");
        sub->add_option("--init-seed", init_seed, "Embedding initialisation seed");
        sub->add_option("--init-checkpoint", init_checkpoint, "Start from this checkpoint instead of a fresh table");
    }

    EncoderParams initial() const {
        if (!init_checkpoint.empty()) {
            require_file(init_checkpoint);
            return load_checkpoint(init_checkpoint);
        }
        return init_encoder(vocab, dim, hash_seed, init_seed);
    }

    Json notes() const {
        return Json{{"learning_rate_used", cfg.learning_rate},
                    {"learning_rate_transformer_scale", kTransformerLearningRate},
                    {"encoder", "hashed bag-of-tokens"},
                    {"vocab", vocab},
                    {"dim", dim}};
    }
};

EvidenceMap evidence_from_tasks(const std::vector<EvalTask>& tasks) {
    EvidenceMap m;
    for (const auto& t : tasks) m[t.question] = t.evidence_doc_ids;
    return m;
}

std::vector<EvalTask> load_tasks(const fs::path& p) {
    auto in = open_input(p);
    return parse_tasks(in);
}

// ---------------------------------------------------------------------------

struct Cli {
    CLI::App app{"Learning to retrieve from agent trajectories"};
    std::size_t threads = 1;

    // mine
    std::string mine_trajectories, mine_corpus, mine_out, mine_audit;
    bool mine_require_correct = false, mine_strict = false, mine_dedup = false, mine_recycle = false;
    std::size_t mine_min_negatives = 1;
    JudgeOptions mine_judge;

    // weigh
    std::string weigh_dataset, weigh_out, weigh_fit_trajectories;

    // train
    std::string train_dataset, train_corpus, train_out;
    TrainOptions train;

    // eval
    std::string eval_checkpoint, eval_tasks, eval_corpus, eval_trajectories, eval_out;
    bool eval_bm25 = false, eval_any = false, eval_browsed = false;
    std::size_t eval_k = 10;
    JudgeOptions eval_judge;

    // stats
    std::string stats_trajectories, stats_evidence, stats_out;
    bool stats_plot = false;
    std::size_t stats_bin_width = 10;
    double stats_z = 1.96;

    // simulate
    std::uint64_t sim_seed = 2025;
    std::size_t sim_docs = 500, sim_tasks = 200, sim_hops = 2;
    WorldOptions sim_world;
    ScriptedAgentConfig sim_agent;
    std::string sim_retriever = "bm25", sim_out;

    // flywheel
    std::string fly_world, fly_out;
    FlywheelConfig fly;
    TrainOptions fly_train;
    JudgeOptions fly_judge;
    bool fly_fit_all = false;

    CLI::App *mine, *weigh, *train_cmd, *eval, *stats, *simulate, *flywheel;

    Cli() {
        app.option_defaults()->always_capture_default();
        app.set_config("--config", "", "TOML config file; sections are subcommand names");
        app.add_option("--threads", threads, "Worker pool size (outputs do not depend on it)")->check(CLI::PositiveNumber);
        app.require_subcommand(1);
        app.fallthrough();

        mine = app.add_subcommand("mine", "Mine (query, positive, negatives) instances from trajectories");
        mine->add_option("--trajectories", mine_trajectories, "Trajectory JSONL")->required();
        mine->add_option("--corpus", mine_corpus, "Corpus JSONL used to resolve document text");
        mine->add_flag("--require-correct", mine_require_correct, "Mine only Correct trajectories");
        mine->add_flag("--strict", mine_strict, "Drop instances the judge leaves undecided");
        mine->add_flag("--dedup", mine_dedup, "Keep the first (query, positive) pair per trajectory");
        mine->add_flag("--recycle-rejected", mine_recycle, "Rejected positives join sibling negatives");
        mine->add_option("--min-negatives", mine_min_negatives, "Drop instances with fewer negatives");
        mine->add_option("--audit", mine_audit, "Write judge verdicts to this JSONL file");
        mine_judge.add(mine, "off");
        mine->add_option("-o,--output", mine_out, "Dataset JSONL")->required();

        weigh = app.add_subcommand("weigh", "Fit beta and mu_raw and attach intensity weights");
        weigh->add_option("--dataset", weigh_dataset, "Mined dataset JSONL")->required();
        weigh->add_option("--fit-trajectories", weigh_fit_trajectories, "Fit on every post-browse trace of these trajectories instead");
        weigh->add_option("-o,--output", weigh_out, "Weighted dataset JSONL")->required();

        train_cmd = app.add_subcommand("train", "Train the hashed dual encoder with weighted InfoNCE");
        train_cmd->add_option("--dataset", train_dataset, "Weighted (or plain) dataset JSONL")->required();
        train_cmd->add_option("--corpus", train_corpus, "Corpus JSONL for negative padding")->required();
        train.add(train_cmd);
        train_cmd->add_option("-o,--output", train_out, "Checkpoint file")->required();

        eval = app.add_subcommand("eval", "Success rate, evidence recall and steps of trajectories");
        auto* ck = eval->add_option("--checkpoint", eval_checkpoint, "Dense checkpoint whose retrieval is replayed on logged queries");
        auto* bm = eval->add_flag("--bm25", eval_bm25, "Replay logged queries against BM25");
        ck->excludes(bm);
        eval->add_option("--tasks", eval_tasks, "Task JSONL (question, gold_answer, evidence_doc_ids)")->required();
        eval->add_option("--corpus", eval_corpus, "Corpus JSONL")->required();
        eval->add_option("--trajectories", eval_trajectories, "Trajectory JSONL, one per task")->required();
        eval->add_option("--k", eval_k, "Replay depth");
        eval->add_flag("--any-evidence", eval_any, "Count a hit when any evidence document is retrieved");
        eval->add_flag("--require-browsed", eval_browsed, "Evidence must also be browsed");
        eval_judge.add(eval, "heuristic");
        eval->add_option("-o,--output", eval_out, "Report JSON")->required();

        stats = app.add_subcommand("stats", "Trajectory analytics tables");
        stats->add_option("--trajectories", stats_trajectories, "Trajectory JSONL")->required();
        stats->add_option("--evidence", stats_evidence, "Task JSONL mapping questions to evidence documents");
        stats->add_flag("--plot-data", stats_plot, "Also write histogram bins for plotting");
        stats->add_option("--bin-width", stats_bin_width, "Reasoning-length histogram bin width");
        stats->add_option("--z", stats_z, "Wilson interval z");
        stats->add_option("-o,--output", stats_out, "Output directory")->required();

        simulate = app.add_subcommand("simulate", "Generate a synthetic world and agent trajectories");
        simulate->add_option("--world-seed", sim_seed, "World seed");
        simulate->add_option("--docs", sim_docs, "Documents");
        simulate->add_option("--tasks", sim_tasks, "Tasks");
        simulate->add_option("--hops", sim_hops, "Facts per task chain");
        simulate->add_option("--relations", sim_world.relations, "Relation types");
        simulate->add_option("--side-facts", sim_world.side_facts, "Extra facts per document");
        simulate->add_option("--filler-tokens", sim_world.filler_tokens, "Filler tokens per document");
        simulate->add_option("--agent-retriever", sim_retriever, "Retriever the agent searches with: bm25 or dense")
            ->check(CLI::IsMember({"bm25", "dense"}));
        simulate->add_option("--agent-seed", sim_agent.seed, "Policy seed");
        simulate->add_option("--max-turns", sim_agent.max_turns, "Step cap per episode");
        simulate->add_option("--synonym-prob", sim_agent.synonym_probability, "Chance a query uses a relation synonym");
        simulate->add_flag("--shuffle-results", sim_agent.shuffle_results, "Shuffle result lists before the agent sees them");
        simulate->add_option("-o,--output", sim_out, "World directory")->required();

        flywheel = app.add_subcommand("flywheel", "Closed loop: episodes, mining, weighting, training, evaluation");
        flywheel->add_option("--world", fly_world, "World directory from simulate")->required();
        flywheel->add_option("--iterations", fly.iterations, "Training iterations after the baseline")->check(CLI::PositiveNumber);
        flywheel->add_option("--queries-per-step", fly.queries_per_step, "Training tasks sampled per iteration")->check(CLI::PositiveNumber);
        flywheel->add_flag("--include-incorrect", fly.include_incorrect, "Mine every trajectory, not only Correct ones");
        flywheel->add_flag("--fit-all-post-browse", fly_fit_all, "Fit weighting on every post-browse trace of the iteration");
        flywheel->add_option("--sampling-seed", fly.seed, "Task sampling seed");
        flywheel->add_option("--agent-seed", fly.agent.seed, "Policy seed");
        flywheel->add_option("--synonym-prob", fly.agent.synonym_probability, "Chance a query uses a relation synonym");
        flywheel->add_flag("--shuffle-results", fly.agent.shuffle_results, "Shuffle result lists before the agent sees them");
        fly_train.add(flywheel);
        fly_judge.add(flywheel, "heuristic");
        flywheel->add_option("-o,--output", fly_out, "Run directory")->required();

        for (CLI::App* sub : app.get_subcommands({})) {
            for (CLI::Option* opt : sub->get_options()) {
                if (opt->get_expected_min() == 0 && option_name(opt) != "help") opt->description(opt->get_description() + " [off]");
            }
        }
    }

    int run() {
        if (mine->parsed()) return run_mine();
        if (weigh->parsed()) return run_weigh();
        if (train_cmd->parsed()) return run_train();
        if (eval->parsed()) return run_eval();
        if (stats->parsed()) return run_stats();
        if (simulate->parsed()) return run_simulate();
        if (flywheel->parsed()) return run_flywheel_cmd();
        return 2;
    }

    RunRecord start(const CLI::App& sub, fs::path manifest_path) {
        RunRecord r;
        r.path = std::move(manifest_path);
        r.manifest.command = sub.get_name();
        r.manifest.config = effective_config(app, sub);
        return r;
    }

    int run_mine() {
        require_file(mine_trajectories);
        if (!mine_corpus.empty()) require_file(mine_corpus);
        auto run = start(*mine, manifest_for_file(mine_out));
        run.manifest.add_input(mine_trajectories);
        if (!mine_corpus.empty()) run.manifest.add_input(mine_corpus);
        run.begin();

        const auto trajs = load_trajectories(mine_trajectories);
        std::optional<Corpus> corpus;
        if (!mine_corpus.empty()) corpus = load_corpus(mine_corpus);
        MiningConfig cfg;
        cfg.require_correct_label = mine_require_correct;
        cfg.min_negatives = mine_min_negatives;
        cfg.judge_mode = judge_mode_of(mine_judge.mode);
        cfg.strict = mine_strict;
        cfg.deduplicate = mine_dedup;
        cfg.recycle_rejected_positives = mine_recycle;
        cfg.max_in_flight = threads;
        auto judge = make_judge(cfg.judge_mode, mine_judge.config());
        std::optional<std::ofstream> audit_file;
        if (!mine_audit.empty()) audit_file = open_output(mine_audit);
        AuditLog audit(audit_file ? &*audit_file : nullptr);
        const auto instances = mine_dataset(trajs, cfg, judge.get(), corpus ? &*corpus : nullptr, &audit);
        {
            auto out = open_output(mine_out);
            write_dataset(out, instances);
        }
        if (judge) run.manifest.notes["judge_template_hash"] = judge->template_hash();
        run.manifest.notes["trajectories"] = trajs.size();
        run.manifest.notes["instances"] = instances.size();
        run.manifest.add_output(mine_out);
        if (audit_file) {
            audit_file->close();
            run.manifest.add_output(mine_audit);
        }
        run.finish();
        std::printf("mined %zu instances from %zu trajectories\n", instances.size(), trajs.size());
        return 0;
    }

    int run_weigh() {
        require_file(weigh_dataset);
        if (!weigh_fit_trajectories.empty()) require_file(weigh_fit_trajectories);
        auto run = start(*weigh, manifest_for_file(weigh_out));
        run.manifest.add_input(weigh_dataset);
        if (!weigh_fit_trajectories.empty()) run.manifest.add_input(weigh_fit_trajectories);
        run.begin();

        std::vector<CandidateInstance> instances;
        {
            auto in = open_input(weigh_dataset);
            instances = parse_dataset(in);
        }
        const auto lengths = weigh_fit_trajectories.empty() ? reasoning_lengths(instances)
                                                            : post_browse_lengths(load_trajectories(weigh_fit_trajectories));
        const auto params = fit_params(lengths);
        const auto pairs = apply_weights(std::move(instances), params);
        {
            auto out = open_output(weigh_out);
            write_weighted_dataset(out, pairs);
        }
        run.manifest.notes["beta"] = params.beta;
        run.manifest.notes["mu_raw"] = params.mu_raw;
        run.manifest.add_output(weigh_out);
        run.finish();
        std::printf("beta=%g mu_raw=%.6f instances=%zu mean_weight=%.6f\n", params.beta, params.mu_raw, pairs.size(), mean_weight(pairs));
        return 0;
    }

    int run_train() {
        require_file(train_dataset);
        require_file(train_corpus);
        auto run = start(*train_cmd, manifest_for_file(train_out));
        run.manifest.add_input(train_dataset);
        run.manifest.add_input(train_corpus);
        if (!train.init_checkpoint.empty()) run.manifest.add_input(train.init_checkpoint);
        run.manifest.seeds = {{"train", train.cfg.seed}, {"hash", train.hash_seed}, {"init", train.init_seed}};
        run.manifest.notes = train.notes();
        run.begin();

        std::vector<WeightedPair> dataset;
        {
            auto in = open_input(train_dataset);
            dataset = parse_weighted_dataset(in);
        }
        const Corpus corpus = load_corpus(train_corpus);
        const auto result = lrat::train(train.initial(), dataset, train.cfg, &corpus);
        save_checkpoint(train_out, result.params);
        const fs::path loss_path = train_out + ".loss.csv";
        {
            auto out = open_output(loss_path);
            write_loss_history(out, result.history);
        }
        run.manifest.notes["padded_negatives"] = result.padded_negatives;
        run.manifest.notes["epoch_loss"] = result.epoch_loss;
        run.manifest.add_output(train_out);
        run.manifest.add_output(loss_path);
        run.finish();
        for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) std::printf("epoch %zu loss %.6f\n", e + 1, result.epoch_loss[e]);
        return 0;
    }

    int run_eval() {
        if (eval_checkpoint.empty() && !eval_bm25) throw InputError("eval needs --checkpoint or --bm25");
        for (const auto& f : {eval_tasks, eval_corpus, eval_trajectories}) require_file(f);
        if (!eval_checkpoint.empty()) require_file(eval_checkpoint);
        auto run = start(*eval, manifest_for_file(eval_out));
        for (const auto& f : {eval_tasks, eval_corpus, eval_trajectories}) run.manifest.add_input(f);
        if (!eval_checkpoint.empty()) run.manifest.add_input(eval_checkpoint);
        run.begin();

        const auto tasks = load_tasks(eval_tasks);
        auto corpus = std::make_shared<const Corpus>(load_corpus(eval_corpus));
        const auto trajs = load_trajectories(eval_trajectories);
        const EvalOptions opts{!eval_any, eval_browsed};
        const auto mode = judge_mode_of(eval_judge.mode);
        if (mode == JudgeMode::off) throw InputError("eval needs a judge for answer verification");
        auto judge = make_judge(mode, eval_judge.config());
        const auto report = evaluate(trajs, tasks, *judge, opts);

        const RetrieverHandle retriever = eval_bm25 ? make_bm25_retriever(corpus)
                                                    : export_dense_retriever(std::make_shared<const EncoderParams>(load_checkpoint(eval_checkpoint)), corpus);
        // Replay every logged query against the chosen retriever.
        std::unordered_map<std::string, const Trajectory*> by_question;
        for (const auto& t : trajs) by_question[t.question] = &t;
        double replay_hits = 0;
        for (const auto& task : tasks) {
            Trajectory replay;
            const Trajectory& logged = *by_question.at(task.question);
            for (const auto& turn : logged.turns) {
                const auto* s = std::get_if<SearchAction>(&turn.action);
                if (!s) continue;
                Turn t;
                t.action = *s;
                t.observation = ResultsObservation{search_topk(retriever, s->query, eval_k)};
                replay.turns.push_back(std::move(t));
            }
            replay_hits += evidence_hit(replay, task.evidence_doc_ids, {opts.require_all_evidence, false});
        }
        Json j = to_json(report);
        j["replay"] = Json{{"retriever", eval_bm25 ? "bm25" : "dense"},
                           {"k", eval_k},
                           {"evidence_recall", tasks.empty() ? 0.0 : replay_hits / static_cast<double>(tasks.size())}};
        {
            auto out = open_output(eval_out);
            out << j.dump(2) << '\n';
        }
        run.manifest.add_output(eval_out);
        run.finish();
        std::printf("success_rate=%.4f evidence_recall=%.4f avg_steps=%.2f replay_recall=%.4f\n", report.success_rate, report.evidence_recall,
                    report.avg_steps, j["replay"]["evidence_recall"].get<double>());
        return 0;
    }

    int run_stats() {
        require_file(stats_trajectories);
        if (!stats_evidence.empty()) require_file(stats_evidence);
        const fs::path dir = stats_out;
        auto run = start(*stats, dir / "manifest.json");
        run.manifest.add_input(stats_trajectories);
        if (!stats_evidence.empty()) run.manifest.add_input(stats_evidence);
        run.begin();

        const auto trajs = load_trajectories(stats_trajectories);
        std::optional<EvidenceMap> evidence;
        if (!stats_evidence.empty()) evidence = evidence_from_tasks(load_tasks(stats_evidence));
        char buf[256];

        const auto write = [&](const std::string& name, const auto& body) {
            {
                auto out = open_output(dir / name);
                body(out);
            }
            run.manifest.add_output(dir / name);
        };
        write("trajectory_stats.csv", [&](std::ostream& out) { write_stats_csv(out, compute_stats(trajs)); });
        write("action_transitions.csv", [&](std::ostream& out) {
            const auto m = transition_probabilities(trajs);
            static constexpr const char* names[] = {"Search", "Browse", "Answer"};
            out << "from,to,count,probability\n";
            for (std::size_t a = 0; a < 3; ++a) {
                for (std::size_t b = 0; b < 3; ++b) {
                    std::snprintf(buf, sizeof buf, "%s,%s,%zu,", names[a], names[b], m.counts[a][b]);
                    out << buf;
                    if (m.probabilities[a]) {
                        std::snprintf(buf, sizeof buf, "%.6f", (*m.probabilities[a])[b]);
                        out << buf;
                    }
                    out << '\n';
                }
            }
        });
        if (evidence) {
            write("accuracy_by_evidence_browsed.csv", [&](std::ostream& out) {
                out << "bin,n,successes,accuracy,wilson_lower,wilson_upper\n";
                for (const auto& b : accuracy_by_evidence_browsed(trajs, *evidence, {0, 1, 2, 3}, stats_z)) {
                    std::snprintf(buf, sizeof buf, "%s,%zu,%zu,%.6f,%.6f,%.6f\n", b.label.c_str(), b.interval.n, b.successes, b.interval.point,
                                  b.interval.lower, b.interval.upper);
                    out << buf;
                }
            });
        }
        const auto lengths = reasoning_length_report(trajs, evidence ? &*evidence : nullptr, stats_bin_width);
        const auto partition_name = [](const LengthPartition& p) {
            std::string s(to_string(p.label));
            if (p.evidence) s += *p.evidence ? "/evidence" : "/non-evidence";
            return s;
        };
        write("reasoning_length_summary.csv", [&](std::ostream& out) {
            out << "partition,n,mean,median\n";
            for (const auto& p : lengths) {
                std::snprintf(buf, sizeof buf, "%s,%zu,%.4f,%.1f\n", partition_name(p).c_str(), p.samples.size(), p.mean, p.median);
                out << buf;
            }
        });
        if (stats_plot) {
            write("browse_rank_histogram.csv", [&](std::ostream& out) {
                const auto h = browse_rank_distribution(trajs);
                out << "rank,count,frequency\n";
                for (std::size_t i = 0; i < h.counts.size(); ++i) {
                    std::snprintf(buf, sizeof buf, "%zu,%zu,%.6f\n", i + 1, h.counts[i], h.frequencies[i]);
                    out << buf;
                }
            });
            write("reasoning_length_histogram.csv", [&](std::ostream& out) {
                out << "partition,bin_lower,bin_upper,count,frequency\n";
                for (const auto& p : lengths) {
                    for (std::size_t i = 0; i < p.histogram.counts.size(); ++i) {
                        std::snprintf(buf, sizeof buf, "%s,%g,%g,%zu,%.6f\n", partition_name(p).c_str(), p.histogram.edges[i], p.histogram.edges[i + 1],
                                      p.histogram.counts[i], p.histogram.frequencies[i]);
                        out << buf;
                    }
                }
            });
        }
        run.finish();
        std::printf("wrote analytics for %zu trajectories to %s\n", trajs.size(), dir.string().c_str());
        return 0;
    }

    int run_simulate() {
        const fs::path dir = sim_out;
        auto run = start(*simulate, dir / "manifest.json");
        run.manifest.seeds = {{"world", sim_seed}, {"agent", sim_agent.seed}};
        run.begin();

        const auto world = generate_world(sim_seed, sim_docs, sim_tasks, sim_hops, sim_world);
        save_world(world, dir);
        const RetrieverHandle retriever =
            sim_retriever == "bm25"
                ? make_bm25_retriever(world.corpus)
                : export_dense_retriever(std::make_shared<const EncoderParams>(init_encoder(kDefaultVocab, kDefaultDim, sim_seed, sim_seed)), world.corpus);
        const auto train_trajs = run_episodes(world, world.task_indices(false), retriever, sim_agent, "sim", threads);
        const auto held_trajs = run_episodes(world, world.task_indices(true), retriever, sim_agent, "sim", threads);
        {
            auto out = open_output(dir / "trajectories.jsonl");
            write_trajectories(out, train_trajs);
        }
        {
            auto out = open_output(dir / "heldout_trajectories.jsonl");
            write_trajectories(out, held_trajs);
        }
        for (const auto* name : {"corpus.jsonl", "tasks.jsonl", "heldout_tasks.jsonl", "world.json", "trajectories.jsonl", "heldout_trajectories.jsonl"}) {
            run.manifest.add_output(dir / name);
        }
        run.finish();
        std::size_t correct = 0;
        for (const auto& t : train_trajs) correct += t.label == Label::correct;
        std::printf("world: %zu documents, %zu tasks (%zu held out); %zu/%zu training episodes correct\n", world.corpus->size(), world.tasks.size(),
                    held_trajs.size(), correct, train_trajs.size());
        return 0;
    }

    int run_flywheel_cmd() {
        const fs::path world_dir = fly_world;
        require_file(world_dir / "world.json");
        require_file(world_dir / "corpus.jsonl");
        const fs::path dir = fly_out;
        fly.train = fly_train.cfg;
        fly.fit_on_all_post_browse = fly_fit_all;
        fly.threads = threads;
        fly.mining.judge_mode = judge_mode_of(fly_judge.mode);
        fly.mining.max_in_flight = threads;
        auto run = start(*flywheel, dir / "manifest.json");
        run.manifest.add_input(world_dir / "world.json");
        run.manifest.add_input(world_dir / "corpus.jsonl");
        run.manifest.seeds = {{"sampling", fly.seed}, {"agent", fly.agent.seed}, {"train", fly.train.seed}, {"hash", fly_train.hash_seed},
                              {"init", fly_train.init_seed}};
        run.manifest.notes = fly_train.notes();
        run.begin();

        const auto world = load_world(world_dir);
        auto judge = make_judge(fly.mining.judge_mode, fly_judge.config());
        HeuristicJudge unused;
        Judge& j = judge ? *judge : static_cast<Judge&>(unused);

        std::vector<std::string> rows;
        const auto sink = [&](const IterationArtifacts& a) {
            char name[32];
            std::snprintf(name, sizeof name, "iteration_%zu", a.record.iteration);
            const fs::path it_dir = dir / name;
            const auto emit = [&](const fs::path& p, const auto& body) {
                {
                    auto out = open_output(p);
                    body(out);
                }
                run.manifest.add_output(p);
            };
            if (a.record.iteration > 0) {
                emit(it_dir / "train_trajectories.jsonl", [&](std::ostream& o) { write_trajectories(o, a.train_trajectories); });
                emit(it_dir / "weighted_dataset.jsonl", [&](std::ostream& o) { write_weighted_dataset(o, a.dataset); });
            }
            emit(it_dir / "eval_trajectories.jsonl", [&](std::ostream& o) { write_trajectories(o, a.eval_trajectories); });
            emit(it_dir / "report.json", [&](std::ostream& o) {
                Json r = to_json(a.record.report);
                r["iteration"] = a.record.iteration;
                r["episodes"] = a.record.episodes;
                r["correct_episodes"] = a.record.correct_episodes;
                r["mined"] = a.record.mined;
                r["trained"] = a.record.trained;
                if (a.record.weighting) r["weighting"] = Json{{"beta", a.record.weighting->beta}, {"mu_raw", a.record.weighting->mu_raw}};
                r["epoch_loss"] = a.record.epoch_loss;
                o << r.dump(2) << '\n';
            });
            save_checkpoint(it_dir / "checkpoint.bin", a.params);
            run.manifest.add_output(it_dir / "checkpoint.bin");
            char row[256];
            std::snprintf(row, sizeof row, "%zu,%.6f,%.6f,%.4f,%zu,%zu,%zu,%s", a.record.iteration, a.record.report.success_rate,
                          a.record.report.evidence_recall, a.record.report.avg_steps, a.record.episodes, a.record.mined, a.dataset.size(),
                          a.record.trained ? "yes" : "no");
            rows.push_back(row);
            std::printf("iteration %zu: success_rate=%.4f evidence_recall=%.4f mined=%zu\n", a.record.iteration, a.record.report.success_rate,
                        a.record.report.evidence_recall, a.record.mined);
        };
        const auto result = run_flywheel(world, fly, fly_train.initial(), j, sink);
        save_checkpoint(dir / "checkpoint.bin", result.params);
        run.manifest.add_output(dir / "checkpoint.bin");
        {
            auto out = open_output(dir / "flywheel_report.csv");
            out << "iteration,success_rate,evidence_recall,avg_steps,episodes,mined,trained_pairs,trained\n";
            for (const auto& r : rows) out << r << '\n';
        }
        run.manifest.add_output(dir / "flywheel_report.csv");
        run.finish();
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    Cli cli;
    try {
        cli.app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return cli.app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return cli.app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "lrat: error: %s\n", e.what());
        return 2;
    }
    try {
        return cli.run();
    } catch (const lrat::InputError& e) {
        std::fprintf(stderr, "lrat: error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "lrat: error: %s\n", e.what());
        return 1;
    }
}
