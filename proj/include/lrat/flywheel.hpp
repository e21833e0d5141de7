#pragma once

#include <functional>
#include <future>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "evaluation.hpp"
#include "judge.hpp"
#include "mining.hpp"
#include "retriever.hpp"
#include "simulation.hpp"
#include "trainer.hpp"
#include "weighting.hpp"

namespace lrat {

struct FlywheelConfig {
    std::size_t iterations = 3;
    std::size_t queries_per_step = 100;
    MiningConfig mining{.judge_mode = JudgeMode::heuristic};
    bool fit_on_all_post_browse = false;  // fit beta/mu_raw on every post-browse trace of the iteration
    TrainConfig train;
    bool include_incorrect = false;
    // Optional label filter applied before mining; used by correctness ablations.
    std::optional<Label> only_label;
    ScriptedAgentConfig agent;
    EvalOptions eval;
    std::size_t max_tokens = 512;
    std::size_t threads = 1;
    std::uint64_t seed = 2025;

    void check() const {
        if (iterations == 0) throw InputError("iterations must be at least 1");
        if (queries_per_step == 0) throw InputError("queries_per_step must be positive");
        if (threads == 0) throw InputError("threads must be positive");
        mining.check();
        train.check();
        agent.check();
    }
};

struct IterationRecord {
    std::size_t iteration = 0;  // 0 is the untrained baseline
    EvalReport report;
    std::size_t episodes = 0;
    std::size_t correct_episodes = 0;
    std::size_t mined = 0;
    std::optional<WeightingParams> weighting;
    std::vector<double> epoch_loss;
    bool trained = false;
};

struct IterationArtifacts {
    const IterationRecord& record;
    const std::vector<Trajectory>& train_trajectories;
    const std::vector<Trajectory>& eval_trajectories;
    const std::vector<WeightedPair>& dataset;
    const EncoderParams& params;
};

using IterationSink = std::function<void(const IterationArtifacts&)>;

struct FlywheelResult {
    std::vector<IterationRecord> iterations;
    EncoderParams params;
};

/// Runs one episode per task index; results merge in task order, so the
/// thread count never changes the output.
inline std::vector<Trajectory> run_episodes(const SyntheticWorld& world, const std::vector<std::size_t>& task_indices, const RetrieverHandle& r,
                                            const ScriptedAgentConfig& agent, const std::string& tag, std::size_t threads = 1) {
    std::vector<Trajectory> out(task_indices.size());
    const auto one = [&](std::size_t k) { out[k] = run_episode(world, task_indices[k], r, agent, world.tasks[task_indices[k]].task.id + "@" + tag); };
    if (threads <= 1) {
        for (std::size_t k = 0; k < task_indices.size(); ++k) one(k);
        return out;
    }
    std::vector<std::future<void>> workers;
    for (std::size_t w = 0; w < threads; ++w) {
        workers.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t k = w; k < task_indices.size(); k += threads) one(k);
        }));
    }
    for (auto& f : workers) f.get();
    return out;
}

inline std::vector<std::size_t> sample_training_tasks(const SyntheticWorld& world, std::size_t count, std::uint64_t seed, std::size_t iteration) {
    auto pool = world.task_indices(false);
    Rng rng(mix_seed(seed, 0x7461736b73ULL, iteration));
    rng.shuffle(pool);
    if (pool.size() > count) pool.resize(count);
    std::sort(pool.begin(), pool.end());
    return pool;
}

/// Iteration 0 evaluates the initial retriever. Each later iteration runs
/// episodes on sampled training tasks against the current retriever, mines,
/// weights, trains from the current parameters and evaluates the held-out
/// tasks. Held-out episodes reuse the agent seed every iteration, so changes
/// come from the retriever alone.
inline FlywheelResult run_flywheel(const SyntheticWorld& world, const FlywheelConfig& cfg, EncoderParams params, Judge& judge,
                                   const IterationSink& sink = {}) {
    cfg.check();
    const auto held_out = world.task_indices(true);
    if (held_out.empty()) throw InputError("world has no held-out tasks");
    const auto eval_tasks = world.eval_tasks(true);
    HeuristicJudge answer_judge;

    FlywheelResult result;
    const auto evaluate_current = [&](const EncoderParams& p, std::size_t iteration) {
        const auto retriever = export_dense_retriever(std::make_shared<const EncoderParams>(p), world.corpus, cfg.max_tokens);
        auto trajs = run_episodes(world, held_out, retriever, cfg.agent, "eval" + std::to_string(iteration), cfg.threads);
        auto report = evaluate(trajs, eval_tasks, answer_judge, cfg.eval);
        return std::pair{std::move(trajs), std::move(report)};
    };

    {
        IterationRecord rec;
        auto [eval_trajs, report] = evaluate_current(params, 0);
        rec.report = std::move(report);
        result.iterations.push_back(rec);
        if (sink) sink({result.iterations.back(), {}, eval_trajs, {}, params});
    }

    MiningConfig mining = cfg.mining;
    mining.require_correct_label = !cfg.include_incorrect;
    for (std::size_t it = 1; it <= cfg.iterations; ++it) {
        IterationRecord rec;
        rec.iteration = it;
        const auto retriever = export_dense_retriever(std::make_shared<const EncoderParams>(params), world.corpus, cfg.max_tokens);
        ScriptedAgentConfig agent = cfg.agent;
        agent.seed = mix_seed(cfg.agent.seed, 0x747261696eULL, it);
        auto trajs = run_episodes(world, sample_training_tasks(world, cfg.queries_per_step, cfg.seed, it), retriever, agent,
                                  "it" + std::to_string(it), cfg.threads);
        rec.episodes = trajs.size();
        for (const auto& t : trajs) rec.correct_episodes += t.label == Label::correct;
        if (cfg.only_label) std::erase_if(trajs, [&](const Trajectory& t) { return t.label != *cfg.only_label; });

        auto instances = mine_dataset(trajs, mining, mining.judge_mode == JudgeMode::off ? nullptr : &judge, world.corpus.get());
        rec.mined = instances.size();
        std::vector<WeightedPair> dataset;
        if (!instances.empty()) {
            const auto lengths = cfg.fit_on_all_post_browse ? post_browse_lengths(trajs) : reasoning_lengths(instances);
            try {
                rec.weighting = fit_params(lengths);
                dataset = apply_weights(std::move(instances), *rec.weighting);
            } catch (const InputError&) {
                // zero median length: no usable weighting signal this round
                rec.weighting.reset();
            }
        }
        if (!dataset.empty()) {
            TrainConfig tc = cfg.train;
            tc.seed = mix_seed(cfg.train.seed, it);
            tc.max_tokens = cfg.max_tokens;
            auto trained = train(std::move(params), dataset, tc, world.corpus.get());
            params = std::move(trained.params);
            rec.epoch_loss = std::move(trained.epoch_loss);
            rec.trained = true;
        }
        auto [eval_trajs, report] = evaluate_current(params, it);
        rec.report = std::move(report);
        result.iterations.push_back(std::move(rec));
        if (sink) sink({result.iterations.back(), trajs, eval_trajs, dataset, params});
    }
    result.params = std::move(params);
    return result;
}

struct AblationArm {
    std::size_t instances = 0;
    double evidence_recall = 0.0;  // mean over evaluation policy seeds
    double success_rate = 0.0;
};

struct CorrectnessAblation {
    AblationArm baseline;
    AblationArm correct;
    AblationArm incorrect;
    std::size_t rounds = 0;
};

/// Correct-only versus incorrect-only supervision at equal dataset size.
/// Episodes on every training task are collected with the initial retriever
/// under successive policy seeds until both partitions hold `target`
/// instances (or `max_rounds` is hit); each arm is trimmed to the smaller
/// size, trained once from the initial parameters and evaluated held-out,
/// averaging over `eval_seeds` policy seeds.
inline CorrectnessAblation correctness_ablation(const SyntheticWorld& world, const FlywheelConfig& cfg, const EncoderParams& initial, Judge& judge,
                                                std::size_t target = 200, std::size_t eval_seeds = 5, std::size_t max_rounds = 20) {
    cfg.check();
    const auto retriever = export_dense_retriever(std::make_shared<const EncoderParams>(initial), world.corpus, cfg.max_tokens);
    const auto held_out = world.task_indices(true);
    const auto training = world.task_indices(false);
    const auto eval_tasks = world.eval_tasks(true);
    HeuristicJudge answer_judge;
    MiningConfig mining = cfg.mining;
    mining.require_correct_label = false;

    const auto score = [&](const RetrieverHandle& r, AblationArm& arm) {
        for (std::size_t k = 0; k < eval_seeds; ++k) {
            ScriptedAgentConfig agent = cfg.agent;
            agent.seed = mix_seed(cfg.agent.seed, 0x6576616cULL, k);
            const auto report = evaluate(run_episodes(world, held_out, r, agent, "eval", cfg.threads), eval_tasks, answer_judge, cfg.eval);
            arm.evidence_recall += report.evidence_recall / static_cast<double>(eval_seeds);
            arm.success_rate += report.success_rate / static_cast<double>(eval_seeds);
        }
    };

    CorrectnessAblation out;
    if (eval_seeds == 0) throw InputError("eval_seeds must be positive");
    score(retriever, out.baseline);
    std::vector<CandidateInstance> correct, incorrect;
    for (; out.rounds < max_rounds && (correct.size() < target || incorrect.size() < target); ++out.rounds) {
        ScriptedAgentConfig agent = cfg.agent;
        agent.seed = mix_seed(cfg.agent.seed, 0x61626c617465ULL, out.rounds);
        auto trajs = run_episodes(world, training, retriever, agent, "r" + std::to_string(out.rounds), cfg.threads);
        for (const auto& t : trajs) {
            if (t.label != Label::correct && t.label != Label::incorrect) continue;
            auto& bucket = t.label == Label::correct ? correct : incorrect;
            if (bucket.size() >= target) continue;
            auto mined = mine_dataset({t}, mining, mining.judge_mode == JudgeMode::off ? nullptr : &judge, world.corpus.get());
            for (auto& c : mined) bucket.push_back(std::move(c));
        }
    }
    const std::size_t n = std::min({correct.size(), incorrect.size(), target});
    if (n == 0) throw InputError("ablation collected no instances for one of the arms");
    correct.resize(n);
    incorrect.resize(n);

    const auto run_arm = [&](std::vector<CandidateInstance> instances, AblationArm& arm) {
        arm.instances = instances.size();
        const auto lengths = reasoning_lengths(instances);
        const auto dataset = apply_weights(std::move(instances), fit_params(lengths));
        TrainConfig tc = cfg.train;
        tc.max_tokens = cfg.max_tokens;
        auto trained = train(initial, dataset, tc, world.corpus.get());
        const auto r = export_dense_retriever(std::make_shared<const EncoderParams>(std::move(trained.params)), world.corpus, cfg.max_tokens);
        score(r, arm);
    };
    run_arm(std::move(correct), out.correct);
    run_arm(std::move(incorrect), out.incorrect);
    return out;
}

}  // namespace lrat
