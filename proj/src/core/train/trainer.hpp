#pragma once

#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/metrics.hpp"
#include "core/nn/checkpoint.hpp"
#include "core/scenario.hpp"
#include "core/simcore.hpp"

namespace zsim::train {

struct TrainConfig {
    // model preset
    nn::ModelConfig model;

    // behavioral cloning
    int64_t bc_batch = 32768;
    double bc_lr = 2e-3;
    double bc_value_scale = 1e-4;
    int bc_epochs = 20;

    // reinforcement learning
    int rl_batch = 512;  // sequences per learner step
    double rl_lr = 5.6e-5;
    double ppo_clip = 0.3;
    double rl_value_scale = 1e-2;
    double entropy_coef = 3e-2;
    double gamma = 0.99;
    double rho_bar = 1.0;
    double c_bar = 1.0;
    int seq_len = 32;
    int replay_capacity = 4096;

    int workers = 1;
    int worker_threads = 1;
    int env_batch = 16;                 // scenarios per rollout
    int rollouts_per_round = 2;         // per worker
    int updates_per_round = 2;          // per worker
    int64_t total_agent_steps = 500000;
    int64_t eval_interval_steps = 50000;
    int horizon = 0;                    // 0 = full scenario length
    std::string transport = "inproc";   // inproc | socket
    std::string eval_data;              // held-out dataset for the evaluation actor
    int eval_env_batch = 16;

    sim::SimConfig sim;

    static TrainConfig from_kv(const cfg::KeyValue& kv);
    cfg::KeyValue to_kv() const;
    void validate() const;
};

struct EvalOptions {
    bool disable_dones = false;
    bool argmax = true;
    uint64_t seed = 0;
    int env_batch = 16;
    int threads = 1;
};

struct EvalOutcome {
    std::vector<metrics::MetricReport> reports;
    metrics::Aggregate agg;
};

EvalOutcome evaluate_policy(const nn::Model<float>& model, const dyn::ActionTable& table,
                            const scenario::Dataset& ds, sim::SimConfig scfg, const EvalOptions& opts);

struct RunResult {
    std::vector<std::string> outputs;  // files written, relative to out_dir
    std::string final_checkpoint;
    std::string best_checkpoint;
    int64_t agent_steps = 0;
    double final_eval_score = -1.0;
    double best_eval_score = -1.0;
    double wall_seconds = 0.0;
};

// Expert-replay pretraining: inverse-dynamics action targets, value targets
// from discounted returns of simulator rewards along the logged trajectory.
RunResult run_bc(const TrainConfig& cfg, const std::string& data_path, const std::string& out_dir,
                 uint64_t seed, const std::string& init_checkpoint);

// Actor/learner PPO with V-trace over replayed scenarios. Deterministic
// round schedule: every worker alternates an acting phase and a learning
// phase; gradients are all-reduced across learners each update.
RunResult run_rl(const TrainConfig& cfg, const std::string& data_path, const std::string& out_dir,
                 uint64_t seed, const std::string& init_checkpoint);

}  // namespace zsim::train
