#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "metar/episode.hpp"
#include "metar/eval.hpp"
#include "metar/grad.hpp"
#include "metar/model.hpp"

namespace metar {

struct AdamConfig {
    double lr = 0.001;
    double b1 = 0.9;
    double b2 = 0.999;
    double eps = 1e-8;
};

// First/second moments shaped like the parameters. Embedding moments are
// dense tables but only rows that received a gradient are ever touched.
struct AdamState {
    Matrix embedding_m;
    Matrix embedding_v;
    std::vector<DenseLayer> meta_m;
    std::vector<DenseLayer> meta_v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const ModelParams& params);
};

// One bias-corrected Adam step. Throws before touching anything when a
// gradient entry is not finite.
void adam_step(ModelParams& params, const TaskGradients& grads, AdamState& state, const AdamConfig& cfg);

enum class InitKind { Random, FromPretrained };

// Embeddings uniform in [-6/sqrt(d), 6/sqrt(d)] (or copied from `pretrained`),
// meta-learner weights Xavier-uniform, biases zero.
ModelParams init_params(const Hyperparams& hp, std::size_t n_entities, std::uint64_t seed,
                        const Matrix* pretrained = nullptr);

struct Checkpoint {
    ModelParams params;
    AdamState adam;
    std::uint64_t iteration = 0;
    double best_dev_hits10 = -std::numeric_limits<double>::infinity();
    std::uint64_t fingerprint = 0;
};

enum class Ablation { Standard, MinusG, MinusGMinusR };

const char* to_string(Ablation ablation);
Ablation parse_ablation(const std::string& text);
EvalMode eval_mode_for(Ablation ablation);

struct TrainConfig {
    int batch_tasks = 64;
    AdamConfig adam;
    int eval_every = 1000;
    int patience = 30;
    std::uint64_t max_iters = 1000000;
    GradMode grad_mode = GradMode::FullSecondOrder;
    Ablation ablation = Ablation::Standard;
    std::uint64_t seed = 0;
    int workers = 1;

    void validate() const;
};

struct TrainLogEntry {
    std::uint64_t iteration = 0;
    double mean_loss = 0.0;  // mean of the per-iteration losses since the previous evaluation
    EvalReport dev;
    bool improved = false;
};

struct TrainResult {
    Checkpoint best;  // selected by dev Hits@10
    Checkpoint last;
    std::vector<double> loss_history;  // per iteration: sum of task query losses
    std::vector<TrainLogEntry> evaluations;
    std::size_t standard_forwards = 0;
    std::size_t no_gradient_meta_forwards = 0;
    bool early_stopped = false;
};

struct TrainHooks {
    // Replaces the dev evaluation; must not mutate parameters.
    std::function<EvalReport(const ModelParams&)> dev_evaluator;
    // Called after every evaluation.
    std::function<void(const TrainLogEntry&)> on_evaluation;
};

std::uint64_t config_fingerprint(const Hyperparams& hp, const SamplerConfig& sampler, const TrainConfig& train);

// Episodic training: every iteration samples batch_tasks tasks, sums their
// query losses, backpropagates and takes one Adam step. Evaluates on dev every
// eval_every iterations and stops after `patience` evaluations in a row
// without a new best Hits@10. Starting from `start` resumes a run exactly:
// the task stream of iteration i depends only on (seed, i).
TrainResult train_loop(const DatasetBundle& bundle, const SamplerConfig& sampler_cfg, const TrainConfig& cfg,
                       const Hyperparams& hp, Checkpoint start, const TrainHooks& hooks = {});

// Fresh run from init_params(hp, |E|, seed).
TrainResult train_loop(const DatasetBundle& bundle, const SamplerConfig& sampler_cfg, const TrainConfig& cfg,
                       const Hyperparams& hp, const TrainHooks& hooks = {});

}  // namespace metar
