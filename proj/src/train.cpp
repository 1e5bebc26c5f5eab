#include "metar/train.hpp"

#include <cmath>
#include <sstream>

#include "metar/parallel.hpp"
#include "metar/rng.hpp"

namespace metar {

AdamState AdamState::zeros_like(const ModelParams& params) {
    AdamState s;
    s.embedding_m = Matrix::Zero(params.embeddings.rows(), params.embeddings.cols());
    s.embedding_v = Matrix::Zero(params.embeddings.rows(), params.embeddings.cols());
    for (const auto& layer : params.meta.layers) {
        DenseLayer zero{Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())};
        s.meta_m.push_back(zero);
        s.meta_v.push_back(zero);
    }
    return s;
}

namespace {

template <typename Param, typename Grad, typename Moment>
void adam_update(Param&& theta, const Grad& g, Moment&& m, Moment&& v, const AdamConfig& cfg, double c1, double c2) {
    m = cfg.b1 * m + (1.0 - cfg.b1) * g;
    v = cfg.b2 * v + (1.0 - cfg.b2) * g.cwiseProduct(g);
    theta -= (cfg.lr * (m / c1).array() / ((v / c2).array().sqrt() + cfg.eps)).matrix();
}

}  // namespace

void adam_step(ModelParams& params, const TaskGradients& grads, AdamState& state, const AdamConfig& cfg) {
    if (!grads.all_finite()) throw Error("non-finite gradient detected; aborting optimizer step");
    if (grads.meta.size() != params.meta.layers.size() || state.meta_m.size() != params.meta.layers.size())
        throw Error("adam_step: gradient/state shapes do not match parameters");

    ++state.step;
    const double c1 = 1.0 - std::pow(cfg.b1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(cfg.b2, static_cast<double>(state.step));

    for (std::size_t l = 0; l < params.meta.layers.size(); ++l) {
        auto& layer = params.meta.layers[l];
        adam_update(layer.weight, grads.meta[l].weight, state.meta_m[l].weight, state.meta_v[l].weight, cfg, c1, c2);
        adam_update(layer.bias, grads.meta[l].bias, state.meta_m[l].bias, state.meta_v[l].bias, cfg, c1, c2);
    }
    for (const auto& [entity, g] : grads.entity_rows) {
        if (entity < 0 || entity >= params.embeddings.rows()) throw Error("adam_step: entity id out of range");
        auto theta = params.embeddings.row(entity);
        auto m = state.embedding_m.row(entity);
        auto v = state.embedding_v.row(entity);
        m = cfg.b1 * m + (1.0 - cfg.b1) * g.transpose();
        v = cfg.b2 * v + (1.0 - cfg.b2) * g.transpose().cwiseProduct(g.transpose());
        theta -= (cfg.lr * (m / c1).array() / ((v / c2).array().sqrt() + cfg.eps)).matrix();
    }
    ++params.version;
}

ModelParams init_params(const Hyperparams& hp, std::size_t n_entities, std::uint64_t seed, const Matrix* pretrained) {
    hp.validate();
    ModelParams params;
    const auto rows = static_cast<Eigen::Index>(n_entities);
    if (pretrained) {
        if (pretrained->rows() != rows || pretrained->cols() != hp.dim)
            throw Error("pretrained embedding table is " + std::to_string(pretrained->rows()) + "x" +
                        std::to_string(pretrained->cols()) + ", expected " + std::to_string(rows) + "x" +
                        std::to_string(hp.dim));
        params.embeddings = *pretrained;
    } else {
        Rng rng = Rng::derive(seed, "init-embeddings");
        const double bound = 6.0 / std::sqrt(static_cast<double>(hp.dim));
        params.embeddings.resize(rows, hp.dim);
        for (Eigen::Index i = 0; i < params.embeddings.size(); ++i)
            params.embeddings.data()[i] = rng.uniform_real(-bound, bound);
    }
    Rng rng = Rng::derive(seed, "init-meta");
    const auto sizes = hp.layer_sizes();
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l], fan_out = sizes[l + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        DenseLayer layer{Matrix(fan_out, fan_in), Vector::Zero(fan_out)};
        for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = rng.uniform_real(-bound, bound);
        params.meta.layers.push_back(std::move(layer));
    }
    return params;
}

const char* to_string(Ablation ablation) { return to_string(eval_mode_for(ablation)); }

Ablation parse_ablation(const std::string& text) {
    switch (parse_eval_mode(text)) {
        case EvalMode::Standard: return Ablation::Standard;
        case EvalMode::MinusG: return Ablation::MinusG;
        case EvalMode::MinusGMinusR: return Ablation::MinusGMinusR;
    }
    return Ablation::Standard;
}

EvalMode eval_mode_for(Ablation ablation) {
    switch (ablation) {
        case Ablation::Standard: return EvalMode::Standard;
        case Ablation::MinusG: return EvalMode::MinusG;
        case Ablation::MinusGMinusR: return EvalMode::MinusGMinusR;
    }
    return EvalMode::Standard;
}

void TrainConfig::validate() const {
    if (batch_tasks <= 0 || eval_every < 0 || patience <= 0 || max_iters == 0 || workers <= 0)
        throw Error("train config: batch_tasks, patience, max_iters and workers must be positive");
    if (!(adam.lr > 0.0) || !(adam.b1 >= 0.0 && adam.b1 < 1.0) || !(adam.b2 >= 0.0 && adam.b2 < 1.0) ||
        !(adam.eps > 0.0))
        throw Error("train config: invalid Adam hyperparameters");
}

std::uint64_t config_fingerprint(const Hyperparams& hp, const SamplerConfig& sampler, const TrainConfig& train) {
    std::ostringstream os;
    os.precision(17);
    os << "dim=" << hp.dim << ";gamma=" << hp.gamma << ";beta=" << hp.beta << ";slope=" << hp.leaky_slope
       << ";hidden=";
    for (int h : hp.hidden_sizes) os << h << ',';
    os << ";norm=" << hp.normalize_embeddings << ";shots=" << sampler.shots << ";nq=" << sampler.n_query_pos
       << ";nneg=" << sampler.n_neg_per_pos << ";sseed=" << sampler.seed << ";batch=" << train.batch_tasks
       << ";lr=" << train.adam.lr << ";b1=" << train.adam.b1 << ";b2=" << train.adam.b2 << ";eps=" << train.adam.eps
       << ";grad=" << to_string(train.grad_mode) << ";ablation=" << to_string(train.ablation)
       << ";seed=" << train.seed;
    return fnv1a64(os.str());
}

TrainResult train_loop(const DatasetBundle& bundle, const SamplerConfig& sampler_cfg, const TrainConfig& cfg,
                       const Hyperparams& hp, const TrainHooks& hooks) {
    Checkpoint start;
    start.params = init_params(hp, bundle.vocab.entity_count(), cfg.seed);
    start.adam = AdamState::zeros_like(start.params);
    return train_loop(bundle, sampler_cfg, cfg, hp, std::move(start), hooks);
}

TrainResult train_loop(const DatasetBundle& bundle, const SamplerConfig& sampler_cfg, const TrainConfig& cfg,
                       const Hyperparams& hp, Checkpoint start, const TrainHooks& hooks) {
    cfg.validate();
    hp.validate();
    if (cfg.ablation == Ablation::MinusGMinusR)
        throw Error("the minus_g_minus_r ablation is plain TransE; train it with pretrain_transe");
    if (start.params.dim() != hp.dim || start.params.meta.output_dim() != hp.dim)
        throw Error("starting parameters do not match the configured dimension");
    const EpisodeSampler sampler(bundle, sampler_cfg);
    const ForwardMode forward_mode =
        cfg.ablation == Ablation::MinusG ? ForwardMode::NoGradientMeta : ForwardMode::Standard;
    const std::uint64_t fingerprint = config_fingerprint(hp, sampler_cfg, cfg);

    TrainResult result;
    Checkpoint current = std::move(start);
    current.fingerprint = fingerprint;
    if (current.adam.meta_m.empty()) current.adam = AdamState::zeros_like(current.params);
    result.best = current;
    bool evaluated = false;
    int bad_evaluations = 0;
    double loss_since_eval = 0.0;
    std::size_t iters_since_eval = 0;

    const auto batch = static_cast<std::size_t>(cfg.batch_tasks);
    std::vector<EpisodeTask> tasks(batch);
    std::vector<double> losses(batch);
    std::vector<TaskGradients> task_grads(batch);

    while (current.iteration < cfg.max_iters) {
        const std::uint64_t iteration = current.iteration + 1;
        Rng rng = Rng::derive(sampler_cfg.seed, "sampler", iteration);
        for (auto& task : tasks) task = sampler.sample(rng);

        const ModelParams& snapshot = current.params;
        parallel_for(batch, cfg.workers, [&](std::size_t i) {
            auto forward = forward_task(tasks[i], snapshot, hp, forward_mode);
            losses[i] = forward.query_loss;
            task_grads[i] = backward_task(forward.trace, tasks[i], snapshot, hp, cfg.grad_mode);
        });
        if (forward_mode == ForwardMode::Standard) result.standard_forwards += batch;
        else result.no_gradient_meta_forwards += batch;

        double loss = 0.0;
        TaskGradients total = TaskGradients::zeros_like(current.params.meta);
        for (std::size_t i = 0; i < batch; ++i) {
            loss += losses[i];
            total.add(task_grads[i]);
        }
        if (!std::isfinite(loss)) throw Error("non-finite loss at iteration " + std::to_string(iteration));
        adam_step(current.params, total, current.adam, cfg.adam);
        if (hp.normalize_embeddings) {
            for (const auto& [entity, g] : total.entity_rows) {
                const double n = current.params.embeddings.row(entity).norm();
                if (n > 0.0) current.params.embeddings.row(entity) /= n;
            }
        }
        current.iteration = iteration;
        result.loss_history.push_back(loss);
        loss_since_eval += loss;
        ++iters_since_eval;

        if (cfg.eval_every > 0 && iteration % static_cast<std::uint64_t>(cfg.eval_every) == 0) {
            TrainLogEntry entry;
            entry.iteration = iteration;
            entry.mean_loss = loss_since_eval / static_cast<double>(iters_since_eval);
            loss_since_eval = 0.0;
            iters_since_eval = 0;
            if (hooks.dev_evaluator) {
                entry.dev = hooks.dev_evaluator(current.params);
            } else {
                EvalOptions options{hp, cfg.seed, cfg.workers, nullptr};
                entry.dev = evaluate(current.params, bundle, Split::Dev, sampler_cfg.shots,
                                     eval_mode_for(cfg.ablation), options);
            }
            entry.improved = !evaluated || entry.dev.hits10 > current.best_dev_hits10;
            evaluated = true;
            if (entry.improved) {
                current.best_dev_hits10 = entry.dev.hits10;
                result.best = current;
                bad_evaluations = 0;
            } else {
                ++bad_evaluations;
            }
            result.evaluations.push_back(entry);
            if (hooks.on_evaluation) hooks.on_evaluation(entry);
            if (bad_evaluations >= cfg.patience) {
                result.early_stopped = true;
                break;
            }
        }
    }
    result.last = current;
    if (!evaluated) result.best = current;
    return result;
}

}  // namespace metar
