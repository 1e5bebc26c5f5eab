#include "metar/model.hpp"

#include <algorithm>
#include <cmath>

namespace metar {

void Hyperparams::validate() const {
    if (dim <= 0) throw Error("hyperparams: dim must be positive");
    if (gamma < 0.0) throw Error("hyperparams: gamma must be >= 0");
    if (beta < 0.0) throw Error("hyperparams: beta must be >= 0");
    if (!(leaky_slope > 0.0 && leaky_slope <= 1.0)) throw Error("hyperparams: leaky_slope must lie in (0, 1]");
    for (int h : hidden_sizes)
        if (h <= 0) throw Error("hyperparams: hidden sizes must be positive");
}

std::vector<int> Hyperparams::layer_sizes() const {
    std::vector<int> sizes{2 * dim};
    sizes.insert(sizes.end(), hidden_sizes.begin(), hidden_sizes.end());
    sizes.push_back(dim);
    return sizes;
}

PairActivations meta_learner_forward(const Vector& head, const Vector& tail, const MetaLearner& meta, double slope) {
    if (meta.layers.empty()) throw Error("meta learner has no layers");
    if (head.size() != tail.size() || 2 * head.size() != meta.input_dim())
        throw Error("entity_pair_meta: dimension mismatch (h " + std::to_string(head.size()) + ", t " +
                    std::to_string(tail.size()) + ", learner input " + std::to_string(meta.input_dim()) + ")");
    PairActivations act;
    Vector x(head.size() + tail.size());
    x << head, tail;
    act.x.push_back(std::move(x));
    const std::size_t n_layers = meta.layers.size();
    for (std::size_t l = 0; l + 1 < n_layers; ++l) {
        const auto& layer = meta.layers[l];
        Vector z = layer.weight * act.x.back() + layer.bias;
        Vector a = z.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
        act.pre.push_back(std::move(z));
        act.x.push_back(std::move(a));
    }
    const auto& last = meta.layers.back();
    act.output = last.weight * act.x.back() + last.bias;
    return act;
}

Vector entity_pair_meta(const Vector& head, const Vector& tail, const MetaLearner& meta, double slope) {
    return meta_learner_forward(head, tail, meta, slope).output;
}

Vector aggregate_meta(std::span<const Vector> metas) {
    if (metas.empty()) throw Error("aggregate_meta: empty list");
    Vector sum = metas.front();
    for (std::size_t i = 1; i < metas.size(); ++i) {
        if (metas[i].size() != sum.size()) throw Error("aggregate_meta: dimension mismatch");
        sum += metas[i];
    }
    return sum / static_cast<double>(metas.size());
}

double score(const Vector& head, const Vector& relation_meta, const Vector& tail) {
    return (head + relation_meta - tail).norm();
}

HingeResult hinge_loss(std::span<const double> pos_scores, std::span<const double> neg_scores, double gamma) {
    if (pos_scores.size() != neg_scores.size()) throw Error("hinge_loss: misaligned positive/negative scores");
    HingeResult result;
    for (std::size_t i = 0; i < pos_scores.size(); ++i) {
        const double margin = gamma + pos_scores[i] - neg_scores[i];
        const bool active = margin > 0.0;
        if (active) result.loss += margin;
        result.active.push_back({active});
    }
    return result;
}

HingeResult hinge_loss(std::span<const double> pos_scores, std::span<const std::vector<double>> neg_scores,
                       double gamma) {
    if (pos_scores.size() != neg_scores.size()) throw Error("hinge_loss: misaligned positive/negative scores");
    HingeResult result;
    for (std::size_t i = 0; i < pos_scores.size(); ++i) {
        const auto& negs = neg_scores[i];
        if (negs.empty()) throw Error("hinge_loss: positive without negatives");
        double term = 0.0;
        auto& flags = result.active.emplace_back();
        for (double neg : negs) {
            const double margin = gamma + pos_scores[i] - neg;
            flags.push_back(margin > 0.0);
            if (margin > 0.0) term += margin;
        }
        result.loss += term / static_cast<double>(negs.size());
    }
    return result;
}

HingeTerm make_hinge_term(std::size_t positive, const Vector& head, const Vector& relation_meta, const Vector& tail,
                          const Vector& negative_tail, double gamma, double weight) {
    HingeTerm term;
    term.positive = positive;
    term.pos_diff = head + relation_meta - tail;
    term.neg_diff = head + relation_meta - negative_tail;
    term.pos_score = term.pos_diff.norm();
    term.neg_score = term.neg_diff.norm();
    term.weight = weight;
    term.active = gamma + term.pos_score - term.neg_score > 0.0;
    return term;
}

Vector unit_or_zero(const Vector& v) {
    const double n = v.norm();
    if (n == 0.0) return Vector::Zero(v.size());
    return v / n;
}

Vector gradient_meta(std::span<const HingeTerm> support, int dim) {
    Vector g = Vector::Zero(dim);
    for (const auto& term : support) {
        if (!term.active) continue;
        g += term.weight * (unit_or_zero(term.pos_diff) - unit_or_zero(term.neg_diff));
    }
    return g;
}

Vector rapid_update(const Vector& relation_meta, const Vector& gradient, double beta) {
    if (relation_meta.size() != gradient.size()) throw Error("rapid_update: dimension mismatch");
    return relation_meta - beta * gradient;
}

namespace {

void check_entity(const ModelParams& params, EntityId e) {
    if (e < 0 || e >= params.embeddings.rows())
        throw Error("entity id " + std::to_string(e) + " outside embedding table of " +
                    std::to_string(params.embeddings.rows()) + " rows");
}

Vector row(const ModelParams& params, EntityId e) {
    check_entity(params, e);
    return params.embeddings.row(e).transpose();
}

}  // namespace

TaskForwardTrace adapt_relation_meta(std::span<const EntityPair> support_pos, std::span<const EntityId> support_neg,
                                     const ModelParams& params, const Hyperparams& hp, ForwardMode mode) {
    if (support_pos.empty()) throw Error("task has an empty support set");
    if (params.meta.output_dim() != params.dim()) throw Error("meta learner output does not match embedding dim");
    TaskForwardTrace trace;
    trace.mode = mode;
    trace.params_version = params.version;

    std::vector<Vector> pair_metas;
    for (auto p : support_pos) {
        trace.support_meta.push_back(meta_learner_forward(row(params, p.head), row(params, p.tail), params.meta,
                                                          hp.leaky_slope));
        pair_metas.push_back(trace.support_meta.back().output);
    }
    trace.relation_meta = aggregate_meta(pair_metas);

    if (!support_neg.empty()) {
        if (support_neg.size() != support_pos.size()) throw Error("support negatives misaligned with positives");
        for (std::size_t i = 0; i < support_pos.size(); ++i) {
            auto term = make_hinge_term(i, row(params, support_pos[i].head), trace.relation_meta,
                                        row(params, support_pos[i].tail), row(params, support_neg[i]), hp.gamma, 1.0);
            if (term.active) trace.support_loss += hp.gamma + term.pos_score - term.neg_score;
            trace.support.push_back(std::move(term));
        }
    }

    if (mode == ForwardMode::Standard) {
        if (support_neg.empty()) throw Error("gradient meta needs support negatives");
        trace.gradient_meta = gradient_meta(trace.support, params.dim());
        trace.adapted_meta = rapid_update(trace.relation_meta, trace.gradient_meta, hp.beta);
    } else {
        trace.gradient_meta = Vector::Zero(params.dim());
        trace.adapted_meta = trace.relation_meta;
    }
    return trace;
}

ForwardResult forward_task(const EpisodeTask& task, const ModelParams& params, const Hyperparams& hp,
                           ForwardMode mode) {
    if (task.query_neg.size() != task.query_pos.size()) throw Error("query negatives misaligned with positives");
    ForwardResult result;
    result.trace = adapt_relation_meta(task.support_pos, task.support_neg, params, hp, mode);
    auto& trace = result.trace;

    for (std::size_t j = 0; j < task.query_pos.size(); ++j) {
        const auto& negs = task.query_neg[j];
        if (negs.empty()) throw Error("query positive without negatives");
        const Vector head = row(params, task.query_pos[j].head);
        const Vector tail = row(params, task.query_pos[j].tail);
        const double weight = 1.0 / static_cast<double>(negs.size());
        for (EntityId neg : negs) {
            auto term = make_hinge_term(j, head, trace.adapted_meta, tail, row(params, neg), hp.gamma, weight);
            if (term.active) trace.query_loss += weight * (hp.gamma + term.pos_score - term.neg_score);
            trace.query.push_back(std::move(term));
        }
    }
    result.query_loss = trace.query_loss;
    return result;
}

}  // namespace metar
