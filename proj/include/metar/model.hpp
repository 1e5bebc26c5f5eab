#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "metar/episode.hpp"
#include "metar/types.hpp"

namespace metar {

struct Hyperparams {
    int dim = 100;
    double gamma = 1.0;           // margin
    double beta = 1.0;            // rapid-update step on the relation meta
    double leaky_slope = 0.01;
    std::vector<int> hidden_sizes{500, 200};
    bool normalize_embeddings = false;  // post-step L2 row normalization

    void validate() const;
    // Layer widths of the relation-meta learner: 2d, hidden..., d.
    std::vector<int> layer_sizes() const;
};

struct DenseLayer {
    Matrix weight;  // out x in
    Vector bias;
};

// Fully connected network mapping h (+) t to an entity-pair relation meta.
// Hidden layers use LeakyReLU; the output layer is linear.
struct MetaLearner {
    std::vector<DenseLayer> layers;

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }
    int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }
};

struct ModelParams {
    Matrix embeddings;  // |E| x d
    MetaLearner meta;
    // Bumped on every optimizer step; traces remember the version they saw.
    std::uint64_t version = 0;

    int dim() const { return static_cast<int>(embeddings.cols()); }
};

// Activations cached for the backward pass. x[0] = h (+) t, x[l] the output
// of hidden layer l; pre[l-1] the pre-activation of hidden layer l.
struct PairActivations {
    std::vector<Vector> x;
    std::vector<Vector> pre;
    Vector output;
};

PairActivations meta_learner_forward(const Vector& head, const Vector& tail, const MetaLearner& meta, double slope);

Vector entity_pair_meta(const Vector& head, const Vector& tail, const MetaLearner& meta, double slope);

// Elementwise mean; throws on an empty list or mismatched dimensions.
Vector aggregate_meta(std::span<const Vector> metas);

// ||h + R - t||_2, lower is truer.
double score(const Vector& head, const Vector& relation_meta, const Vector& tail);

struct HingeResult {
    double loss = 0.0;
    // active[i][k]: hinge of positive i against its negative k is positive.
    std::vector<std::vector<bool>> active;
};

// sum_i [gamma + pos_i - neg_i]_+ with one negative per positive.
HingeResult hinge_loss(std::span<const double> pos_scores, std::span<const double> neg_scores, double gamma);
// sum_i mean_k [gamma + pos_i - neg_ik]_+
HingeResult hinge_loss(std::span<const double> pos_scores, std::span<const std::vector<double>> neg_scores,
                       double gamma);

// One positive/negative comparison with the difference vectors h + R - t.
struct HingeTerm {
    std::size_t positive = 0;  // index of the positive pair
    Vector pos_diff;
    Vector neg_diff;
    double pos_score = 0.0;
    double neg_score = 0.0;
    double weight = 1.0;
    bool active = false;
};

HingeTerm make_hinge_term(std::size_t positive, const Vector& head, const Vector& relation_meta, const Vector& tail,
                          const Vector& negative_tail, double gamma, double weight);

// v / ||v||, or zero for the zero vector.
Vector unit_or_zero(const Vector& v);

// Closed-form gradient of the support loss w.r.t. the relation meta:
// sum over active hinges of u(pos_diff) - u(neg_diff).
Vector gradient_meta(std::span<const HingeTerm> support, int dim);

Vector rapid_update(const Vector& relation_meta, const Vector& gradient, double beta);

enum class ForwardMode { Standard, NoGradientMeta };

struct TaskForwardTrace {
    ForwardMode mode = ForwardMode::Standard;
    std::uint64_t params_version = 0;
    std::vector<PairActivations> support_meta;
    Vector relation_meta;   // mean of the pair metas
    Vector gradient_meta;   // zero in NoGradientMeta mode
    Vector adapted_meta;    // relation meta used on the query set
    std::vector<HingeTerm> support;
    std::vector<HingeTerm> query;
    double support_loss = 0.0;
    double query_loss = 0.0;
};

// Relation meta from a support set, adapted by one gradient-meta step in
// Standard mode. Support negatives may be empty only in NoGradientMeta mode.
TaskForwardTrace adapt_relation_meta(std::span<const EntityPair> support_pos, std::span<const EntityId> support_neg,
                                     const ModelParams& params, const Hyperparams& hp, ForwardMode mode);

struct ForwardResult {
    double query_loss = 0.0;
    TaskForwardTrace trace;
};

ForwardResult forward_task(const EpisodeTask& task, const ModelParams& params, const Hyperparams& hp,
                           ForwardMode mode);

}  // namespace metar
