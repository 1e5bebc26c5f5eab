#pragma once

#include <map>
#include <string>
#include <vector>

#include "metar/model.hpp"

namespace metar {

enum class GradMode { FullSecondOrder, FirstOrder };

const char* to_string(GradMode mode);
GradMode parse_grad_mode(const std::string& text);

// Gradient of one task's query loss. Embedding gradients are sparse: only
// entities that appear in the task have rows.
struct TaskGradients {
    std::map<EntityId, Vector> entity_rows;
    std::vector<DenseLayer> meta;

    static TaskGradients zeros_like(const MetaLearner& meta);

    void add(const TaskGradients& other);
    Vector& entity_row(EntityId entity, int dim);
    bool all_finite() const;
};

// d L(Q_r) / d(embeddings, W, b) for the trace's task. In FullSecondOrder mode
// the path through the rapid update R' = R - beta * G(R) includes the exact
// Hessian-vector product of the support loss; FirstOrder treats G as constant.
// Throws when the trace was produced under another parameter version.
TaskGradients backward_task(const TaskForwardTrace& trace, const EpisodeTask& task, const ModelParams& params,
                            const Hyperparams& hp, GradMode mode);

struct FiniteDiffReport {
    double max_rel_err = 0.0;
    std::string location;  // e.g. "embeddings[3][1]" or "meta.W2[0][4]"
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t n_checked = 0;
};

// Central differences of forward_task's query loss over every scalar
// parameter, compared against backward_task. Relative error uses the
// denominator max(|analytic|, |numeric|, 1e-8).
FiniteDiffReport finite_diff_check(const EpisodeTask& task, const ModelParams& params, const Hyperparams& hp,
                                   ForwardMode forward_mode, GradMode grad_mode, double step);

}  // namespace metar
