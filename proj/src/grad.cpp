#include "metar/grad.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace metar {

const char* to_string(GradMode mode) {
    return mode == GradMode::FullSecondOrder ? "second_order" : "first_order";
}

GradMode parse_grad_mode(const std::string& text) {
    if (text == "second_order") return GradMode::FullSecondOrder;
    if (text == "first_order") return GradMode::FirstOrder;
    throw Error("unknown grad mode '" + text + "' (expected second_order|first_order)");
}

TaskGradients TaskGradients::zeros_like(const MetaLearner& meta) {
    TaskGradients g;
    for (const auto& layer : meta.layers)
        g.meta.push_back({Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
    return g;
}

void TaskGradients::add(const TaskGradients& other) {
    if (meta.empty()) {
        meta = other.meta;
    } else {
        if (meta.size() != other.meta.size()) throw Error("gradient accumulation: layer count mismatch");
        for (std::size_t l = 0; l < meta.size(); ++l) {
            meta[l].weight += other.meta[l].weight;
            meta[l].bias += other.meta[l].bias;
        }
    }
    for (const auto& [entity, grad] : other.entity_rows) {
        auto [it, inserted] = entity_rows.try_emplace(entity, grad);
        if (!inserted) it->second += grad;
    }
}

Vector& TaskGradients::entity_row(EntityId entity, int dim) {
    auto it = entity_rows.find(entity);
    if (it == entity_rows.end()) it = entity_rows.emplace(entity, Vector::Zero(dim)).first;
    return it->second;
}

bool TaskGradients::all_finite() const {
    for (const auto& layer : meta)
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    for (const auto& [entity, grad] : entity_rows)
        if (!grad.allFinite()) return false;
    return true;
}

namespace {

// (d^2 ||v|| / dv^2) c = (c - v (v.c) / n^2) / n; zero at v = 0.
Vector norm_hessian_times(const Vector& v, const Vector& c) {
    const double n2 = v.squaredNorm();
    if (n2 == 0.0) return Vector::Zero(v.size());
    const double n = std::sqrt(n2);
    return (c - v * (v.dot(c) / n2)) / n;
}

// Backpropagates d(output) through the relation-meta learner into the layer
// gradients, returning d/d(h (+) t).
Vector meta_learner_backward(const PairActivations& act, const Vector& d_output, const MetaLearner& meta, double slope,
                             std::vector<DenseLayer>& grads) {
    Vector g = d_output;
    for (std::size_t l = meta.layers.size(); l-- > 0;) {
        grads[l].weight.noalias() += g * act.x[l].transpose();
        grads[l].bias += g;
        Vector dx = meta.layers[l].weight.transpose() * g;
        if (l == 0) return dx;
        const Vector& z = act.pre[l - 1];
        for (Eigen::Index k = 0; k < dx.size(); ++k)
            if (!(z[k] > 0.0)) dx[k] *= slope;
        g = std::move(dx);
    }
    return g;
}

}  // namespace

TaskGradients backward_task(const TaskForwardTrace& trace, const EpisodeTask& task, const ModelParams& params,
                            const Hyperparams& hp, GradMode mode) {
    if (trace.params_version != params.version)
        throw Error("stale trace: produced at parameter version " + std::to_string(trace.params_version) +
                    ", parameters are at version " + std::to_string(params.version));
    if (trace.support_meta.size() != task.support_pos.size()) throw Error("trace does not match task support set");

    const int d = params.dim();
    TaskGradients grads = TaskGradients::zeros_like(params.meta);

    // Query hinge -> query scores -> adapted relation meta and query entities.
    Vector d_adapted = Vector::Zero(d);
    {
        std::size_t term_index = 0;
        for (std::size_t j = 0; j < task.query_pos.size(); ++j) {
            for (EntityId neg : task.query_neg[j]) {
                const auto& term = trace.query.at(term_index++);
                if (!term.active) continue;
                const Vector up = term.weight * unit_or_zero(term.pos_diff);
                const Vector un = term.weight * unit_or_zero(term.neg_diff);
                grads.entity_row(task.query_pos[j].head, d) += up - un;
                grads.entity_row(task.query_pos[j].tail, d) -= up;
                grads.entity_row(neg, d) += un;
                d_adapted += up - un;
            }
        }
    }

    // R' = R - beta * G(R, support embeddings). The identity path always
    // applies; the Hessian path only in second-order mode.
    Vector d_relation = d_adapted;
    if (trace.mode == ForwardMode::Standard && mode == GradMode::FullSecondOrder && hp.beta != 0.0) {
        for (std::size_t i = 0; i < trace.support.size(); ++i) {
            const auto& term = trace.support[i];
            if (!term.active) continue;
            const Vector d_pos = -hp.beta * term.weight * norm_hessian_times(term.pos_diff, d_adapted);
            const Vector d_neg = hp.beta * term.weight * norm_hessian_times(term.neg_diff, d_adapted);
            d_relation += d_pos + d_neg;
            grads.entity_row(task.support_pos[i].head, d) += d_pos + d_neg;
            grads.entity_row(task.support_pos[i].tail, d) -= d_pos;
            grads.entity_row(task.support_neg[i], d) -= d_neg;
        }
    }

    // Mean over the support pairs, then through the meta learner.
    const Vector d_pair = d_relation / static_cast<double>(task.support_pos.size());
    for (std::size_t i = 0; i < task.support_pos.size(); ++i) {
        const Vector d_input =
            meta_learner_backward(trace.support_meta[i], d_pair, params.meta, hp.leaky_slope, grads.meta);
        grads.entity_row(task.support_pos[i].head, d) += d_input.head(d);
        grads.entity_row(task.support_pos[i].tail, d) += d_input.tail(d);
    }
    return grads;
}

FiniteDiffReport finite_diff_check(const EpisodeTask& task, const ModelParams& params, const Hyperparams& hp,
                                   ForwardMode forward_mode, GradMode grad_mode, double step) {
    const auto forward = forward_task(task, params, hp, forward_mode);
    const auto analytic = backward_task(forward.trace, task, params, hp, grad_mode);

    ModelParams probe = params;
    FiniteDiffReport report;
    auto central = [&](double& slot) {
        const double saved = slot;
        slot = saved + step;
        const double plus = forward_task(task, probe, hp, forward_mode).query_loss;
        slot = saved - step;
        const double minus = forward_task(task, probe, hp, forward_mode).query_loss;
        slot = saved;
        return (plus - minus) / (2.0 * step);
    };
    auto compare = [&](double a, double n, auto&& describe) {
        const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
        const double err = std::abs(a - n) / denom;
        ++report.n_checked;
        if (err > report.max_rel_err || report.location.empty()) {
            if (err > report.max_rel_err) report.max_rel_err = err;
            report.location = describe();
            report.analytic = a;
            report.numeric = n;
        }
    };

    for (Eigen::Index e = 0; e < probe.embeddings.rows(); ++e) {
        auto it = analytic.entity_rows.find(static_cast<EntityId>(e));
        for (Eigen::Index k = 0; k < probe.embeddings.cols(); ++k) {
            const double numeric = central(probe.embeddings(e, k));
            const double a = it == analytic.entity_rows.end() ? 0.0 : it->second[k];
            compare(a, numeric, [&] {
                std::ostringstream os;
                os << "embeddings[" << e << "][" << k << "]";
                return os.str();
            });
        }
    }
    for (std::size_t l = 0; l < probe.meta.layers.size(); ++l) {
        auto& layer = probe.meta.layers[l];
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
                const double numeric = central(layer.weight(r, c));
                compare(analytic.meta[l].weight(r, c), numeric, [&] {
                    std::ostringstream os;
                    os << "meta.W" << l + 1 << "[" << r << "][" << c << "]";
                    return os.str();
                });
            }
            const double numeric = central(layer.bias[r]);
            compare(analytic.meta[l].bias[r], numeric, [&] {
                std::ostringstream os;
                os << "meta.b" << l + 1 << "[" << r << "]";
                return os.str();
            });
        }
    }
    return report;
}

}  // namespace metar
