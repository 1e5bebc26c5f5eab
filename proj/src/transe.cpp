#include "metar/transe.hpp"

#include <cmath>

#include "metar/model.hpp"
#include "metar/rng.hpp"

namespace metar {

namespace {

void normalize_row(Matrix& m, Eigen::Index r) {
    const double n = m.row(r).norm();
    if (n > 0.0) m.row(r) /= n;
}

}  // namespace

TransEModel pretrain_transe(const DatasetBundle& bundle, const TransEConfig& cfg) {
    if (cfg.dim <= 0 || cfg.epochs < 0 || cfg.lr <= 0.0 || cfg.margin < 0.0)
        throw Error("transe config: dim > 0, epochs >= 0, lr > 0, margin >= 0 required");
    auto triples = training_visible_triples(bundle);
    if (cfg.eval_support_shots > 0) {
        for (Split split : {Split::Dev, Split::Test})
            for (const auto& [relation, pairs] : bundle.split(split))
                for (std::size_t i = 0; i < pairs.size() && i < static_cast<std::size_t>(cfg.eval_support_shots); ++i)
                    triples.push_back({pairs[i].head, relation, pairs[i].tail});
    }
    if (triples.empty()) throw Error("pretrain_transe: no triples visible in background mode '" +
                                     std::string(to_string(bundle.mode)) + "'");

    const auto n_entities = static_cast<Eigen::Index>(bundle.vocab.entity_count());
    const auto n_relations = static_cast<Eigen::Index>(bundle.vocab.relation_count());
    Rng init = Rng::derive(cfg.seed, "transe-init");
    const double bound = 6.0 / std::sqrt(static_cast<double>(cfg.dim));
    TransEModel model{Matrix(n_entities, cfg.dim), Matrix(n_relations, cfg.dim)};
    for (Eigen::Index i = 0; i < model.entities.size(); ++i) model.entities.data()[i] = init.uniform_real(-bound, bound);
    for (Eigen::Index i = 0; i < model.relations.size(); ++i) model.relations.data()[i] = init.uniform_real(-bound, bound);
    for (Eigen::Index r = 0; r < n_relations; ++r) normalize_row(model.relations, r);

    Rng rng = Rng::derive(cfg.seed, "transe-train");
    std::vector<std::size_t> order(triples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (Eigen::Index e = 0; e < n_entities; ++e) normalize_row(model.entities, e);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.uniform_index(i)]);
        for (std::size_t idx : order) {
            const Triple& t = triples[idx];
            EntityId corrupted = -1;
            for (int attempt = 0; attempt < 32 && corrupted < 0; ++attempt) {
                auto c = static_cast<EntityId>(rng.uniform_index(static_cast<std::uint64_t>(n_entities)));
                if (c != t.tail && !bundle.store.contains({t.head, t.relation, c})) corrupted = c;
            }
            if (corrupted < 0) continue;

            const Vector pos = model.entities.row(t.head) + model.relations.row(t.relation) - model.entities.row(t.tail);
            const Vector neg = model.entities.row(t.head) + model.relations.row(t.relation) - model.entities.row(corrupted);
            if (cfg.margin + pos.norm() - neg.norm() <= 0.0) continue;
            const Vector up = unit_or_zero(pos);
            const Vector un = unit_or_zero(neg);
            model.entities.row(t.head) -= cfg.lr * (up - un).transpose();
            model.relations.row(t.relation) -= cfg.lr * (up - un).transpose();
            model.entities.row(t.tail) += cfg.lr * up.transpose();
            model.entities.row(corrupted) -= cfg.lr * un.transpose();
        }
    }
    return model;
}

}  // namespace metar
