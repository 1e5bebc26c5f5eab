#include "metar/episode.hpp"

#include <algorithm>
#include <numeric>

namespace metar {

namespace {
constexpr int kRejectionTries = 32;
}

void SamplerConfig::validate() const {
    if (shots < 1 || n_query_pos < 1 || n_neg_per_pos < 1)
        throw Error("sampler config: shots, n_query_pos and n_neg_per_pos must be >= 1");
}

EntityId corrupt_tail(EntityId head, RelationId relation, const DatasetBundle& bundle, Rng& rng) {
    const auto* pool = bundle.candidates_for(relation);
    const auto pool_size = pool ? pool->size() : bundle.vocab.entity_count();
    if (pool_size == 0) throw Error("corruption pool is empty");
    auto pool_at = [&](std::size_t i) { return pool ? (*pool)[i] : static_cast<EntityId>(i); };
    auto is_true = [&](EntityId e) {
        return bundle.store.contains({head, relation, e}) || bundle.filtered_truths.contains(head, relation, e);
    };

    for (int attempt = 0; attempt < kRejectionTries; ++attempt) {
        EntityId e = pool_at(rng.uniform_index(pool_size));
        if (!is_true(e)) return e;
    }
    // Dense true-tail sets: draw from the explicit difference instead.
    std::vector<EntityId> legal;
    for (std::size_t i = 0; i < pool_size; ++i) {
        EntityId e = pool_at(i);
        if (!is_true(e)) legal.push_back(e);
    }
    if (legal.empty())
        throw Error("corruption pool exhausted for relation '" + bundle.vocab.relation_name(relation) + "'");
    return legal[rng.uniform_index(legal.size())];
}

EpisodeSampler::EpisodeSampler(const DatasetBundle& bundle, SamplerConfig cfg) : bundle_(&bundle), cfg_(cfg) {
    cfg_.validate();
    for (const auto& [relation, pairs] : bundle.split(Split::Train))
        if (pairs.size() >= static_cast<std::size_t>(cfg_.shots) + 1) eligible_.push_back(relation);
    if (eligible_.empty())
        throw Error("no eligible train relation: every group has fewer than " + std::to_string(cfg_.shots + 1) +
                    " triples");
}

EpisodeTask EpisodeSampler::sample(Rng& rng) const {
    EpisodeTask task;
    task.relation = eligible_[rng.uniform_index(eligible_.size())];
    const auto& pairs = bundle_->split(Split::Train).at(task.relation);

    const std::size_t shots = static_cast<std::size_t>(cfg_.shots);
    const std::size_t take = std::min(pairs.size(), shots + static_cast<std::size_t>(cfg_.n_query_pos));
    // Partial Fisher-Yates: the first `take` slots become a uniform sample
    // without replacement.
    std::vector<std::size_t> order(pairs.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i < take; ++i) std::swap(order[i], order[i + rng.uniform_index(order.size() - i)]);

    for (std::size_t i = 0; i < shots; ++i) task.support_pos.push_back(pairs[order[i]]);
    for (std::size_t i = shots; i < take; ++i) task.query_pos.push_back(pairs[order[i]]);

    for (auto p : task.support_pos) task.support_neg.push_back(corrupt_tail(p.head, task.relation, *bundle_, rng));
    for (auto p : task.query_pos) {
        auto& negs = task.query_neg.emplace_back();
        for (int k = 0; k < cfg_.n_neg_per_pos; ++k) negs.push_back(corrupt_tail(p.head, task.relation, *bundle_, rng));
    }
    return task;
}

EpisodeTask sample_episode(const DatasetBundle& bundle, const SamplerConfig& cfg, Rng& rng) {
    return EpisodeSampler(bundle, cfg).sample(rng);
}

EvalEpisodes make_eval_episodes(const DatasetBundle& bundle, Split split, int shots) {
    if (shots < 1) throw Error("shots must be >= 1");
    EvalEpisodes out;
    for (const auto& [relation, pairs] : bundle.split(split)) {
        if (pairs.size() <= static_cast<std::size_t>(shots)) {
            ++out.skipped_relations;
            continue;
        }
        EpisodeTask task;
        task.relation = relation;
        task.support_pos.assign(pairs.begin(), pairs.begin() + shots);
        task.query_pos.assign(pairs.begin() + shots, pairs.end());
        task.query_neg.resize(task.query_pos.size());
        out.tasks.push_back(std::move(task));
    }
    return out;
}

}  // namespace metar
