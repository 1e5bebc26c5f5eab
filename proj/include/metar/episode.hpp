#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "metar/kg_data.hpp"
#include "metar/rng.hpp"

namespace metar {

// One few-shot task for a single relation.
struct EpisodeTask {
    RelationId relation = 0;
    std::vector<EntityPair> support_pos;
    // One corrupted tail per support positive, aligned by index.
    std::vector<EntityId> support_neg;
    std::vector<EntityPair> query_pos;
    // query_neg[j] holds the corrupted tails of query_pos[j].
    std::vector<std::vector<EntityId>> query_neg;

    std::size_t shots() const { return support_pos.size(); }
    bool operator==(const EpisodeTask&) const = default;
};

struct SamplerConfig {
    int shots = 1;
    int n_query_pos = 3;
    int n_neg_per_pos = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

// Uniform corrupted tail for (head, relation): drawn from the relation's
// candidate list when the benchmark has one, else from all entities, never a
// known true tail. Throws when every pool entity is a true tail.
EntityId corrupt_tail(EntityId head, RelationId relation, const DatasetBundle& bundle, Rng& rng);

class EpisodeSampler {
public:
    // Relations with fewer than shots + 1 pairs are not eligible.
    EpisodeSampler(const DatasetBundle& bundle, SamplerConfig cfg);

    EpisodeTask sample(Rng& rng) const;

    const std::vector<RelationId>& eligible_relations() const { return eligible_; }
    const SamplerConfig& config() const { return cfg_; }

private:
    const DatasetBundle* bundle_;
    SamplerConfig cfg_;
    std::vector<RelationId> eligible_;
};

// Convenience wrapper around EpisodeSampler for a single draw.
EpisodeTask sample_episode(const DatasetBundle& bundle, const SamplerConfig& cfg, Rng& rng);

struct EvalEpisodes {
    std::vector<EpisodeTask> tasks;
    // Relations with at most K pairs, which cannot form a query.
    std::size_t skipped_relations = 0;
};

// Support = first K pairs in file order, every remaining pair is a query.
// No negatives are sampled; evaluation ranks over candidates.
EvalEpisodes make_eval_episodes(const DatasetBundle& bundle, Split split, int shots);

}  // namespace metar
