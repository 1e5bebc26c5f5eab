#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "metar/types.hpp"

namespace metar {

class Vocabulary {
public:
    // Returns the existing id when the name is already known.
    EntityId add_entity(const std::string& name);
    RelationId add_relation(const std::string& name);

    std::optional<EntityId> find_entity(const std::string& name) const;
    std::optional<RelationId> find_relation(const std::string& name) const;

    const std::string& entity_name(EntityId id) const { return entity_names_.at(static_cast<std::size_t>(id)); }
    const std::string& relation_name(RelationId id) const { return relation_names_.at(static_cast<std::size_t>(id)); }

    std::size_t entity_count() const { return entity_names_.size(); }
    std::size_t relation_count() const { return relation_names_.size(); }

    const std::vector<std::string>& entity_names() const { return entity_names_; }
    const std::vector<std::string>& relation_names() const { return relation_names_; }

    bool operator==(const Vocabulary& other) const {
        return entity_names_ == other.entity_names_ && relation_names_ == other.relation_names_;
    }

private:
    std::vector<std::string> entity_names_;
    std::vector<std::string> relation_names_;
    std::unordered_map<std::string, EntityId> entity_ids_;
    std::unordered_map<std::string, RelationId> relation_ids_;
};

// (head, relation) -> tails. Tails are kept in insertion order.
class TailIndex {
public:
    // Returns false when the tail was already present.
    bool insert(EntityId head, RelationId relation, EntityId tail);
    bool contains(EntityId head, RelationId relation, EntityId tail) const;
    std::span<const EntityId> tails(EntityId head, RelationId relation) const;
    std::size_t key_count() const { return tails_.size(); }
    // All (head, relation) keys, sorted.
    std::vector<std::pair<EntityId, RelationId>> keys() const;

    bool operator==(const TailIndex& other) const { return tails_ == other.tails_; }

private:
    static std::uint64_t key(EntityId head, RelationId relation) {
        return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(head)) << 32) |
               static_cast<std::uint32_t>(relation);
    }
    std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
};

class TripleStore {
public:
    // Duplicates are ignored; returns whether the triple was new.
    bool add(const Triple& triple);
    bool contains(const Triple& triple) const { return index_.contains(triple.head, triple.relation, triple.tail); }
    std::span<const EntityId> tails(EntityId head, RelationId relation) const { return index_.tails(head, relation); }

    const std::vector<Triple>& triples() const { return triples_; }
    std::size_t size() const { return triples_.size(); }

    bool operator==(const TripleStore& other) const { return triples_ == other.triples_; }

private:
    std::vector<Triple> triples_;
    TailIndex index_;
};

enum class BackgroundMode { PreTrain, InTrain, Discard };

const char* to_string(BackgroundMode mode);
BackgroundMode parse_background_mode(const std::string& text);

// relation -> (head, tail) pairs in file order.
using TaskGroups = std::map<RelationId, std::vector<EntityPair>>;

struct DatasetBundle {
    Vocabulary vocab;
    // Every triple visible in the chosen mode plus dev/test triples; used for
    // negative filtering only.
    TripleStore store;
    std::array<TaskGroups, 3> task_groups;
    std::vector<Triple> background;
    BackgroundMode mode = BackgroundMode::InTrain;
    std::unordered_map<RelationId, std::vector<EntityId>> candidates;
    TailIndex filtered_truths;
    // Number of dev/test true tails appended to candidate lists that lacked them.
    std::size_t candidates_repaired = 0;

    const TaskGroups& split(Split s) const { return task_groups[static_cast<std::size_t>(s)]; }
    TaskGroups& split(Split s) { return task_groups[static_cast<std::size_t>(s)]; }

    // Candidate list for a relation, or nullptr when the benchmark has none.
    const std::vector<EntityId>* candidates_for(RelationId relation) const;
};

// Throws metar::Error when train/dev/test relation sets intersect.
void check_split_disjointness(const DatasetBundle& bundle);

// Reads train_tasks.json, dev_tasks.json, test_tasks.json, path_graph,
// rel2candidates.json and e1rel_e2.json. Optional ent2ids / relation2ids
// JSON files fix the id assignment; otherwise ids follow first appearance.
DatasetBundle load_benchmark(const std::filesystem::path& dir, BackgroundMode mode);

// Writes the same layout, plus ent2ids and relation2ids so that a reload
// reproduces the id assignment.
void save_benchmark(const DatasetBundle& bundle, const std::filesystem::path& dir);

struct SynthConfig {
    int n_entities = 200;
    int dim = 16;
    int n_train_rel = 20;
    int n_dev_rel = 3;
    int n_test_rel = 5;
    int triples_per_rel = 30;
    double noise_sigma = 0.0;
    int candidate_pool = 50;
    // Standard deviation of each relation's latent translation, in units of
    // the entity latent spread.
    double relation_scale = 0.3;
    std::uint64_t seed = 7;

    void validate() const;
};

// Planted-translation benchmark: latent z_e ~ N(0, I), v_r ~ N(0, s^2 I).
// Each relation takes the heads whose point z_h + v_r + eps snaps most
// tightly onto another entity, with the tail set to that nearest entity.
DatasetBundle generate_synthetic(const SynthConfig& cfg);

// Latent geometry of a synthetic bundle, for tests that need ground truth.
struct SynthLatents {
    Matrix entities;
    Matrix relations;
};
SynthLatents synthetic_latents(const SynthConfig& cfg);

struct DatasetStats {
    std::array<std::size_t, 3> relations{};
    std::array<std::size_t, 3> triples{};
    std::size_t background_triples = 0;
    std::size_t training_visible_triples = 0;
    std::size_t training_entities = 0;
    std::size_t one_shot_entities = 0;
    double one_shot_proportion = 0.0;
};

DatasetStats dataset_stats(const DatasetBundle& bundle);

// Triples the model trains on under the bundle's background mode (train task
// groups, plus background triples under PreTrain).
std::vector<Triple> training_visible_triples(const DatasetBundle& bundle);

}  // namespace metar
