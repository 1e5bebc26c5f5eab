#include "metar/kg_data.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "metar/rng.hpp"

namespace metar {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

// ---------------------------------------------------------------- Vocabulary

EntityId Vocabulary::add_entity(const std::string& name) {
    auto [it, inserted] = entity_ids_.try_emplace(name, static_cast<EntityId>(entity_names_.size()));
    if (inserted) entity_names_.push_back(name);
    return it->second;
}

RelationId Vocabulary::add_relation(const std::string& name) {
    auto [it, inserted] = relation_ids_.try_emplace(name, static_cast<RelationId>(relation_names_.size()));
    if (inserted) relation_names_.push_back(name);
    return it->second;
}

std::optional<EntityId> Vocabulary::find_entity(const std::string& name) const {
    auto it = entity_ids_.find(name);
    if (it == entity_ids_.end()) return std::nullopt;
    return it->second;
}

std::optional<RelationId> Vocabulary::find_relation(const std::string& name) const {
    auto it = relation_ids_.find(name);
    if (it == relation_ids_.end()) return std::nullopt;
    return it->second;
}

// ----------------------------------------------------------------- TailIndex

bool TailIndex::insert(EntityId head, RelationId relation, EntityId tail) {
    auto& tails = tails_[key(head, relation)];
    if (std::find(tails.begin(), tails.end(), tail) != tails.end()) return false;
    tails.push_back(tail);
    return true;
}

bool TailIndex::contains(EntityId head, RelationId relation, EntityId tail) const {
    auto found = tails(head, relation);
    return std::find(found.begin(), found.end(), tail) != found.end();
}

std::span<const EntityId> TailIndex::tails(EntityId head, RelationId relation) const {
    auto it = tails_.find(key(head, relation));
    if (it == tails_.end()) return {};
    return it->second;
}

std::vector<std::pair<EntityId, RelationId>> TailIndex::keys() const {
    std::vector<std::pair<EntityId, RelationId>> out;
    out.reserve(tails_.size());
    for (const auto& [k, tails] : tails_)
        if (!tails.empty()) out.emplace_back(static_cast<EntityId>(k >> 32), static_cast<RelationId>(k & 0xffffffffULL));
    std::sort(out.begin(), out.end());
    return out;
}

bool TripleStore::add(const Triple& triple) {
    if (!index_.insert(triple.head, triple.relation, triple.tail)) return false;
    triples_.push_back(triple);
    return true;
}

const char* to_string(BackgroundMode mode) {
    switch (mode) {
        case BackgroundMode::PreTrain: return "pre_train";
        case BackgroundMode::InTrain: return "in_train";
        case BackgroundMode::Discard: return "discard";
    }
    return "?";
}

BackgroundMode parse_background_mode(const std::string& text) {
    if (text == "pre_train") return BackgroundMode::PreTrain;
    if (text == "in_train") return BackgroundMode::InTrain;
    if (text == "discard") return BackgroundMode::Discard;
    throw Error("unknown background mode '" + text + "' (expected pre_train|in_train|discard)");
}

const std::vector<EntityId>* DatasetBundle::candidates_for(RelationId relation) const {
    auto it = candidates.find(relation);
    if (it == candidates.end() || it->second.empty()) return nullptr;
    return &it->second;
}

void check_split_disjointness(const DatasetBundle& bundle) {
    std::map<RelationId, Split> owner;
    for (Split split : {Split::Train, Split::Dev, Split::Test}) {
        for (const auto& [relation, pairs] : bundle.split(split)) {
            auto [it, inserted] = owner.emplace(relation, split);
            if (!inserted) {
                throw Error("relation overlap between splits: '" + bundle.vocab.relation_name(relation) + "' in " +
                            to_string(it->second) + " and " + to_string(split));
            }
        }
    }
}

namespace {

void add_group_pair(std::vector<EntityPair>& group, EntityPair pair) {
    if (std::find(group.begin(), group.end(), pair) == group.end()) group.push_back(pair);
}

// Store = train groups, background (pre-train only), dev, test; in that order
// so that loaders and the generator build identical stores.
void rebuild_store(DatasetBundle& bundle) {
    TripleStore store;
    for (const auto& [relation, pairs] : bundle.split(Split::Train))
        for (auto p : pairs) store.add({p.head, relation, p.tail});
    for (const auto& t : bundle.background) store.add(t);
    for (Split split : {Split::Dev, Split::Test})
        for (const auto& [relation, pairs] : bundle.split(split))
            for (auto p : pairs) store.add({p.head, relation, p.tail});
    bundle.store = std::move(store);
}

ordered_json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("missing file: " + path.string());
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(path.filename().string() + ": malformed JSON (" + e.what() + ")");
    }
}

void require_file(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw Error("missing file: " + path.string());
}

const std::string& as_name(const ordered_json& value, const std::string& where) {
    if (!value.is_string()) throw Error(where + ": malformed entry (expected a string)");
    return value.get_ref<const std::string&>();
}

void read_id_file(const fs::path& path, bool entities, Vocabulary& vocab) {
    if (!fs::is_regular_file(path)) return;
    auto doc = read_json(path);
    if (!doc.is_object()) throw Error(path.filename().string() + ": malformed (expected an object)");
    std::vector<std::string> by_id(doc.size());
    std::vector<bool> seen(doc.size(), false);
    for (const auto& [name, id] : doc.items()) {
        if (!id.is_number_integer()) throw Error(path.filename().string() + ": malformed id for '" + name + "'");
        auto index = id.get<long long>();
        if (index < 0 || index >= static_cast<long long>(by_id.size()) || seen[static_cast<std::size_t>(index)])
            throw Error(path.filename().string() + ": ids must be a permutation of 0..n-1");
        seen[static_cast<std::size_t>(index)] = true;
        by_id[static_cast<std::size_t>(index)] = name;
    }
    for (const auto& name : by_id) {
        if (entities) vocab.add_entity(name);
        else vocab.add_relation(name);
    }
}

TaskGroups read_task_file(const fs::path& path, Vocabulary& vocab, const char* split_name) {
    auto doc = read_json(path);
    const std::string file = path.filename().string();
    if (!doc.is_object()) throw Error(file + ": malformed (expected an object of relation -> triples)");
    TaskGroups groups;
    for (const auto& [relation_name, triples] : doc.items()) {
        if (!triples.is_array()) throw Error(file + ": malformed task list for '" + relation_name + "'");
        RelationId relation = vocab.add_relation(relation_name);
        auto& group = groups[relation];
        for (const auto& triple : triples) {
            if (!triple.is_array() || triple.size() != 3)
                throw Error(file + ": malformed triple under '" + relation_name + "'");
            const auto& head = as_name(triple[0], file);
            const auto& rel = as_name(triple[1], file);
            const auto& tail = as_name(triple[2], file);
            if (rel != relation_name)
                throw Error(file + ": triple relation '" + rel + "' filed under '" + relation_name + "'");
            add_group_pair(group, {vocab.add_entity(head), vocab.add_entity(tail)});
        }
        if (group.empty()) groups.erase(relation);
    }
    if (groups.empty()) throw Error(std::string("no tasks in split '") + split_name + "'");
    return groups;
}

std::vector<Triple> read_path_graph(const fs::path& path, Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw Error("missing file: " + path.string());
    std::vector<Triple> triples;
    std::set<Triple> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto first = line.find('\t');
        auto second = first == std::string::npos ? std::string::npos : line.find('\t', first + 1);
        if (second == std::string::npos || line.find('\t', second + 1) != std::string::npos || first == 0 ||
            second == first + 1 || second + 1 == line.size())
            throw Error("path_graph:" + std::to_string(line_no) + ": malformed line");
        Triple t{vocab.add_entity(line.substr(0, first)), vocab.add_relation(line.substr(first + 1, second - first - 1)),
                 vocab.add_entity(line.substr(second + 1))};
        if (seen.insert(t).second) triples.push_back(t);
    }
    return triples;
}

std::string triple_key(const Vocabulary& vocab, EntityId head, RelationId relation) {
    return vocab.entity_name(head) + vocab.relation_name(relation);
}

}  // namespace

DatasetBundle load_benchmark(const fs::path& dir, BackgroundMode mode) {
    const auto train_path = dir / "train_tasks.json";
    const auto dev_path = dir / "dev_tasks.json";
    const auto test_path = dir / "test_tasks.json";
    const auto graph_path = dir / "path_graph";
    const auto cand_path = dir / "rel2candidates.json";
    const auto truth_path = dir / "e1rel_e2.json";
    for (const auto& p : {train_path, dev_path, test_path, graph_path, cand_path, truth_path}) require_file(p);

    DatasetBundle bundle;
    bundle.mode = mode;
    read_id_file(dir / "ent2ids", true, bundle.vocab);
    read_id_file(dir / "relation2ids", false, bundle.vocab);

    bundle.split(Split::Train) = read_task_file(train_path, bundle.vocab, "train");
    bundle.split(Split::Dev) = read_task_file(dev_path, bundle.vocab, "dev");
    bundle.split(Split::Test) = read_task_file(test_path, bundle.vocab, "test");
    check_split_disjointness(bundle);

    // Background entities always receive ids, so the id assignment does not
    // depend on the mode.
    auto background = read_path_graph(graph_path, bundle.vocab);
    switch (mode) {
        case BackgroundMode::InTrain: {
            auto& train = bundle.split(Split::Train);
            for (const auto& t : background) {
                if (bundle.split(Split::Dev).contains(t.relation) || bundle.split(Split::Test).contains(t.relation))
                    throw Error("relation overlap between splits: background relation '" +
                                bundle.vocab.relation_name(t.relation) + "' is an evaluation relation");
                add_group_pair(train[t.relation], {t.head, t.tail});
            }
            break;
        }
        case BackgroundMode::PreTrain: bundle.background = std::move(background); break;
        case BackgroundMode::Discard: break;
    }
    rebuild_store(bundle);

    auto candidates = read_json(cand_path);
    if (!candidates.is_object()) throw Error("rel2candidates.json: malformed (expected an object)");
    for (const auto& [relation_name, names] : candidates.items()) {
        auto relation = bundle.vocab.find_relation(relation_name);
        if (!relation) throw Error("rel2candidates.json: unknown relation '" + relation_name + "'");
        if (!names.is_array()) throw Error("rel2candidates.json: malformed list for '" + relation_name + "'");
        auto& list = bundle.candidates[*relation];
        for (const auto& name : names) {
            auto entity = bundle.vocab.find_entity(as_name(name, "rel2candidates.json"));
            if (!entity)
                throw Error("rel2candidates.json: unknown entity '" + name.get<std::string>() + "'");
            list.push_back(*entity);
        }
    }
    // Evaluation ranks each true tail among its relation's candidates.
    for (Split split : {Split::Dev, Split::Test}) {
        for (const auto& [relation, pairs] : bundle.split(split)) {
            auto it = bundle.candidates.find(relation);
            if (it == bundle.candidates.end() || it->second.empty()) continue;
            std::unordered_set<EntityId> present(it->second.begin(), it->second.end());
            for (auto p : pairs) {
                if (present.insert(p.tail).second) {
                    it->second.push_back(p.tail);
                    ++bundle.candidates_repaired;
                }
            }
        }
    }

    auto truths = read_json(truth_path);
    if (!truths.is_object()) throw Error("e1rel_e2.json: malformed (expected an object)");
    std::set<std::size_t> relation_lengths;
    for (const auto& name : bundle.vocab.relation_names()) relation_lengths.insert(name.size());
    for (const auto& [key, tails] : truths.items()) {
        std::optional<EntityId> head;
        std::optional<RelationId> relation;
        for (auto it = relation_lengths.rbegin(); it != relation_lengths.rend() && !head; ++it) {
            if (*it >= key.size()) continue;
            relation = bundle.vocab.find_relation(key.substr(key.size() - *it));
            if (relation) head = bundle.vocab.find_entity(key.substr(0, key.size() - *it));
        }
        if (!head) throw Error("e1rel_e2.json: cannot resolve key '" + key + "' into head + relation");
        if (!tails.is_array()) throw Error("e1rel_e2.json: malformed list for '" + key + "'");
        for (const auto& name : tails) {
            auto tail = bundle.vocab.find_entity(as_name(name, "e1rel_e2.json"));
            if (!tail) throw Error("e1rel_e2.json: unknown entity '" + name.get<std::string>() + "'");
            bundle.filtered_truths.insert(*head, *relation, *tail);
        }
    }
    return bundle;
}

void save_benchmark(const DatasetBundle& bundle, const fs::path& dir) {
    fs::create_directories(dir);
    const auto& vocab = bundle.vocab;
    auto write = [&](const fs::path& path, const ordered_json& doc) {
        std::ofstream out(path);
        if (!out) throw Error("cannot write " + path.string());
        out << doc.dump(1) << '\n';
        if (!out) throw Error("write failed: " + path.string());
    };

    const char* task_files[] = {"train_tasks.json", "dev_tasks.json", "test_tasks.json"};
    for (Split split : {Split::Train, Split::Dev, Split::Test}) {
        ordered_json doc = ordered_json::object();
        for (const auto& [relation, pairs] : bundle.split(split)) {
            auto& list = doc[vocab.relation_name(relation)] = ordered_json::array();
            for (auto p : pairs)
                list.push_back({vocab.entity_name(p.head), vocab.relation_name(relation), vocab.entity_name(p.tail)});
        }
        write(dir / task_files[static_cast<int>(split)], doc);
    }

    {
        std::ofstream out(dir / "path_graph");
        if (!out) throw Error("cannot write " + (dir / "path_graph").string());
        for (const auto& t : bundle.background)
            out << vocab.entity_name(t.head) << '\t' << vocab.relation_name(t.relation) << '\t'
                << vocab.entity_name(t.tail) << '\n';
    }

    ordered_json candidates = ordered_json::object();
    std::vector<RelationId> cand_relations;
    for (const auto& [relation, list] : bundle.candidates) cand_relations.push_back(relation);
    std::sort(cand_relations.begin(), cand_relations.end());
    for (auto relation : cand_relations) {
        auto& list = candidates[vocab.relation_name(relation)] = ordered_json::array();
        for (auto e : bundle.candidates.at(relation)) list.push_back(vocab.entity_name(e));
    }
    write(dir / "rel2candidates.json", candidates);

    // Keys in (head, relation) id order for byte-stable output.
    ordered_json truths = ordered_json::object();
    for (auto [head, relation] : bundle.filtered_truths.keys()) {
        auto& list = truths[triple_key(vocab, head, relation)] = ordered_json::array();
        for (auto e : bundle.filtered_truths.tails(head, relation)) list.push_back(vocab.entity_name(e));
    }
    write(dir / "e1rel_e2.json", truths);

    ordered_json ent2ids = ordered_json::object();
    for (std::size_t i = 0; i < vocab.entity_count(); ++i) ent2ids[vocab.entity_names()[i]] = i;
    write(dir / "ent2ids", ent2ids);
    ordered_json rel2ids = ordered_json::object();
    for (std::size_t i = 0; i < vocab.relation_count(); ++i) rel2ids[vocab.relation_names()[i]] = i;
    write(dir / "relation2ids", rel2ids);
}

// ------------------------------------------------------------------ Synthetic

void SynthConfig::validate() const {
    if (n_entities < 2 || dim <= 0 || n_train_rel <= 0 || n_dev_rel <= 0 || n_test_rel <= 0 || triples_per_rel <= 0 ||
        candidate_pool <= 0)
        throw Error("synth config: all counts must be positive (n_entities >= 2)");
    if (noise_sigma < 0.0) throw Error("synth config: noise_sigma must be >= 0");
    if (relation_scale <= 0.0) throw Error("synth config: relation_scale must be > 0");
    if (candidate_pool > n_entities) throw Error("synth config: candidate_pool exceeds n_entities");
    if (triples_per_rel > n_entities)
        throw Error("synth config: infeasible, triples_per_rel exceeds n_entities");
}

SynthLatents synthetic_latents(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng = Rng::derive(cfg.seed, "synth-latent");
    const int n_rel = cfg.n_train_rel + cfg.n_dev_rel + cfg.n_test_rel;
    SynthLatents latents{Matrix(cfg.n_entities, cfg.dim), Matrix(n_rel, cfg.dim)};
    for (Eigen::Index i = 0; i < latents.entities.size(); ++i) latents.entities.data()[i] = rng.normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < latents.relations.size(); ++i)
        latents.relations.data()[i] = rng.normal(0.0, cfg.relation_scale);
    return latents;
}

DatasetBundle generate_synthetic(const SynthConfig& cfg) {
    const auto latents = synthetic_latents(cfg);
    Rng rng = Rng::derive(cfg.seed, "synth-triples");
    const int n = cfg.n_entities;
    const int n_rel = static_cast<int>(latents.relations.rows());

    DatasetBundle bundle;
    bundle.mode = BackgroundMode::InTrain;
    for (int e = 0; e < n; ++e) bundle.vocab.add_entity("e" + std::to_string(e));
    for (int r = 0; r < n_rel; ++r) bundle.vocab.add_relation("r" + std::to_string(r));

    std::vector<int> head_order(static_cast<std::size_t>(n));
    std::vector<double> residual(static_cast<std::size_t>(n));
    std::vector<EntityId> snapped(static_cast<std::size_t>(n));
    for (int r = 0; r < n_rel; ++r) {
        const Split split = r < cfg.n_train_rel ? Split::Train
                            : r < cfg.n_train_rel + cfg.n_dev_rel ? Split::Dev
                                                                  : Split::Test;
        for (int h = 0; h < n; ++h) {
            Vector point = latents.entities.row(h).transpose() + latents.relations.row(r).transpose();
            if (cfg.noise_sigma > 0.0)
                for (int k = 0; k < cfg.dim; ++k) point[k] += rng.normal(0.0, cfg.noise_sigma);
            double best = std::numeric_limits<double>::infinity();
            EntityId best_id = -1;
            for (int t = 0; t < n; ++t) {
                if (t == h) continue;
                double dist = (latents.entities.row(t).transpose() - point).squaredNorm();
                if (dist < best) {
                    best = dist;
                    best_id = t;
                }
            }
            residual[static_cast<std::size_t>(h)] = best;
            snapped[static_cast<std::size_t>(h)] = best_id;
        }
        std::iota(head_order.begin(), head_order.end(), 0);
        std::stable_sort(head_order.begin(), head_order.end(),
                         [&](int a, int b) { return residual[static_cast<std::size_t>(a)] < residual[static_cast<std::size_t>(b)]; });

        std::vector<EntityPair> pairs;
        for (int i = 0; i < cfg.triples_per_rel; ++i) {
            EntityId h = head_order[static_cast<std::size_t>(i)];
            pairs.push_back({h, snapped[static_cast<std::size_t>(h)]});
        }
        // File order must not encode fit quality: evaluation supports are the
        // first K pairs.
        for (std::size_t i = pairs.size(); i > 1; --i) std::swap(pairs[i - 1], pairs[rng.uniform_index(i)]);
        bundle.split(split)[r] = pairs;

        std::vector<EntityId> pool;
        std::unordered_set<EntityId> in_pool;
        for (auto p : pairs)
            if (in_pool.insert(p.tail).second) pool.push_back(p.tail);
        if (static_cast<int>(pool.size()) > cfg.candidate_pool)
            throw Error("synth config: infeasible, relation has more distinct tails than candidate_pool");
        std::vector<EntityId> others(static_cast<std::size_t>(n));
        std::iota(others.begin(), others.end(), 0);
        for (std::size_t i = others.size(); i > 1; --i) std::swap(others[i - 1], others[rng.uniform_index(i)]);
        for (auto e : others) {
            if (static_cast<int>(pool.size()) >= cfg.candidate_pool) break;
            if (in_pool.insert(e).second) pool.push_back(e);
        }
        for (std::size_t i = pool.size(); i > 1; --i) std::swap(pool[i - 1], pool[rng.uniform_index(i)]);
        bundle.candidates[r] = std::move(pool);
    }
    rebuild_store(bundle);
    for (const auto& t : bundle.store.triples()) bundle.filtered_truths.insert(t.head, t.relation, t.tail);
    return bundle;
}

// ---------------------------------------------------------------------- Stats

std::vector<Triple> training_visible_triples(const DatasetBundle& bundle) {
    std::vector<Triple> out;
    for (const auto& [relation, pairs] : bundle.split(Split::Train))
        for (auto p : pairs) out.push_back({p.head, relation, p.tail});
    if (bundle.mode == BackgroundMode::PreTrain) out.insert(out.end(), bundle.background.begin(), bundle.background.end());
    return out;
}

DatasetStats dataset_stats(const DatasetBundle& bundle) {
    DatasetStats stats;
    for (Split split : {Split::Train, Split::Dev, Split::Test}) {
        const auto i = static_cast<std::size_t>(split);
        stats.relations[i] = bundle.split(split).size();
        for (const auto& [relation, pairs] : bundle.split(split)) stats.triples[i] += pairs.size();
    }
    stats.background_triples = bundle.background.size();

    auto visible = training_visible_triples(bundle);
    stats.training_visible_triples = visible.size();
    std::unordered_map<EntityId, std::size_t> occurrences;
    for (const auto& t : visible) {
        ++occurrences[t.head];
        if (t.tail != t.head) ++occurrences[t.tail];
    }
    stats.training_entities = occurrences.size();
    for (const auto& [entity, count] : occurrences)
        if (count == 1) ++stats.one_shot_entities;
    if (stats.training_entities > 0)
        stats.one_shot_proportion =
            static_cast<double>(stats.one_shot_entities) / static_cast<double>(stats.training_entities);
    return stats;
}

}  // namespace metar
