#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "metar/kg_data.hpp"
#include "metar/rng.hpp"

namespace fixtures {

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("metar_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small benchmark in the published layout:
//   train: likes (4 pairs), owns (3 pairs)   dev: knows (3)   test: visits (4)
//   background: likes (1 extra pair, 1 duplicate), friend_of (2)
inline void write_tiny_benchmark(const std::filesystem::path& dir) {
    using nlohmann::json;
    std::filesystem::create_directories(dir);
    json train = {{"likes", {{"a", "likes", "b"}, {"b", "likes", "c"}, {"c", "likes", "d"}, {"d", "likes", "e"}}},
                  {"owns", {{"a", "owns", "x"}, {"b", "owns", "y"}, {"c", "owns", "z"}}}};
    json dev = {{"knows", {{"a", "knows", "c"}, {"b", "knows", "d"}, {"e", "knows", "a"}}}};
    json test = {{"visits", {{"a", "visits", "x"}, {"b", "visits", "y"}, {"a", "visits", "z"}, {"d", "visits", "x"}}}};
    json cands = {{"likes", {"a", "b", "c", "d", "e"}},
                  {"owns", {"x", "y", "z", "a"}},
                  {"knows", {"a", "b", "c", "d", "e"}},
                  // "z" is missing on purpose: the loader must add it back.
                  {"visits", {"x", "y", "b", "c"}}};
    json e1rel_e2 = {{"aknows", {"c"}}, {"bknows", {"d"}}, {"eknows", {"a"}},
                     {"avisits", {"x", "z"}}, {"bvisits", {"y"}}, {"dvisits", {"x"}}};
    write_text(dir / "train_tasks.json", train.dump());
    write_text(dir / "dev_tasks.json", dev.dump());
    write_text(dir / "test_tasks.json", test.dump());
    write_text(dir / "rel2candidates.json", cands.dump());
    write_text(dir / "e1rel_e2.json", e1rel_e2.dump());
    write_text(dir / "path_graph", "e\tlikes\ta\na\tlikes\tb\na\tfriend_of\tb\nf\tfriend_of\tg\n");
}

// Bundle with n entities, every pair (i, i+1) in train relation 0, and a
// second train relation with pairs (i, i+2). Dev/test are one relation each.
inline metar::DatasetBundle chain_bundle(int n_entities) {
    metar::DatasetBundle b;
    for (int i = 0; i < n_entities; ++i) b.vocab.add_entity("e" + std::to_string(i));
    const char* names[] = {"next", "skip", "dev_rel", "test_rel"};
    for (const char* name : names) b.vocab.add_relation(name);
    for (int i = 0; i + 1 < n_entities; ++i) b.split(metar::Split::Train)[0].push_back({i, i + 1});
    for (int i = 0; i + 2 < n_entities; ++i) b.split(metar::Split::Train)[1].push_back({i, i + 2});
    for (int i = 0; i + 3 < n_entities; ++i) b.split(metar::Split::Dev)[2].push_back({i, i + 3});
    for (int i = 0; i + 4 < n_entities; ++i) b.split(metar::Split::Test)[3].push_back({i, i + 4});
    for (int s = 0; s < 3; ++s)
        for (const auto& [r, pairs] : b.task_groups[s])
            for (auto p : pairs) {
                b.store.add({p.head, r, p.tail});
                b.filtered_truths.insert(p.head, r, p.tail);
            }
    b.mode = metar::BackgroundMode::InTrain;
    return b;
}

inline metar::Matrix random_matrix(metar::Rng& rng, int rows, int cols, double scale = 1.0) {
    metar::Matrix m(rows, cols);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, scale);
    return m;
}

inline metar::Vector random_vector(metar::Rng& rng, int n, double scale = 1.0) {
    metar::Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = rng.normal(0.0, scale);
    return v;
}

}  // namespace fixtures
