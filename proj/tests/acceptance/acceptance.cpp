// Acceptance run: one PASS/FAIL/SKIP line per criterion; exit status 1 when a
// gating criterion (1-6) fails. Criterion 7 runs only with --full and a
// NELL-One directory in METAR_DATA_DIR.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "grad_oracle.hpp"
#include "oracles.hpp"
#include "random_task.hpp"
#include "metar/eval.hpp"
#include "metar/grad.hpp"
#include "metar/train.hpp"

using namespace metar;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status;
    std::string detail;
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

// Criterion 1 -----------------------------------------------------------------

// Support loss in long double, as a function of R only.
long double support_loss_ld(const std::vector<Vector>& heads, const std::vector<Vector>& tails,
                            const std::vector<Vector>& negs, const std::vector<long double>& R, double gamma) {
    long double loss = 0.0L;
    for (std::size_t k = 0; k < heads.size(); ++k) {
        long double sp = 0.0L, sn = 0.0L;
        for (std::size_t i = 0; i < R.size(); ++i) {
            const long double base = static_cast<long double>(heads[k][i]) + R[i];
            const long double dp = base - tails[k][i];
            const long double dn = base - negs[k][i];
            sp += dp * dp;
            sn += dn * dn;
        }
        const long double x = gamma + std::sqrt(sp) - std::sqrt(sn);
        if (x > 0.0L) loss += x;
    }
    return loss;
}

Outcome criterion1() {
    constexpr int d = 8;
    constexpr double gamma = 1.0;
    constexpr long double step = 1e-5L;
    Rng rng(20241);
    double worst = 0.0;
    int done = 0, rejected = 0;
    while (done < 100) {
        const int shots = done % 2 == 0 ? 1 : 5;
        std::vector<Vector> heads, tails, negs;
        for (int k = 0; k < shots; ++k) {
            heads.push_back(fixtures::random_vector(rng, d));
            tails.push_back(fixtures::random_vector(rng, d));
            negs.push_back(fixtures::random_vector(rng, d));
        }
        const Vector R = fixtures::random_vector(rng, d);
        std::vector<HingeTerm> terms;
        bool near_kink = false;
        for (int k = 0; k < shots; ++k) {
            terms.push_back(make_hinge_term(static_cast<std::size_t>(k), heads[k], R, tails[k], negs[k], gamma, 1.0));
            near_kink |= std::abs(gamma + terms.back().pos_score - terms.back().neg_score) <= 1e-3;
        }
        if (near_kink) {
            ++rejected;
            continue;
        }
        const Vector g = gradient_meta(terms, d);
        std::vector<long double> probe(R.data(), R.data() + d);
        for (int i = 0; i < d; ++i) {
            const long double saved = probe[i];
            probe[i] = saved + step;
            const long double plus = support_loss_ld(heads, tails, negs, probe, gamma);
            probe[i] = saved - step;
            const long double minus = support_loss_ld(heads, tails, negs, probe, gamma);
            probe[i] = saved;
            const double numeric = static_cast<double>((plus - minus) / (2.0L * step));
            const double denom = std::max({std::abs(g[i]), std::abs(numeric), 1e-8});
            worst = std::max(worst, std::abs(g[i] - numeric) / denom);
        }
        ++done;
    }
    return {worst < 1e-6 ? Status::Pass : Status::Fail,
            fmt("100 instances (d=8, K in {1,5}, %.0f rejected near hinge), max rel err %.2e < 1e-6", rejected, worst)};
}

// Criterion 2 -----------------------------------------------------------------

bool same_gradients(const TaskGradients& a, const TaskGradients& b) {
    if (a.entity_rows.size() != b.entity_rows.size()) return false;
    for (const auto& [e, g] : a.entity_rows) {
        auto it = b.entity_rows.find(e);
        if (it == b.entity_rows.end() || it->second != g) return false;
    }
    for (std::size_t l = 0; l < a.meta.size(); ++l)
        if (a.meta[l].weight != b.meta[l].weight || a.meta[l].bias != b.meta[l].bias) return false;
    return true;
}

Outcome criterion2() {
    Hyperparams hp;
    hp.dim = 4;
    hp.hidden_sizes = {6};
    Hyperparams hp0 = hp;
    hp0.beta = 0.0;
    Rng rng(20242);
    double worst_second = 0.0, worst_first = 0.0;
    bool beta0_identical = true;
    int done = 0;
    while (done < 100) {
        const auto params = fixtures::random_params(rng, 10, hp);
        const int shots = 1 + static_cast<int>(rng.uniform_index(3));
        const auto task = fixtures::random_task(rng, 10, shots, 2, 2);
        if (!oracle::away_from_kinks(task, params, hp) || !oracle::away_from_kinks(task, params, hp0)) continue;
        const auto fwd = forward_task(task, params, hp, ForwardMode::Standard);
        const auto second = backward_task(fwd.trace, task, params, hp, GradMode::FullSecondOrder);
        const auto first = backward_task(fwd.trace, task, params, hp, GradMode::FirstOrder);
        worst_second = std::max(worst_second, oracle::compare_with_fd(task, params, hp, second).max_rel_err);
        worst_first = std::max(worst_first, oracle::compare_with_fd(task, params, hp, first).max_rel_err);

        const auto fwd0 = forward_task(task, params, hp0, ForwardMode::Standard);
        beta0_identical &= same_gradients(backward_task(fwd0.trace, task, params, hp0, GradMode::FullSecondOrder),
                                          backward_task(fwd0.trace, task, params, hp0, GradMode::FirstOrder));
        ++done;
    }
    const bool ok = worst_second < 1e-3 && worst_first > worst_second && beta0_identical;
    return {ok ? Status::Pass : Status::Fail,
            fmt("second-order max rel err %.2e < 1e-3; first-order %.2e (larger); ", worst_second, worst_first) +
                (beta0_identical ? "beta=0 bit-identical" : "beta=0 NOT identical")};
}

// Criterion 3 -----------------------------------------------------------------

Outcome criterion3() {
    constexpr int d = 3;
    Rng rng(20243);
    std::size_t queries = 0, mismatches = 0;
    for (int matrix = 0; matrix < 10000; ++matrix) {
        const auto n = static_cast<Eigen::Index>(1 + rng.uniform_index(30));
        // Small integer coordinates: squared distances are exact, so ties are exact.
        Matrix embeddings(n, d);
        for (Eigen::Index i = 0; i < embeddings.size(); ++i)
            embeddings.data()[i] = static_cast<double>(rng.uniform_index(5)) - 2.0;
        std::vector<EntityId> candidates(static_cast<std::size_t>(n));
        for (std::size_t i = 0; i < candidates.size(); ++i) candidates[i] = static_cast<EntityId>(i);
        for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng.uniform_index(i)]);

        MetricAccumulator acc;
        double reciprocal = 0.0;
        std::size_t h1 = 0, h5 = 0, h10 = 0;
        const int rows = 1 + static_cast<int>(rng.uniform_index(8));
        for (int q = 0; q < rows; ++q) {
            Vector head(d), relation(d);
            for (int i = 0; i < d; ++i) {
                head[i] = static_cast<double>(rng.uniform_index(5)) - 2.0;
                relation[i] = static_cast<double>(rng.uniform_index(3)) - 1.0;
            }
            const std::size_t truth = rng.uniform_index(static_cast<std::uint64_t>(n));
            std::vector<bool> excluded(static_cast<std::size_t>(n), false);
            std::vector<EntityId> filtered;
            for (std::size_t i = 0; i < excluded.size(); ++i)
                if (rng.uniform_index(5) == 0) excluded[i] = true, filtered.push_back(static_cast<EntityId>(i));
            std::vector<double> scores(static_cast<std::size_t>(n));
            const auto h = oracle::row(Matrix(head.transpose()), 0);
            const auto r = oracle::row(Matrix(relation.transpose()), 0);
            for (Eigen::Index c = 0; c < n; ++c)
                scores[static_cast<std::size_t>(c)] = oracle::norm(oracle::diff(h, r, oracle::row(embeddings, static_cast<int>(c))));

            const auto got = rank_query(head, relation, static_cast<EntityId>(truth), candidates, filtered, embeddings);
            const auto expected = oracle::rank_by_sort(scores, truth, excluded);
            mismatches += got != expected;
            acc.add_rank(got);
            reciprocal += 1.0 / static_cast<double>(expected);
            h1 += expected <= 1;
            h5 += expected <= 5;
            h10 += expected <= 10;
            ++queries;
        }
        const auto m = acc.finish();
        const double nq = rows;
        if (m.mrr != reciprocal / nq || m.hits1 != h1 / nq || m.hits5 != h5 / nq || m.hits10 != h10 / nq ||
            m.n_queries != static_cast<std::size_t>(rows))
            ++mismatches;
    }
    return {mismatches == 0 ? Status::Pass : Status::Fail,
            fmt("10^4 score matrices, %.0f ranked queries with ties, %.0f mismatches", static_cast<double>(queries),
                static_cast<double>(mismatches))};
}

// Criteria 4-6 ---------------------------------------------------------------

SynthConfig synthetic(double noise) {
    SynthConfig cfg;
    cfg.n_entities = 200;
    cfg.dim = 16;
    cfg.n_train_rel = 20;
    cfg.n_dev_rel = 3;
    cfg.n_test_rel = 5;
    cfg.triples_per_rel = 30;
    cfg.candidate_pool = 50;
    cfg.noise_sigma = noise;
    return cfg;
}

Hyperparams synthetic_hp() {
    Hyperparams hp;
    hp.dim = 16;
    hp.hidden_sizes = {64, 32};
    return hp;
}

TrainConfig synthetic_train(Ablation ablation) {
    TrainConfig cfg;
    cfg.batch_tasks = 64;
    cfg.adam.lr = 0.01;
    cfg.eval_every = 50;
    cfg.patience = 30;
    cfg.max_iters = 600;
    cfg.ablation = ablation;
    return cfg;
}

constexpr SamplerConfig kSampler{1, 3, 1, 0};

EvalOptions eval_options(const Hyperparams& hp) { return EvalOptions{hp, 0, 1, nullptr}; }

// Ground-truth 1-shot translation oracle: the relation vector is read off
// the support pair in the planted latent space, queries are ranked over the
// candidate list with the same filtering rule as evaluate().
double latent_oracle_hits10(const SynthConfig& cfg, const DatasetBundle& bundle) {
    const auto latents = synthetic_latents(cfg);
    std::size_t hits = 0, total = 0;
    for (const auto& [relation, pairs] : bundle.split(Split::Test)) {
        if (pairs.size() < 2) continue;
        const Vector r = latents.entities.row(pairs[0].tail) - latents.entities.row(pairs[0].head);
        const auto& cands = *bundle.candidates_for(relation);
        for (std::size_t q = 1; q < pairs.size(); ++q) {
            const Vector target = latents.entities.row(pairs[q].head).transpose() + r;
            auto dist = [&](EntityId e) { return (target - latents.entities.row(e).transpose()).norm(); };
            const double truth = dist(pairs[q].tail);
            std::size_t rank = 1;
            for (EntityId c : cands) {
                if (c == pairs[q].tail) continue;
                bool known = false;
                for (EntityId t : bundle.filtered_truths.tails(pairs[q].head, relation)) known |= t == c;
                for (EntityId t : bundle.store.tails(pairs[q].head, relation)) known |= t == c;
                if (!known && dist(c) < truth) ++rank;
            }
            hits += rank <= 10;
            ++total;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

Outcome criterion4() {
    const auto cfg = synthetic(0.0);
    const auto bundle = generate_synthetic(cfg);
    const double ceiling = latent_oracle_hits10(cfg, bundle);
    if (ceiling < 0.9)
        return {Status::Fail, fmt("latent TransE oracle Hits@10 %.3f < 0.9: planted structure not recoverable", ceiling)};

    const auto hp = synthetic_hp();
    const auto untrained = evaluate(init_params(hp, bundle.vocab.entity_count(), 0), bundle, Split::Test, 1,
                                    EvalMode::Standard, eval_options(hp));
    const auto result = train_loop(bundle, kSampler, synthetic_train(Ablation::Standard), hp);
    const auto trained = evaluate(result.best.params, bundle, Split::Test, 1, EvalMode::Standard, eval_options(hp));
    return {trained.hits10 >= 0.80 ? Status::Pass : Status::Fail,
            fmt("test Hits@10 trained %.3f >= 0.80, untrained %.3f; latent oracle %.3f", trained.hits10,
                untrained.hits10, ceiling)};
}

Outcome criterion5() {
    const auto bundle = generate_synthetic(synthetic(0.05));
    const auto hp = synthetic_hp();
    const auto untrained = evaluate(init_params(hp, bundle.vocab.entity_count(), 0), bundle, Split::Test, 1,
                                    EvalMode::Standard, eval_options(hp));
    const auto standard = train_loop(bundle, kSampler, synthetic_train(Ablation::Standard), hp);
    const auto minus_g = train_loop(bundle, kSampler, synthetic_train(Ablation::MinusG), hp);
    const double s = evaluate(standard.best.params, bundle, Split::Test, 1, EvalMode::Standard, eval_options(hp)).hits10;
    const double g = evaluate(minus_g.best.params, bundle, Split::Test, 1, EvalMode::MinusG, eval_options(hp)).hits10;
    return {s >= g && g >= untrained.hits10 ? Status::Pass : Status::Fail,
            fmt("noise 0.05 test Hits@10: standard %.3f >= -g %.3f >= untrained %.3f", s, g, untrained.hits10)};
}

Outcome criterion6() {
    const auto bundle = generate_synthetic(synthetic(0.0));
    auto cfg = synthetic_train(Ablation::Standard);
    cfg.eval_every = 0;
    cfg.max_iters = 500;
    const auto result = train_loop(bundle, kSampler, cfg, synthetic_hp());
    if (result.loss_history.size() != 500) return {Status::Fail, "run stopped before 500 iterations"};
    double early = 0.0, late = 0.0;
    for (int i = 0; i < 100; ++i) {
        early += result.loss_history[static_cast<std::size_t>(i)];
        late += result.loss_history[static_cast<std::size_t>(400 + i)];
    }
    early /= 100.0;
    late /= 100.0;
    return {late < early ? Status::Pass : Status::Fail,
            fmt("mean batch query loss iters 401-500 %.4f < iters 1-100 %.4f", late, early)};
}

// Criterion 7 -----------------------------------------------------------------

Outcome criterion7(bool full) {
    const char* env = std::getenv("METAR_DATA_DIR");
    if (!env || !*env) return {Status::Skip, "METAR_DATA_DIR not set"};
    const std::filesystem::path dir(env);
    for (const char* f : {"train_tasks.json", "dev_tasks.json", "test_tasks.json", "path_graph", "rel2candidates.json",
                          "e1rel_e2.json"})
        if (!std::filesystem::exists(dir / f)) return {Status::Skip, std::string("no NELL-One data: missing ") + f};
    if (!full) return {Status::Skip, "NELL-One present; pass --full for the multi-hour run"};

    const auto bundle = load_benchmark(dir, BackgroundMode::InTrain);
    Hyperparams hp;
    TrainConfig cfg;
    const auto result = train_loop(bundle, SamplerConfig{}, cfg, hp);
    const auto report = evaluate(result.best.params, bundle, Split::Test, 1, EvalMode::Standard, eval_options(hp));
    const bool ok = std::abs(report.mrr - 0.250) <= 0.03 && std::abs(report.hits10 - 0.401) <= 0.03;
    return {ok ? Status::Pass : Status::Fail,
            fmt("NELL-One 1-shot test MRR %.3f (0.250 +- 0.03), Hits@10 %.3f (0.401 +- 0.03)", report.mrr,
                report.hits10)};
}

}  // namespace

int main(int argc, char** argv) {
    bool full = false;
    for (int i = 1; i < argc; ++i) full |= std::strcmp(argv[i], "--full") == 0;

    struct Criterion {
        int id;
        double budget_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, 10, criterion1},
        {2, 60, criterion2},
        {3, 10, criterion3},
        {4, 300, criterion4},
        {5, 0, criterion5},
        {6, 0, criterion6},
        {7, 0, [full] { return criterion7(full); }},
    };

    bool failed = false;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {Status::Fail, std::string("error: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget_s > 0 && seconds > c.budget_s && outcome.status == Status::Pass) {
            outcome.status = Status::Fail;
            outcome.detail += fmt("; exceeded %.0f s budget", c.budget_s);
        }
        const char* label = outcome.status == Status::Pass ? "PASS" : outcome.status == Status::Fail ? "FAIL" : "SKIP";
        std::printf("criterion %d: %s  %s  [%.2f s]\n", c.id, label, outcome.detail.c_str(), seconds);
        std::fflush(stdout);
        if (outcome.status == Status::Fail && c.id <= 6) failed = true;
    }
    return failed ? 1 : 0;
}
