#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "random_task.hpp"

using namespace metar;

namespace {

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Hyperparams small_hp(int dim, std::vector<int> hidden) {
    Hyperparams hp;
    hp.dim = dim;
    hp.hidden_sizes = std::move(hidden);
    return hp;
}

}  // namespace

TEST_CASE("entity_pair_meta: single linear layer by hand") {
    MetaLearner net;
    Matrix w(2, 4);
    w << 1, 0, -1, 0,
         0, 1, 0, -1;
    net.layers.push_back({w, Vector::Zero(2)});
    const Vector r = entity_pair_meta(vec({1, 2}), vec({3, 4}), net, 0.01);
    CHECK(r[0] == -2.0);
    CHECK(r[1] == -2.0);
}

TEST_CASE("entity_pair_meta: zero network gives zero meta") {
    auto hp = small_hp(3, {5, 4});
    Rng rng(1);
    auto p = fixtures::random_params(rng, 4, hp);
    for (auto& layer : p.meta.layers) {
        layer.weight.setZero();
        layer.bias.setZero();
    }
    CHECK(entity_pair_meta(fixtures::random_vector(rng, 3), fixtures::random_vector(rng, 3), p.meta, 0.01).isZero(0.0));
}

TEST_CASE("entity_pair_meta: slope 1 collapses to the composed affine map") {
    auto hp = small_hp(3, {5, 4});
    Rng rng(2);
    auto p = fixtures::random_params(rng, 4, hp);
    Matrix A = Matrix::Identity(6, 6);
    Vector c = Vector::Zero(6);
    for (const auto& layer : p.meta.layers) {
        c = layer.weight * c + layer.bias;
        A = layer.weight * A;
    }
    for (int trial = 0; trial < 20; ++trial) {
        const Vector h = fixtures::random_vector(rng, 3), t = fixtures::random_vector(rng, 3);
        Vector x(6);
        x << h, t;
        const Vector expected = A * x + c;
        CHECK((entity_pair_meta(h, t, p.meta, 1.0) - expected).norm() < 1e-12);
    }
}

TEST_CASE("entity_pair_meta matches the straight-line oracle") {
    auto hp = small_hp(4, {7, 5});
    Rng rng(3);
    auto p = fixtures::random_params(rng, 6, hp);
    for (int trial = 0; trial < 20; ++trial) {
        const int h = static_cast<int>(rng.uniform_index(6)), t = static_cast<int>(rng.uniform_index(6));
        const Vector got = entity_pair_meta(p.embeddings.row(h).transpose(), p.embeddings.row(t).transpose(), p.meta,
                                            hp.leaky_slope);
        const auto want = oracle::pair_meta(oracle::row(p.embeddings, h), oracle::row(p.embeddings, t), p.meta,
                                            hp.leaky_slope);
        for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
}

TEST_CASE("entity_pair_meta rejects mismatched dimensions") {
    MetaLearner net;
    net.layers.push_back({Matrix::Zero(2, 4), Vector::Zero(2)});
    CHECK_THROWS_AS(entity_pair_meta(vec({1, 2, 3}), vec({1, 2, 3}), net, 0.01), Error);
}

TEST_CASE("aggregate_meta") {
    const Vector r = vec({0.3, -1.2});
    CHECK(aggregate_meta(std::vector<Vector>{r}) == r);
    CHECK(aggregate_meta(std::vector<Vector>{vec({1, 0}), vec({0, 1})}) == vec({0.5, 0.5}));
    CHECK((aggregate_meta(std::vector<Vector>(5, r)) - r).norm() < 1e-15);
    CHECK_THROWS_AS(aggregate_meta(std::vector<Vector>{}), Error);
}

TEST_CASE("score") {
    CHECK(score(vec({1, 2}), vec({0, 0}), vec({1, 2})) == 0.0);
    CHECK(score(vec({1, 0}), vec({0, 1}), vec({0, 0})) == doctest::Approx(1.414214).epsilon(1e-6));
    Rng rng(4);
    for (int i = 0; i < 1000; ++i)
        CHECK(score(fixtures::random_vector(rng, 5), fixtures::random_vector(rng, 5), fixtures::random_vector(rng, 5)) >=
              0.0);
}

TEST_CASE("hinge_loss") {
    const std::vector<double> pos{2.0}, neg{1.5};
    auto r = hinge_loss(pos, neg, 1.0);
    CHECK(r.loss == doctest::Approx(1.5));
    CHECK(r.active[0][0]);

    const std::vector<double> p2{0.1, 0.5}, n2{1.2, 2.0};
    auto inactive = hinge_loss(p2, n2, 1.0);
    CHECK(inactive.loss == 0.0);
    CHECK_FALSE(inactive.active[0][0]);

    const std::vector<double> eq{0.7};
    CHECK(hinge_loss(eq, eq, 0.0).loss == 0.0);

    // Several negatives per positive are averaged.
    const std::vector<std::vector<double>> multi{{1.0, 3.0}};
    CHECK(hinge_loss(std::vector<double>{1.5}, multi, 1.0).loss == doctest::Approx((1.5 + 0.0) / 2.0));
}

TEST_CASE("hinge_loss is positively homogeneous") {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> pos(4), neg(4);
        for (int i = 0; i < 4; ++i) pos[i] = rng.uniform_real(0, 3), neg[i] = rng.uniform_real(0, 3);
        const double gamma = rng.uniform_real(0, 2), c = rng.uniform_real(0.1, 5);
        std::vector<double> pos_c(pos), neg_c(neg);
        for (int i = 0; i < 4; ++i) pos_c[i] *= c, neg_c[i] *= c;
        CHECK(hinge_loss(pos_c, neg_c, c * gamma).loss == doctest::Approx(c * hinge_loss(pos, neg, gamma).loss));
    }
}

TEST_CASE("gradient_meta examples") {
    SUBCASE("single active pair by hand") {
        std::vector<HingeTerm> terms{make_hinge_term(0, vec({0, 0}), vec({0, 0}), vec({1, 0}), vec({0, 1}), 1.0, 1.0)};
        REQUIRE(terms[0].active);
        const Vector g = gradient_meta(terms, 2);
        CHECK(g[0] == doctest::Approx(-1.0));
        CHECK(g[1] == doctest::Approx(1.0));
    }
    SUBCASE("inactive hinges give zero") {
        std::vector<HingeTerm> terms{make_hinge_term(0, vec({0, 0}), vec({0, 0}), vec({0.1, 0}), vec({5, 5}), 1.0, 1.0)};
        CHECK_FALSE(terms[0].active);
        CHECK(gradient_meta(terms, 2).isZero(0.0));
    }
    SUBCASE("zero-norm difference contributes the zero subgradient") {
        std::vector<HingeTerm> terms{make_hinge_term(0, vec({1, 1}), vec({0, 0}), vec({1, 1}), vec({1.5, 1}), 1.0, 1.0)};
        REQUIRE(terms[0].active);
        const Vector g = gradient_meta(terms, 2);
        CHECK(g.allFinite());
        CHECK(g[0] == doctest::Approx(1.0));  // -u(neg) with neg diff (-0.5, 0)
    }
}

TEST_CASE("gradient_meta matches finite differences of the support loss") {
    Rng rng(6);
    const auto hp = small_hp(8, {});
    int checked = 0;
    while (checked < 50) {
        auto p = fixtures::random_params(rng, 12, hp);
        auto task = fixtures::random_task(rng, 12, 1 + static_cast<int>(rng.uniform_index(5)), 1, 1);
        const auto values = oracle::task_values(task, p, hp, true);
        // Skip instances near a hinge boundary.
        bool near = false;
        for (std::size_t k = 0; k < task.support_pos.size(); ++k) {
            const auto h = oracle::row(p.embeddings, task.support_pos[k].head);
            const double arg = hp.gamma + oracle::norm(oracle::diff(h, values.relation_meta,
                                                                    oracle::row(p.embeddings, task.support_pos[k].tail))) -
                               oracle::norm(oracle::diff(h, values.relation_meta, oracle::row(p.embeddings, task.support_neg[k])));
            near |= std::abs(arg) < 1e-3;
        }
        if (near) continue;
        const auto trace = adapt_relation_meta(task.support_pos, task.support_neg, p, hp, ForwardMode::Standard);
        const double step = 1e-6;
        for (int i = 0; i < 8; ++i) {
            auto up = values.relation_meta, down = values.relation_meta;
            up[i] += step;
            down[i] -= step;
            const double numeric = (oracle::support_loss_at(task, p, hp.gamma, up) -
                                    oracle::support_loss_at(task, p, hp.gamma, down)) / (2 * step);
            const double analytic = trace.gradient_meta[i];
            const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
            CHECK(std::abs(analytic - numeric) / denom < 1e-6);
        }
        ++checked;
    }
}

TEST_CASE("rapid_update") {
    const Vector r = vec({1, 1});
    CHECK(rapid_update(r, Vector::Zero(2), 1.0) == r);
    CHECK(rapid_update(r, vec({3, -7}), 0.0) == r);
    CHECK(rapid_update(r, vec({0.5, -0.5}), 1.0) == vec({0.5, 1.5}));
}

TEST_CASE("forward_task matches the straight-line oracle") {
    Rng rng(7);
    auto hp = small_hp(5, {9, 6});
    for (int trial = 0; trial < 50; ++trial) {
        auto p = fixtures::random_params(rng, 15, hp);
        auto task = fixtures::random_task(rng, 15, 2, 1 + static_cast<int>(rng.uniform_index(3)),
                                          1 + static_cast<int>(rng.uniform_index(3)));
        for (auto mode : {ForwardMode::Standard, ForwardMode::NoGradientMeta}) {
            const auto got = forward_task(task, p, hp, mode);
            const auto want = oracle::task_values(task, p, hp, mode == ForwardMode::Standard);
            CHECK(got.query_loss == doctest::Approx(want.query_loss).epsilon(1e-10));
            for (int i = 0; i < hp.dim; ++i) {
                CHECK(got.trace.relation_meta[i] == doctest::Approx(want.relation_meta[i]).epsilon(1e-10));
                CHECK(got.trace.adapted_meta[i] == doctest::Approx(want.adapted_meta[i]).epsilon(1e-10));
            }
            if (mode == ForwardMode::Standard)
                CHECK(got.trace.support_loss == doctest::Approx(want.support_loss).epsilon(1e-10));
        }
    }
}

TEST_CASE("no_gradient_meta is standard mode with beta = 0, bit for bit") {
    Rng rng(8);
    auto hp = small_hp(4, {6});
    for (int trial = 0; trial < 50; ++trial) {
        auto p = fixtures::random_params(rng, 10, hp);
        auto task = fixtures::random_task(rng, 10, 3, 2, 2);
        auto zero_beta = hp;
        zero_beta.beta = 0.0;
        const auto a = forward_task(task, p, zero_beta, ForwardMode::Standard);
        const auto b = forward_task(task, p, hp, ForwardMode::NoGradientMeta);
        CHECK(a.query_loss == b.query_loss);
        CHECK(a.trace.adapted_meta == b.trace.adapted_meta);
    }
}

TEST_CASE("support order does not matter") {
    Rng rng(9);
    auto hp = small_hp(4, {6});
    for (int trial = 0; trial < 30; ++trial) {
        auto p = fixtures::random_params(rng, 10, hp);
        auto task = fixtures::random_task(rng, 10, 4, 2, 1);
        auto shuffled = task;
        std::vector<std::size_t> order{2, 0, 3, 1};
        for (std::size_t i = 0; i < 4; ++i) {
            shuffled.support_pos[i] = task.support_pos[order[i]];
            shuffled.support_neg[i] = task.support_neg[order[i]];
        }
        const auto a = forward_task(task, p, hp, ForwardMode::Standard);
        const auto b = forward_task(shuffled, p, hp, ForwardMode::Standard);
        CHECK((a.trace.relation_meta - b.trace.relation_meta).norm() < 1e-12);
        CHECK((a.trace.gradient_meta - b.trace.gradient_meta).norm() < 1e-12);
        CHECK((a.trace.adapted_meta - b.trace.adapted_meta).norm() < 1e-12);
        CHECK(a.query_loss == doctest::Approx(b.query_loss).epsilon(1e-12));
    }
}

TEST_CASE("query loss is zero when every query hinge is inactive") {
    // R' = 0, positives coincide with their heads, negatives sit far away.
    auto hp = small_hp(2, {});
    ModelParams p;
    p.embeddings.resize(4, 2);
    p.embeddings << 0, 0,
                    0, 0,
                    10, 10,
                    -10, 10;
    p.meta.layers.push_back({Matrix::Zero(2, 4), Vector::Zero(2)});
    EpisodeTask task;
    task.support_pos = {{0, 1}};
    task.support_neg = {2};
    task.query_pos = {{1, 0}};
    task.query_neg = {{2, 3}};
    const auto r = forward_task(task, p, hp, ForwardMode::Standard);
    CHECK(r.trace.adapted_meta.isZero(0.0));  // support hinge inactive, so G = 0
    CHECK(r.query_loss == 0.0);
}

TEST_CASE("outputs stay finite when difference vectors vanish") {
    auto hp = small_hp(3, {4});
    Rng rng(10);
    auto p = fixtures::random_params(rng, 3, hp);
    for (auto& layer : p.meta.layers) layer.weight.setZero(), layer.bias.setZero();
    p.embeddings.row(1) = p.embeddings.row(0);
    EpisodeTask task;
    task.support_pos = {{0, 1}};
    task.support_neg = {2};
    task.query_pos = {{0, 1}};
    task.query_neg = {{2}};
    const auto r = forward_task(task, p, hp, ForwardMode::Standard);
    CHECK(std::isfinite(r.query_loss));
    CHECK(r.trace.gradient_meta.allFinite());
}

TEST_CASE("hyperparameter validation") {
    Hyperparams hp;
    CHECK(hp.layer_sizes() == std::vector<int>{200, 500, 200, 100});
    hp.leaky_slope = 0.0;
    CHECK_THROWS_AS(hp.validate(), Error);
    hp = Hyperparams{};
    hp.gamma = -1;
    CHECK_THROWS_AS(hp.validate(), Error);
}
