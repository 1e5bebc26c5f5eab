#pragma once

#include <cstdint>

#include "metar/kg_data.hpp"
#include "metar/types.hpp"

namespace metar {

struct TransEConfig {
    int dim = 100;
    int epochs = 100;
    double lr = 0.01;
    double margin = 1.0;
    std::uint64_t seed = 0;
    // When > 0, the first `eval_support_shots` pairs of every dev/test
    // relation are added to the training triples so those relations get an
    // embedding (the plain-TransE baseline of the ablation).
    int eval_support_shots = 0;
};

struct TransEModel {
    Matrix entities;   // |E| x d
    Matrix relations;  // |R| x d
};

// Plain TransE with score ||h + r - t||, margin hinge against uniformly
// corrupted tails, per-triple SGD, and entity rows L2-normalized at the start
// of every epoch. Trains on the bundle's training-visible triples.
TransEModel pretrain_transe(const DatasetBundle& bundle, const TransEConfig& cfg);

}  // namespace metar
