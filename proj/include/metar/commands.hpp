#pragma once

#include <iosfwd>

#include "metar/config.hpp"

namespace metar {

// Each command validates the whole config before touching the filesystem and
// throws metar::Error on failure. Human-readable output goes to `out`.

// Writes a synthetic benchmark to out_dir.
DatasetBundle cmd_synth(const RunConfig& cfg, std::ostream& out);

// Trains TransE on a pre_train bundle and writes the embedding file.
TransEModel cmd_pretrain(const RunConfig& cfg, std::ostream& out);

// Trains, writes the best-dev checkpoint and one log line per dev evaluation.
TrainResult cmd_train(const RunConfig& cfg, std::ostream& out);

// Evaluates the checkpoint on cfg.split in the mode named by `ablation`.
// minus_g_minus_r needs no checkpoint: it fits TransE on the fly.
EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out);

struct AblationTable {
    EvalReport standard;
    EvalReport minus_g;
    EvalReport minus_g_minus_r;
};

std::string ablation_to_text(const AblationTable& table);
std::string ablation_to_json(const AblationTable& table);

// Trains the standard and minus_g models, fits the TransE baseline and
// reports all three on cfg.split.
AblationTable cmd_ablate(const RunConfig& cfg, std::ostream& out);

DatasetStats cmd_stats(const RunConfig& cfg, std::ostream& out);

// TransE baseline for the ablation: trained on the training-visible triples
// plus the first `shots` pairs of every dev/test relation.
TransEModel fit_transe_baseline(const DatasetBundle& bundle, const RunConfig& cfg);

}  // namespace metar
