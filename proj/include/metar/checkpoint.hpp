#pragma once

#include <filesystem>

#include "metar/train.hpp"
#include "metar/transe.hpp"

namespace metar {

// Binary layout (little-endian):
//   "METARCKPT"  u32 version  u32 kind  u32 n_tensors  {u32 rows, u32 cols} x n
//   u64 iteration  u64 adam_step  f64 best_dev_hits10  u64 fingerprint  u8 has_optimizer
//   f64 data per tensor, row-major
//   [has_optimizer] first moments, then second moments, same tensor order
// A sidecar "<path>.manifest" lists tensor names and shapes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { Model = 0, Embeddings = 1 };

// Model tensors: entity_embeddings, then meta.W<l>, meta.b<l> per layer.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Pretrained TransE tables: entity_embeddings, relation_embeddings.
void save_embeddings(const TransEModel& model, const std::filesystem::path& path);
TransEModel load_embeddings(const std::filesystem::path& path);

std::filesystem::path manifest_path(const std::filesystem::path& path);

}  // namespace metar
