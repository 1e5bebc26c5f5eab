#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "metar/kg_data.hpp"
#include "metar/model.hpp"

namespace metar {

struct TransEModel;

enum class EvalMode { Standard, MinusG, MinusGMinusR };

const char* to_string(EvalMode mode);
EvalMode parse_eval_mode(const std::string& text);

struct RelationMetrics {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits5 = 0.0;
    double hits10 = 0.0;
    std::size_t n_queries = 0;

    bool operator==(const RelationMetrics&) const = default;
};

struct EvalReport {
    double mrr = 0.0;
    double hits1 = 0.0;
    double hits5 = 0.0;
    double hits10 = 0.0;
    std::size_t n_queries = 0;
    std::map<std::string, RelationMetrics> per_relation;

    bool operator==(const EvalReport&) const = default;
};

// Running sums of reciprocal ranks and hit counts; merging is associative.
class MetricAccumulator {
public:
    void add_rank(std::size_t rank);
    void merge(const MetricAccumulator& other);
    RelationMetrics finish() const;
    std::size_t count() const { return count_; }

private:
    double reciprocal_sum_ = 0.0;
    std::size_t hits1_ = 0, hits5_ = 0, hits10_ = 0, count_ = 0;
};

// 1 + number of candidates scoring strictly lower than the true tail, after
// removing the other known tails listed in `filtered`. Throws when the true
// tail is not a candidate.
std::size_t rank_query(const Vector& head, const Vector& adapted_meta, EntityId true_tail,
                       std::span<const EntityId> candidates, std::span<const EntityId> filtered,
                       const Matrix& embeddings);

struct EvalOptions {
    Hyperparams hp;
    // Seeds the stream that draws support negatives for the gradient meta.
    std::uint64_t seed = 0;
    int workers = 1;
    // Required for MinusGMinusR: relation embeddings replace relation meta.
    const TransEModel* transe = nullptr;
};

EvalReport evaluate(const ModelParams& params, const DatasetBundle& bundle, Split split, int shots, EvalMode mode,
                    const EvalOptions& options);

enum class ReportFormat { Text, Json };

ReportFormat parse_report_format(const std::string& text);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
// Table-style row: label, MRR, Hits@10, Hits@5, Hits@1, then per relation.
std::string report_to_text(const EvalReport& report, const std::string& label);

void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format,
                  const std::string& label = "MetaR");

}  // namespace metar
