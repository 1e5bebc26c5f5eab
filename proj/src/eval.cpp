#include "metar/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metar/episode.hpp"
#include "metar/parallel.hpp"
#include "metar/rng.hpp"
#include "metar/transe.hpp"

namespace metar {

const char* to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::Standard: return "standard";
        case EvalMode::MinusG: return "minus_g";
        case EvalMode::MinusGMinusR: return "minus_g_minus_r";
    }
    return "?";
}

EvalMode parse_eval_mode(const std::string& text) {
    if (text == "standard") return EvalMode::Standard;
    if (text == "minus_g") return EvalMode::MinusG;
    if (text == "minus_g_minus_r") return EvalMode::MinusGMinusR;
    throw Error("unknown ablation '" + text + "' (expected standard|minus_g|minus_g_minus_r)");
}

void MetricAccumulator::add_rank(std::size_t rank) {
    if (rank == 0) throw Error("ranks start at 1");
    reciprocal_sum_ += 1.0 / static_cast<double>(rank);
    hits1_ += rank <= 1;
    hits5_ += rank <= 5;
    hits10_ += rank <= 10;
    ++count_;
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
    reciprocal_sum_ += other.reciprocal_sum_;
    hits1_ += other.hits1_;
    hits5_ += other.hits5_;
    hits10_ += other.hits10_;
    count_ += other.count_;
}

RelationMetrics MetricAccumulator::finish() const {
    RelationMetrics m;
    m.n_queries = count_;
    if (count_ == 0) return m;
    const double n = static_cast<double>(count_);
    m.mrr = reciprocal_sum_ / n;
    m.hits1 = static_cast<double>(hits1_) / n;
    m.hits5 = static_cast<double>(hits5_) / n;
    m.hits10 = static_cast<double>(hits10_) / n;
    return m;
}

std::size_t rank_query(const Vector& head, const Vector& adapted_meta, EntityId true_tail,
                       std::span<const EntityId> candidates, std::span<const EntityId> filtered,
                       const Matrix& embeddings) {
    if (std::find(candidates.begin(), candidates.end(), true_tail) == candidates.end())
        throw Error("rank_query: true tail " + std::to_string(true_tail) + " is not among the candidates");
    const Vector target = head + adapted_meta;
    const double true_score = (target - embeddings.row(true_tail).transpose()).norm();
    std::size_t rank = 1;
    for (EntityId c : candidates) {
        if (c == true_tail) continue;
        if (std::find(filtered.begin(), filtered.end(), c) != filtered.end()) continue;
        if ((target - embeddings.row(c).transpose()).norm() < true_score) ++rank;
    }
    return rank;
}

EvalReport evaluate(const ModelParams& params, const DatasetBundle& bundle, Split split, int shots, EvalMode mode,
                    const EvalOptions& options) {
    if (mode == EvalMode::MinusGMinusR && options.transe == nullptr)
        throw Error("minus_g_minus_r evaluation needs pretrained TransE relation embeddings");
    const auto episodes = make_eval_episodes(bundle, split, shots);
    const Matrix& embeddings = mode == EvalMode::MinusGMinusR ? options.transe->entities : params.embeddings;

    std::vector<MetricAccumulator> per_task(episodes.tasks.size());
    parallel_for(episodes.tasks.size(), options.workers, [&](std::size_t index) {
        const auto& task = episodes.tasks[index];
        // Negatives are drawn in every mode so that supports are identical
        // across modes.
        Rng rng = Rng::derive(options.seed, "eval-negatives", static_cast<std::uint64_t>(task.relation));
        std::vector<EntityId> support_neg;
        for (auto p : task.support_pos) support_neg.push_back(corrupt_tail(p.head, task.relation, bundle, rng));

        Vector adapted;
        switch (mode) {
            case EvalMode::Standard:
                adapted = adapt_relation_meta(task.support_pos, support_neg, params, options.hp, ForwardMode::Standard)
                              .adapted_meta;
                break;
            case EvalMode::MinusG:
                adapted = adapt_relation_meta(task.support_pos, {}, params, options.hp, ForwardMode::NoGradientMeta)
                              .adapted_meta;
                break;
            case EvalMode::MinusGMinusR:
                if (task.relation >= options.transe->relations.rows())
                    throw Error("TransE model has no embedding for relation '" +
                                bundle.vocab.relation_name(task.relation) + "'");
                adapted = options.transe->relations.row(task.relation).transpose();
                break;
        }

        std::vector<EntityId> all_entities;
        const auto* cand = bundle.candidates_for(task.relation);
        if (!cand) {
            all_entities.resize(bundle.vocab.entity_count());
            for (std::size_t e = 0; e < all_entities.size(); ++e) all_entities[e] = static_cast<EntityId>(e);
        }
        std::span<const EntityId> candidates = cand ? std::span<const EntityId>(*cand) : all_entities;

        std::vector<EntityId> filtered;
        for (auto q : task.query_pos) {
            filtered.clear();
            for (auto e : bundle.filtered_truths.tails(q.head, task.relation)) filtered.push_back(e);
            for (auto e : bundle.store.tails(q.head, task.relation)) filtered.push_back(e);
            const Vector head = embeddings.row(q.head).transpose();
            per_task[index].add_rank(rank_query(head, adapted, q.tail, candidates, filtered, embeddings));
        }
    });

    EvalReport report;
    MetricAccumulator total;
    for (std::size_t i = 0; i < per_task.size(); ++i) {
        total.merge(per_task[i]);
        report.per_relation[bundle.vocab.relation_name(episodes.tasks[i].relation)] = per_task[i].finish();
    }
    const auto overall = total.finish();
    report.mrr = overall.mrr;
    report.hits1 = overall.hits1;
    report.hits5 = overall.hits5;
    report.hits10 = overall.hits10;
    report.n_queries = overall.n_queries;
    return report;
}

ReportFormat parse_report_format(const std::string& text) {
    if (text == "text") return ReportFormat::Text;
    if (text == "json") return ReportFormat::Json;
    throw Error("unknown report format '" + text + "' (expected text|json)");
}

namespace {

nlohmann::ordered_json metrics_json(double mrr, double hits1, double hits5, double hits10, std::size_t n) {
    nlohmann::ordered_json j;
    j["mrr"] = mrr;
    j["hits1"] = hits1;
    j["hits5"] = hits5;
    j["hits10"] = hits10;
    j["n_queries"] = n;
    return j;
}

RelationMetrics metrics_from_json(const nlohmann::json& j) {
    RelationMetrics m;
    m.mrr = j.at("mrr").get<double>();
    m.hits1 = j.at("hits1").get<double>();
    m.hits5 = j.at("hits5").get<double>();
    m.hits10 = j.at("hits10").get<double>();
    m.n_queries = j.at("n_queries").get<std::size_t>();
    return m;
}

// ".401" style, as in published result tables.
std::string table_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    std::string s(buf);
    if (s.rfind("0.", 0) == 0) s.erase(0, 1);
    return s;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    auto j = metrics_json(report.mrr, report.hits1, report.hits5, report.hits10, report.n_queries);
    auto& per = j["per_relation"] = nlohmann::ordered_json::object();
    for (const auto& [name, m] : report.per_relation)
        per[name] = metrics_json(m.mrr, m.hits1, m.hits5, m.hits10, m.n_queries);
    if (report.n_queries == 0) j["warning"] = "no queries evaluated";
    return j.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("report: malformed JSON (") + e.what() + ")");
    }
    try {
        EvalReport report;
        auto overall = metrics_from_json(j);
        report.mrr = overall.mrr;
        report.hits1 = overall.hits1;
        report.hits5 = overall.hits5;
        report.hits10 = overall.hits10;
        report.n_queries = overall.n_queries;
        for (const auto& [name, m] : j.at("per_relation").items()) report.per_relation[name] = metrics_from_json(m);
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("report: missing or invalid field (") + e.what() + ")");
    }
}

std::string report_to_text(const EvalReport& report, const std::string& label) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-28s %8s %8s %8s %8s %9s\n", "", "MRR", "Hits@10", "Hits@5", "Hits@1",
                  "queries");
    os << line;
    auto row = [&](const std::string& name, const RelationMetrics& m) {
        std::snprintf(line, sizeof line, "%-28s %8s %8s %8s %8s %9zu\n", name.c_str(), table_number(m.mrr).c_str(),
                      table_number(m.hits10).c_str(), table_number(m.hits5).c_str(), table_number(m.hits1).c_str(),
                      m.n_queries);
        os << line;
    };
    row(label, {report.mrr, report.hits1, report.hits5, report.hits10, report.n_queries});
    if (report.n_queries == 0) os << "warning: no queries evaluated\n";
    for (const auto& [name, m] : report.per_relation) row("  " + name, m);
    return os.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format,
                  const std::string& label) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write report " + path.string());
    out << (format == ReportFormat::Json ? report_to_json(report) : report_to_text(report, label));
    if (!out) throw Error("write failed: " + path.string());
}

}  // namespace metar
