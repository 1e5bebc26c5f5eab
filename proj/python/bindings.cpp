#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "metar/checkpoint.hpp"
#include "metar/commands.hpp"

namespace py = pybind11;

namespace {

metar::RunConfig to_config(const std::map<std::string, std::string>& entries) {
    std::vector<std::pair<std::string, std::string>> list(entries.begin(), entries.end());
    return metar::make_config(list);
}

py::dict stats_dict(const metar::DatasetStats& s) {
    py::dict d;
    d["relations"] = s.relations;
    d["triples"] = s.triples;
    d["background_triples"] = s.background_triples;
    d["training_visible_triples"] = s.training_visible_triples;
    d["training_entities"] = s.training_entities;
    d["one_shot_entities"] = s.one_shot_entities;
    d["one_shot_proportion"] = s.one_shot_proportion;
    return d;
}

}  // namespace

PYBIND11_MODULE(_metar, m) {
    m.doc() = "MetaR few-shot knowledge graph link prediction";
    py::register_exception<metar::Error>(m, "MetarError", PyExc_RuntimeError);

    m.def("config_keys", &metar::config_keys);
    m.def(
        "resolve_config",
        [](const std::map<std::string, std::string>& entries) {
            auto cfg = to_config(entries);
            cfg.validate();
            return metar::config_to_string(cfg);
        },
        py::arg("config"), "Resolved `key = value` configuration text.");

    m.def(
        "synth",
        [](const std::map<std::string, std::string>& entries) {
            std::ostringstream out;
            const auto bundle = metar::cmd_synth(to_config(entries), out);
            return stats_dict(metar::dataset_stats(bundle));
        },
        py::arg("config"));
    m.def(
        "pretrain",
        [](const std::map<std::string, std::string>& entries) {
            std::ostringstream out;
            auto model = metar::cmd_pretrain(to_config(entries), out);
            return py::make_tuple(model.entities, model.relations);
        },
        py::arg("config"), "Returns (entity, relation) TransE tables.");
    m.def(
        "train",
        [](const std::map<std::string, std::string>& entries) {
            std::ostringstream out;
            const auto result = metar::cmd_train(to_config(entries), out);
            py::dict d;
            d["iterations"] = result.last.iteration;
            d["best_iteration"] = result.best.iteration;
            d["best_dev_hits10"] = result.best.best_dev_hits10;
            d["loss_history"] = result.loss_history;
            d["evaluations"] = result.evaluations.size();
            d["early_stopped"] = result.early_stopped;
            return d;
        },
        py::arg("config"));
    m.def(
        "evaluate",
        [](const std::map<std::string, std::string>& entries) {
            std::ostringstream out;
            auto cfg = to_config(entries);
            cfg.report.clear();
            return metar::report_to_json(metar::cmd_eval(cfg, out));
        },
        py::arg("config"), "Evaluation report as JSON text.");
    m.def(
        "ablate",
        [](const std::map<std::string, std::string>& entries) {
            std::ostringstream out;
            auto cfg = to_config(entries);
            cfg.report.clear();
            return metar::ablation_to_json(metar::cmd_ablate(cfg, out));
        },
        py::arg("config"), "Ablation table as JSON text.");
    m.def(
        "stats",
        [](const std::map<std::string, std::string>& entries) {
            std::ostringstream out;
            auto cfg = to_config(entries);
            cfg.report.clear();
            return stats_dict(metar::cmd_stats(cfg, out));
        },
        py::arg("config"));

    m.def(
        "score",
        [](const metar::Vector& head, const metar::Vector& relation, const metar::Vector& tail) {
            return metar::score(head, relation, tail);
        },
        py::arg("head"), py::arg("relation"), py::arg("tail"), "||h + r - t||");
    m.def(
        "rank_query",
        [](const metar::Vector& head, const metar::Vector& relation, metar::EntityId true_tail,
           const std::vector<metar::EntityId>& candidates, const metar::Matrix& embeddings,
           const std::vector<metar::EntityId>& filtered) {
            return metar::rank_query(head, relation, true_tail, candidates, filtered, embeddings);
        },
        py::arg("head"), py::arg("relation"), py::arg("true_tail"), py::arg("candidates"),
        py::arg("embeddings"), py::arg("filtered") = std::vector<metar::EntityId>{});
    m.def(
        "load_checkpoint_embeddings",
        [](const std::string& path) { return metar::load_checkpoint(path).params.embeddings; }, py::arg("path"));
}
