#include "metar/commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "metar/checkpoint.hpp"

namespace metar {

namespace {

DatasetBundle load_data(const RunConfig& cfg) {
    if (cfg.data_dir.empty()) throw Error("no dataset: set data_dir or METAR_DATA_DIR");
    return load_benchmark(cfg.data_dir, cfg.background_mode);
}

void ensure_parent(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

void emit(const RunConfig& cfg, std::ostream& out, const std::string& text) {
    if (cfg.report.empty()) {
        out << text;
        return;
    }
    ensure_parent(cfg.report);
    std::ofstream file(cfg.report);
    if (!file) throw Error("cannot write report " + cfg.report.string());
    file << text;
    if (!file) throw Error("write failed: " + cfg.report.string());
}

std::string log_line(const TrainLogEntry& e) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "iteration=%llu loss=%.6f dev_mrr=%.6f dev_hits1=%.6f dev_hits5=%.6f dev_hits10=%.6f best=%s\n",
                  static_cast<unsigned long long>(e.iteration), e.mean_loss, e.dev.mrr, e.dev.hits1, e.dev.hits5,
                  e.dev.hits10, e.improved ? "yes" : "no");
    return buf;
}

TrainResult run_training(const DatasetBundle& bundle, const RunConfig& cfg, Ablation ablation, std::ostream* log) {
    TrainConfig train = cfg.train;
    train.ablation = ablation;
    TrainHooks hooks;
    if (log) hooks.on_evaluation = [log](const TrainLogEntry& e) { *log << log_line(e) << std::flush; };

    if (!cfg.resume.empty()) {
        Checkpoint start = load_checkpoint(cfg.resume);
        if (start.fingerprint != config_fingerprint(cfg.hp, cfg.sampler, train))
            throw Error("checkpoint " + cfg.resume.string() + " was written under a different configuration");
        return train_loop(bundle, cfg.sampler, train, cfg.hp, std::move(start), hooks);
    }
    Checkpoint start;
    if (!cfg.pretrained.empty()) {
        const auto emb = load_embeddings(cfg.pretrained);
        start.params = init_params(cfg.hp, bundle.vocab.entity_count(), cfg.seed, &emb.entities);
    } else {
        start.params = init_params(cfg.hp, bundle.vocab.entity_count(), cfg.seed);
    }
    start.adam = AdamState::zeros_like(start.params);
    return train_loop(bundle, cfg.sampler, train, cfg.hp, std::move(start), hooks);
}

std::string metric(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    return buf;
}

}  // namespace

DatasetBundle cmd_synth(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    auto bundle = generate_synthetic(cfg.synth);
    std::filesystem::create_directories(cfg.out_dir);
    save_benchmark(bundle, cfg.out_dir);
    out << "wrote synthetic benchmark to " << cfg.out_dir.string() << " (" << bundle.vocab.entity_count()
        << " entities, " << bundle.vocab.relation_count() << " relations)\n";
    return bundle;
}

TransEModel cmd_pretrain(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    if (cfg.background_mode != BackgroundMode::PreTrain)
        throw Error(std::string("pretrain needs background_mode = pre_train; background_mode is ") +
                    to_string(cfg.background_mode) + ", which does not train embeddings in advance");
    const auto bundle = load_data(cfg);
    if (bundle.background.empty()) throw Error("pretrain: the benchmark has no background triples");
    auto model = pretrain_transe(bundle, cfg.transe);
    const auto path = cfg.pretrained_path();
    ensure_parent(path);
    save_embeddings(model, path);
    out << "wrote " << model.entities.rows() << "x" << model.entities.cols() << " entity embeddings to "
        << path.string() << "\n";
    return model;
}

TrainResult cmd_train(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    if (cfg.train.ablation == Ablation::MinusGMinusR)
        throw Error("ablation minus_g_minus_r has no MetaR model to train; use eval or ablate");
    const auto bundle = load_data(cfg);
    const auto ckpt_path = cfg.checkpoint_path();
    const auto log_path = cfg.log_path();
    ensure_parent(ckpt_path);
    ensure_parent(log_path);
    std::ofstream log(log_path);
    if (!log) throw Error("cannot write training log " + log_path.string());

    auto result = run_training(bundle, cfg, cfg.train.ablation, &log);
    save_checkpoint(result.best, ckpt_path);
    out << "trained " << result.last.iteration << " iterations";
    if (!result.evaluations.empty()) out << ", best dev Hits@10 " << metric(result.best.best_dev_hits10);
    if (result.early_stopped) out << " (early stop)";
    out << "; checkpoint " << ckpt_path.string() << "\n";
    return result;
}

TransEModel fit_transe_baseline(const DatasetBundle& bundle, const RunConfig& cfg) {
    TransEConfig transe = cfg.transe;
    transe.eval_support_shots = cfg.sampler.shots;
    return pretrain_transe(bundle, transe);
}

EvalReport cmd_eval(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto mode = eval_mode_for(cfg.train.ablation);
    EvalReport report;
    if (mode == EvalMode::MinusGMinusR) {
        const auto bundle = load_data(cfg);
        const auto transe = fit_transe_baseline(bundle, cfg);
        auto options = cfg.eval_options();
        options.transe = &transe;
        report = evaluate(ModelParams{}, bundle, cfg.split, cfg.sampler.shots, mode, options);
    } else {
        const auto ckpt = load_checkpoint(cfg.checkpoint_path());
        if (ckpt.params.dim() != cfg.hp.dim || ckpt.params.meta.layers.size() != cfg.hp.hidden_sizes.size() + 1)
            throw Error("checkpoint shape does not match the configured dim/hidden_sizes");
        const auto bundle = load_data(cfg);
        if (static_cast<std::size_t>(ckpt.params.embeddings.rows()) != bundle.vocab.entity_count())
            throw Error("checkpoint entity count does not match the benchmark");
        report = evaluate(ckpt.params, bundle, cfg.split, cfg.sampler.shots, mode, cfg.eval_options());
    }
    emit(cfg, out,
         cfg.report_format == ReportFormat::Json ? report_to_json(report)
                                                 : report_to_text(report, std::string("MetaR ") + to_string(mode)));
    return report;
}

std::string ablation_to_text(const AblationTable& table) {
    std::string s = "model        MRR  Hits@10  Hits@5  Hits@1\n";
    auto row = [&](const char* label, const EvalReport& r) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-9s %6s %8s %7s %7s\n", label, metric(r.mrr).c_str(), metric(r.hits10).c_str(),
                      metric(r.hits5).c_str(), metric(r.hits1).c_str());
        s += buf;
    };
    row("standard", table.standard);
    row("-g", table.minus_g);
    row("-g-r", table.minus_g_minus_r);
    return s;
}

std::string ablation_to_json(const AblationTable& table) {
    nlohmann::ordered_json j;
    j["standard"] = nlohmann::ordered_json::parse(report_to_json(table.standard));
    j["minus_g"] = nlohmann::ordered_json::parse(report_to_json(table.minus_g));
    j["minus_g_minus_r"] = nlohmann::ordered_json::parse(report_to_json(table.minus_g_minus_r));
    return j.dump(2) + "\n";
}

AblationTable cmd_ablate(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto bundle = load_data(cfg);
    AblationTable table;
    const auto options = cfg.eval_options();

    auto standard = run_training(bundle, cfg, Ablation::Standard, nullptr);
    table.standard = evaluate(standard.best.params, bundle, cfg.split, cfg.sampler.shots, EvalMode::Standard, options);
    auto minus_g = run_training(bundle, cfg, Ablation::MinusG, nullptr);
    table.minus_g = evaluate(minus_g.best.params, bundle, cfg.split, cfg.sampler.shots, EvalMode::MinusG, options);
    const auto transe = fit_transe_baseline(bundle, cfg);
    auto transe_options = options;
    transe_options.transe = &transe;
    table.minus_g_minus_r =
        evaluate(ModelParams{}, bundle, cfg.split, cfg.sampler.shots, EvalMode::MinusGMinusR, transe_options);

    emit(cfg, out, cfg.report_format == ReportFormat::Json ? ablation_to_json(table) : ablation_to_text(table));
    return table;
}

DatasetStats cmd_stats(const RunConfig& cfg, std::ostream& out) {
    cfg.validate();
    const auto bundle = load_data(cfg);
    const auto stats = dataset_stats(bundle);
    std::string text;
    if (cfg.report_format == ReportFormat::Json) {
        nlohmann::ordered_json j;
        for (Split s : {Split::Train, Split::Dev, Split::Test}) {
            const auto i = static_cast<std::size_t>(s);
            j[to_string(s)] = {{"relations", stats.relations[i]}, {"triples", stats.triples[i]}};
        }
        j["entities"] = bundle.vocab.entity_count();
        j["background_mode"] = to_string(bundle.mode);
        j["background_triples"] = stats.background_triples;
        j["training_visible_triples"] = stats.training_visible_triples;
        j["training_entities"] = stats.training_entities;
        j["one_shot_entities"] = stats.one_shot_entities;
        j["one_shot_proportion"] = stats.one_shot_proportion;
        j["candidates_repaired"] = bundle.candidates_repaired;
        text = j.dump(2) + "\n";
    } else {
        char buf[256];
        for (Split s : {Split::Train, Split::Dev, Split::Test}) {
            const auto i = static_cast<std::size_t>(s);
            std::snprintf(buf, sizeof buf, "%-5s relations %6zu  triples %8zu\n", to_string(s), stats.relations[i],
                          stats.triples[i]);
            text += buf;
        }
        std::snprintf(buf, sizeof buf,
                      "entities %zu\nbackground (%s) %zu\ntraining-visible triples %zu\ntraining entities %zu\n"
                      "one-shot entities %zu (%.3f)\n",
                      bundle.vocab.entity_count(), to_string(bundle.mode), stats.background_triples,
                      stats.training_visible_triples, stats.training_entities, stats.one_shot_entities,
                      stats.one_shot_proportion);
        text += buf;
        if (bundle.candidates_repaired > 0)
            text += "candidate lists repaired: " + std::to_string(bundle.candidates_repaired) + " true tails added\n";
    }
    emit(cfg, out, text);
    return stats;
}

}  // namespace metar
