#include "metar/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace metar {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
    T out{};
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc{} || ptr != end || value.empty())
        throw Error("config key '" + key + "': cannot parse '" + value + "' as a number");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "no") return false;
    throw Error("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
    std::vector<int> out;
    if (value.empty() || value == "none") return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_number<int>(key, trim(item)));
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

template <typename E, typename Parse>
E parse_enum(const std::string& key, const std::string& value, Parse parse) {
    try {
        return parse(value);
    } catch (const Error& e) {
        throw Error("config key '" + key + "': " + e.what());
    }
}

struct KeySpec {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INT_KEY(NAME, FIELD)                                                                            \
    KeySpec {                                                                                           \
        NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<int>(NAME, v); },       \
            [](const RunConfig& c) { return std::to_string(c.FIELD); }                                  \
    }
#define REAL_KEY(NAME, FIELD)                                                                           \
    KeySpec {                                                                                           \
        NAME, [](RunConfig& c, const std::string& v) { c.FIELD = parse_number<double>(NAME, v); },    \
            [](const RunConfig& c) { return format_double(c.FIELD); }                                   \
    }
#define PATH_KEY(NAME, FIELD)                                                                           \
    KeySpec {                                                                                           \
        NAME, [](RunConfig& c, const std::string& v) { c.FIELD = v; },                                \
            [](const RunConfig& c) { return c.FIELD.string(); }                                         \
    }

const std::vector<KeySpec>& key_table() {
    static const std::vector<KeySpec> table = {
        {"preset", [](RunConfig& c, const std::string& v) { apply_preset(c, v); },
         [](const RunConfig& c) { return c.preset; }},
        {"seed",
         [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        INT_KEY("workers", workers),
        PATH_KEY("data_dir", data_dir),
        PATH_KEY("out_dir", out_dir),
        {"background_mode",
         [](RunConfig& c, const std::string& v) {
             c.background_mode = parse_enum<BackgroundMode>("background_mode", v, parse_background_mode);
         },
         [](const RunConfig& c) { return std::string(to_string(c.background_mode)); }},
        PATH_KEY("checkpoint", checkpoint),
        PATH_KEY("pretrained", pretrained),
        PATH_KEY("resume", resume),
        PATH_KEY("report", report),
        {"report_format",
         [](RunConfig& c, const std::string& v) {
             c.report_format = parse_enum<ReportFormat>("report_format", v, parse_report_format);
         },
         [](const RunConfig& c) { return std::string(c.report_format == ReportFormat::Json ? "json" : "text"); }},
        PATH_KEY("log", log),
        {"split", [](RunConfig& c, const std::string& v) { c.split = parse_enum<Split>("split", v, parse_split); },
         [](const RunConfig& c) { return std::string(to_string(c.split)); }},
        INT_KEY("shots", sampler.shots),
        INT_KEY("n_query_pos", sampler.n_query_pos),
        INT_KEY("n_neg_per_pos", sampler.n_neg_per_pos),
        INT_KEY("dim", hp.dim),
        REAL_KEY("gamma", hp.gamma),
        REAL_KEY("beta", hp.beta),
        REAL_KEY("leaky_slope", hp.leaky_slope),
        {"hidden_sizes",
         [](RunConfig& c, const std::string& v) { c.hp.hidden_sizes = parse_int_list("hidden_sizes", v); },
         [](const RunConfig& c) {
             std::string s;
             for (std::size_t i = 0; i < c.hp.hidden_sizes.size(); ++i)
                 s += (i ? "," : "") + std::to_string(c.hp.hidden_sizes[i]);
             return s.empty() ? std::string("none") : s;
         }},
        {"normalize_embeddings",
         [](RunConfig& c, const std::string& v) { c.hp.normalize_embeddings = parse_bool("normalize_embeddings", v); },
         [](const RunConfig& c) { return std::string(c.hp.normalize_embeddings ? "true" : "false"); }},
        INT_KEY("batch_tasks", train.batch_tasks),
        REAL_KEY("lr", train.adam.lr),
        REAL_KEY("adam_b1", train.adam.b1),
        REAL_KEY("adam_b2", train.adam.b2),
        REAL_KEY("adam_eps", train.adam.eps),
        INT_KEY("eval_every", train.eval_every),
        INT_KEY("patience", train.patience),
        {"max_iters",
         [](RunConfig& c, const std::string& v) { c.train.max_iters = parse_number<std::uint64_t>("max_iters", v); },
         [](const RunConfig& c) { return std::to_string(c.train.max_iters); }},
        {"grad_mode",
         [](RunConfig& c, const std::string& v) { c.train.grad_mode = parse_enum<GradMode>("grad_mode", v, parse_grad_mode); },
         [](const RunConfig& c) { return std::string(to_string(c.train.grad_mode)); }},
        {"ablation",
         [](RunConfig& c, const std::string& v) { c.train.ablation = parse_enum<Ablation>("ablation", v, parse_ablation); },
         [](const RunConfig& c) { return std::string(to_string(c.train.ablation)); }},
        INT_KEY("transe_epochs", transe.epochs),
        REAL_KEY("transe_lr", transe.lr),
        REAL_KEY("transe_margin", transe.margin),
        INT_KEY("synth_entities", synth.n_entities),
        INT_KEY("synth_dim", synth.dim),
        INT_KEY("synth_train_relations", synth.n_train_rel),
        INT_KEY("synth_dev_relations", synth.n_dev_rel),
        INT_KEY("synth_test_relations", synth.n_test_rel),
        INT_KEY("synth_triples_per_relation", synth.triples_per_rel),
        REAL_KEY("synth_noise_sigma", synth.noise_sigma),
        INT_KEY("synth_candidate_pool", synth.candidate_pool),
        REAL_KEY("synth_relation_scale", synth.relation_scale),
    };
    return table;
}

#undef INT_KEY
#undef REAL_KEY
#undef PATH_KEY

const KeySpec& find_key(const std::string& key) {
    for (const auto& spec : key_table())
        if (key == spec.name) return spec;
    throw Error("unknown config key '" + key + "'");
}

// The single seed drives every stream; dimensions shared across modules stay in step.
void sync_derived(RunConfig& cfg) {
    cfg.sampler.seed = cfg.seed;
    cfg.train.seed = cfg.seed;
    cfg.transe.seed = cfg.seed;
    cfg.synth.seed = cfg.seed;
    cfg.transe.dim = cfg.hp.dim;
    cfg.train.workers = cfg.workers;
}

}  // namespace

void apply_preset(RunConfig& cfg, const std::string& name) {
    if (name == "nell_one") {
        cfg.train.batch_tasks = 64;
        cfg.hp.dim = 100;
        cfg.hp.hidden_sizes = {500, 200};
    } else if (name == "wiki_one") {
        cfg.train.batch_tasks = 128;
        cfg.hp.dim = 50;
        cfg.hp.hidden_sizes = {250, 100};
    } else {
        throw Error("unknown preset '" + name + "' (expected nell_one or wiki_one)");
    }
    cfg.preset = name;
}

void RunConfig::validate() const {
    if (workers <= 0) throw Error("workers must be positive");
    sampler.validate();
    hp.validate();
    train.validate();
    synth.validate();
    if (transe.epochs < 0 || !(transe.lr > 0.0) || transe.margin < 0.0)
        throw Error("transe_epochs >= 0, transe_lr > 0 and transe_margin >= 0 required");
    if (transe.dim != hp.dim) throw Error("transe dimension must match dim");
}

std::filesystem::path RunConfig::checkpoint_path() const {
    return checkpoint.empty() ? out_dir / "model.ckpt" : checkpoint;
}

std::filesystem::path RunConfig::log_path() const { return log.empty() ? out_dir / "train.log" : log; }

std::filesystem::path RunConfig::pretrained_path() const {
    return pretrained.empty() ? out_dir / "pretrained.emb" : pretrained;
}

EvalOptions RunConfig::eval_options() const { return EvalOptions{hp, seed, workers, nullptr}; }

std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file " + path.string());
    std::vector<std::pair<std::string, std::string>> entries;
    std::string line;
    for (int line_no = 1; std::getline(in, line); ++line_no) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw Error(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
        auto key = trim(line.substr(0, eq));
        if (key.empty()) throw Error(path.string() + ":" + std::to_string(line_no) + ": empty key");
        entries.emplace_back(std::move(key), trim(line.substr(eq + 1)));
    }
    return entries;
}

RunConfig make_config(const std::vector<std::pair<std::string, std::string>>& entries) {
    RunConfig cfg;
    if (const char* env = std::getenv("METAR_DATA_DIR"); env && *env) cfg.data_dir = env;
    // The preset sets defaults, so it is applied before any explicit key.
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
        if (it->first == "preset") {
            apply_preset(cfg, it->second);
            break;
        }
    }
    for (const auto& [key, value] : entries)
        if (key != "preset") set_config_value(cfg, key, value);
    sync_derived(cfg);
    return cfg;
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    find_key(key).set(cfg, value);
    sync_derived(cfg);
}

std::vector<std::string> config_keys() {
    std::vector<std::string> keys;
    for (const auto& spec : key_table()) keys.emplace_back(spec.name);
    return keys;
}

std::string config_to_string(const RunConfig& cfg) {
    std::string out;
    for (const auto& spec : key_table()) out += std::string(spec.name) + " = " + spec.get(cfg) + "\n";
    return out;
}

}  // namespace metar
