#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "metar/episode.hpp"
#include "metar/eval.hpp"
#include "metar/kg_data.hpp"
#include "metar/model.hpp"
#include "metar/train.hpp"
#include "metar/transe.hpp"

namespace metar {

// Flat run configuration. `seed` feeds every derived stream (sampler, init,
// negatives, eval negatives, TransE, synthesis).
struct RunConfig {
    std::string preset = "nell_one";
    std::uint64_t seed = 0;
    int workers = 1;
    std::filesystem::path data_dir;
    std::filesystem::path out_dir = "metar_out";
    BackgroundMode background_mode = BackgroundMode::InTrain;
    std::filesystem::path checkpoint;   // default: <out_dir>/model.ckpt
    std::filesystem::path pretrained;   // embedding file to read (train/eval) or write (pretrain)
    std::filesystem::path resume;       // checkpoint to continue training from
    std::filesystem::path report;       // empty: stdout
    ReportFormat report_format = ReportFormat::Text;
    std::filesystem::path log;          // default: <out_dir>/train.log
    Split split = Split::Test;

    SamplerConfig sampler;
    Hyperparams hp;
    TrainConfig train;
    TransEConfig transe;
    SynthConfig synth;

    void validate() const;
    std::filesystem::path checkpoint_path() const;
    std::filesystem::path log_path() const;
    std::filesystem::path pretrained_path() const;
    EvalOptions eval_options() const;
};

// Applies a named preset: nell_one (batch 64, d=100, hidden 500,200) or
// wiki_one (batch 128, d=50, hidden 250,100).
void apply_preset(RunConfig& cfg, const std::string& name);

// Reads `key = value` lines; '#' starts a comment. Duplicate keys: last wins.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

// Builds a config from defaults, the preset named by any `preset` entry, then
// every entry in order. Unknown keys and malformed values throw. The data
// directory defaults to $METAR_DATA_DIR.
RunConfig make_config(const std::vector<std::pair<std::string, std::string>>& entries);

// Sets one key. Throws on unknown keys or unparsable values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

// key = value dump, one line per key, in config_keys() order.
std::string config_to_string(const RunConfig& cfg);

}  // namespace metar
