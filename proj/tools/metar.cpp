// metar: few-shot link prediction with MetaR.
//
//   metar <command> [--config FILE] [--key value ...]
//
// Commands: synth, pretrain, train, eval, ablate, stats. Any config key can be
// given on the command line as --key value or --key=value; it overrides the
// config file.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "metar/commands.hpp"

namespace {

std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& args) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const std::string& arg = args[i];
        if (arg.rfind("--", 0) != 0 || arg.size() == 2) throw metar::Error("unexpected argument '" + arg + "'");
        const auto eq = arg.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(arg.substr(2, eq - 2), arg.substr(eq + 1));
        } else {
            if (i + 1 >= args.size()) throw metar::Error("option '" + arg + "' needs a value");
            out.emplace_back(arg.substr(2), args[++i]);
        }
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"MetaR few-shot knowledge graph link prediction"};
    app.require_subcommand(1);
    std::string config_file;
    bool print_config = false;

    struct Command {
        const char* name;
        const char* help;
    };
    const Command commands[] = {
        {"synth", "write a synthetic benchmark to out_dir"},
        {"pretrain", "pretrain TransE entity embeddings (background_mode = pre_train)"},
        {"train", "train MetaR and write the best-dev checkpoint and log"},
        {"eval", "evaluate a checkpoint on a split"},
        {"ablate", "standard vs -g vs -g-r table"},
        {"stats", "dataset statistics"},
    };
    for (const auto& c : commands) {
        auto* sub = app.add_subcommand(c.name, c.help);
        sub->add_option("--config", config_file, "key = value config file");
        sub->add_flag("--print-config", print_config, "print the resolved configuration and exit");
        sub->allow_extras();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        auto* sub = app.get_subcommands().front();
        std::vector<std::pair<std::string, std::string>> entries;
        if (!config_file.empty()) entries = metar::read_config_file(config_file);
        for (auto& kv : parse_overrides(sub->remaining())) entries.push_back(std::move(kv));
        const auto cfg = metar::make_config(entries);
        cfg.validate();
        if (print_config) {
            std::cout << metar::config_to_string(cfg);
            return 0;
        }

        const std::string name = sub->get_name();
        if (name == "synth") metar::cmd_synth(cfg, std::cout);
        else if (name == "pretrain") metar::cmd_pretrain(cfg, std::cout);
        else if (name == "train") metar::cmd_train(cfg, std::cout);
        else if (name == "eval") metar::cmd_eval(cfg, std::cout);
        else if (name == "ablate") metar::cmd_ablate(cfg, std::cout);
        else if (name == "stats") metar::cmd_stats(cfg, std::cout);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (auto& ch : msg)
            if (ch == '\n') ch = ' ';
        std::cerr << "metar: error: " << msg << "\n";
        return 1;
    }
    return 0;
}
