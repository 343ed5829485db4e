// dwacnn: temporal CNN with DTW-aligned convolutional filters.
//
// Subcommands: train, eval, gradcheck, dtwcheck, synth, bench. All are
// driven by a flat key=value config file; any key can be overridden on the
// command line as --key value (or --key=value).

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dwa/commands.hpp"

namespace {

struct CommonArgs {
    std::string config_path;
    std::string preset;
    std::vector<std::string> defines;
    std::string out_dir;
    std::string seed;
    bool serial = false;
};

void add_common(CLI::App* sub, CommonArgs& args) {
    sub->add_option("-c,--config", args.config_path, "key = value configuration file");
    sub->add_option("-p,--preset", args.preset,
                    "configuration preset (synth, unipen, arabic, adl)");
    sub->add_option("-D,--define", args.defines, "override a config key as key=value");
    sub->add_option("-o,--out", args.out_dir, "output directory (out.dir)");
    sub->add_option("--seed", args.seed, "random seed (seed)");
    sub->add_flag("--serial", args.serial,
                  "single-threaded deterministic mode with zeroed wall-clock column");
    sub->allow_extras();
}

dwa::KvConfig parse_overrides(const std::vector<std::string>& tokens) {
    dwa::KvConfig cfg;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const std::string& tok = tokens[i];
        if (tok.rfind("--", 0) != 0 || tok.size() <= 2) {
            throw dwa::ConfigError("arguments", "unexpected argument '" + tok + "'");
        }
        std::string body = tok.substr(2);
        std::size_t eq = body.find('=');
        if (eq != std::string::npos) {
            cfg.set(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= tokens.size()) {
                throw dwa::ConfigError(body, "flag needs a value");
            }
            cfg.set(body, tokens[++i]);
        }
    }
    return cfg;
}

dwa::RunConfig build_config(const CLI::App* sub, const CommonArgs& args) {
    dwa::KvConfig kv;
    if (!args.preset.empty()) kv.merge(dwa::preset_config(args.preset));
    if (!args.config_path.empty()) kv.merge(dwa::KvConfig::parse_file(args.config_path));
    for (const std::string& def : args.defines) {
        std::size_t eq = def.find('=');
        if (eq == std::string::npos) {
            throw dwa::ConfigError("--define", "expected key=value, got '" + def + "'");
        }
        kv.set(def.substr(0, eq), def.substr(eq + 1));
    }
    kv.merge(parse_overrides(sub->remaining()));
    if (!args.out_dir.empty()) kv.set("out.dir", args.out_dir);
    if (!args.seed.empty()) kv.set("seed", args.seed);
    if (args.serial) kv.set("train.serial", "true");
    return dwa::materialize(kv);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal CNN with DTW-aligned convolutional filters"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string checkpoint_path;

    CLI::App* train = app.add_subcommand("train", "train a model and write metrics + checkpoint");
    CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint on the configured test set");
    eval->add_option("--checkpoint", checkpoint_path, "checkpoint file produced by train")
        ->required();
    CLI::App* gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
    CLI::App* dtwcheck =
        app.add_subcommand("dtwcheck", "exhaustive-enumeration check of the alignment search");
    CLI::App* synth = app.add_subcommand("synth", "write a synthetic warped-pattern dataset");
    CLI::App* bench = app.add_subcommand("bench", "single-sample latency, aligned vs linear conv");
    for (CLI::App* sub : {train, eval, gradcheck, dtwcheck, synth, bench}) {
        add_common(sub, args);
    }

    CLI11_PARSE(app, argc, argv);

    CLI::App* sub = app.get_subcommands().front();
    try {
        dwa::RunConfig cfg = build_config(sub, args);
        if (sub == train) return dwa::cmd_train(cfg, std::cout);
        if (sub == eval) return dwa::cmd_eval(cfg, checkpoint_path, std::cout);
        if (sub == gradcheck) return dwa::cmd_gradcheck(cfg, std::cout);
        if (sub == dtwcheck) return dwa::cmd_dtwcheck(cfg, std::cout);
        if (sub == synth) return dwa::cmd_synth(cfg, std::cout);
        if (sub == bench) return dwa::cmd_bench(cfg, std::cout);
        std::cerr << "error: unknown subcommand\n";
        return dwa::kExitRuntime;
    } catch (const dwa::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return dwa::kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return dwa::kExitRuntime;
    }
}
