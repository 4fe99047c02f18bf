// Command-line front end: collect / train / search / eval subcommands over a
// shared key=value config file, with flags overriding file values.
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fts/pipeline.hpp"

namespace {

struct Overrides {
    std::vector<std::pair<std::string, std::string>> kv;
};

void add_common_options(CLI::App* cmd, std::string& config_file, Overrides& ov) {
    cmd->add_option("-c,--config", config_file, "key=value config file");
    auto track = [&ov](const std::string& key) {
        return [&ov, key](const std::string& v) { ov.kv.emplace_back(key, v); };
    };
    cmd->add_option_function<std::string>("--dataset", track("dataset"), "dataset CSV path");
    cmd->add_option_function<std::string>("--target", track("target"),
                                          "target column name (default: last)");
    cmd->add_option_function<std::string>("--task", track("task"),
                                          "classification | regression");
    cmd->add_option_function<std::string>("--model", track("model"),
                                          "random_forest | decision_tree | ridge");
    cmd->add_option_function<std::string>("--metric", track("metric"), "evaluation metric");
    cmd->add_option_function<std::string>("--collector", track("collector"), "rl | random");
    cmd->add_option_function<std::string>("--collect-epochs", track("collect_epochs"),
                                          "collection episodes");
    cmd->add_option_function<std::string>("--collect-steps", track("collect_steps"),
                                          "steps per episode");
    cmd->add_flag_function("--no-augment",
                           [&ov](int64_t) { ov.kv.emplace_back("augment", "false"); },
                           "train without shuffle augmentation");
    cmd->add_option_function<std::string>("--augment-k", track("augment_k"),
                                          "shuffles per record");
    cmd->add_option_function<std::string>("--alpha", track("alpha"),
                                          "reconstruction loss weight");
    cmd->add_option_function<std::string>("--batch-size", track("batch_size"),
                                          "training batch size");
    cmd->add_option_function<std::string>("--train-epochs", track("train_epochs"),
                                          "training epochs");
    cmd->add_option_function<std::string>("--lr", track("lr"), "learning rate");
    cmd->add_option_function<std::string>("--seed-count", track("seed_count"),
                                          "search seeds (top T records)");
    cmd->add_option_function<std::string>("--eta", track("eta"), "ascent step size");
    cmd->add_option_function<std::string>("--ascent-steps", track("ascent_steps"),
                                          "max gradient-ascent steps");
    cmd->add_option_function<std::string>("--beam", track("beam"), "beam width");
    cmd->add_option_function<std::string>("--max-decode-len", track("max_decode_len"),
                                          "decode length cap (0 = auto)");
    cmd->add_option_function<std::string>("--seed", track("seed"), "master RNG seed");
    cmd->add_option_function<std::string>("--outdir", track("outdir"), "output directory");
}

fts::PipelineConfig resolve_config(const std::string& config_file, const Overrides& ov) {
    fts::PipelineConfig cfg;
    if (!config_file.empty()) cfg = fts::parse_config_file(config_file);
    if (const char* env = std::getenv("FEATSEARCH_OUTDIR")) cfg.outdir = env;
    for (const auto& [key, value] : ov.kv) fts::apply_config_entry(cfg, key, value);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feature transformation search"};
    app.require_subcommand(1);

    std::string config_file;
    Overrides ov;
    std::string program_file;

    auto* collect = app.add_subcommand("collect", "collect transformation records");
    auto* train = app.add_subcommand("train", "train the sequence model on a record log");
    auto* search = app.add_subcommand("search", "latent-space search with a checkpoint");
    auto* eval = app.add_subcommand("eval", "score a program file on the dataset");
    for (CLI::App* cmd : {collect, train, search, eval})
        add_common_options(cmd, config_file, ov);
    eval->add_option("program", program_file, "program text file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        fts::PipelineConfig cfg = resolve_config(config_file, ov);
        if (collect->parsed()) fts::cmd_collect(cfg);
        if (train->parsed()) fts::cmd_train(cfg);
        if (search->parsed()) fts::cmd_search(cfg);
        if (eval->parsed()) fts::cmd_eval(cfg, program_file);
        return 0;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
}
