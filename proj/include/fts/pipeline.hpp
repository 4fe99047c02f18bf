#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "fts/collector.hpp"
#include "fts/data.hpp"
#include "fts/downstream.hpp"
#include "fts/search.hpp"
#include "fts/seqmodel.hpp"

namespace fts {

// Flat key=value configuration for the orchestration pipeline. Every field has
// a matching config-file key (same name) and CLI flag.
struct PipelineConfig {
    std::string dataset;
    std::string target;                  // target column; empty = last column
    std::string task = "classification"; // classification | regression
    std::string model = "random_forest"; // random_forest | decision_tree | ridge
    std::string metric;                  // empty = task default

    std::string collector = "rl";  // rl | random
    int collect_epochs = 512;
    int collect_steps = 6;

    bool augment = true;
    int augment_k = 12;

    double alpha = 0.05;
    int batch_size = 1024;  // clamped to corpus size
    int train_epochs = 100;
    double lr = 0.001;

    int seed_count = 20;
    double eta = 1.0;
    int ascent_steps = 10;
    int beam = 5;
    int max_decode_len = 0;

    uint64_t seed = 0;
    std::string outdir = "out";
};

PipelineConfig parse_config_file(const std::string& path);
// Applies one key=value pair; throws on unknown key or unparsable value.
void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value);
nlohmann::json config_to_json(const PipelineConfig& cfg);

Task task_from_config(const PipelineConfig& cfg);
EvalConfig eval_config_from(const PipelineConfig& cfg);

// Append-only JSONL record log: {"program": ..., "score": ..., "provenance": ...}
void write_records(const std::string& path, const std::vector<TransformationRecord>& records,
                   const Vocabulary& vocab);
// A truncated (crash-partial) final line is ignored; corruption elsewhere throws.
std::vector<TransformationRecord> read_records(const std::string& path,
                                               const Vocabulary& vocab);

uint64_t fnv1a_file(const std::string& path);
std::string hash_hex(uint64_t h);

// Standard artifact names inside the output directory.
std::string records_path(const PipelineConfig& cfg);
std::string checkpoint_path(const PipelineConfig& cfg);
std::string losses_path(const PipelineConfig& cfg);
std::string report_path(const PipelineConfig& cfg);
std::string program_path(const PipelineConfig& cfg);
std::string features_path(const PipelineConfig& cfg);
std::string manifest_path(const PipelineConfig& cfg);

struct CollectSummary {
    int count = 0;
    double best = 0.0;
    double mean = 0.0;
};

CollectSummary cmd_collect(const PipelineConfig& cfg);
// Returns the (k+1)x corpus size after augmentation and deduplication.
size_t cmd_train(const PipelineConfig& cfg);
SearchResult cmd_search(const PipelineConfig& cfg);
// Scores a program file with the same code path run_search uses.
double cmd_eval(const PipelineConfig& cfg, const std::string& program_file);

}  // namespace fts
