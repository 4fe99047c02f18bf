#pragma once

#include <optional>
#include <vector>

#include "fts/data.hpp"
#include "fts/downstream.hpp"
#include "fts/expr.hpp"
#include "fts/seqmodel.hpp"

namespace fts {

struct SearchConfig {
    int seed_count = 20;
    double eta = 1.0;
    int max_ascent_steps = 10;
    int beam = 5;
    int max_decode_len = 0;  // 0: 2x the longest record program
};

struct SeedOutcome {
    PostfixProgram seed_program;
    double estimate_before = 0.0;
    double estimate_after = 0.0;
    PostfixProgram decoded;
    double decode_log_prob = 0.0;
    bool valid = false;  // every segment grammar-ok and strict-finite
    int valid_segments = 0;
    int total_segments = 0;
    std::optional<double> measured;  // train_eval over originals + kept segments
};

struct SearchResult {
    std::vector<SeedOutcome> seeds;
    double valid_rate = 0.0;
    double baseline_score = 0.0;
    PostfixProgram best_program;  // only its kept (valid) segments
    double best_score = 0.0;
    bool fallback = false;  // no candidate produced any usable segment
    std::vector<std::vector<double>> best_features;
};

// Top-T by performance; shuffled duplicates of one segment multiset count once.
std::vector<PostfixProgram> select_seeds(const std::vector<TransformationRecord>& records,
                                         int T);

// Iterated E <- E + eta * dw/dE with halving backtracking; w never decreases.
nn::TensorPtr ascend(const SeqModel& model, const nn::TensorPtr& E0, double eta, int steps);

struct BeamResult {
    std::vector<int> codes;  // <SOS> ... <EOS>
    double log_prob = 0.0;
};

BeamResult beam_decode(const SeqModel& model, const nn::TensorPtr& E, int beam_size,
                       int max_len);

// Guarded-mode feature matrix for a candidate: originals plus every segment
// that is grammar-ok and evaluates finite. Program out holds the kept segments.
struct CandidateSpace {
    std::vector<std::vector<double>> features;
    PostfixProgram kept_program;
    int kept_segments = 0;
};
CandidateSpace candidate_space(const PostfixProgram& p,
                               const std::vector<std::vector<double>>& X);

SearchResult run_search(const SeqModel& model,
                        const std::vector<TransformationRecord>& records, const Dataset& d,
                        const EvalConfig& eval_cfg, const SearchConfig& cfg);

}  // namespace fts
