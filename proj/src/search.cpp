#include "fts/search.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace fts {

namespace {

// Order-insensitive segment fingerprint for seed deduplication.
std::vector<std::vector<int>> segment_multiset(const PostfixProgram& p) {
    std::vector<std::vector<int>> segs;
    for (const auto& seg : split_segments(p)) {
        std::vector<int> key;
        for (const Token& t : seg) key.push_back(static_cast<int>(t.kind) * 1000 + t.index);
        segs.push_back(std::move(key));
    }
    std::sort(segs.begin(), segs.end());
    return segs;
}

std::vector<int> token_order_key(const PostfixProgram& p) {
    std::vector<int> key;
    for (const Token& t : p.tokens) key.push_back(static_cast<int>(t.kind) * 1000 + t.index);
    return key;
}

}  // namespace

std::vector<PostfixProgram> select_seeds(const std::vector<TransformationRecord>& records,
                                         int T) {
    if (records.empty()) throw std::invalid_argument("no records to seed from");
    std::vector<size_t> order(records.size());
    for (size_t i = 0; i < records.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        if (records[a].performance != records[b].performance)
            return records[a].performance > records[b].performance;
        if (records[a].program.length() != records[b].program.length())
            return records[a].program.length() < records[b].program.length();
        return token_order_key(records[a].program) < token_order_key(records[b].program);
    });
    std::vector<PostfixProgram> seeds;
    std::set<std::vector<std::vector<int>>> seen;
    for (size_t i : order) {
        if (static_cast<int>(seeds.size()) >= T) break;
        if (seen.insert(segment_multiset(records[i].program)).second)
            seeds.push_back(records[i].program);
    }
    return seeds;
}

nn::TensorPtr ascend(const SeqModel& model, const nn::TensorPtr& E0, double eta, int steps) {
    auto current = nn::make_tensor(E0->rows, E0->cols, E0->v, true);
    double w_current = model.estimate(current);
    double step_size = eta;
    for (int s = 0; s < steps; ++s) {
        current->zero_grad();
        nn::backward(model.estimate_node(current));
        bool advanced = false;
        for (int half = 0; half < 30; ++half) {
            auto trial = nn::make_tensor(E0->rows, E0->cols, current->v, true);
            for (size_t i = 0; i < trial->size(); ++i) trial->v[i] += step_size * current->g[i];
            double w_trial = model.estimate(trial);
            if (w_trial >= w_current) {
                bool converged = w_trial - w_current <
                                 1e-6 * std::max(1.0, std::fabs(w_current));
                current = trial;
                w_current = w_trial;
                advanced = !converged;
                break;
            }
            step_size *= 0.5;
        }
        if (!advanced) break;
    }
    return current;
}

BeamResult beam_decode(const SeqModel& model, const nn::TensorPtr& E, int beam_size,
                       int max_len) {
    if (beam_size < 1) throw std::invalid_argument("beam size must be >= 1");
    const int sos = 0, eos = 1;
    struct Beam {
        std::vector<int> codes;
        double lp = 0.0;
        nn::LstmState state;
    };
    std::vector<Beam> active{{{sos}, 0.0, model.decoder_init()}};
    std::vector<BeamResult> completed;

    for (int t = 0; t < max_len && !active.empty(); ++t) {
        struct Candidate {
            size_t beam;
            int token;
            double lp;
        };
        std::vector<Candidate> candidates;
        std::vector<nn::LstmState> next_states;
        for (size_t i = 0; i < active.size(); ++i) {
            auto step = model.decoder_step(E, active[i].codes.back(), active[i].state);
            next_states.push_back(step.state);
            for (int c = 0; c < step.probs->cols; ++c)
                candidates.push_back({i, c, active[i].lp + std::log(step.probs->v[c])});
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const Candidate& a, const Candidate& b) { return a.lp > b.lp; });
        std::vector<Beam> next;
        for (const Candidate& cand : candidates) {
            if (static_cast<int>(next.size() + completed.size()) >= beam_size) break;
            Beam b{active[cand.beam].codes, cand.lp, next_states[cand.beam]};
            b.codes.push_back(cand.token);
            if (cand.token == eos)
                completed.push_back({std::move(b.codes), b.lp});
            else
                next.push_back(std::move(b));
        }
        active = std::move(next);
    }

    if (!completed.empty())
        return *std::max_element(completed.begin(), completed.end(),
                                 [](const BeamResult& a, const BeamResult& b) {
                                     return a.log_prob < b.log_prob;
                                 });
    // No beam finished within max_len: close the best open beam with <EOS>.
    auto best = std::max_element(active.begin(), active.end(),
                                 [](const Beam& a, const Beam& b) { return a.lp < b.lp; });
    auto step = model.decoder_step(E, best->codes.back(), best->state);
    BeamResult r{best->codes, best->lp + std::log(step.probs->v[eos])};
    r.codes.push_back(eos);
    return r;
}

CandidateSpace candidate_space(const PostfixProgram& p,
                               const std::vector<std::vector<double>>& X) {
    CandidateSpace out;
    out.features = X;
    auto eval = evaluate(p, X, EvalMode::Guarded);
    auto segments = split_segments(p);
    std::vector<std::vector<Token>> kept;
    for (size_t i = 0; i < eval.columns.size(); ++i) {
        out.features.push_back(eval.columns[i]);
        kept.push_back(segments[static_cast<size_t>(eval.column_segment[i])]);
    }
    out.kept_segments = static_cast<int>(kept.size());
    if (!kept.empty()) out.kept_program = join_segments(kept);
    return out;
}

SearchResult run_search(const SeqModel& model,
                        const std::vector<TransformationRecord>& records, const Dataset& d,
                        const EvalConfig& eval_cfg, const SearchConfig& cfg) {
    SearchResult result;
    result.baseline_score = train_eval(d.X, d.y, d.task, eval_cfg).value;

    int max_len = cfg.max_decode_len;
    if (max_len <= 0) {
        size_t longest = 0;
        for (const auto& r : records) longest = std::max(longest, r.program.length());
        max_len = static_cast<int>(2 * longest);
    }

    auto seeds = select_seeds(records, cfg.seed_count);
    int n_valid = 0;
    int best_idx = -1;
    double best_measured = 0.0;
    std::vector<CandidateSpace> spaces(seeds.size());

    for (size_t i = 0; i < seeds.size(); ++i) {
        SeedOutcome outcome;
        outcome.seed_program = seeds[i];
        auto codes = encode_tokens(seeds[i], model.vocab());
        auto E_graph = model.encode(codes);
        auto E = nn::make_tensor(E_graph->rows, E_graph->cols, E_graph->v, true);
        outcome.estimate_before = model.estimate(E);
        auto refined = ascend(model, E, cfg.eta, cfg.max_ascent_steps);
        outcome.estimate_after = model.estimate(refined);

        auto decoded = beam_decode(model, refined, cfg.beam, max_len);
        outcome.decoded = decode_tokens(decoded.codes, model.vocab());
        outcome.decode_log_prob = decoded.log_prob;

        // Valid-rate bookkeeping runs in strict mode; the candidate feature
        // space itself is built in guarded mode.
        auto strict = evaluate(outcome.decoded, d.X, EvalMode::Strict);
        outcome.total_segments = strict.report.total_segment_count();
        outcome.valid_segments = strict.report.valid_segment_count();
        outcome.valid = outcome.total_segments > 0 &&
                        outcome.valid_segments == outcome.total_segments;
        n_valid += outcome.valid;

        spaces[i] = candidate_space(outcome.decoded, d.X);
        if (spaces[i].kept_segments > 0) {
            outcome.measured =
                train_eval(spaces[i].features, d.y, d.task, eval_cfg).value;
            if (best_idx < 0 || *outcome.measured > best_measured) {
                best_idx = static_cast<int>(i);
                best_measured = *outcome.measured;
            }
        }
        result.seeds.push_back(std::move(outcome));
    }

    result.valid_rate =
        seeds.empty() ? 0.0 : static_cast<double>(n_valid) / static_cast<double>(seeds.size());
    // The original space competes as the identity candidate; the returned
    // program never carries an invalid segment.
    if (best_idx < 0) {
        result.fallback = true;
        result.best_score = result.baseline_score;
        result.best_features = d.X;
    } else if (best_measured >= result.baseline_score) {
        result.best_program = spaces[static_cast<size_t>(best_idx)].kept_program;
        result.best_score = best_measured;
        result.best_features = spaces[static_cast<size_t>(best_idx)].features;
    } else {
        result.best_score = result.baseline_score;
        result.best_features = d.X;
    }
    return result;
}

}  // namespace fts
