#include "fts/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fts {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("not a boolean: " + v);
}

Dataset load_dataset(const PipelineConfig& cfg) {
    if (cfg.dataset.empty()) throw std::invalid_argument("no dataset configured");
    return load_csv(cfg.dataset, task_from_config(cfg), cfg.target);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Manifest updates are read-modify-write so each stage only touches its slice.
void update_manifest(const PipelineConfig& cfg,
                     const std::function<void(nlohmann::json&)>& edit) {
    nlohmann::json m;
    {
        std::ifstream in(manifest_path(cfg));
        if (in) {
            try {
                in >> m;
            } catch (const nlohmann::json::exception&) {
                m = nlohmann::json::object();
            }
        }
    }
    if (!m.is_object()) m = nlohmann::json::object();
    m["config"] = config_to_json(cfg);
    edit(m);
    std::ofstream out(manifest_path(cfg));
    if (!out) throw std::runtime_error("cannot write manifest: " + manifest_path(cfg));
    out << m.dump(2) << "\n";
}

void write_feature_csv(const std::string& path,
                       const std::vector<std::vector<double>>& X,
                       const std::vector<std::string>& orig_names,
                       const std::vector<double>& y) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write features: " + path);
    for (size_t j = 0; j < X.size(); ++j) {
        if (j < orig_names.size())
            out << orig_names[j];
        else
            out << "gen" << (j - orig_names.size());
        out << ",";
    }
    out << "target\n";
    char buf[64];
    for (size_t i = 0; i < y.size(); ++i) {
        for (const auto& col : X) {
            std::snprintf(buf, sizeof buf, "%.17g", col[i]);
            out << buf << ",";
        }
        std::snprintf(buf, sizeof buf, "%.17g", y[i]);
        out << buf << "\n";
    }
}

}  // namespace

void apply_config_entry(PipelineConfig& cfg, const std::string& key,
                        const std::string& value) {
    try {
        if (key == "dataset") cfg.dataset = value;
        else if (key == "target") cfg.target = value;
        else if (key == "task") cfg.task = value;
        else if (key == "model") cfg.model = value;
        else if (key == "metric") cfg.metric = value;
        else if (key == "collector") cfg.collector = value;
        else if (key == "collect_epochs") cfg.collect_epochs = std::stoi(value);
        else if (key == "collect_steps") cfg.collect_steps = std::stoi(value);
        else if (key == "augment") cfg.augment = parse_bool(value);
        else if (key == "augment_k") cfg.augment_k = std::stoi(value);
        else if (key == "alpha") cfg.alpha = std::stod(value);
        else if (key == "batch_size") cfg.batch_size = std::stoi(value);
        else if (key == "train_epochs") cfg.train_epochs = std::stoi(value);
        else if (key == "lr") cfg.lr = std::stod(value);
        else if (key == "seed_count") cfg.seed_count = std::stoi(value);
        else if (key == "eta") cfg.eta = std::stod(value);
        else if (key == "ascent_steps") cfg.ascent_steps = std::stoi(value);
        else if (key == "beam") cfg.beam = std::stoi(value);
        else if (key == "max_decode_len") cfg.max_decode_len = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "outdir") cfg.outdir = value;
        else throw std::invalid_argument("unknown config key: " + key);
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad value for config key " + key + ": " + value);
    }
}

PipelineConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    PipelineConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[' && s.back() == ']') continue;  // section headers are cosmetic
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path + ":" + std::to_string(line_no) +
                                        ": expected key=value");
        std::string value = trim(s.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        apply_config_entry(cfg, trim(s.substr(0, eq)), value);
    }
    return cfg;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
    return {{"dataset", c.dataset},       {"target", c.target},
            {"task", c.task},             {"model", c.model},
            {"metric", c.metric},         {"collector", c.collector},
            {"collect_epochs", c.collect_epochs}, {"collect_steps", c.collect_steps},
            {"augment", c.augment},       {"augment_k", c.augment_k},
            {"alpha", c.alpha},           {"batch_size", c.batch_size},
            {"train_epochs", c.train_epochs}, {"lr", c.lr},
            {"seed_count", c.seed_count}, {"eta", c.eta},
            {"ascent_steps", c.ascent_steps}, {"beam", c.beam},
            {"max_decode_len", c.max_decode_len}, {"seed", c.seed},
            {"outdir", c.outdir}};
}

Task task_from_config(const PipelineConfig& cfg) {
    if (cfg.task == "classification") return Task::Classification;
    if (cfg.task == "regression") return Task::Regression;
    throw std::invalid_argument("unknown task: " + cfg.task);
}

EvalConfig eval_config_from(const PipelineConfig& cfg) {
    EvalConfig e = default_eval_config(task_from_config(cfg));
    e.model = model_from_name(cfg.model);
    if (!cfg.metric.empty()) e.metric = metric_from_name(cfg.metric);
    e.cv_seed = cfg.seed;
    return e;
}

void write_records(const std::string& path, const std::vector<TransformationRecord>& records,
                   const Vocabulary& vocab) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write record log: " + path);
    for (const auto& r : records) {
        nlohmann::json j = {{"program", format_program(r.program, vocab)},
                            {"score", r.performance},
                            {"provenance", r.provenance}};
        out << j.dump() << "\n";
    }
}

std::vector<TransformationRecord> read_records(const std::string& path,
                                               const Vocabulary& vocab) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open record log: " + path);
    std::vector<TransformationRecord> records;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception&) {
            if (in.peek() == std::char_traits<char>::eof()) break;  // crash-partial tail
            throw std::invalid_argument("corrupt record log: " + path);
        }
        TransformationRecord r;
        r.program = parse_program(j.at("program").get<std::string>(), vocab);
        r.performance = j.at("score").get<double>();
        r.provenance = j.at("provenance").get<std::string>();
        records.push_back(std::move(r));
    }
    return records;
}

uint64_t fnv1a_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot hash missing file: " + path);
    uint64_t h = 14695981039346656037ULL;
    char c;
    while (in.get(c)) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string records_path(const PipelineConfig& c) { return c.outdir + "/records.jsonl"; }
std::string checkpoint_path(const PipelineConfig& c) { return c.outdir + "/checkpoint.json"; }
std::string losses_path(const PipelineConfig& c) { return c.outdir + "/losses.csv"; }
std::string report_path(const PipelineConfig& c) { return c.outdir + "/report.json"; }
std::string program_path(const PipelineConfig& c) { return c.outdir + "/program.txt"; }
std::string features_path(const PipelineConfig& c) { return c.outdir + "/features.csv"; }
std::string manifest_path(const PipelineConfig& c) { return c.outdir + "/manifest.json"; }

CollectSummary cmd_collect(const PipelineConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(cfg);
    Vocabulary vocab = Vocabulary::for_features(static_cast<int>(d.n_features()));

    CollectorConfig cc;
    cc.epochs = cfg.collect_epochs;
    cc.steps_per_episode = cfg.collect_steps;
    if (cfg.collector == "random")
        cc.random_mode = true;
    else if (cfg.collector != "rl")
        throw std::invalid_argument("unknown collector mode: " + cfg.collector);
    cc.seed = cfg.seed;
    cc.eval = eval_config_from(cfg);

    auto records = collect(d, cc);
    std::filesystem::create_directories(cfg.outdir);
    write_records(records_path(cfg), records, vocab);

    CollectSummary s;
    s.count = static_cast<int>(records.size());
    if (s.count > 0) {
        s.best = records.front().performance;
        for (const auto& r : records) {
            s.best = std::max(s.best, r.performance);
            s.mean += r.performance;
        }
        s.mean /= s.count;
    }

    double elapsed = seconds_since(t0);
    update_manifest(cfg, [&](nlohmann::json& m) {
        m["hashes"]["records"] = hash_hex(fnv1a_file(records_path(cfg)));
        m["timings"]["collect_s"] = elapsed;
        m["collect"] = {{"count", s.count}, {"best", s.best}, {"mean", s.mean}};
    });
    std::cout << "collected " << s.count << " records, best v=" << s.best
              << ", mean v=" << s.mean << "\n";
    return s;
}

size_t cmd_train(const PipelineConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(cfg);
    Vocabulary vocab = Vocabulary::for_features(static_cast<int>(d.n_features()));

    auto records = read_records(records_path(cfg), vocab);
    if (records.empty()) throw std::invalid_argument("empty record log");

    std::vector<TransformationRecord> corpus;
    std::set<std::pair<std::string, double>> seen;
    auto push_unique = [&](TransformationRecord r) {
        if (seen.insert({format_program(r.program, vocab), r.performance}).second)
            corpus.push_back(std::move(r));
    };
    std::mt19937_64 rng(cfg.seed);
    for (const auto& r : records) {
        push_unique(r);
        if (cfg.augment)
            for (auto& a : augment(r, cfg.augment_k, rng)) push_unique(std::move(a));
    }

    SeqModel model(vocab, cfg.seed);
    TrainConfig tc;
    tc.alpha = cfg.alpha;
    tc.batch_size = cfg.batch_size;
    tc.epochs = cfg.train_epochs;
    tc.lr = cfg.lr;
    tc.seed = cfg.seed;
    auto curve = model.train(corpus, tc);

    std::filesystem::create_directories(cfg.outdir);
    model.save(checkpoint_path(cfg));
    {
        std::ofstream out(losses_path(cfg));
        if (!out) throw std::runtime_error("cannot write loss curve");
        out << "epoch,total,rec,est\n";
        char buf[96];
        for (size_t e = 0; e < curve.size(); ++e) {
            std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", e, curve[e].total,
                          curve[e].rec, curve[e].est);
            out << buf;
        }
    }

    double elapsed = seconds_since(t0);
    update_manifest(cfg, [&](nlohmann::json& m) {
        m["hashes"]["records"] = hash_hex(fnv1a_file(records_path(cfg)));
        m["hashes"]["checkpoint"] = hash_hex(fnv1a_file(checkpoint_path(cfg)));
        m["timings"]["train_s"] = elapsed;
        m["train"] = {{"corpus_size", corpus.size()},
                      {"final_total", curve.empty() ? 0.0 : curve.back().total},
                      {"final_rec", curve.empty() ? 0.0 : curve.back().rec},
                      {"final_est", curve.empty() ? 0.0 : curve.back().est}};
    });
    std::cout << "trained on " << corpus.size() << " programs ("
              << records.size() << " records), final loss "
              << (curve.empty() ? 0.0 : curve.back().total) << "\n";
    return corpus.size();
}

SearchResult cmd_search(const PipelineConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    Dataset d = load_dataset(cfg);
    SeqModel model = SeqModel::load(checkpoint_path(cfg));
    if (model.vocab().n_features != static_cast<int>(d.n_features()))
        throw std::invalid_argument("checkpoint vocabulary does not match dataset");

    auto records = read_records(records_path(cfg), model.vocab());
    SearchConfig sc;
    sc.seed_count = cfg.seed_count;
    sc.eta = cfg.eta;
    sc.max_ascent_steps = cfg.ascent_steps;
    sc.beam = cfg.beam;
    sc.max_decode_len = cfg.max_decode_len;

    SearchResult result = run_search(model, records, d, eval_config_from(cfg), sc);

    std::filesystem::create_directories(cfg.outdir);
    nlohmann::json report = {{"baseline_score", result.baseline_score},
                             {"best_score", result.best_score},
                             {"valid_rate", result.valid_rate},
                             {"fallback", result.fallback},
                             {"best_program", format_program(result.best_program,
                                                             model.vocab())},
                             {"seeds", nlohmann::json::array()}};
    for (const auto& s : result.seeds) {
        nlohmann::json js = {{"seed_program", format_program(s.seed_program, model.vocab())},
                             {"estimate_before", s.estimate_before},
                             {"estimate_after", s.estimate_after},
                             {"decoded", format_program(s.decoded, model.vocab())},
                             {"decode_log_prob", s.decode_log_prob},
                             {"valid", s.valid},
                             {"valid_segments", s.valid_segments},
                             {"total_segments", s.total_segments}};
        if (s.measured) js["measured"] = *s.measured;
        report["seeds"].push_back(std::move(js));
    }
    {
        std::ofstream out(report_path(cfg));
        if (!out) throw std::runtime_error("cannot write report");
        out << report.dump(2) << "\n";
    }
    {
        std::ofstream out(program_path(cfg));
        if (!out) throw std::runtime_error("cannot write program file");
        out << format_program(result.best_program, model.vocab()) << "\n";
    }
    write_feature_csv(features_path(cfg), result.best_features, d.feature_names, d.y);

    double elapsed = seconds_since(t0);
    update_manifest(cfg, [&](nlohmann::json& m) {
        m["hashes"]["records"] = hash_hex(fnv1a_file(records_path(cfg)));
        m["hashes"]["checkpoint"] = hash_hex(fnv1a_file(checkpoint_path(cfg)));
        m["hashes"]["report"] = hash_hex(fnv1a_file(report_path(cfg)));
        m["timings"]["search_s"] = elapsed;
        m["scores"] = {{"baseline", result.baseline_score}, {"best", result.best_score}};
    });
    std::cout << "baseline " << result.baseline_score << " -> best " << result.best_score
              << " (valid rate " << result.valid_rate << ")\n";
    return result;
}

double cmd_eval(const PipelineConfig& cfg, const std::string& program_file) {
    Dataset d = load_dataset(cfg);
    Vocabulary vocab = Vocabulary::for_features(static_cast<int>(d.n_features()));
    std::ifstream in(program_file);
    if (!in) throw std::invalid_argument("cannot open program file: " + program_file);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    text = trim(text);

    double score;
    if (text.empty()) {
        score = train_eval(d.X, d.y, d.task, eval_config_from(cfg)).value;
    } else {
        PostfixProgram p = parse_program(text, vocab);
        auto space = candidate_space(p, d.X);
        score = train_eval(space.features, d.y, d.task, eval_config_from(cfg)).value;
    }
    std::cout << "score " << score << "\n";
    return score;
}

}  // namespace fts
