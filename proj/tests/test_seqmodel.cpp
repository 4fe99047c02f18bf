#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "fd_common.hpp"
#include "fts/seqmodel.hpp"

using namespace fts;

namespace {

std::vector<TransformationRecord> tiny_corpus(const Vocabulary& vocab) {
    const char* texts[] = {
        "<SOS> f0 f1 plus <EOS>",
        "<SOS> f2 log <EOS>",
        "<SOS> f0 sqrt <SEP> f1 <EOS>",
        "<SOS> f1 f2 multiply <EOS>",
        "<SOS> f2 square <SEP> f0 <EOS>",
        "<SOS> f0 <EOS>",
        "<SOS> f1 sigmoid <EOS>",
        "<SOS> f2 f0 divide <EOS>",
    };
    std::vector<TransformationRecord> out;
    double v = 0.1;
    for (const char* t : texts) {
        TransformationRecord r;
        r.program = parse_program(t, vocab);
        r.performance = v;
        v += 0.1;
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

TEST_CASE("decoder probabilities are a distribution; encode masks padding") {
    Vocabulary vocab = Vocabulary::for_features(3);
    SeqModel m(vocab, 7);
    std::vector<int> codes = encode_tokens(parse_program("<SOS> f0 f1 plus <EOS>", vocab), vocab);

    auto E = m.encode(codes);
    CHECK(E->rows == static_cast<int>(codes.size()));
    CHECK(E->cols == SeqModel::kHiddenDim);

    auto step = m.decoder_step(E, codes[0], m.decoder_init());
    CHECK(step.probs->cols == vocab.size());
    double sum = 0.0;
    for (double p : step.probs->v) {
        CHECK(p >= 0.0);
        sum += p;
    }
    CHECK(sum == doctest::Approx(1.0));

    // padding must not change the encoding
    auto padded = codes;
    padded.push_back(m.pad_code());
    padded.push_back(m.pad_code());
    auto E2 = m.encode(padded);
    REQUIRE(E2->rows == E->rows);
    for (size_t i = 0; i < E->v.size(); ++i) CHECK(E2->v[i] == E->v[i]);

    CHECK_THROWS(m.encode({}));
    CHECK_THROWS(m.encode({vocab.size() + 1}));
}

TEST_CASE("estimate denormalizes the evaluator output") {
    Vocabulary vocab = Vocabulary::for_features(3);
    SeqModel m(vocab, 3);
    auto corpus = tiny_corpus(vocab);
    TrainConfig tc;
    tc.epochs = 1;
    tc.batch_size = 4;
    tc.seed = 1;
    m.train(corpus, tc);  // sets v_min/v_max from the corpus

    CHECK(m.normalize_v(0.1) == doctest::Approx(0.0));
    CHECK(m.normalize_v(0.8) == doctest::Approx(1.0));
    CHECK(m.denormalize_v(m.normalize_v(0.37)) == doctest::Approx(0.37));

    auto E = m.encode(encode_tokens(corpus[0].program, vocab));
    double direct = m.evaluator_forward(E)->scalar();
    CHECK(m.estimate(E) == doctest::Approx(m.denormalize_v(direct)));
}

TEST_CASE("loss of a batch is the mean of per-sequence losses") {
    Vocabulary vocab = Vocabulary::for_features(3);
    SeqModel m(vocab, 11);
    auto corpus = tiny_corpus(vocab);
    std::vector<std::vector<int>> programs;
    std::vector<double> targets;
    for (const auto& r : corpus) {
        programs.push_back(encode_tokens(r.program, vocab));
        targets.push_back(r.performance);
    }
    LossParts whole = m.loss(programs, targets, 0.05);
    double total = 0.0, rec = 0.0, est = 0.0;
    for (size_t i = 0; i < programs.size(); ++i) {
        LossParts one = m.loss({programs[i]}, {targets[i]}, 0.05);
        total += one.total;
        rec += one.rec;
        est += one.est;
        CHECK(one.total == doctest::Approx(0.05 * one.rec + 0.95 * one.est));
    }
    size_t n = programs.size();
    CHECK(whole.total == doctest::Approx(total / n));
    CHECK(whole.rec == doctest::Approx(rec / n));
    CHECK(whole.est == doctest::Approx(est / n));
}

TEST_CASE("training overfits a tiny corpus") {
    Vocabulary vocab = Vocabulary::for_features(3);
    SeqModel m(vocab, 5);
    auto corpus = tiny_corpus(vocab);

    std::vector<std::vector<int>> programs;
    for (const auto& r : corpus) programs.push_back(encode_tokens(r.program, vocab));
    double before = m.token_accuracy(programs);

    TrainConfig tc;
    tc.epochs = 300;
    tc.batch_size = 2;
    tc.lr = 0.005;
    tc.seed = 2;
    auto curve = m.train(corpus, tc);
    REQUIRE(curve.size() == 300);
    CHECK(curve.back().total < curve.front().total);
    CHECK(curve.back().rec < curve.front().rec);

    double after = m.token_accuracy(programs);
    CHECK(after > before);
    CHECK(after >= 0.9);
}

TEST_CASE("training and checkpoints are deterministic") {
    Vocabulary vocab = Vocabulary::for_features(3);
    auto corpus = tiny_corpus(vocab);
    TrainConfig tc;
    tc.epochs = 5;
    tc.batch_size = 4;
    tc.seed = 3;

    SeqModel a(vocab, 42), b(vocab, 42);
    auto ca = a.train(corpus, tc);
    auto cb = b.train(corpus, tc);
    for (size_t i = 0; i < ca.size(); ++i) CHECK(ca[i].total == cb[i].total);
    CHECK(a.to_checkpoint() == b.to_checkpoint());

    // save -> load round-trips the full model state
    std::string path = "/tmp/fts_ckpt_test.json";
    a.save(path);
    SeqModel loaded = SeqModel::load(path);
    CHECK(loaded.to_checkpoint() == a.to_checkpoint());
    auto E = a.encode(encode_tokens(corpus[0].program, vocab));
    auto El = loaded.encode(encode_tokens(corpus[0].program, vocab));
    CHECK(E->v == El->v);
    CHECK(loaded.estimate(El) == a.estimate(E));
    std::remove(path.c_str());

    // version and vocabulary validation
    auto j = a.to_checkpoint();
    j["format_version"] = 99;
    CHECK_THROWS(SeqModel::from_checkpoint(j));
    auto j2 = a.to_checkpoint();
    j2["vocab"]["n_ops"] = 7;
    CHECK_THROWS(SeqModel::from_checkpoint(j2));
}

TEST_CASE("performance estimate is differentiable in the embedding") {
    Vocabulary vocab = Vocabulary::for_features(3);
    SeqModel m(vocab, 13);
    std::mt19937_64 rng(99);
    double worst = fdcheck::check_many(5, rng, [&](std::mt19937_64& r) {
        std::uniform_int_distribution<int> rows(2, 6);
        int n = rows(r);
        return fdcheck::max_rel_err(
            {{n, SeqModel::kHiddenDim}},
            [&](const std::vector<nn::TensorPtr>& in) { return m.estimate_node(in[0]); }, r);
    });
    CHECK(worst <= 1e-4);
}
