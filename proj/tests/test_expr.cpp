#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "fts/expr.hpp"

using namespace fts;

namespace {

// ---- independent oracles ----------------------------------------------------

// Oracle 1: recursive tree evaluation, bypassing the stack machine.
std::vector<double> eval_tree(const InfixTree& t, const std::vector<std::vector<double>>& X,
                              EvalMode mode) {
    if (t->op < 0) return X[static_cast<size_t>(t->feature)];
    if (operation(t->op).arity == 1)
        return apply_unary(t->op, eval_tree(t->children[0], X, mode), mode);
    return apply_binary(t->op, eval_tree(t->children[0], X, mode),
                        eval_tree(t->children[1], X, mode), mode);
}

// Oracle 2: render a tree as parenthesized infix text, then re-derive postfix
// with a shunting-yard pass over the text.
std::string to_infix_text(const InfixTree& t) {
    if (t->op < 0) return "f" + std::to_string(t->feature);
    const Operation& op = operation(t->op);
    if (op.arity == 1) return op.name + "(" + to_infix_text(t->children[0]) + ")";
    static const std::map<std::string, std::string> sym = {
        {"plus", "+"}, {"subtract", "-"}, {"multiply", "*"}, {"divide", "/"}};
    return "(" + to_infix_text(t->children[0]) + sym.at(op.name) + to_infix_text(t->children[1]) +
           ")";
}

std::vector<std::string> lex_infix(const std::string& s) {
    std::vector<std::string> out;
    size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (c == '(' || c == ')' || c == '+' || c == '-' || c == '*' || c == '/') {
            out.push_back(std::string(1, c));
            ++i;
        } else {
            size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) != 0)) ++j;
            out.push_back(s.substr(i, j - i));
            i = j;
        }
    }
    return out;
}

std::vector<Token> shunting_yard(const std::string& text) {
    static const std::map<std::string, std::string> ops = {
        {"+", "plus"}, {"-", "subtract"}, {"*", "multiply"}, {"/", "divide"}};
    std::vector<Token> output;
    std::vector<std::string> stack;
    for (const std::string& tok : lex_infix(text)) {
        if (tok == "(") {
            stack.push_back(tok);
        } else if (tok == ")") {
            while (!stack.empty() && stack.back() != "(") {
                output.push_back(Token::op(operation_id(
                    ops.count(stack.back()) ? ops.at(stack.back()) : stack.back())));
                stack.pop_back();
            }
            REQUIRE(!stack.empty());
            stack.pop_back();  // '('
            // a function name directly before '(' applies to the group
            if (!stack.empty() && stack.back() != "(" && !ops.count(stack.back()) &&
                operation_id(stack.back()) >= 0) {
                output.push_back(Token::op(operation_id(stack.back())));
                stack.pop_back();
            }
        } else if (ops.count(tok)) {
            // every binary is explicitly parenthesized, so no precedence pops
            stack.push_back(tok);
        } else if (tok.size() > 1 && tok[0] == 'f' && std::isdigit(static_cast<unsigned char>(tok[1]))) {
            output.push_back(Token::feature(std::stoi(tok.substr(1))));
        } else {
            stack.push_back(tok);  // unary function name
        }
    }
    while (!stack.empty()) {
        output.push_back(Token::op(operation_id(
            ops.count(stack.back()) ? ops.at(stack.back()) : stack.back())));
        stack.pop_back();
    }
    return output;
}

// Oracle 3: literal stack simulation of segment validity.
bool oracle_sequence_valid(const std::vector<Token>& tokens) {
    size_t begin = 0, end = tokens.size();
    if (end == 0) return false;
    if (tokens.front() == Token::sos()) begin = 1;
    if (end > begin && tokens.back() == Token::eos()) --end;
    std::vector<std::vector<Token>> segments(1);
    for (size_t i = begin; i < end; ++i) {
        if (tokens[i].kind == TokenKind::Sep)
            segments.emplace_back();
        else
            segments[segments.size() - 1].push_back(tokens[i]);
    }
    for (const auto& seg : segments) {
        std::vector<int> stack;
        bool bad = seg.empty();
        for (const Token& t : seg) {
            if (t.kind == TokenKind::Feature) {
                stack.push_back(t.index);
            } else if (t.kind == TokenKind::Op) {
                int arity = operation(t.index).arity;
                if (static_cast<int>(stack.size()) < arity) {
                    bad = true;
                    break;
                }
                for (int a = 0; a < arity; ++a) stack.pop_back();
                stack.push_back(0);
            } else {
                bad = true;  // framing token inside a segment
                break;
            }
        }
        if (bad || stack.size() != 1) return false;
    }
    return true;
}

InfixTree random_tree(std::mt19937_64& rng, int n_features, int depth) {
    std::uniform_int_distribution<int> feat(0, n_features - 1);
    std::uniform_int_distribution<int> op(0, operation_count() - 1);
    std::uniform_int_distribution<int> kind(0, 2);
    if (depth <= 0 || kind(rng) == 0) return make_feature_node(feat(rng));
    int o = op(rng);
    std::vector<InfixTree> children;
    children.push_back(random_tree(rng, n_features, depth - 1));
    if (operation(o).arity == 2) children.push_back(random_tree(rng, n_features, depth - 1));
    return make_op_node(o, std::move(children));
}

std::vector<std::vector<double>> random_matrix(std::mt19937_64& rng, int n_features, int n) {
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<std::vector<double>> X(n_features, std::vector<double>(n));
    for (auto& col : X)
        for (double& v : col) v = u(rng);
    return X;
}

}  // namespace

TEST_CASE("stack machine matches recursive tree evaluation") {
    std::mt19937_64 rng(123);
    std::uniform_int_distribution<int> n_seg(1, 5);
    for (int iter = 0; iter < 200; ++iter) {
        auto X = random_matrix(rng, 6, 17);
        std::vector<InfixTree> trees;
        for (int s = n_seg(rng); s > 0; --s) trees.push_back(random_tree(rng, 6, 4));
        PostfixProgram p = infix_to_postfix(trees);
        auto out = evaluate(p, X, EvalMode::Guarded);
        REQUIRE(out.columns.size() == trees.size());  // guarded is always finite
        for (size_t s = 0; s < trees.size(); ++s) {
            auto expected = eval_tree(trees[s], X, EvalMode::Guarded);
            for (size_t i = 0; i < expected.size(); ++i)
                CHECK(out.columns[s][i] == doctest::Approx(expected[i]).epsilon(1e-12));
        }
    }
}

TEST_CASE("infix_to_postfix matches a shunting-yard pass over infix text") {
    std::mt19937_64 rng(321);
    for (int iter = 0; iter < 300; ++iter) {
        InfixTree t = random_tree(rng, 10, 4);
        PostfixProgram p = infix_to_postfix({t});
        auto segs = split_segments(p);
        REQUIRE(segs.size() == 1);
        auto oracle = shunting_yard(to_infix_text(t));
        REQUIRE(segs[0].size() == oracle.size());
        for (size_t i = 0; i < oracle.size(); ++i) CHECK(segs[0][i] == oracle[i]);
    }
}

TEST_CASE("validate matches brute-force stack simulation exhaustively") {
    // all token sequences of length <= 5 over {<SOS>,<EOS>,<SEP>,f0,f1,sqrt,plus}
    const std::vector<Token> alphabet = {
        Token::sos(), Token::eos(), Token::sep(), Token::feature(0), Token::feature(1),
        Token::op(operation_id("sqrt")), Token::op(operation_id("plus"))};
    long checked = 0;
    for (int len = 1; len <= 5; ++len) {
        std::vector<int> idx(static_cast<size_t>(len), 0);
        while (true) {
            PostfixProgram p;
            for (int i : idx) p.tokens.push_back(alphabet[static_cast<size_t>(i)]);
            auto report = validate(p);
            bool all_ok = true;
            for (const auto& s : report.segments) all_ok = all_ok && s.grammar_ok;
            CHECK(all_ok == oracle_sequence_valid(p.tokens));
            ++checked;
            int pos = len - 1;
            while (pos >= 0 && ++idx[static_cast<size_t>(pos)] == 7) idx[pos--] = 0;
            if (pos < 0) break;
        }
    }
    CHECK(checked == 7L + 49 + 343 + 2401 + 16807);
}

TEST_CASE("evaluate skips invalid segments and reports them") {
    // f0 sqrt is strict-invalid on negative data; f0 square is fine
    std::vector<std::vector<double>> X = {{-1.0, -4.0, -9.0}};
    PostfixProgram p;
    p.tokens = {Token::sos(),
                Token::feature(0), Token::op(operation_id("sqrt")),
                Token::sep(),
                Token::feature(0), Token::op(operation_id("square")),
                Token::sep(),
                Token::op(operation_id("plus")),  // grammar failure
                Token::eos()};
    auto out = evaluate(p, X, EvalMode::Strict);
    REQUIRE(out.report.segments.size() == 3);
    CHECK(out.report.segments[0].grammar_ok);
    CHECK(out.report.segments[0].finite_ok == false);
    CHECK(out.report.segments[1].grammar_ok);
    CHECK(out.report.segments[1].finite_ok == true);
    CHECK_FALSE(out.report.segments[2].grammar_ok);
    CHECK_FALSE(out.report.segments[2].finite_ok.has_value());
    REQUIRE(out.columns.size() == 1);
    CHECK(out.column_segment[0] == 1);
    CHECK(out.columns[0][1] == doctest::Approx(16.0));
    CHECK(out.report.valid_segment_count() == 1);

    CHECK_THROWS(evaluate(parse_program("<SOS> f5 <EOS>", Vocabulary::for_features(6)), X,
                          EvalMode::Strict));
}

TEST_CASE("augmentation shuffles segments, keeps score and marks provenance") {
    Vocabulary vocab = Vocabulary::for_features(4);
    TransformationRecord r;
    r.program = parse_program("<SOS> f0 f1 plus <SEP> f2 log <SEP> f3 <EOS>", vocab);
    r.performance = 0.625;
    std::mt19937_64 rng(5);
    auto augs = augment(r, 12, rng);
    REQUIRE(augs.size() == 12);

    auto multiset_of = [](const PostfixProgram& p) {
        std::multiset<std::string> m;
        for (const auto& seg : split_segments(p)) {
            std::string key;
            for (const Token& t : seg) key += std::to_string(static_cast<int>(t.kind) * 100 + t.index) + ",";
            m.insert(key);
        }
        return m;
    };
    bool any_different = false;
    for (const auto& a : augs) {
        CHECK(a.performance == r.performance);
        CHECK(a.provenance == "augmented");
        CHECK(multiset_of(a.program) == multiset_of(r.program));
        any_different = any_different || !(a.program == r.program);
    }
    CHECK(any_different);

    // deterministic under the same seed
    std::mt19937_64 rng2(5);
    auto augs2 = augment(r, 12, rng2);
    for (size_t i = 0; i < augs.size(); ++i) CHECK(augs[i].program == augs2[i].program);
}

TEST_CASE("vocabulary codes and text round-trip") {
    Vocabulary vocab = Vocabulary::for_features(7);
    CHECK(vocab.size() == 7 + 16 + 3);
    CHECK(vocab.code(Token::sos()) == 0);
    CHECK(vocab.code(Token::eos()) == 1);
    CHECK(vocab.code(Token::sep()) == 2);
    CHECK(vocab.code(Token::feature(0)) == 3);
    CHECK(vocab.code(Token::op(0)) == 10);
    for (int c = 0; c < vocab.size(); ++c) CHECK(vocab.code(vocab.token(c)) == c);
    CHECK_THROWS(vocab.code(Token::feature(7)));
    CHECK_THROWS(vocab.token(vocab.size()));

    std::string text = "<SOS> f0 f1 plus <SEP> f3 log <EOS>";
    PostfixProgram p = parse_program(text, vocab);
    CHECK(format_program(p, vocab) == text);
    CHECK(decode_tokens(encode_tokens(p, vocab), vocab) == p);
    CHECK_THROWS(parse_program("<SOS> f9 <EOS>", vocab));
    CHECK_THROWS(parse_program("<SOS> banana <EOS>", vocab));
}

TEST_CASE("split and join segments round-trip") {
    Vocabulary vocab = Vocabulary::for_features(4);
    PostfixProgram p = parse_program("<SOS> f0 sqrt <SEP> f1 f2 multiply <EOS>", vocab);
    auto segs = split_segments(p);
    REQUIRE(segs.size() == 2);
    CHECK(join_segments(segs) == p);
}
