#include "fts/expr.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fts {

InfixTree make_feature_node(int feature) {
    auto n = std::make_shared<InfixNode>();
    n->feature = feature;
    return n;
}

InfixTree make_op_node(int op_id, std::vector<InfixTree> children) {
    if (static_cast<int>(children.size()) != operation(op_id).arity)
        throw std::invalid_argument("arity mismatch for " + operation(op_id).name);
    auto n = std::make_shared<InfixNode>();
    n->op = op_id;
    n->children = std::move(children);
    return n;
}

InfixTree clone_tree(const InfixTree& t) {
    auto n = std::make_shared<InfixNode>(*t);
    for (auto& c : n->children) c = clone_tree(c);
    return n;
}

int ValidityReport::valid_segment_count() const {
    int n = 0;
    for (const auto& s : segments)
        if (s.grammar_ok && s.finite_ok.value_or(true)) ++n;
    return n;
}

Vocabulary Vocabulary::for_features(int n_features) {
    Vocabulary v;
    v.n_features = n_features;
    v.n_ops = operation_count();
    return v;
}

int Vocabulary::code(const Token& t) const {
    switch (t.kind) {
        case TokenKind::Sos: return 0;
        case TokenKind::Eos: return 1;
        case TokenKind::Sep: return 2;
        case TokenKind::Feature:
            if (t.index < 0 || t.index >= n_features)
                throw std::out_of_range("feature id out of vocabulary");
            return 3 + t.index;
        case TokenKind::Op:
            if (t.index < 0 || t.index >= n_ops)
                throw std::out_of_range("operation id out of vocabulary");
            return 3 + n_features + t.index;
    }
    throw std::logic_error("bad token kind");
}

Token Vocabulary::token(int c) const {
    if (c == 0) return Token::sos();
    if (c == 1) return Token::eos();
    if (c == 2) return Token::sep();
    if (c >= 3 && c < 3 + n_features) return Token::feature(c - 3);
    if (c >= 3 + n_features && c < size()) return Token::op(c - 3 - n_features);
    throw std::out_of_range("unknown token code " + std::to_string(c));
}

std::string Vocabulary::text(const Token& t) const {
    switch (t.kind) {
        case TokenKind::Sos: return "<SOS>";
        case TokenKind::Eos: return "<EOS>";
        case TokenKind::Sep: return "<SEP>";
        case TokenKind::Feature: return "f" + std::to_string(t.index);
        case TokenKind::Op: return operation(t.index).name;
    }
    throw std::logic_error("bad token kind");
}

Token Vocabulary::parse_token(const std::string& s) const {
    if (s == "<SOS>") return Token::sos();
    if (s == "<EOS>") return Token::eos();
    if (s == "<SEP>") return Token::sep();
    if (s.size() > 1 && s[0] == 'f' &&
        std::all_of(s.begin() + 1, s.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        int id = std::stoi(s.substr(1));
        if (id >= n_features) throw std::out_of_range("feature token " + s + " out of range");
        return Token::feature(id);
    }
    int op = operation_id(s);
    if (op < 0) throw std::invalid_argument("unknown token `" + s + "`");
    return Token::op(op);
}

namespace {

void postorder(const InfixTree& t, std::vector<Token>& out) {
    if (t->op < 0) {
        out.push_back(Token::feature(t->feature));
        return;
    }
    for (const auto& c : t->children) postorder(c, out);
    out.push_back(Token::op(t->op));
}

bool segment_grammar_ok(const std::vector<Token>& seg) {
    if (seg.empty()) return false;
    int depth = 0;
    for (const Token& t : seg) {
        switch (t.kind) {
            case TokenKind::Feature:
                ++depth;
                break;
            case TokenKind::Op: {
                int arity = operation(t.index).arity;
                if (depth < arity) return false;
                depth -= arity - 1;
                break;
            }
            default:
                return false;  // stray <SOS>/<EOS>/<SEP> inside a segment
        }
    }
    return depth == 1;
}

}  // namespace

PostfixProgram infix_to_postfix(const std::vector<InfixTree>& program) {
    if (program.empty()) throw std::invalid_argument("empty composition list");
    PostfixProgram p;
    p.tokens.push_back(Token::sos());
    for (size_t i = 0; i < program.size(); ++i) {
        if (i > 0) p.tokens.push_back(Token::sep());
        postorder(program[i], p.tokens);
    }
    p.tokens.push_back(Token::eos());
    return p;
}

std::vector<std::vector<Token>> split_segments(const PostfixProgram& p) {
    std::vector<std::vector<Token>> segments;
    segments.emplace_back();
    size_t begin = 0, end = p.tokens.size();
    if (!p.tokens.empty() && p.tokens.front() == Token::sos()) begin = 1;
    if (end > begin && p.tokens.back() == Token::eos()) --end;
    for (size_t i = begin; i < end; ++i) {
        if (p.tokens[i].kind == TokenKind::Sep)
            segments.emplace_back();
        else
            segments.back().push_back(p.tokens[i]);
    }
    return segments;
}

PostfixProgram join_segments(const std::vector<std::vector<Token>>& segments) {
    PostfixProgram p;
    p.tokens.push_back(Token::sos());
    for (size_t i = 0; i < segments.size(); ++i) {
        if (i > 0) p.tokens.push_back(Token::sep());
        p.tokens.insert(p.tokens.end(), segments[i].begin(), segments[i].end());
    }
    p.tokens.push_back(Token::eos());
    return p;
}

ValidityReport validate(const PostfixProgram& p) {
    ValidityReport report;
    for (const auto& seg : split_segments(p)) {
        SegmentValidity v;
        v.grammar_ok = segment_grammar_ok(seg);
        report.segments.push_back(v);
    }
    return report;
}

EvalOutput evaluate(const PostfixProgram& p, const std::vector<std::vector<double>>& X,
                    EvalMode mode) {
    EvalOutput out;
    auto segments = split_segments(p);
    int n_features = static_cast<int>(X.size());
    for (size_t si = 0; si < segments.size(); ++si) {
        const auto& seg = segments[si];
        SegmentValidity v;
        v.grammar_ok = segment_grammar_ok(seg);
        if (!v.grammar_ok) {
            out.report.segments.push_back(v);
            continue;
        }
        std::vector<std::vector<double>> stack;
        for (const Token& t : seg) {
            if (t.kind == TokenKind::Feature) {
                if (t.index >= n_features)
                    throw std::out_of_range("feature id " + std::to_string(t.index) +
                                            " out of range");
                stack.push_back(X[static_cast<size_t>(t.index)]);
            } else {
                const Operation& op = operation(t.index);
                if (op.arity == 1) {
                    stack.back() = apply_unary(t.index, stack.back(), mode);
                } else {
                    auto b = std::move(stack.back());
                    stack.pop_back();
                    stack.back() = apply_binary(t.index, stack.back(), b, mode);
                }
            }
        }
        v.finite_ok = std::all_of(stack.back().begin(), stack.back().end(),
                                  [](double x) { return std::isfinite(x); });
        if (*v.finite_ok) {
            out.columns.push_back(std::move(stack.back()));
            out.column_segment.push_back(static_cast<int>(si));
        }
        out.report.segments.push_back(v);
    }
    return out;
}

std::vector<TransformationRecord> augment(const TransformationRecord& r, int k,
                                          std::mt19937_64& rng) {
    if (k < 0) throw std::invalid_argument("negative augmentation count");
    auto segments = split_segments(r.program);
    if (segments.empty()) throw std::invalid_argument("program has no segments");
    std::vector<TransformationRecord> out;
    out.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        auto shuffled = segments;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        TransformationRecord rec;
        rec.program = join_segments(shuffled);
        rec.performance = r.performance;
        rec.provenance = "augmented";
        out.push_back(std::move(rec));
    }
    return out;
}

std::vector<int> encode_tokens(const PostfixProgram& p, const Vocabulary& vocab) {
    std::vector<int> codes;
    codes.reserve(p.tokens.size());
    for (const Token& t : p.tokens) codes.push_back(vocab.code(t));
    return codes;
}

PostfixProgram decode_tokens(const std::vector<int>& codes, const Vocabulary& vocab) {
    PostfixProgram p;
    p.tokens.reserve(codes.size());
    for (int c : codes) p.tokens.push_back(vocab.token(c));
    return p;
}

std::string format_program(const PostfixProgram& p, const Vocabulary& vocab) {
    std::ostringstream os;
    for (size_t i = 0; i < p.tokens.size(); ++i) {
        if (i > 0) os << ' ';
        os << vocab.text(p.tokens[i]);
    }
    return os.str();
}

PostfixProgram parse_program(const std::string& text, const Vocabulary& vocab) {
    PostfixProgram p;
    std::istringstream is(text);
    std::string word;
    while (is >> word) p.tokens.push_back(vocab.parse_token(word));
    return p;
}

}  // namespace fts
