#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fts/opset.hpp"

namespace fts {

enum class TokenKind { Sos, Eos, Sep, Feature, Op };

struct Token {
    TokenKind kind;
    int index = -1;  // feature index or operation id

    static Token sos() { return {TokenKind::Sos}; }
    static Token eos() { return {TokenKind::Eos}; }
    static Token sep() { return {TokenKind::Sep}; }
    static Token feature(int id) { return {TokenKind::Feature, id}; }
    static Token op(int id) { return {TokenKind::Op, id}; }

    bool operator==(const Token&) const = default;
};

// A postfix token sequence; well-formed programs start with <SOS>, end with
// <EOS> and hold >=1 <SEP>-separated segments, each a valid postfix expression.
struct PostfixProgram {
    std::vector<Token> tokens;

    bool operator==(const PostfixProgram&) const = default;
    size_t length() const { return tokens.size(); }
};

// Expression tree over feature leaves and unary/binary operation nodes.
struct InfixNode;
using InfixTree = std::shared_ptr<InfixNode>;

struct InfixNode {
    int op = -1;       // -1: feature leaf
    int feature = -1;  // valid when op < 0
    std::vector<InfixTree> children;
};

InfixTree make_feature_node(int feature);
InfixTree make_op_node(int op_id, std::vector<InfixTree> children);
InfixTree clone_tree(const InfixTree& t);

struct SegmentValidity {
    bool grammar_ok = false;
    std::optional<bool> finite_ok;  // filled by evaluate
};

struct ValidityReport {
    std::vector<SegmentValidity> segments;

    int total_segment_count() const { return static_cast<int>(segments.size()); }
    int valid_segment_count() const;
};

// Integer token codes: <SOS>=0 <EOS>=1 <SEP>=2, then features, then ops.
struct Vocabulary {
    int n_features = 0;
    int n_ops = 0;

    static Vocabulary for_features(int n_features);

    int size() const { return n_ops + n_features + 3; }
    int code(const Token& t) const;
    Token token(int code) const;

    std::string text(const Token& t) const;
    Token parse_token(const std::string& text) const;
};

struct TransformationRecord {
    PostfixProgram program;
    double performance = 0.0;
    std::string provenance = "rl";  // rl | random | augmented
};

struct EvalOutput {
    std::vector<std::vector<double>> columns;  // one per fully valid segment
    std::vector<int> column_segment;           // segment index of each column
    ValidityReport report;
};

PostfixProgram infix_to_postfix(const std::vector<InfixTree>& program);

// Total over arbitrary token soup; malformed segments get grammar_ok=false.
ValidityReport validate(const PostfixProgram& p);

// Stack-machine evaluation against column-major features X.
EvalOutput evaluate(const PostfixProgram& p, const std::vector<std::vector<double>>& X,
                    EvalMode mode);

std::vector<std::vector<Token>> split_segments(const PostfixProgram& p);
PostfixProgram join_segments(const std::vector<std::vector<Token>>& segments);

std::vector<TransformationRecord> augment(const TransformationRecord& r, int k,
                                          std::mt19937_64& rng);

std::vector<int> encode_tokens(const PostfixProgram& p, const Vocabulary& vocab);
PostfixProgram decode_tokens(const std::vector<int>& codes, const Vocabulary& vocab);

// One-program text form: `<SOS> f0 f1 plus <SEP> f3 log <EOS>`.
std::string format_program(const PostfixProgram& p, const Vocabulary& vocab);
PostfixProgram parse_program(const std::string& text, const Vocabulary& vocab);

}  // namespace fts
