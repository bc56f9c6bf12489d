#include "fuzzdl/query.hpp"

#include <algorithm>
#include <set>

#include "fuzzdl/errors.hpp"

namespace fuzzdl {

namespace {

QueryPtr node(QueryNode::Kind kind, int symbol,
              std::vector<QueryPtr> children) {
  for (const QueryPtr& c : children) {
    if (!c) throw DataError("null child in query node");
  }
  auto n = std::make_shared<QueryNode>();
  n->kind = kind;
  n->symbol = symbol;
  n->children = std::move(children);
  return n;
}

}  // namespace

QueryPtr make_anchor(int entity) { return node(QueryNode::Kind::Anchor, entity, {}); }

QueryPtr make_proj(int rel, QueryPtr child) {
  return node(QueryNode::Kind::Proj, rel, {std::move(child)});
}

QueryPtr make_and(std::vector<QueryPtr> children) {
  if (children.size() < 2) throw DataError("And requires at least 2 children");
  return node(QueryNode::Kind::And, -1, std::move(children));
}

QueryPtr make_or(std::vector<QueryPtr> children) {
  if (children.size() < 2) throw DataError("Or requires at least 2 children");
  return node(QueryNode::Kind::Or, -1, std::move(children));
}

QueryPtr make_not(QueryPtr child) {
  return node(QueryNode::Kind::Not, -1, {std::move(child)});
}

bool query_equal(const QueryPtr& a, const QueryPtr& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (a->kind != b->kind || a->symbol != b->symbol ||
      a->children.size() != b->children.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a->children.size(); ++i) {
    if (!query_equal(a->children[i], b->children[i])) return false;
  }
  return true;
}

// --------------------------------------------------------------------------
// Parsing

namespace {

struct Token {
  enum class Kind { LParen, RParen, Atom };
  Kind kind;
  std::string text;
  std::size_t pos;  // byte offset into the input
};

std::vector<Token> tokenize(const std::string& text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
    } else if (c == '(') {
      tokens.push_back({Token::Kind::LParen, "(", i});
      ++i;
    } else if (c == ')') {
      tokens.push_back({Token::Kind::RParen, ")", i});
      ++i;
    } else {
      std::size_t start = i;
      while (i < text.size() && text[i] != '(' && text[i] != ')' &&
             text[i] != ' ' && text[i] != '\t' && text[i] != '\n' &&
             text[i] != '\r') {
        ++i;
      }
      tokens.push_back({Token::Kind::Atom, text.substr(start, i - start), start});
    }
  }
  return tokens;
}

class Parser {
 public:
  Parser(std::vector<Token> tokens, const Vocab& vocab, std::size_t input_size)
      : tokens_(std::move(tokens)), vocab_(vocab), end_pos_(input_size) {}

  QueryPtr parse_root() {
    QueryPtr root = parse_node();
    if (cursor_ != tokens_.size()) {
      fail("trailing input after query", peek_pos());
    }
    if (root->kind == QueryNode::Kind::Anchor) {
      fail("a bare anchor is not a query", 0);
    }
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& msg, std::size_t pos) {
    throw ParseError("query parse error at offset " + std::to_string(pos) +
                         ": " + msg,
                     pos);
  }

  std::size_t peek_pos() const {
    return cursor_ < tokens_.size() ? tokens_[cursor_].pos : end_pos_;
  }

  const Token& expect(Token::Kind kind, const char* what) {
    if (cursor_ >= tokens_.size()) {
      fail(std::string("unexpected end of input, expected ") + what, end_pos_);
    }
    if (tokens_[cursor_].kind != kind) {
      fail(std::string("expected ") + what + ", got '" +
               tokens_[cursor_].text + "'",
           tokens_[cursor_].pos);
    }
    return tokens_[cursor_++];
  }

  bool at_rparen() const {
    return cursor_ < tokens_.size() &&
           tokens_[cursor_].kind == Token::Kind::RParen;
  }

  QueryPtr parse_node() {
    expect(Token::Kind::LParen, "'('");
    const Token& head = expect(Token::Kind::Atom, "an operator");
    if (head.text == "e") {
      const Token& name = expect(Token::Kind::Atom, "an entity name");
      auto id = vocab_.find(Vocab::Space::Entity, name.text);
      if (!id) fail("unknown entity '" + name.text + "'", name.pos);
      expect(Token::Kind::RParen, "')'");
      return make_anchor(*id);
    }
    if (head.text == "p") {
      const Token& name = expect(Token::Kind::Atom, "a relation name");
      auto id = vocab_.find(Vocab::Space::Relation, name.text);
      if (!id) fail("unknown relation '" + name.text + "'", name.pos);
      QueryPtr child = parse_node();
      expect(Token::Kind::RParen, "')'");
      return make_proj(*id, std::move(child));
    }
    if (head.text == "and" || head.text == "or") {
      std::vector<QueryPtr> children;
      while (!at_rparen() && cursor_ < tokens_.size()) {
        children.push_back(parse_node());
      }
      if (children.size() < 2) {
        fail("'" + head.text + "' requires at least 2 sub-queries", head.pos);
      }
      expect(Token::Kind::RParen, "')'");
      return head.text == "and" ? make_and(std::move(children))
                                : make_or(std::move(children));
    }
    if (head.text == "not") {
      QueryPtr child = parse_node();
      expect(Token::Kind::RParen, "')'");
      return make_not(std::move(child));
    }
    fail("unknown operator '" + head.text + "'", head.pos);
  }

  std::vector<Token> tokens_;
  const Vocab& vocab_;
  std::size_t end_pos_ = 0;
  std::size_t cursor_ = 0;
};

}  // namespace

QueryPtr parse_query(const std::string& text, const Vocab& vocab) {
  Parser parser(tokenize(text), vocab, text.size());
  return parser.parse_root();
}

std::string render_query(const QueryPtr& ast, const Vocab& vocab) {
  switch (ast->kind) {
    case QueryNode::Kind::Anchor:
      return "(e " + vocab.entity_name(ast->symbol) + ")";
    case QueryNode::Kind::Proj:
      return "(p " + vocab.relation_name(ast->symbol) + " " +
             render_query(ast->children[0], vocab) + ")";
    case QueryNode::Kind::And:
    case QueryNode::Kind::Or: {
      std::string out = ast->kind == QueryNode::Kind::And ? "(and" : "(or";
      for (const auto& child : ast->children) {
        out += ' ';
        out += render_query(child, vocab);
      }
      return out + ")";
    }
    case QueryNode::Kind::Not:
      return "(not " + render_query(ast->children[0], vocab) + ")";
  }
  throw DataError("corrupt query node");
}

// --------------------------------------------------------------------------
// Shape classification

namespace {

// Length of a pure projection chain ending in an anchor, or -1.
int chain_length(const QueryPtr& ast) {
  int len = 0;
  const QueryNode* cur = ast.get();
  while (cur->kind == QueryNode::Kind::Proj) {
    ++len;
    cur = cur->children[0].get();
  }
  return cur->kind == QueryNode::Kind::Anchor ? len : -1;
}

// Sorted chain lengths of all children, or empty if any child is not a chain.
std::vector<int> child_chains(const QueryPtr& ast) {
  std::vector<int> lens;
  for (const auto& child : ast->children) {
    int len = chain_length(child);
    if (len < 1) return {};
    lens.push_back(len);
  }
  std::sort(lens.begin(), lens.end());
  return lens;
}

}  // namespace

std::string classify_query(const QueryPtr& ast) {
  if (ast->kind == QueryNode::Kind::Proj) {
    switch (chain_length(ast)) {
      case 1: return "1p";
      case 2: return "2p";
      case 3: return "3p";
      default: break;
    }
    // Projection on top of a connective: ip / up take exactly one hop above
    // an intersection/union of two 1p branches.
    const QueryPtr& below = ast->children[0];
    if (below->kind == QueryNode::Kind::And && child_chains(below) == std::vector<int>{1, 1}) {
      return "ip";
    }
    if (below->kind == QueryNode::Kind::Or && child_chains(below) == std::vector<int>{1, 1}) {
      return "up";
    }
    return "other";
  }
  if (ast->kind == QueryNode::Kind::And) {
    std::vector<int> lens = child_chains(ast);
    if (lens == std::vector<int>{1, 1}) return "2i";
    if (lens == std::vector<int>{1, 1, 1}) return "3i";
    if (lens == std::vector<int>{1, 2}) return "pi";
    return "other";
  }
  if (ast->kind == QueryNode::Kind::Or) {
    if (child_chains(ast) == std::vector<int>{1, 1}) return "2u";
    return "other";
  }
  return "other";
}

std::vector<int> query_anchors(const QueryPtr& ast) {
  std::vector<int> anchors;
  auto walk = [&](auto&& self, const QueryPtr& n) -> void {
    if (n->kind == QueryNode::Kind::Anchor) {
      if (std::find(anchors.begin(), anchors.end(), n->symbol) ==
          anchors.end()) {
        anchors.push_back(n->symbol);
      }
      return;
    }
    for (const auto& child : n->children) self(self, child);
  };
  walk(walk, ast);
  return anchors;
}

// --------------------------------------------------------------------------
// Crisp answering

std::vector<int> answer_entities(const KbIndex& index, const QueryPtr& ast) {
  switch (ast->kind) {
    case QueryNode::Kind::Anchor:
      return {ast->symbol};
    case QueryNode::Kind::Proj: {
      std::set<int> tails;
      for (int h : answer_entities(index, ast->children[0])) {
        for (int t : index.tails(h, ast->symbol)) tails.insert(t);
      }
      return {tails.begin(), tails.end()};
    }
    case QueryNode::Kind::And: {
      std::vector<int> acc = answer_entities(index, ast->children[0]);
      for (std::size_t i = 1; i < ast->children.size(); ++i) {
        std::vector<int> next = answer_entities(index, ast->children[i]);
        std::vector<int> merged;
        std::set_intersection(acc.begin(), acc.end(), next.begin(), next.end(),
                              std::back_inserter(merged));
        acc = std::move(merged);
      }
      return acc;
    }
    case QueryNode::Kind::Or: {
      std::set<int> acc;
      for (const auto& child : ast->children) {
        for (int e : answer_entities(index, child)) acc.insert(e);
      }
      return {acc.begin(), acc.end()};
    }
    case QueryNode::Kind::Not: {
      std::vector<int> inner = answer_entities(index, ast->children[0]);
      std::vector<int> result;
      result.reserve(index.num_entities() - inner.size());
      std::size_t j = 0;
      for (int e = 0; e < index.num_entities(); ++e) {
        if (j < inner.size() && inner[j] == e) {
          ++j;
        } else {
          result.push_back(e);
        }
      }
      return result;
    }
  }
  throw DataError("corrupt query node");
}

std::vector<int> answer_concepts(const KbIndex& index,
                                 const std::vector<int>& entity_answers) {
  std::set<int> concepts;
  for (int e : entity_answers) {
    for (int c : index.concepts_of(e)) concepts.insert(c);
  }
  return {concepts.begin(), concepts.end()};
}

}  // namespace fuzzdl
