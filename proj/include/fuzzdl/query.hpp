#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fuzzdl/kb.hpp"
#include "fuzzdl/vocab.hpp"

namespace fuzzdl {

// Logical query DAG. Leaves are entity anchors; inner nodes are relation
// projections and the connectives And / Or / Not.
struct QueryNode;
using QueryPtr = std::shared_ptr<const QueryNode>;

struct QueryNode {
  enum class Kind { Anchor, Proj, And, Or, Not };
  Kind kind = Kind::Anchor;
  int symbol = -1;  // entity id for Anchor, relation id for Proj
  std::vector<QueryPtr> children;
};

QueryPtr make_anchor(int entity);
QueryPtr make_proj(int rel, QueryPtr child);
QueryPtr make_and(std::vector<QueryPtr> children);   // arity >= 2
QueryPtr make_or(std::vector<QueryPtr> children);    // arity >= 2
QueryPtr make_not(QueryPtr child);

bool query_equal(const QueryPtr& a, const QueryPtr& b);

// Concrete syntax: (e NAME) | (p REL Q) | (and Q Q ...) | (or Q Q ...)
// | (not Q). A bare anchor is not a query by itself.
QueryPtr parse_query(const std::string& text, const Vocab& vocab);
std::string render_query(const QueryPtr& ast, const Vocab& vocab);

// One of 1p 2p 3p 2i 3i pi ip 2u up, or "other" for shapes outside the
// supported taxonomy.
std::string classify_query(const QueryPtr& ast);

// Anchor entities of the query in left-to-right order (with duplicates
// removed, first occurrence kept).
std::vector<int> query_anchors(const QueryPtr& ast);

// Crisp symbolic answers: Proj follows abox_ee edges, And/Or/Not are set
// intersection/union/complement. Result is sorted ascending.
std::vector<int> answer_entities(const KbIndex& index, const QueryPtr& ast);

// Concepts with at least one instance among the entity answers, through
// closure-augmented memberships. Sorted ascending.
std::vector<int> answer_concepts(const KbIndex& index,
                                 const std::vector<int>& entity_answers);

struct QueryInstance {
  QueryPtr ast;
  std::string qtype;
  std::vector<int> entity_answers;   // sorted ascending
  std::vector<int> concept_answers;  // sorted ascending
};

}  // namespace fuzzdl
