#include "fuzzdl/sampler.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "fuzzdl/errors.hpp"

namespace fuzzdl {

namespace {

struct Edge {
  int rel = -1;
  int node = -1;  // neighbor on the other side
  bool operator==(const Edge&) const = default;
};

// Uniform random (relation, head) among edges entering `tail`.
bool random_in_edge(const KbIndex& index, Rng& rng, int tail, Edge& out) {
  const auto& edges = index.in(tail);
  if (edges.empty()) return false;
  auto [rel, head] = edges[rng.index(edges.size())];
  out = {rel, head};
  return true;
}

Triple random_triple(const KbIndex& index, Rng& rng) {
  return index.triples()[rng.index(index.triples().size())];
}

// One backward-walk attempt; returns nullptr when the walk cannot realize the
// requested shape from the drawn answer entity.
QueryPtr try_walk(const KbIndex& index, Rng& rng, const std::string& qtype) {
  if (qtype == "1p" || qtype == "2p" || qtype == "3p") {
    const int hops = qtype[0] - '0';
    Triple t = random_triple(index, rng);
    QueryPtr ast = make_proj(t.rel, make_anchor(t.head));
    int cur = t.head;
    std::vector<int> rels{t.rel};
    for (int i = 1; i < hops; ++i) {
      Edge e;
      if (!random_in_edge(index, rng, cur, e)) return nullptr;
      rels.push_back(e.rel);
      cur = e.node;
    }
    QueryPtr q = make_anchor(cur);
    for (auto it = rels.rbegin(); it != rels.rend(); ++it) {
      q = make_proj(*it, q);
    }
    return q;
  }
  if (qtype == "2i" || qtype == "3i") {
    const int k = qtype == "2i" ? 2 : 3;
    Triple t = random_triple(index, rng);
    std::vector<Edge> picked{{t.rel, t.head}};
    for (int i = 1; i < k; ++i) {
      Edge e;
      if (!random_in_edge(index, rng, t.tail, e)) return nullptr;
      if (std::find(picked.begin(), picked.end(), e) != picked.end()) {
        return nullptr;  // degenerate: branch repeats
      }
      picked.push_back(e);
    }
    std::vector<QueryPtr> branches;
    for (const Edge& e : picked) {
      branches.push_back(make_proj(e.rel, make_anchor(e.node)));
    }
    return make_and(std::move(branches));
  }
  if (qtype == "pi") {
    // (and (p r2 (p r1 (e a))) (p r3 (e b))) with the chain sharing answer t.
    Triple t = random_triple(index, rng);
    Edge hop1;
    if (!random_in_edge(index, rng, t.head, hop1)) return nullptr;
    Edge branch;
    if (!random_in_edge(index, rng, t.tail, branch)) return nullptr;
    QueryPtr chain =
        make_proj(t.rel, make_proj(hop1.rel, make_anchor(hop1.node)));
    QueryPtr one = make_proj(branch.rel, make_anchor(branch.node));
    return make_and({std::move(chain), std::move(one)});
  }
  if (qtype == "ip") {
    // (p r3 (and (p r1 (e a)) (p r2 (e b)))): t reached from a 2i answer m.
    Triple t = random_triple(index, rng);
    const int m = t.head;
    Edge e1, e2;
    if (!random_in_edge(index, rng, m, e1)) return nullptr;
    if (!random_in_edge(index, rng, m, e2)) return nullptr;
    if (e1 == e2) return nullptr;
    QueryPtr inter = make_and({make_proj(e1.rel, make_anchor(e1.node)),
                               make_proj(e2.rel, make_anchor(e2.node))});
    return make_proj(t.rel, std::move(inter));
  }
  if (qtype == "2u") {
    Triple a = random_triple(index, rng);
    Triple b = random_triple(index, rng);
    if (a.head == b.head && a.rel == b.rel) return nullptr;  // same branch
    return make_or({make_proj(a.rel, make_anchor(a.head)),
                    make_proj(b.rel, make_anchor(b.head))});
  }
  if (qtype == "up") {
    Triple t = random_triple(index, rng);
    Edge first;
    if (!random_in_edge(index, rng, t.head, first)) return nullptr;
    Triple other = random_triple(index, rng);
    if (other.head == first.node && other.rel == first.rel) return nullptr;
    QueryPtr uni = make_or({make_proj(first.rel, make_anchor(first.node)),
                            make_proj(other.rel, make_anchor(other.head))});
    return make_proj(t.rel, std::move(uni));
  }
  throw DataError("unknown query type '" + qtype + "'");
}

std::vector<QueryInstance> enumerate_1p(const KbIndex& index) {
  std::vector<QueryInstance> out;
  out.reserve(index.triples().size());
  for (const Triple& t : index.triples()) {
    QueryInstance inst;
    inst.ast = make_proj(t.rel, make_anchor(t.head));
    inst.qtype = "1p";
    inst.entity_answers = index.tails(t.head, t.rel);
    inst.concept_answers = answer_concepts(index, inst.entity_answers);
    out.push_back(std::move(inst));
  }
  return out;
}

// Structural fingerprint used to reject duplicate sampled queries.
void fingerprint(const QueryPtr& ast, std::string& out) {
  switch (ast->kind) {
    case QueryNode::Kind::Anchor:
      out += 'e';
      out += std::to_string(ast->symbol);
      return;
    case QueryNode::Kind::Proj:
      out += 'p';
      out += std::to_string(ast->symbol);
      out += '(';
      fingerprint(ast->children[0], out);
      out += ')';
      return;
    default:
      out += ast->kind == QueryNode::Kind::And
                 ? 'a'
                 : (ast->kind == QueryNode::Kind::Or ? 'o' : 'n');
      out += '(';
      for (const auto& child : ast->children) {
        fingerprint(child, out);
        out += ',';
      }
      out += ')';
  }
}

}  // namespace

std::vector<QueryInstance> sample_queries(const KbIndex& index,
                                          const SampleOptions& opts) {
  if (std::find(query_shapes().begin(), query_shapes().end(), opts.qtype) ==
      query_shapes().end()) {
    throw DataError("unknown query type '" + opts.qtype + "'");
  }
  if (opts.enumerate_1p) {
    if (opts.qtype != "1p") {
      throw DataError("enumeration mode applies to 1p queries only");
    }
    return enumerate_1p(index);
  }
  if (opts.n < 1) throw DataError("sample count must be >= 1");
  if (index.triples().empty()) {
    throw SamplerExhausted("knowledge base has no triples to sample from", 0,
                           opts.n);
  }

  Rng rng(opts.seed);
  std::vector<QueryInstance> out;
  std::set<std::string> seen;
  const long budget = 10L * opts.n;
  for (long attempt = 0; attempt < budget &&
                         out.size() < static_cast<std::size_t>(opts.n);
       ++attempt) {
    QueryPtr ast = try_walk(index, rng, opts.qtype);
    if (!ast) continue;
    std::string fp;
    fingerprint(ast, fp);
    if (seen.count(fp)) continue;

    std::vector<int> answers = answer_entities(index, ast);
    if (answers.empty() ||
        answers.size() > static_cast<std::size_t>(opts.max_answers)) {
      continue;
    }
    if (opts.hard_answer_baseline) {
      std::vector<int> easy =
          answer_entities(*opts.hard_answer_baseline, ast);
      std::vector<int> hard;
      std::set_difference(answers.begin(), answers.end(), easy.begin(),
                          easy.end(), std::back_inserter(hard));
      if (hard.empty()) continue;
    }

    QueryInstance inst;
    inst.ast = std::move(ast);
    inst.qtype = opts.qtype;
    inst.entity_answers = std::move(answers);
    inst.concept_answers = answer_concepts(index, inst.entity_answers);
    seen.insert(std::move(fp));
    out.push_back(std::move(inst));
  }
  if (out.size() < static_cast<std::size_t>(opts.n)) {
    throw SamplerExhausted(
        "sampler exhausted after " + std::to_string(budget) + " attempts: " +
            std::to_string(out.size()) + "/" + std::to_string(opts.n) + " " +
            opts.qtype + " instances",
        out.size(), opts.n);
  }
  return out;
}

void save_instances(const std::vector<QueryInstance>& instances,
                    const Vocab& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& inst : instances) {
    nlohmann::ordered_json j;
    j["qtype"] = inst.qtype;
    j["query"] = render_query(inst.ast, vocab);
    auto names = [&](const std::vector<int>& ids, bool concepts) {
      std::vector<std::string> out_names;
      out_names.reserve(ids.size());
      for (int id : ids) {
        out_names.push_back(concepts ? vocab.concept_name(id)
                                     : vocab.entity_name(id));
      }
      return out_names;
    };
    j["entity_answers"] = names(inst.entity_answers, false);
    j["concept_answers"] = names(inst.concept_answers, true);
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::vector<QueryInstance> load_instances(const std::string& path,
                                          const Vocab& vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::vector<QueryInstance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      QueryInstance inst;
      inst.qtype = j.at("qtype").get<std::string>();
      inst.ast = parse_query(j.at("query").get<std::string>(), vocab);
      for (const auto& name : j.at("entity_answers")) {
        inst.entity_answers.push_back(
            vocab.require(Vocab::Space::Entity, name.get<std::string>()));
      }
      for (const auto& name : j.at("concept_answers")) {
        inst.concept_answers.push_back(
            vocab.require(Vocab::Space::Concept, name.get<std::string>()));
      }
      std::sort(inst.entity_answers.begin(), inst.entity_answers.end());
      std::sort(inst.concept_answers.begin(), inst.concept_answers.end());
      out.push_back(std::move(inst));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(),
                       line_no);
    }
  }
  return out;
}

}  // namespace fuzzdl
