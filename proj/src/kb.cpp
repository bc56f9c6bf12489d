#include "fuzzdl/kb.hpp"

#include <algorithm>
#include <deque>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fuzzdl/errors.hpp"
#include "fuzzdl/rng.hpp"

namespace fuzzdl {

namespace {

// Calls fn(fields, line_no) for every data line; enforces the field count.
template <typename Fn>
void for_each_tsv_line(const std::string& path, std::size_t expected_fields,
                       Fn&& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != expected_fields) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                           std::to_string(expected_fields) +
                           " tab-separated fields, got " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (const auto& f : fields) {
      if (f.empty()) {
        throw ParseError(path + ":" + std::to_string(line_no) +
                             ": empty field",
                         line_no);
      }
    }
    fn(fields, line_no);
  }
}

void write_lines(const std::string& path,
                 const std::vector<std::string>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace

KnowledgeBase load_kb(const std::string& tbox_path,
                      const std::string& abox_ee_path,
                      const std::string& abox_ec_path) {
  KnowledgeBase kb;
  std::set<std::pair<int, int>> seen_tbox, seen_ec;
  std::set<Triple> seen_ee;

  for_each_tsv_line(tbox_path, 2, [&](const std::vector<std::string>& f, std::size_t) {
    int sub = kb.vocab.add(Vocab::Space::Concept, f[0]);
    int super = kb.vocab.add(Vocab::Space::Concept, f[1]);
    if (sub == super) return;  // self-subsumption carries no information
    if (seen_tbox.insert({sub, super}).second) kb.tbox.push_back({sub, super});
  });
  for_each_tsv_line(abox_ee_path, 3, [&](const std::vector<std::string>& f, std::size_t) {
    Triple t{kb.vocab.add(Vocab::Space::Entity, f[0]),
             kb.vocab.add(Vocab::Space::Relation, f[1]),
             kb.vocab.add(Vocab::Space::Entity, f[2])};
    if (seen_ee.insert(t).second) kb.abox_ee.push_back(t);
  });
  for_each_tsv_line(abox_ec_path, 2, [&](const std::vector<std::string>& f, std::size_t) {
    int e = kb.vocab.add(Vocab::Space::Entity, f[0]);
    int c = kb.vocab.add(Vocab::Space::Concept, f[1]);
    if (seen_ec.insert({e, c}).second) kb.abox_ec.push_back({e, c});
  });
  return kb;
}

void save_kb(const KnowledgeBase& kb, const std::string& tbox_path,
             const std::string& abox_ee_path, const std::string& abox_ec_path) {
  std::vector<std::string> lines;
  lines.reserve(kb.tbox.size());
  for (auto [sub, super] : kb.tbox) {
    lines.push_back(kb.vocab.concept_name(sub) + '\t' +
                    kb.vocab.concept_name(super));
  }
  write_lines(tbox_path, lines);

  lines.clear();
  for (const Triple& t : kb.abox_ee) {
    lines.push_back(kb.vocab.entity_name(t.head) + '\t' +
                    kb.vocab.relation_name(t.rel) + '\t' +
                    kb.vocab.entity_name(t.tail));
  }
  write_lines(abox_ee_path, lines);

  lines.clear();
  for (auto [e, c] : kb.abox_ec) {
    lines.push_back(kb.vocab.entity_name(e) + '\t' + kb.vocab.concept_name(c));
  }
  write_lines(abox_ec_path, lines);
}

KnowledgeBase filter_low_degree(const KnowledgeBase& kb, int threshold) {
  if (threshold < 0) throw DataError("degree threshold must be >= 0");
  const int n = kb.vocab.num_entities();
  std::vector<char> alive(n, 1);
  bool changed = true;
  while (changed) {
    changed = false;
    std::vector<int> degree(n, 0);
    for (const Triple& t : kb.abox_ee) {
      if (alive[t.head] && alive[t.tail]) {
        ++degree[t.head];
        ++degree[t.tail];  // a self-loop contributes 2
      }
    }
    for (auto [e, c] : kb.abox_ec) {
      if (alive[e]) ++degree[e];
    }
    for (int e = 0; e < n; ++e) {
      if (alive[e] && degree[e] < threshold) {
        alive[e] = 0;
        changed = true;
      }
    }
  }

  std::vector<int> remap(n, -1);
  KnowledgeBase out;
  for (int e = 0; e < n; ++e) {
    if (alive[e]) {
      remap[e] =
          out.vocab.add(Vocab::Space::Entity, kb.vocab.entity_name(e));
    }
  }
  if (out.vocab.num_entities() == 0) {
    throw DataError("degree filter (threshold " + std::to_string(threshold) +
                    ") removed every entity");
  }
  for (const auto& name : kb.vocab.concepts()) {
    out.vocab.add(Vocab::Space::Concept, name);
  }
  for (const auto& name : kb.vocab.relations()) {
    out.vocab.add(Vocab::Space::Relation, name);
  }
  out.tbox = kb.tbox;
  for (const Triple& t : kb.abox_ee) {
    if (alive[t.head] && alive[t.tail]) {
      out.abox_ee.push_back({remap[t.head], t.rel, remap[t.tail]});
    }
  }
  for (auto [e, c] : kb.abox_ec) {
    if (alive[e]) out.abox_ec.push_back({remap[e], c});
  }
  return out;
}

KbSplit split_abox(const KnowledgeBase& kb, double train_fraction,
                   std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw DataError("train fraction must be in (0, 1)");
  }
  const std::size_t n = kb.abox_ee.size();
  auto n_train = static_cast<std::size_t>(
      static_cast<double>(n) * train_fraction + 0.5);
  if (n_train == 0 || n_train >= n) {
    throw DataError("split fraction " + std::to_string(train_fraction) +
                    " yields an empty partition for " + std::to_string(n) +
                    " triples");
  }
  const std::size_t n_valid = (n - n_train) / 2;

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  // 0 = train, 1 = valid, 2 = test; emit each bucket in original order.
  std::vector<char> bucket(n, 2);
  for (std::size_t i = 0; i < n_train; ++i) bucket[order[i]] = 0;
  for (std::size_t i = n_train; i < n_train + n_valid; ++i) bucket[order[i]] = 1;

  KbSplit split;
  split.train.vocab = kb.vocab;
  split.train.tbox = kb.tbox;
  split.train.abox_ec = kb.abox_ec;
  for (std::size_t i = 0; i < n; ++i) {
    switch (bucket[i]) {
      case 0: split.train.abox_ee.push_back(kb.abox_ee[i]); break;
      case 1: split.valid_triples.push_back(kb.abox_ee[i]); break;
      default: split.test_triples.push_back(kb.abox_ee[i]); break;
    }
  }
  return split;
}

ClosureResult transductive_closure(
    const std::vector<std::pair<int, int>>& tbox, int num_concepts) {
  std::vector<std::vector<int>> supers(num_concepts);
  for (auto [sub, super] : tbox) supers.at(sub).push_back(super);

  ClosureResult result;
  for (int c = 0; c < num_concepts; ++c) {
    std::vector<char> visited(num_concepts, 0);
    std::deque<int> frontier(supers[c].begin(), supers[c].end());
    while (!frontier.empty()) {
      int s = frontier.front();
      frontier.pop_front();
      if (visited[s]) continue;
      visited[s] = 1;
      for (int next : supers[s]) {
        if (!visited[next]) frontier.push_back(next);
      }
    }
    if (visited[c]) {
      result.has_cycle = true;
      result.cycle_concepts.push_back(c);
    }
    for (int s = 0; s < num_concepts; ++s) {
      if (visited[s] && s != c) result.pairs.push_back({c, s});
    }
  }
  return result;
}

KnowledgeBase degrade_concepts(const KnowledgeBase& kb) {
  KnowledgeBase out;
  for (const auto& name : kb.vocab.entities()) {
    out.vocab.add(Vocab::Space::Entity, name);
  }
  const int base = out.vocab.num_entities();
  for (const auto& name : kb.vocab.concepts()) {
    out.vocab.add(Vocab::Space::Entity, name);
  }
  for (const auto& name : kb.vocab.relations()) {
    if (name == kInstanceRelationName) {
      throw DataError(std::string("relation name '") + kInstanceRelationName +
                      "' is reserved for concept degradation");
    }
    out.vocab.add(Vocab::Space::Relation, name);
  }
  const int r_ec = out.vocab.add(Vocab::Space::Relation, kInstanceRelationName);

  ClosureResult closure =
      transductive_closure(kb.tbox, kb.vocab.num_concepts());
  std::set<std::pair<int, int>> augmented(kb.abox_ec.begin(),
                                          kb.abox_ec.end());
  std::vector<std::vector<int>> supers(kb.vocab.num_concepts());
  for (auto [sub, super] : closure.pairs) supers[sub].push_back(super);
  for (auto [e, c] : kb.abox_ec) {
    for (int super : supers[c]) augmented.insert({e, super});
  }

  out.abox_ee = kb.abox_ee;
  for (auto [e, c] : augmented) {
    out.abox_ee.push_back({e, r_ec, base + c});
  }
  return out;
}

// ---------------------------------------------------------------------------

void save_split(const KbSplit& split, const SplitMeta& meta,
                const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "train", ec);
  fs::create_directories(fs::path(dir) / "valid", ec);
  fs::create_directories(fs::path(dir) / "test", ec);

  const auto& kb = split.train;
  save_kb(kb, (fs::path(dir) / "train" / "tbox.tsv").string(),
          (fs::path(dir) / "train" / "abox_ee.tsv").string(),
          (fs::path(dir) / "train" / "abox_ec.tsv").string());

  auto write_triples = [&](const std::vector<Triple>& triples,
                           const std::string& path) {
    std::vector<std::string> lines;
    lines.reserve(triples.size());
    for (const Triple& t : triples) {
      lines.push_back(kb.vocab.entity_name(t.head) + '\t' +
                      kb.vocab.relation_name(t.rel) + '\t' +
                      kb.vocab.entity_name(t.tail));
    }
    write_lines(path, lines);
  };
  write_triples(split.valid_triples,
                (fs::path(dir) / "valid" / "abox_ee.tsv").string());
  write_triples(split.test_triples,
                (fs::path(dir) / "test" / "abox_ee.tsv").string());

  kb.vocab.save((fs::path(dir) / "vocab.json").string());

  nlohmann::json j;
  j["degraded"] = meta.degraded;
  j["base_entities"] = meta.base_entities;
  j["seed"] = meta.seed;
  j["train_fraction"] = meta.train_fraction;
  j["degree_threshold"] = meta.degree_threshold;
  j["counts"] = {{"entities", kb.vocab.num_entities()},
                 {"concepts", kb.vocab.num_concepts()},
                 {"relations", kb.vocab.num_relations()},
                 {"tbox", kb.tbox.size()},
                 {"train_ee", kb.abox_ee.size()},
                 {"abox_ec", kb.abox_ec.size()},
                 {"valid_ee", split.valid_triples.size()},
                 {"test_ee", split.test_triples.size()}};
  std::ofstream out((fs::path(dir) / "meta.json").string(), std::ios::binary);
  if (!out) throw DataError("cannot write meta.json under " + dir);
  out << j.dump(2) << '\n';
}

LoadedSplit load_split(const std::string& dir) {
  namespace fs = std::filesystem;
  LoadedSplit loaded;
  loaded.split.train.vocab = Vocab::load((fs::path(dir) / "vocab.json").string());
  Vocab& vocab = loaded.split.train.vocab;

  {
    std::ifstream in((fs::path(dir) / "meta.json").string(), std::ios::binary);
    if (!in) throw DataError("cannot read meta.json under " + dir);
    nlohmann::json j;
    try {
      in >> j;
      loaded.meta.degraded = j.at("degraded").get<bool>();
      loaded.meta.base_entities = j.at("base_entities").get<int>();
      loaded.meta.seed = j.at("seed").get<std::uint64_t>();
      loaded.meta.train_fraction = j.at("train_fraction").get<double>();
      loaded.meta.degree_threshold = j.at("degree_threshold").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("bad meta.json: ") + e.what());
    }
  }

  // Names must already exist in vocab.json; resolve strictly.
  for_each_tsv_line((fs::path(dir) / "train" / "tbox.tsv").string(), 2,
                    [&](const std::vector<std::string>& f, std::size_t) {
                      loaded.split.train.tbox.push_back(
                          {vocab.require(Vocab::Space::Concept, f[0]),
                           vocab.require(Vocab::Space::Concept, f[1])});
                    });
  auto read_triples = [&](const std::string& path, std::vector<Triple>& dst) {
    for_each_tsv_line(path, 3,
                      [&](const std::vector<std::string>& f, std::size_t) {
                        dst.push_back(
                            {vocab.require(Vocab::Space::Entity, f[0]),
                             vocab.require(Vocab::Space::Relation, f[1]),
                             vocab.require(Vocab::Space::Entity, f[2])});
                      });
  };
  read_triples((fs::path(dir) / "train" / "abox_ee.tsv").string(),
               loaded.split.train.abox_ee);
  for_each_tsv_line((fs::path(dir) / "train" / "abox_ec.tsv").string(), 2,
                    [&](const std::vector<std::string>& f, std::size_t) {
                      loaded.split.train.abox_ec.push_back(
                          {vocab.require(Vocab::Space::Entity, f[0]),
                           vocab.require(Vocab::Space::Concept, f[1])});
                    });
  read_triples((fs::path(dir) / "valid" / "abox_ee.tsv").string(),
               loaded.split.valid_triples);
  read_triples((fs::path(dir) / "test" / "abox_ee.tsv").string(),
               loaded.split.test_triples);
  return loaded;
}

// ---------------------------------------------------------------------------

KbIndex::KbIndex(const KnowledgeBase& kb)
    : num_relations_(kb.vocab.num_relations()),
      triples_(kb.abox_ee),
      out_(kb.vocab.num_entities()),
      in_(kb.vocab.num_entities()),
      entity_concepts_(kb.vocab.num_entities()),
      concept_entities_(kb.vocab.num_concepts()),
      closure_(transductive_closure(kb.tbox, kb.vocab.num_concepts())) {
  for (const Triple& t : triples_) {
    out_[t.head].push_back({t.rel, t.tail});
    in_[t.tail].push_back({t.rel, t.head});
  }
  for (auto& v : out_) std::sort(v.begin(), v.end());
  for (auto& v : in_) std::sort(v.begin(), v.end());

  std::vector<std::vector<int>> supers(kb.vocab.num_concepts());
  for (auto [sub, super] : closure_.pairs) supers[sub].push_back(super);
  std::set<std::pair<int, int>> augmented(kb.abox_ec.begin(),
                                          kb.abox_ec.end());
  for (auto [e, c] : kb.abox_ec) {
    for (int super : supers[c]) augmented.insert({e, super});
  }
  for (auto [e, c] : augmented) {
    entity_concepts_[e].push_back(c);
    concept_entities_[c].push_back(e);
  }
  for (auto& v : entity_concepts_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  for (auto& v : concept_entities_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

std::vector<int> KbIndex::tails(int head, int rel) const {
  const auto& edges = out_.at(head);
  auto lo = std::lower_bound(edges.begin(), edges.end(),
                             std::pair<int, int>{rel, -1});
  std::vector<int> result;
  for (auto it = lo; it != edges.end() && it->first == rel; ++it) {
    result.push_back(it->second);
  }
  return result;
}

bool KbIndex::has_triple(int head, int rel, int tail) const {
  const auto& edges = out_.at(head);
  return std::binary_search(edges.begin(), edges.end(),
                            std::pair<int, int>{rel, tail});
}

}  // namespace fuzzdl
