#include "fuzzdl/vocab.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fuzzdl/errors.hpp"

namespace fuzzdl {

const char* to_string(Vocab::Space s) {
  switch (s) {
    case Vocab::Space::Entity: return "entity";
    case Vocab::Space::Concept: return "concept";
    case Vocab::Space::Relation: return "relation";
  }
  return "?";
}

std::vector<std::string>& Vocab::names(Space s) {
  switch (s) {
    case Space::Entity: return entities_;
    case Space::Concept: return concepts_;
    default: return relations_;
  }
}

const std::vector<std::string>& Vocab::names(Space s) const {
  return const_cast<Vocab*>(this)->names(s);
}

std::unordered_map<std::string, int>& Vocab::ids(Space s) {
  switch (s) {
    case Space::Entity: return entity_ids_;
    case Space::Concept: return concept_ids_;
    default: return relation_ids_;
  }
}

const std::unordered_map<std::string, int>& Vocab::ids(Space s) const {
  return const_cast<Vocab*>(this)->ids(s);
}

int Vocab::add(Space space, const std::string& name) {
  if (name.empty()) throw DataError("empty symbol name");
  // Names travel through TSV files and the s-expression query syntax, so
  // whitespace and parentheses would make them unparseable.
  if (name.find_first_of(" \t\n\r\f\v()") != std::string::npos ||
      name[0] == '#') {
    throw DataError("symbol name '" + name +
                    "' contains whitespace, parentheses, or a leading '#'");
  }
  auto& table = ids(space);
  auto it = table.find(name);
  if (it != table.end()) return it->second;
  // Enforce disjointness across the three namespaces.
  for (Space other : {Space::Entity, Space::Concept, Space::Relation}) {
    if (other == space) continue;
    if (ids(other).count(name)) {
      throw DataError("symbol '" + name + "' already used as " +
                      to_string(other) + ", cannot also be " +
                      to_string(space));
    }
  }
  int id = static_cast<int>(names(space).size());
  names(space).push_back(name);
  table.emplace(name, id);
  return id;
}

int Vocab::require(Space space, const std::string& name) const {
  auto it = ids(space).find(name);
  if (it == ids(space).end()) {
    throw DataError(std::string("unknown ") + to_string(space) + " '" + name +
                    "'");
  }
  return it->second;
}

std::optional<int> Vocab::find(Space space, const std::string& name) const {
  auto it = ids(space).find(name);
  if (it == ids(space).end()) return std::nullopt;
  return it->second;
}

std::string Vocab::to_json() const {
  nlohmann::json j;
  j["entities"] = entities_;
  j["concepts"] = concepts_;
  j["relations"] = relations_;
  return j.dump(2);
}

Vocab Vocab::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad vocab json: ") + e.what());
  }
  Vocab v;
  try {
    for (const auto& n : j.at("entities")) v.add(Space::Entity, n.get<std::string>());
    for (const auto& n : j.at("concepts")) v.add(Space::Concept, n.get<std::string>());
    for (const auto& n : j.at("relations")) v.add(Space::Relation, n.get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad vocab json: ") + e.what());
  }
  return v;
}

void Vocab::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << to_json() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

Vocab Vocab::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace fuzzdl
