#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace fuzzdl {

// Dense integer ids for the three symbol namespaces. Entity, concept and
// relation names must be pairwise disjoint; ids are assigned in encounter
// order and are always 0..n-1.
class Vocab {
 public:
  enum class Space { Entity, Concept, Relation };

  int add(Space space, const std::string& name);         // get-or-create
  int require(Space space, const std::string& name) const;  // throws DataError
  std::optional<int> find(Space space, const std::string& name) const;

  const std::string& entity_name(int id) const { return entities_.at(id); }
  const std::string& concept_name(int id) const { return concepts_.at(id); }
  const std::string& relation_name(int id) const { return relations_.at(id); }

  int num_entities() const { return static_cast<int>(entities_.size()); }
  int num_concepts() const { return static_cast<int>(concepts_.size()); }
  int num_relations() const { return static_cast<int>(relations_.size()); }

  const std::vector<std::string>& entities() const { return entities_; }
  const std::vector<std::string>& concepts() const { return concepts_; }
  const std::vector<std::string>& relations() const { return relations_; }

  bool operator==(const Vocab& other) const {
    return entities_ == other.entities_ && concepts_ == other.concepts_ &&
           relations_ == other.relations_;
  }

  std::string to_json() const;
  static Vocab from_json(const std::string& text);
  void save(const std::string& path) const;
  static Vocab load(const std::string& path);

 private:
  std::vector<std::string>& names(Space s);
  const std::vector<std::string>& names(Space s) const;
  std::unordered_map<std::string, int>& ids(Space s);
  const std::unordered_map<std::string, int>& ids(Space s) const;

  std::vector<std::string> entities_, concepts_, relations_;
  std::unordered_map<std::string, int> entity_ids_, concept_ids_, relation_ids_;
};

const char* to_string(Vocab::Space s);

}  // namespace fuzzdl
