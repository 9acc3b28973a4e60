#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cvemap {

inline constexpr int kNumClasses = 16;

enum class Group { action, impact };

enum class RelationKind { Inheritance, StrongCommonality, WeakCommonality };

const char* to_string(RelationKind k);
const char* to_string(Group g);

struct Functionality {
  int id = 0;
  std::string name;
  std::string definition;
  Group group = Group::action;
  std::vector<std::string> technique_ids;
};

// Inheritance is directed source->target (parent->child); commonality kinds
// are symmetric and stored once.
struct DependencyRelation {
  int source_id = 0;
  int target_id = 0;
  RelationKind kind = RelationKind::StrongCommonality;
};

// The 16-class capability taxonomy with pairwise dependency relations.
// Immutable after construction; the relation closure is precomputed.
class Taxonomy {
public:
  // The bundled default: canonical class set, the five base relations, and
  // the shared technique stub for ids 10/12.
  static Taxonomy built_in_default();

  static Taxonomy load(const std::string& path);
  static Taxonomy from_json_text(const std::string& text);

  const std::map<int, Functionality>& functionalities() const { return funcs_; }
  const Functionality& functionality(int id) const;
  const std::vector<DependencyRelation>& base_relations() const {
    return base_;
  }
  const std::vector<std::pair<int, int>>& merge_aliases() const {
    return merge_aliases_;
  }
  const std::vector<std::string>& warnings() const { return warnings_; }

  // Base relation if present, else the derived relation from closure; none
  // when unrelated or a == b. Inheritance answers only parent->child.
  std::optional<RelationKind> relation(int a, int b) const;

  // True when relation(a,b) or relation(b,a) holds; used by confusion
  // analysis where direction is irrelevant.
  bool related(int a, int b) const;

  // Configured technique ids, order preserved, deduplicated.
  std::vector<std::string> techniques_for(int id) const;

  std::string to_json_text() const;

private:
  Taxonomy() = default;
  static Taxonomy build(std::map<int, Functionality> funcs,
                        std::vector<DependencyRelation> base,
                        std::vector<std::pair<int, int>> aliases);
  void compute_closure();
  void check_id(int id) const;

  std::map<int, Functionality> funcs_;
  std::vector<DependencyRelation> base_;
  std::vector<std::pair<int, int>> merge_aliases_;
  std::vector<std::string> warnings_;
  // closure_[a][b]: 0 none, 1 Inheritance (a parent of b), 2 Strong, 3 Weak.
  std::array<std::array<unsigned char, kNumClasses + 1>, kNumClasses + 1>
      closure_{};
};

}  // namespace cvemap
