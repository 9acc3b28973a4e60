#include "cvemap/taxonomy.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "cvemap/errors.hpp"
#include "json.hpp"

namespace cvemap {

using nlohmann::json;

namespace {

struct ClassRow {
  int id;
  const char* name;
  Group group;
  const char* definition;
};

// Canonical class list. Ids 6 and 14 are impact-style capabilities (the
// attacker corrupts or leaks memory as a side effect rather than performing a
// controlled action); everything else is a direct action.
constexpr ClassRow kDefaultClasses[] = {
    {1, "Create Account", Group::action,
     "Gain the ability to create a new user account on the target."},
    {2, "Create Or Upload File", Group::action,
     "Gain the ability to create a new file or upload a file to the target."},
    {3, "Delete Files", Group::action,
     "Gain the ability to delete files on the target."},
    {4, "Disable Protections", Group::action,
     "Gain the ability to turn off defensive features or protection tooling."},
    {5, "Install App", Group::action,
     "Gain the ability to install an application or other software package."},
    {6, "Memory Modification", Group::impact,
     "Corrupt target memory in an uncontrolled way, e.g. through an overflow."},
    {7, "Password Reset", Group::action,
     "Gain the ability to reset or change another user's password."},
    {8, "Change Ownership or Permissions", Group::action,
     "Gain the ability to change resource ownership or permission bits."},
    {9, "Modify Configuration", Group::action,
     "Gain the ability to alter system or application configuration."},
    {10, "Obtain Sensitive Information - Other Data", Group::action,
     "Gain access to sensitive data other than credentials."},
    {11, "Obtain Sensitive Information - Credentials", Group::action,
     "Gain access to passwords or other authentication material."},
    {12, "Read From Memory", Group::action,
     "Gain the ability to read chosen process or kernel memory."},
    {13, "Read Files", Group::action,
     "Gain the ability to read files on the target."},
    {14, "Memory Read", Group::impact,
     "Leak memory contents in an uncontrolled way, e.g. through an over-read."},
    {15, "Restart Or Reboot", Group::action,
     "Force a restart or reboot of a system or service."},
    {16, "Write To Existing File", Group::action,
     "Gain the ability to write to a file that already exists."},
};

Group parse_group(const std::string& s) {
  if (s == "action") return Group::action;
  if (s == "impact") return Group::impact;
  throw LoadError("unknown group '" + s + "' (expected action|impact)");
}

RelationKind parse_kind(const std::string& s) {
  if (s == "Inheritance" || s == "inheritance") return RelationKind::Inheritance;
  if (s == "StrongCommonality" || s == "strong")
    return RelationKind::StrongCommonality;
  if (s == "WeakCommonality" || s == "weak")
    return RelationKind::WeakCommonality;
  throw LoadError("unknown relation kind '" + s + "'");
}

constexpr unsigned char kNone = 0, kInher = 1, kStrong = 2, kWeak = 3;

unsigned char code_of(RelationKind k) {
  switch (k) {
    case RelationKind::Inheritance: return kInher;
    case RelationKind::StrongCommonality: return kStrong;
    case RelationKind::WeakCommonality: return kWeak;
  }
  return kNone;
}

}  // namespace

const char* to_string(RelationKind k) {
  switch (k) {
    case RelationKind::Inheritance: return "Inheritance";
    case RelationKind::StrongCommonality: return "StrongCommonality";
    case RelationKind::WeakCommonality: return "WeakCommonality";
  }
  return "?";
}

const char* to_string(Group g) {
  return g == Group::impact ? "impact" : "action";
}

Taxonomy Taxonomy::build(std::map<int, Functionality> funcs,
                         std::vector<DependencyRelation> base,
                         std::vector<std::pair<int, int>> aliases) {
  Taxonomy t;
  t.funcs_ = std::move(funcs);
  t.base_ = std::move(base);
  t.merge_aliases_ = std::move(aliases);

  for (int id = 1; id <= kNumClasses; ++id)
    if (!t.funcs_.count(id))
      throw LoadError("taxonomy is missing class id " + std::to_string(id));
  if (t.funcs_.size() != static_cast<std::size_t>(kNumClasses))
    throw LoadError("taxonomy must define exactly " +
                    std::to_string(kNumClasses) + " classes, got " +
                    std::to_string(t.funcs_.size()));

  std::set<std::string> names;
  for (const auto& [id, f] : t.funcs_) {
    if (f.name.empty())
      throw LoadError("class " + std::to_string(id) + " has an empty name");
    if (!names.insert(f.name).second)
      throw LoadError("duplicate class name '" + f.name + "'");
    const bool impact = id == 6 || id == 14;
    if ((f.group == Group::impact) != impact)
      throw LoadError("class " + std::to_string(id) + " must have group " +
                      (impact ? "impact" : "action"));
    if (f.technique_ids.empty())
      t.warnings_.push_back("class " + std::to_string(id) + " (" + f.name +
                            ") has no technique mapping");
  }

  for (const auto& r : t.base_) {
    if (r.source_id == r.target_id)
      throw LoadError("relation source equals target (id " +
                      std::to_string(r.source_id) + ")");
    if (r.source_id < 1 || r.source_id > kNumClasses || r.target_id < 1 ||
        r.target_id > kNumClasses)
      throw LoadError("relation references unknown class id");
  }

  t.compute_closure();
  return t;
}

void Taxonomy::compute_closure() {
  for (auto& row : closure_) row.fill(kNone);

  auto set_base = [this](int a, int b, unsigned char code) {
    if (closure_[a][b] != kNone && closure_[a][b] != code)
      throw LoadError("conflicting base relations between " +
                      std::to_string(a) + " and " + std::to_string(b));
    closure_[a][b] = code;
  };
  for (const auto& r : base_) {
    const unsigned char code = code_of(r.kind);
    set_base(r.source_id, r.target_id, code);
    if (r.kind != RelationKind::Inheritance)
      set_base(r.target_id, r.source_id, code);
  }

  // Derivation rule: a parent's strong commonality transfers to its
  // children. Applied to fixpoint; a base relation is never overwritten.
  bool changed = true;
  while (changed) {
    changed = false;
    for (int p = 1; p <= kNumClasses; ++p) {
      for (int c = 1; c <= kNumClasses; ++c) {
        if (closure_[p][c] != kInher) continue;
        for (int x = 1; x <= kNumClasses; ++x) {
          if (closure_[p][x] != kStrong || x == c) continue;
          if (closure_[c][x] == kNone && closure_[x][c] == kNone) {
            closure_[c][x] = kStrong;
            closure_[x][c] = kStrong;
            changed = true;
          }
        }
      }
    }
  }
}

const Functionality& Taxonomy::functionality(int id) const {
  check_id(id);
  return funcs_.at(id);
}

void Taxonomy::check_id(int id) const {
  if (!funcs_.count(id))
    throw ValidationError("unknown functionality id " + std::to_string(id));
}

std::optional<RelationKind> Taxonomy::relation(int a, int b) const {
  check_id(a);
  check_id(b);
  if (a == b) return std::nullopt;
  switch (closure_[a][b]) {
    case kInher: return RelationKind::Inheritance;
    case kStrong: return RelationKind::StrongCommonality;
    case kWeak: return RelationKind::WeakCommonality;
    default: return std::nullopt;
  }
}

bool Taxonomy::related(int a, int b) const {
  return relation(a, b).has_value() || relation(b, a).has_value();
}

std::vector<std::string> Taxonomy::techniques_for(int id) const {
  check_id(id);
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& t : funcs_.at(id).technique_ids)
    if (seen.insert(t).second) out.push_back(t);
  return out;
}

Taxonomy Taxonomy::built_in_default() {
  std::map<int, Functionality> funcs;
  for (const auto& row : kDefaultClasses) {
    Functionality f;
    f.id = row.id;
    f.name = row.name;
    f.definition = row.definition;
    f.group = row.group;
    // Stub mapping: only the data-theft pair has an agreed technique; ids 10
    // and 12 intentionally share the identical list.
    if (row.id == 10 || row.id == 12) f.technique_ids = {"T1005"};
    funcs[row.id] = std::move(f);
  }
  std::vector<DependencyRelation> base = {
      {12, 13, RelationKind::Inheritance},
      {12, 14, RelationKind::Inheritance},
      {10, 12, RelationKind::StrongCommonality},
      {5, 9, RelationKind::StrongCommonality},
      {10, 11, RelationKind::WeakCommonality},
  };
  return build(std::move(funcs), std::move(base), {});
}

Taxonomy Taxonomy::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw LoadError(std::string("taxonomy parse failure: ") + e.what());
  }
  if (!j.is_object() || !j.contains("functionalities"))
    throw LoadError("taxonomy file must contain a 'functionalities' array");

  std::map<int, Functionality> funcs;
  for (const auto& jf : j.at("functionalities")) {
    Functionality f;
    if (!jf.contains("id") || !jf.at("id").is_number_integer())
      throw LoadError("functionality entry missing integer 'id'");
    f.id = jf.at("id").get<int>();
    if (funcs.count(f.id))
      throw LoadError("duplicate class id " + std::to_string(f.id));
    f.name = jf.value("name", "");
    f.definition = jf.value("definition", "");
    f.group = parse_group(jf.value("group", "action"));
    for (const auto& t : jf.value("techniques", json::array()))
      f.technique_ids.push_back(t.get<std::string>());
    funcs[f.id] = std::move(f);
  }

  std::vector<DependencyRelation> base;
  for (const auto& jr : j.value("relations", json::array())) {
    DependencyRelation r;
    r.source_id = jr.at("source").get<int>();
    r.target_id = jr.at("target").get<int>();
    r.kind = parse_kind(jr.at("kind").get<std::string>());
    base.push_back(r);
  }

  std::vector<std::pair<int, int>> aliases;
  for (const auto& ja : j.value("merge_aliases", json::array())) {
    if (!ja.is_array() || ja.size() != 2)
      throw LoadError("merge_aliases entries must be [id, id] pairs");
    aliases.emplace_back(ja[0].get<int>(), ja[1].get<int>());
  }

  return build(std::move(funcs), std::move(base), std::move(aliases));
}

Taxonomy Taxonomy::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open taxonomy file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json_text(ss.str());
}

std::string Taxonomy::to_json_text() const {
  json j;
  j["functionalities"] = json::array();
  for (const auto& [id, f] : funcs_) {
    json jf;
    jf["id"] = id;
    jf["name"] = f.name;
    jf["definition"] = f.definition;
    jf["group"] = to_string(f.group);
    jf["techniques"] = f.technique_ids;
    j["functionalities"].push_back(jf);
  }
  j["relations"] = json::array();
  for (const auto& r : base_) {
    json jr;
    jr["source"] = r.source_id;
    jr["target"] = r.target_id;
    jr["kind"] = to_string(r.kind);
    j["relations"].push_back(jr);
  }
  if (!merge_aliases_.empty()) {
    j["merge_aliases"] = json::array();
    for (const auto& [a, b] : merge_aliases_)
      j["merge_aliases"].push_back(json::array({a, b}));
  }
  return j.dump(2);
}

}  // namespace cvemap
