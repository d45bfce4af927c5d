#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lcnl/error.hpp"

namespace lcnl {

struct Alternative {
  std::string id;
  std::vector<std::string> covariates;
  bool outside_option = false;
};

/// A branch of the choice tree. A nest with a single member is degenerate: it
/// carries no utility of its own and its inclusive value is the member's
/// utility.
struct Nest {
  std::string id;
  std::vector<std::string> covariates;
  std::vector<Alternative> alternatives;

  bool degenerate() const noexcept { return alternatives.size() == 1; }
};

/// Two-level choice tree. Alternatives are also addressable by a flat index
/// that walks the nests in order.
class ChoiceTree {
 public:
  ChoiceTree() = default;

  explicit ChoiceTree(std::vector<Nest> nests) : nests_(std::move(nests)) {
    if (nests_.empty()) throw ModelError(ErrorKind::invalid_tree, "tree", "no nests");
    std::set<std::string> nest_ids;
    std::set<std::string> alt_ids;
    for (std::size_t n = 0; n < nests_.size(); ++n) {
      const Nest& nest = nests_[n];
      if (nest.id.empty()) throw ModelError(ErrorKind::invalid_tree, "nest", "empty nest id");
      if (!nest_ids.insert(nest.id).second)
        throw ModelError(ErrorKind::invalid_tree, nest.id, "duplicate nest id");
      if (nest.alternatives.empty())
        throw ModelError(ErrorKind::invalid_tree, nest.id, "nest has no alternatives");
      if (nest.degenerate() && !nest.covariates.empty())
        throw ModelError(ErrorKind::invalid_tree, nest.id,
                         "degenerate nest shares its alternative's utility and takes no covariates");
      check_unique(nest.covariates, nest.id);
      for (const Alternative& alt : nest.alternatives) {
        if (alt.id.empty()) throw ModelError(ErrorKind::invalid_tree, nest.id, "empty alternative id");
        if (!alt_ids.insert(alt.id).second)
          throw ModelError(ErrorKind::invalid_tree, alt.id, "duplicate alternative id");
        check_unique(alt.covariates, alt.id);
        if (alt.outside_option) {
          if (outside_) throw ModelError(ErrorKind::invalid_tree, alt.id, "more than one outside option");
          if (!nest.degenerate())
            throw ModelError(ErrorKind::invalid_tree, alt.id, "outside option must sit in a degenerate nest");
          if (!alt.covariates.empty())
            throw ModelError(ErrorKind::invalid_tree, alt.id, "outside option takes no covariates");
          outside_ = alt_nest_.size();
        }
        alt_nest_.push_back(n);
        flat_.push_back(&alt - nest.alternatives.data());
      }
    }
    for (std::size_t n = 0, m = 0; n < nests_.size(); ++n) {
      first_.push_back(m);
      m += nests_[n].alternatives.size();
    }
  }

  const std::vector<Nest>& nests() const noexcept { return nests_; }
  std::size_t nest_count() const noexcept { return nests_.size(); }
  std::size_t alternative_count() const noexcept { return alt_nest_.size(); }

  const Alternative& alternative(std::size_t m) const { return nests_[alt_nest_[m]].alternatives[flat_[m]]; }
  std::size_t nest_of(std::size_t m) const { return alt_nest_[m]; }
  /// Flat index of the first member of nest n; members are contiguous.
  std::size_t first_member(std::size_t n) const { return first_[n]; }
  std::optional<std::size_t> outside_option() const noexcept { return outside_; }

  std::optional<std::size_t> alternative_index(const std::string& id) const {
    for (std::size_t m = 0; m < alternative_count(); ++m)
      if (alternative(m).id == id) return m;
    return std::nullopt;
  }

  std::optional<std::size_t> nest_index(const std::string& id) const {
    for (std::size_t n = 0; n < nests_.size(); ++n)
      if (nests_[n].id == id) return n;
    return std::nullopt;
  }

  std::vector<std::string> alternative_ids() const {
    std::vector<std::string> ids;
    for (std::size_t m = 0; m < alternative_count(); ++m) ids.push_back(alternative(m).id);
    return ids;
  }

  /// Union of every covariate named anywhere in the tree, in order of first
  /// appearance (nest lists before their members).
  std::vector<std::string> covariates() const {
    std::vector<std::string> out;
    auto add = [&](const std::vector<std::string>& names) {
      for (const auto& name : names)
        if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    };
    for (const Nest& nest : nests_) {
      add(nest.covariates);
      for (const Alternative& alt : nest.alternatives) add(alt.covariates);
    }
    return out;
  }

 private:
  static void check_unique(const std::vector<std::string>& names, const std::string& owner) {
    std::set<std::string> seen;
    for (const auto& name : names)
      if (!seen.insert(name).second)
        throw ModelError(ErrorKind::invalid_tree, owner, "covariate '" + name + "' listed twice");
  }

  std::vector<Nest> nests_;
  std::vector<std::size_t> alt_nest_;
  std::vector<std::size_t> flat_;
  std::vector<std::size_t> first_;
  std::optional<std::size_t> outside_;
};

namespace canonical {

inline const std::vector<std::string>& covariates() {
  static const std::vector<std::string> names{"aksakal", "police", "kalym",      "income", "second_home",
                                              "vehicle", "loan",   "event_host", "employed"};
  return names;
}

}  // namespace canonical

/// Marriage-modality tree: a choice nest {love_marriage, mock_kidnapping}
/// and degenerate nests for arranged_marriage, bride_capture and forgo (the
/// outside option).
inline ChoiceTree build_canonical_tree() {
  const std::vector<std::string> capture = canonical::covariates();
  auto without = [&](std::initializer_list<const char*> drop) {
    std::vector<std::string> out;
    for (const auto& name : capture)
      if (std::none_of(drop.begin(), drop.end(), [&](const char* d) { return name == d; })) out.push_back(name);
    return out;
  };
  const auto arranged = without({"aksakal", "police"});
  const auto mock = without({"police"});
  const auto love = without({"aksakal", "police"});

  std::vector<Nest> nests;
  nests.push_back(Nest{"choice", mock, {Alternative{"love_marriage", love}, Alternative{"mock_kidnapping", mock}}});
  nests.push_back(Nest{"arranged", {}, {Alternative{"arranged_marriage", arranged}}});
  nests.push_back(Nest{"capture", {}, {Alternative{"bride_capture", capture}}});
  nests.push_back(Nest{"forgo", {}, {Alternative{"forgo", {}, true}}});
  return ChoiceTree(std::move(nests));
}

}  // namespace lcnl
