#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lcnl/choice_tree.hpp"
#include "lcnl/error.hpp"

namespace lcnl {

/// Sign or value restriction attached to one coefficient.
struct Constraint {
  enum class Kind { free, nonneg, nonpos, fixed };

  Kind kind = Kind::free;
  double value = 0.0;

  static Constraint unrestricted() { return {}; }
  static Constraint nonneg() { return {Kind::nonneg, 0.0}; }
  static Constraint nonpos() { return {Kind::nonpos, 0.0}; }
  static Constraint fixed(double v) { return {Kind::fixed, v}; }

  bool is_fixed() const noexcept { return kind == Kind::fixed; }

  bool admits(double x) const noexcept {
    switch (kind) {
      case Kind::free: return std::isfinite(x);
      case Kind::nonneg: return x >= 0.0;
      case Kind::nonpos: return x <= 0.0;
      case Kind::fixed: return x == value;
    }
    return false;
  }

  std::string str() const {
    switch (kind) {
      case Kind::free: return "free";
      case Kind::nonneg: return "nonneg";
      case Kind::nonpos: return "nonpos";
      case Kind::fixed: {
        char buf[64];
        std::snprintf(buf, sizeof buf, "fixed(%.17g)", value);
        return buf;
      }
    }
    return "free";
  }

  static Constraint parse(const std::string& s) {
    if (s == "free") return unrestricted();
    if (s == "nonneg") return nonneg();
    if (s == "nonpos") return nonpos();
    if (s.rfind("fixed(", 0) == 0 && s.back() == ')') {
      try {
        return fixed(std::stod(s.substr(6, s.size() - 7)));
      } catch (const std::exception&) {
      }
    }
    throw ModelError(ErrorKind::parse_error, s, "unknown constraint tag");
  }

  bool operator==(const Constraint&) const = default;
};

/// Intercept followed by one coefficient per covariate (or predictor).
struct CoefficientBlock {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<Constraint> tags;

  std::size_t size() const noexcept { return names.size(); }
  bool empty() const noexcept { return names.empty(); }

  static CoefficientBlock over(const std::vector<std::string>& covariates) {
    CoefficientBlock b;
    b.names.push_back("intercept");
    b.names.insert(b.names.end(), covariates.begin(), covariates.end());
    b.values.assign(b.names.size(), 0.0);
    b.tags.assign(b.names.size(), Constraint{});
    return b;
  }

  double& operator[](const std::string& name) {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return values[k];
    throw ModelError(ErrorKind::unknown_variable, name, "no such coefficient in block");
  }
};

struct ModelSpec {
  ChoiceTree tree;
  std::size_t classes = 1;
  std::vector<std::string> predictors;
};

/// Every coefficient of the model, by name, with its restriction.
struct ParameterSet {
  std::size_t classes = 0;
  std::vector<std::vector<CoefficientBlock>> nest;         // [class][nest]; empty for degenerate nests
  std::vector<std::vector<CoefficientBlock>> alternative;  // [class][flat alternative]
  std::vector<CoefficientBlock> membership;                // [class]
  std::vector<double> dissimilarity;                       // [nest]
  std::vector<Constraint> dissimilarity_tags;              // [nest]
};

struct ParameterOptions {
  /// Fix the last class's membership row at zero.
  bool reference_class = true;
  /// Fix every nest-utility coefficient (intercept included) at zero.
  bool fix_nest_coefficients = false;
  /// Estimate the per-nest dissimilarity scalar instead of holding it at 1.
  bool free_dissimilarity = false;
  /// Predictor name -> +1 (nonneg) or -1 (nonpos) for the first class's
  /// membership row; the other non-reference rows get the opposite sign.
  std::map<std::string, int> predictor_signs;
};

/// All-zero parameters (dissimilarity 1) shaped for `spec`, with tags set
/// from `options`. The outside option's intercept is fixed at zero.
inline ParameterSet make_parameter_set(const ModelSpec& spec, const ParameterOptions& options = {}) {
  if (spec.classes == 0) throw ModelError(ErrorKind::invalid_parameters, "classes", "class count must be >= 1");
  const ChoiceTree& tree = spec.tree;
  ParameterSet p;
  p.classes = spec.classes;
  p.nest.resize(spec.classes);
  p.alternative.resize(spec.classes);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (const Nest& nest : tree.nests()) {
      CoefficientBlock b;
      if (!nest.degenerate()) {
        b = CoefficientBlock::over(nest.covariates);
        if (options.fix_nest_coefficients) b.tags.assign(b.size(), Constraint::fixed(0.0));
      }
      p.nest[c].push_back(std::move(b));
    }
    for (std::size_t m = 0; m < tree.alternative_count(); ++m) {
      const Alternative& alt = tree.alternative(m);
      CoefficientBlock b = CoefficientBlock::over(alt.covariates);
      if (alt.outside_option) b.tags.assign(b.size(), Constraint::fixed(0.0));
      p.alternative[c].push_back(std::move(b));
    }
    CoefficientBlock theta = CoefficientBlock::over(spec.predictors);
    const bool reference = options.reference_class && spec.classes > 1 && c + 1 == spec.classes;
    if (reference || spec.classes == 1) {
      theta.tags.assign(theta.size(), Constraint::fixed(0.0));
    } else {
      for (const auto& [name, sign] : options.predictor_signs) {
        for (std::size_t k = 1; k < theta.size(); ++k) {
          if (theta.names[k] != name) continue;
          const int s = c == 0 ? sign : -sign;
          theta.tags[k] = s > 0 ? Constraint::nonneg() : Constraint::nonpos();
        }
      }
    }
    p.membership.push_back(std::move(theta));
  }
  for (const Nest& nest : tree.nests()) {
    p.dissimilarity.push_back(1.0);
    p.dissimilarity_tags.push_back(options.free_dissimilarity && !nest.degenerate()
                                       ? Constraint::nonneg()
                                       : Constraint::fixed(1.0));
  }
  return p;
}

enum class BlockKind { nest, alternative, membership, dissimilarity };

/// Where one flat coordinate lives in the named structure.
struct Slot {
  BlockKind kind;
  std::size_t cls = 0;
  std::size_t owner = 0;  // nest or flat alternative index; unused for membership
  std::size_t coef = 0;
  std::string label;
};

/// Offset of a block's intercept in the flat vector plus the design columns
/// its slopes multiply.
struct BlockRef {
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();
  std::size_t offset = npos;
  std::vector<std::size_t> columns;

  bool present() const noexcept { return offset != npos; }
};

/// Packing map between ParameterSet and the flat coefficient vector. Order:
/// for each class, non-degenerate nests then alternatives (tree order); then
/// the membership rows; then one dissimilarity per non-degenerate nest.
class Layout {
 public:
  Layout() = default;

  explicit Layout(ModelSpec spec) : spec_(std::move(spec)) {
    if (spec_.classes == 0) throw ModelError(ErrorKind::invalid_parameters, "classes", "class count must be >= 1");
    const ChoiceTree& tree = spec_.tree;
    covariates_ = tree.covariates();
    auto column = [&](const std::string& name) {
      return static_cast<std::size_t>(std::find(covariates_.begin(), covariates_.end(), name) - covariates_.begin());
    };
    auto block = [&](BlockKind kind, std::size_t c, std::size_t owner, const std::string& owner_name,
                     const std::vector<std::string>& names, bool design_columns) {
      BlockRef ref;
      ref.offset = slots_.size();
      for (std::size_t k = 0; k <= names.size(); ++k) {
        const std::string coef = k == 0 ? "intercept" : names[k - 1];
        slots_.push_back(Slot{kind, c, owner, k, "c" + std::to_string(c + 1) + "/" + owner_name + "/" + coef});
        if (k > 0) ref.columns.push_back(design_columns ? column(names[k - 1]) : k - 1);
      }
      return ref;
    };
    classes_.resize(spec_.classes);
    for (std::size_t c = 0; c < spec_.classes; ++c) {
      ClassBlocks& cb = classes_[c];
      cb.nests.resize(tree.nest_count());
      for (std::size_t n = 0; n < tree.nest_count(); ++n) {
        const Nest& nest = tree.nests()[n];
        if (!nest.degenerate())
          cb.nests[n] = block(BlockKind::nest, c, n, "nest:" + nest.id, nest.covariates, true);
      }
      for (std::size_t m = 0; m < tree.alternative_count(); ++m) {
        const Alternative& alt = tree.alternative(m);
        cb.alternatives.push_back(block(BlockKind::alternative, c, m, alt.id, alt.covariates, true));
      }
    }
    for (std::size_t c = 0; c < spec_.classes; ++c)
      classes_[c].membership = block(BlockKind::membership, c, 0, "membership", spec_.predictors, false);
    dissimilarity_.assign(tree.nest_count(), BlockRef::npos);
    for (std::size_t n = 0; n < tree.nest_count(); ++n) {
      if (tree.nests()[n].degenerate()) continue;
      dissimilarity_[n] = slots_.size();
      slots_.push_back(Slot{BlockKind::dissimilarity, 0, n, 0, "dissimilarity/" + tree.nests()[n].id});
    }
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  const ChoiceTree& tree() const noexcept { return spec_.tree; }
  std::size_t classes() const noexcept { return spec_.classes; }
  std::size_t size() const noexcept { return slots_.size(); }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  /// Design columns: union of tree covariates.
  const std::vector<std::string>& covariates() const noexcept { return covariates_; }
  const std::vector<std::string>& predictors() const noexcept { return spec_.predictors; }

  const BlockRef& alternative(std::size_t c, std::size_t m) const { return classes_[c].alternatives[m]; }
  const BlockRef& nest(std::size_t c, std::size_t n) const { return classes_[c].nests[n]; }
  const BlockRef& membership(std::size_t c) const { return classes_[c].membership; }
  /// Flat index of nest n's dissimilarity, or npos for degenerate nests.
  std::size_t dissimilarity(std::size_t n) const { return dissimilarity_[n]; }

  std::vector<std::string> labels() const {
    std::vector<std::string> out;
    for (const Slot& s : slots_) out.push_back(s.label);
    return out;
  }

  std::vector<double> pack(const ParameterSet& p) const {
    check_shape(p);
    std::vector<double> flat(size());
    for (std::size_t i = 0; i < slots_.size(); ++i) flat[i] = value_at(p, slots_[i]);
    return flat;
  }

  std::vector<Constraint> tags(const ParameterSet& p) const {
    check_shape(p);
    std::vector<Constraint> out(size());
    for (std::size_t i = 0; i < slots_.size(); ++i) out[i] = tag_at(p, slots_[i]);
    return out;
  }

  /// Writes `flat` into a copy of `shape` (tags and names are kept).
  ParameterSet unpack(std::span<const double> flat, const ParameterSet& shape) const {
    check_shape(shape);
    if (flat.size() != size())
      throw ModelError(ErrorKind::dimension_mismatch, "flat parameters",
                       "expected " + std::to_string(size()) + " values, got " + std::to_string(flat.size()));
    ParameterSet p = shape;
    for (std::size_t i = 0; i < slots_.size(); ++i) value_ref(p, slots_[i]) = flat[i];
    return p;
  }

  /// Dimension and name agreement with the tree and predictor list.
  void check_shape(const ParameterSet& p) const {
    const ChoiceTree& tree = spec_.tree;
    auto fail = [](const std::string& what, const std::string& detail) {
      throw ModelError(ErrorKind::dimension_mismatch, what, detail);
    };
    if (p.classes != spec_.classes || p.nest.size() != p.classes || p.alternative.size() != p.classes ||
        p.membership.size() != p.classes)
      fail("parameter set", "class count disagrees with model (" + std::to_string(spec_.classes) + ")");
    if (p.dissimilarity.size() != tree.nest_count() || p.dissimilarity_tags.size() != tree.nest_count())
      fail("dissimilarity", "one value per nest expected");
    auto check_block = [&](const CoefficientBlock& b, const std::vector<std::string>& covs, const std::string& who) {
      if (b.size() != covs.size() + 1 || b.values.size() != b.size() || b.tags.size() != b.size())
        fail(who, "expected intercept + " + std::to_string(covs.size()) + " coefficients");
      for (std::size_t k = 0; k < covs.size(); ++k)
        if (b.names[k + 1] != covs[k]) fail(who, "coefficient '" + b.names[k + 1] + "' where '" + covs[k] + "' expected");
    };
    for (std::size_t c = 0; c < p.classes; ++c) {
      if (p.nest[c].size() != tree.nest_count()) fail("nest blocks", "one block per nest expected");
      if (p.alternative[c].size() != tree.alternative_count()) fail("alternative blocks", "one block per alternative expected");
      for (std::size_t n = 0; n < tree.nest_count(); ++n) {
        const Nest& nest = tree.nests()[n];
        if (nest.degenerate()) {
          if (!p.nest[c][n].empty()) fail("nest:" + nest.id, "degenerate nest takes no coefficients");
        } else {
          check_block(p.nest[c][n], nest.covariates, "nest:" + nest.id);
        }
      }
      for (std::size_t m = 0; m < tree.alternative_count(); ++m)
        check_block(p.alternative[c][m], tree.alternative(m).covariates, tree.alternative(m).id);
      check_block(p.membership[c], spec_.predictors, "membership");
    }
  }

  /// Shape check plus: every value satisfies its tag and the outside option
  /// is pinned at zero.
  void check_consistent(const ParameterSet& p) const {
    const auto flat = pack(p);
    const auto t = tags(p);
    for (std::size_t i = 0; i < flat.size(); ++i)
      if (!t[i].admits(flat[i]))
        throw ModelError(ErrorKind::invalid_parameters, slots_[i].label,
                         "value " + std::to_string(flat[i]) + " violates " + t[i].str());
    if (auto o = spec_.tree.outside_option())
      for (std::size_t c = 0; c < p.classes; ++c)
        for (std::size_t k = 0; k < p.alternative[c][*o].size(); ++k)
          if (!(p.alternative[c][*o].tags[k] == Constraint::fixed(0.0)))
            throw ModelError(ErrorKind::invalid_parameters, spec_.tree.alternative(*o).id,
                             "outside option coefficients must be fixed(0)");
  }

 private:
  struct ClassBlocks {
    std::vector<BlockRef> nests;
    std::vector<BlockRef> alternatives;
    BlockRef membership;
  };

  static const CoefficientBlock& block_at(const ParameterSet& p, const Slot& s) {
    switch (s.kind) {
      case BlockKind::nest: return p.nest[s.cls][s.owner];
      case BlockKind::alternative: return p.alternative[s.cls][s.owner];
      default: return p.membership[s.cls];
    }
  }

  static const double& value_at(const ParameterSet& p, const Slot& s) {
    if (s.kind == BlockKind::dissimilarity) return p.dissimilarity[s.owner];
    return block_at(p, s).values[s.coef];
  }

  static double& value_ref(ParameterSet& p, const Slot& s) {
    if (s.kind == BlockKind::dissimilarity) return p.dissimilarity[s.owner];
    switch (s.kind) {
      case BlockKind::nest: return p.nest[s.cls][s.owner].values[s.coef];
      case BlockKind::alternative: return p.alternative[s.cls][s.owner].values[s.coef];
      default: return p.membership[s.cls].values[s.coef];
    }
  }

  static Constraint tag_at(const ParameterSet& p, const Slot& s) {
    if (s.kind == BlockKind::dissimilarity) return p.dissimilarity_tags[s.owner];
    return block_at(p, s).tags[s.coef];
  }

  ModelSpec spec_;
  std::vector<std::string> covariates_;
  std::vector<ClassBlocks> classes_;
  std::vector<std::size_t> dissimilarity_;
  std::vector<Slot> slots_;
};

/// Flat coefficient vector with its restrictions carried alongside.
struct FlatParameters {
  std::vector<double> values;
  std::vector<Constraint> tags;

  static FlatParameters from(const Layout& layout, const ParameterSet& p) {
    return {layout.pack(p), layout.tags(p)};
  }
};

/// Indices of coordinates that are not fixed.
inline std::vector<std::size_t> free_indices(std::span<const Constraint> tags) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (!tags[i].is_fixed()) out.push_back(i);
  return out;
}

}  // namespace lcnl
