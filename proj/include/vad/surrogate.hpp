#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vad/detector.hpp"
#include "vad/ingest.hpp"

namespace vad {

// One detector verdict joined with the raw (denormalized) signal values of the
// frame it was attributed to. Null signals are recorded as 0.0.
struct SurrogateSample {
  Timestamp timestamp;
  std::array<double, kNumSignals> features{};
  Label label = Label::Normal;
};

std::vector<SurrogateSample> build_samples(const FrameSeries& series, std::span<const AnomalyVerdict> verdicts);

using ClassCounts = std::array<std::size_t, kNumLabels>;

double gini_of(const ClassCounts& counts) noexcept;
// argmax, ties to the lower label index.
Label majority_of(const ClassCounts& counts) noexcept;

// Nodes live in a flat vector; node 0 is the root. Every node records its
// class counts so that impurity decreases can be recomputed after fitting.
struct TreeNode {
  int feature = -1;  // -1 for leaves
  double threshold = 0.0;
  int left = -1;     // feature value <= threshold
  int right = -1;
  ClassCounts counts{};
  double gini = 0.0;
  Label predicted = Label::Normal;

  bool is_leaf() const noexcept { return feature < 0; }
  std::size_t support() const noexcept { return counts[0] + counts[1] + counts[2]; }
};

class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  const TreeNode& root() const { return nodes_.front(); }

  Label predict(const std::array<double, kNumSignals>& features) const;
  int depth() const;
  std::size_t leaf_count() const;

 private:
  std::vector<TreeNode> nodes_;
};

inline constexpr int kUnboundedDepth = std::numeric_limits<int>::max();

struct TreeConfig {
  int max_depth = 5;
  std::size_t min_samples_leaf = 1;
  // Features a split may use; the surrogate tree is restricted to the
  // selected features this way.
  std::array<bool, kNumSignals> allowed = {true, true, true, true, true, true, true, true};
  // 0 = consider every allowed feature at each split. Otherwise a seeded
  // random subset of this size is drawn per split (more are drawn only if
  // none of the subset admits a split).
  int max_features = 0;
  std::uint64_t seed = 0;
};

// CART on Gini impurity. Candidate thresholds are midpoints between
// consecutive distinct values; ties go to the lowest feature index, then the
// lowest threshold. Split quality is compared exactly in integer arithmetic.
Tree fit_tree(std::span<const SurrogateSample> samples, const TreeConfig& config = {});

struct ForestSpec {
  int n_trees = 100;
  int max_features = 3;  // ceil(sqrt(8))
  bool bootstrap = true;
  int max_depth = kUnboundedDepth;
  std::uint64_t seed = 0;  // tree t uses seed + t
};

struct Forest {
  std::vector<Tree> trees;

  // Majority vote, ties to the lower label index.
  Label predict(const std::array<double, kNumSignals>& features) const;
};

Forest fit_forest(std::span<const SurrogateSample> samples, const ForestSpec& spec = {});

struct FeatureImportance {
  std::array<double, kNumSignals> scores{};
  bool any_split = false;  // false -> all zeros
};

// Mean decrease in impurity, averaged over trees and normalized to sum 1.
FeatureImportance feature_importance(std::span<const Tree> trees);
FeatureImportance feature_importance(const Forest& forest);

// Smallest importance-ranked prefix whose cumulative importance reaches
// `coverage`; at least one feature. Returned in ascending index order.
std::vector<Signal> select_features(const std::array<double, kNumSignals>& importances, double coverage = 0.95);

enum class Comparator { LessEqual, Greater };

struct Conjunct {
  Signal feature;
  Comparator comparator;
  double threshold;

  bool operator==(const Conjunct&) const = default;
};

struct Rule {
  std::vector<Conjunct> conjuncts;  // root-to-leaf order
  Label predicted = Label::Normal;
  double gini = 0.0;
  std::size_t support = 0;
};

// One rule per leaf with gini <= gini_max, leaves visited left to right. With
// collapse on, repeated (feature, comparator) conjuncts along a path keep only
// the tightest bound, which is always the deepest one.
std::vector<Rule> extract_rules(const Tree& tree, double gini_max = 0.0, bool collapse = true);

// "Normal", "Potential Anomaly", "High-Score Anomaly"
std::string_view rule_class_name(Label label) noexcept;

// "If STBD_RPM_Mean > 26.60: If SOG_Speed_over_Ground ≤ 0.43: Class: High-Score Anomaly"
std::string render_rule(const Rule& rule);

// Numbered rule lines: "1) If ...".
std::string format_rules(std::span<const Rule> rules);

double fidelity(const Tree& tree, std::span<const SurrogateSample> samples);

// Nested JSON document of the tree for inspection.
std::string export_tree_json(const Tree& tree);

}  // namespace vad
