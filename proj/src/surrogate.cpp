#include "vad/surrogate.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <future>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "vad/errors.hpp"
#include "vad/rng.hpp"

namespace vad {

namespace {

using Index = std::uint32_t;

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  // score = num / den = sum_k cL_k^2 / nL + sum_k cR_k^2 / nR, larger is better
  // (equivalent to the smallest weighted child Gini).
  unsigned __int128 num = 0;
  unsigned __int128 den = 1;

  bool valid() const noexcept { return feature >= 0; }
  bool beats(const Candidate& other) const noexcept {
    if (!other.valid()) return true;
    return num * other.den > other.num * den;
  }
};

std::uint64_t sum_squares(const ClassCounts& c) noexcept {
  std::uint64_t s = 0;
  for (auto v : c) s += static_cast<std::uint64_t>(v) * v;
  return s;
}

class TreeBuilder {
 public:
  TreeBuilder(std::span<const SurrogateSample> samples, const TreeConfig& config, Rng& rng)
      : samples_(samples), config_(config), rng_(rng) {
    for (std::size_t f = 0; f < kNumSignals; ++f) {
      if (config_.allowed[f]) allowed_.push_back(static_cast<int>(f));
    }
  }

  Tree build(std::vector<Index> indices) {
    grow(std::move(indices), 0);
    return Tree(std::move(nodes_));
  }

 private:
  int grow(std::vector<Index> indices, int depth) {
    TreeNode node;
    for (Index i : indices) ++node.counts[static_cast<std::size_t>(samples_[i].label)];
    node.gini = gini_of(node.counts);
    node.predicted = majority_of(node.counts);
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(node);

    if (depth >= config_.max_depth || node.gini == 0.0 || indices.size() < 2 * config_.min_samples_leaf) {
      return id;
    }
    const Candidate best = find_split(indices, node.counts);
    if (!best.valid()) return id;

    std::vector<Index> left, right;
    for (Index i : indices) {
      (samples_[i].features[static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(i);
    }
    indices.clear();
    indices.shrink_to_fit();
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[id].feature = best.feature;
    nodes_[id].threshold = best.threshold;
    nodes_[id].left = l;
    nodes_[id].right = r;
    return id;
  }

  Candidate find_split(const std::vector<Index>& indices, const ClassCounts& total) {
    Candidate best;
    if (config_.max_features <= 0 || static_cast<std::size_t>(config_.max_features) >= allowed_.size()) {
      for (int f : allowed_) scan_feature(f, indices, total, best);
      return best;
    }
    std::vector<int> order = allowed_;
    rng_.shuffle(std::span<int>(order));
    const auto k = static_cast<std::size_t>(config_.max_features);
    std::vector<int> subset(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(subset.begin(), subset.end());
    for (int f : subset) scan_feature(f, indices, total, best);
    for (std::size_t j = k; j < order.size() && !best.valid(); ++j) scan_feature(order[j], indices, total, best);
    return best;
  }

  void scan_feature(int feature, const std::vector<Index>& indices, const ClassCounts& total, Candidate& best) {
    const auto f = static_cast<std::size_t>(feature);
    column_.clear();
    for (Index i : indices) column_.emplace_back(samples_[i].features[f], static_cast<std::uint8_t>(samples_[i].label));
    std::sort(column_.begin(), column_.end());

    const std::size_t n = column_.size();
    const std::size_t min_leaf = std::max<std::size_t>(config_.min_samples_leaf, 1);
    ClassCounts left{};
    for (std::size_t i = 0; i + 1 < n; ++i) {
      ++left[column_[i].second];
      const double a = column_[i].first;
      const double b = column_[i + 1].first;
      if (!(a < b)) continue;
      const std::size_t nl = i + 1;
      const std::size_t nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      ClassCounts right{};
      for (std::size_t k = 0; k < kNumLabels; ++k) right[k] = total[k] - left[k];
      Candidate c;
      c.feature = feature;
      c.num = static_cast<unsigned __int128>(sum_squares(left)) * nr + static_cast<unsigned __int128>(sum_squares(right)) * nl;
      c.den = static_cast<unsigned __int128>(nl) * nr;
      if (c.beats(best)) {
        double mid = 0.5 * (a + b);
        if (!(mid < b)) mid = a;  // adjacent doubles
        c.threshold = mid;
        best = c;
      }
    }
  }

  std::span<const SurrogateSample> samples_;
  const TreeConfig& config_;
  Rng& rng_;
  std::vector<int> allowed_;
  std::vector<TreeNode> nodes_;
  std::vector<std::pair<double, std::uint8_t>> column_;
};

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::vector<SurrogateSample> build_samples(const FrameSeries& series, std::span<const AnomalyVerdict> verdicts) {
  std::vector<SurrogateSample> out;
  out.reserve(verdicts.size());
  const auto& frames = series.frames;
  for (const auto& v : verdicts) {
    auto it = std::lower_bound(frames.begin(), frames.end(), v.timestamp,
                               [](const SignalFrame& f, Timestamp t) { return f.timestamp < t; });
    if (it == frames.end() || it->timestamp != v.timestamp) {
      throw DataError("verdict at " + format_timestamp(v.timestamp) + " has no matching telemetry frame");
    }
    SurrogateSample s;
    s.timestamp = v.timestamp;
    s.label = v.label;
    for (std::size_t k = 0; k < kNumSignals; ++k) s.features[k] = it->values[k].value_or(0.0);
    out.push_back(s);
  }
  return out;
}

double gini_of(const ClassCounts& counts) noexcept {
  const std::size_t n = counts[0] + counts[1] + counts[2];
  if (n == 0) return 0.0;
  const double nn = static_cast<double>(n);
  return 1.0 - static_cast<double>(sum_squares(counts)) / (nn * nn);
}

Label majority_of(const ClassCounts& counts) noexcept {
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumLabels; ++k) {
    if (counts[k] > counts[best]) best = k;
  }
  return static_cast<Label>(best);
}

Label Tree::predict(const std::array<double, kNumSignals>& features) const {
  if (nodes_.empty()) throw UsageError("predict on an unfitted tree");
  const TreeNode* node = &nodes_.front();
  while (!node->is_leaf()) {
    const int next = features[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left : node->right;
    node = &nodes_[static_cast<std::size_t>(next)];
  }
  return node->predicted;
}

int Tree::depth() const {
  if (nodes_.empty()) return 0;
  std::function<int(int)> walk = [&](int id) -> int {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    return n.is_leaf() ? 0 : 1 + std::max(walk(n.left), walk(n.right));
  };
  return walk(0);
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

Tree fit_tree(std::span<const SurrogateSample> samples, const TreeConfig& config) {
  if (samples.empty()) throw EmptyInputError("cannot fit a decision tree on zero samples");
  if (config.max_depth < 0) throw ParameterError("max_depth must be >= 0");
  Rng rng(config.seed);
  std::vector<Index> all(samples.size());
  std::iota(all.begin(), all.end(), Index{0});
  return TreeBuilder(samples, config, rng).build(std::move(all));
}

Label Forest::predict(const std::array<double, kNumSignals>& features) const {
  ClassCounts votes{};
  for (const auto& t : trees) ++votes[static_cast<std::size_t>(t.predict(features))];
  return majority_of(votes);
}

Forest fit_forest(std::span<const SurrogateSample> samples, const ForestSpec& spec) {
  if (samples.empty()) throw EmptyInputError("cannot fit a random forest on zero samples");
  if (spec.n_trees < 1) throw ParameterError("n_trees must be >= 1");
  if (spec.max_features < 1) throw ParameterError("max_features must be >= 1");

  auto fit_one = [&](int t) {
    Rng rng(spec.seed + static_cast<std::uint64_t>(t));
    std::vector<Index> drawn(samples.size());
    if (spec.bootstrap) {
      for (auto& i : drawn) i = static_cast<Index>(rng.below(samples.size()));
    } else {
      std::iota(drawn.begin(), drawn.end(), Index{0});
    }
    TreeConfig cfg;
    cfg.max_depth = spec.max_depth;
    cfg.max_features = spec.max_features;
    return TreeBuilder(samples, cfg, rng).build(std::move(drawn));
  };

  Forest forest;
  forest.trees.resize(static_cast<std::size_t>(spec.n_trees));
  const unsigned workers = std::clamp(std::thread::hardware_concurrency(), 1u, 16u);
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (int t = static_cast<int>(w); t < spec.n_trees; t += static_cast<int>(workers)) {
        forest.trees[static_cast<std::size_t>(t)] = fit_one(t);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return forest;
}

FeatureImportance feature_importance(std::span<const Tree> trees) {
  FeatureImportance out;
  if (trees.empty()) return out;
  for (const auto& tree : trees) {
    const auto& nodes = tree.nodes();
    if (nodes.empty()) continue;
    const double total = static_cast<double>(nodes.front().support());
    for (const auto& n : nodes) {
      if (n.is_leaf()) continue;
      const auto& l = nodes[static_cast<std::size_t>(n.left)];
      const auto& r = nodes[static_cast<std::size_t>(n.right)];
      const double nt = static_cast<double>(n.support());
      const double decrease = n.gini - static_cast<double>(l.support()) / nt * l.gini -
                              static_cast<double>(r.support()) / nt * r.gini;
      out.scores[static_cast<std::size_t>(n.feature)] += nt / total * decrease;
      out.any_split = true;
    }
  }
  for (auto& s : out.scores) s /= static_cast<double>(trees.size());
  const double sum = std::accumulate(out.scores.begin(), out.scores.end(), 0.0);
  if (sum > 0.0) {
    for (auto& s : out.scores) s /= sum;
  } else {
    out.scores.fill(0.0);
  }
  return out;
}

FeatureImportance feature_importance(const Forest& forest) { return feature_importance(std::span<const Tree>(forest.trees)); }

std::vector<Signal> select_features(const std::array<double, kNumSignals>& importances, double coverage) {
  std::array<std::size_t, kNumSignals> order{};
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return importances[a] > importances[b]; });
  std::vector<Signal> picked;
  double cumulative = 0.0;
  for (std::size_t f : order) {
    picked.push_back(static_cast<Signal>(f));
    cumulative += importances[f];
    if (cumulative >= coverage - 1e-12) break;
  }
  std::sort(picked.begin(), picked.end());
  return picked;
}

std::vector<Rule> extract_rules(const Tree& tree, double gini_max, bool collapse) {
  std::vector<Rule> rules;
  if (tree.nodes().empty()) return rules;
  std::vector<Conjunct> path;
  std::function<void(int)> walk = [&](int id) {
    const auto& n = tree.nodes()[static_cast<std::size_t>(id)];
    if (n.is_leaf()) {
      if (n.gini > gini_max) return;
      Rule rule;
      rule.predicted = n.predicted;
      rule.gini = n.gini;
      rule.support = n.support();
      for (std::size_t i = 0; i < path.size(); ++i) {
        const auto& c = path[i];
        const bool superseded =
            collapse && std::any_of(path.begin() + static_cast<std::ptrdiff_t>(i) + 1, path.end(), [&](const Conjunct& later) {
              return later.feature == c.feature && later.comparator == c.comparator;
            });
        if (!superseded) rule.conjuncts.push_back(c);
      }
      rules.push_back(std::move(rule));
      return;
    }
    const auto feature = static_cast<Signal>(n.feature);
    path.push_back({feature, Comparator::LessEqual, n.threshold});
    walk(n.left);
    path.back().comparator = Comparator::Greater;
    walk(n.right);
    path.pop_back();
  };
  walk(0);
  return rules;
}

std::string_view rule_class_name(Label label) noexcept {
  switch (label) {
    case Label::Potential:
      return "Potential Anomaly";
    case Label::HighScore:
      return "High-Score Anomaly";
    case Label::Normal:
      break;
  }
  return "Normal";
}

std::string render_rule(const Rule& rule) {
  std::string out;
  for (const auto& c : rule.conjuncts) {
    out += "If ";
    out += kDisplayNames[index_of(c.feature)];
    out += c.comparator == Comparator::LessEqual ? " ≤ " : " > ";
    out += fixed2(c.threshold);
    out += ": ";
  }
  out += "Class: ";
  out += rule_class_name(rule.predicted);
  return out;
}

std::string format_rules(std::span<const Rule> rules) {
  std::string out;
  for (std::size_t i = 0; i < rules.size(); ++i) {
    out += std::to_string(i + 1) + ") " + render_rule(rules[i]) + "\n";
  }
  return out;
}

double fidelity(const Tree& tree, std::span<const SurrogateSample> samples) {
  if (samples.empty()) throw EmptyInputError("fidelity needs at least one sample");
  std::size_t agree = 0;
  for (const auto& s : samples) agree += tree.predict(s.features) == s.label;
  return static_cast<double>(agree) / static_cast<double>(samples.size());
}

std::string export_tree_json(const Tree& tree) {
  using nlohmann::ordered_json;
  std::function<ordered_json(int)> node_json = [&](int id) {
    const auto& n = tree.nodes()[static_cast<std::size_t>(id)];
    ordered_json j;
    ordered_json counts;
    for (std::size_t k = 0; k < kNumLabels; ++k) counts[std::string(label_name(static_cast<Label>(k)))] = n.counts[k];
    if (n.is_leaf()) {
      j["leaf"] = true;
      j["predicted"] = label_name(n.predicted);
    } else {
      j["leaf"] = false;
      j["feature"] = signal_name(static_cast<Signal>(n.feature));
      j["threshold"] = n.threshold;
    }
    j["gini"] = n.gini;
    j["counts"] = counts;
    if (!n.is_leaf()) {
      j["left"] = node_json(n.left);
      j["right"] = node_json(n.right);
    }
    return j;
  };
  if (tree.nodes().empty()) return "{}\n";
  return node_json(0).dump(2) + "\n";
}

}  // namespace vad
