#pragma once

// Helpers shared by the unit tests and the acceptance binary. The oracles in
// here are deliberately naive re-statements of the contracts (nested loops,
// no shared code with the library) so that agreement means something.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vad/ingest.hpp"
#include "vad/rng.hpp"
#include "vad/surrogate.hpp"

namespace vad::testing {

// A scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    const auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 gen(std::random_device{}());
    path_ = base / ("vad_" + tag + "_" + std::to_string(gen()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Preprocessing oracle

// Mixed-rate telemetry: rpm, rate of turn, sog and rudder at 1 Hz; batteries
// and heading at 0.2 Hz. Sub-second jitter, random drop-outs, one silent
// stretch (all-null bins), one stretch with batteries absent and sog near
// zero (non-moving frames), then the records are shuffled.
inline std::vector<RawRecord> mixed_rate_records(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RawRecord> out;
  const std::int64_t t0_us = 1709251203LL * 1'000'000 + 500'000;  // not bin aligned
  const std::array fast = {Signal::PortRpm, Signal::StbdRpm, Signal::RateOfTurn, Signal::Sog, Signal::RudderAngle};
  const std::array slow = {Signal::PortBattV, Signal::StbdBattV, Signal::HeadingTrue};
  for (std::int64_t s = 0; out.size() < count; ++s) {
    if (s >= 40 && s < 75) continue;  // logger silent
    const bool parked = s >= 120 && s < 180;
    auto emit = [&](Signal sig) {
      if (out.size() >= count || rng.uniform() < 0.1) return;
      const std::int64_t jitter = static_cast<std::int64_t>(rng.below(1'000'000));
      double value = rng.normal(10.0, 3.0);
      if (sig == Signal::Sog && parked) value = 0.02 * rng.uniform();
      out.push_back({Timestamp{std::chrono::microseconds{t0_us + s * 1'000'000 + jitter}}, sig, value});
    };
    for (Signal sig : fast) emit(sig);
    if (s % 5 == 0) {
      for (Signal sig : slow) {
        if (parked && sig != Signal::HeadingTrue) continue;
        emit(sig);
      }
    }
  }
  rng.shuffle(std::span(out));
  return out;
}

inline std::int64_t floor_mod(std::int64_t a, std::int64_t m) { return ((a % m) + m) % m; }

// Brute force: enumerate bin starts from the first to the last populated bin
// and, for every (bin, signal), scan every record.
inline FrameSeries reference_resample(const std::vector<RawRecord>& records, int cadence) {
  const std::int64_t width = static_cast<std::int64_t>(cadence) * 1'000'000;
  std::int64_t first = records.front().timestamp.time_since_epoch().count();
  std::int64_t last = first;
  for (const auto& r : records) {
    first = std::min(first, r.timestamp.time_since_epoch().count());
    last = std::max(last, r.timestamp.time_since_epoch().count());
  }
  FrameSeries out;
  out.cadence_seconds = cadence;
  for (std::int64_t start = first - floor_mod(first, width); start <= last; start += width) {
    SignalFrame f;
    f.timestamp = Timestamp{std::chrono::microseconds{start}};
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      double sum = 0.0;
      int n = 0;
      for (const auto& r : records) {
        const std::int64_t t = r.timestamp.time_since_epoch().count();
        if (static_cast<std::size_t>(r.signal) == k && t >= start && t < start + width) {
          sum += r.value;
          ++n;
        }
      }
      if (n > 0) f.values[k] = sum / n;
    }
    out.frames.push_back(f);
  }
  return out;
}

inline FrameSeries reference_filter(const FrameSeries& in, double epsilon) {
  FrameSeries out;
  out.cadence_seconds = in.cadence_seconds;
  for (const auto& f : in.frames) {
    int present = 0;
    for (const auto& v : f.values) present += v.has_value();
    const bool dead = present == 0;
    const bool no_batteries = !f.values[2].has_value() && !f.values[3].has_value();
    const bool still = f.values[6].has_value() && *f.values[6] < epsilon;
    if (dead || (no_batteries && still)) continue;
    out.frames.push_back(f);
  }
  return out;
}

inline std::vector<std::array<double, kNumSignals>> reference_normalize(const FrameSeries& fit_on,
                                                                        const FrameSeries& apply_to) {
  std::array<double, kNumSignals> lo{}, hi{};
  for (std::size_t k = 0; k < kNumSignals; ++k) {
    std::vector<double> seen;
    for (const auto& f : fit_on.frames) {
      if (f.values[k]) seen.push_back(*f.values[k]);
    }
    lo[k] = *std::min_element(seen.begin(), seen.end());
    hi[k] = *std::max_element(seen.begin(), seen.end());
  }
  std::vector<std::array<double, kNumSignals>> rows;
  for (const auto& f : apply_to.frames) {
    std::array<double, kNumSignals> row{};
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      if (f.values[k] && hi[k] != lo[k]) row[k] = (*f.values[k] - lo[k]) / (hi[k] - lo[k]);
    }
    rows.push_back(row);
  }
  return rows;
}

struct PreprocessingDiff {
  bool same_shape = true;  // frame count, timestamps, null pattern
  double max_abs_error = 0.0;
};

inline void compare_series(const FrameSeries& got, const FrameSeries& want, PreprocessingDiff& diff) {
  if (got.size() != want.size()) {
    diff.same_shape = false;
    return;
  }
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got.frames[i].timestamp != want.frames[i].timestamp) diff.same_shape = false;
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      const auto& a = got.frames[i].values[k];
      const auto& b = want.frames[i].values[k];
      if (a.has_value() != b.has_value()) {
        diff.same_shape = false;
      } else if (a) {
        diff.max_abs_error = std::max(diff.max_abs_error, std::abs(*a - *b));
      }
    }
  }
}

// Runs resample -> filter -> fit/apply scaler through the library and through
// the oracle and reports the largest disagreement.
inline PreprocessingDiff preprocessing_against_oracle(const std::vector<RawRecord>& records) {
  PreprocessingDiff diff;
  const FrameSeries resampled = resample_mean(records, 10);
  const FrameSeries want_resampled = reference_resample(records, 10);
  compare_series(resampled, want_resampled, diff);

  const FrameSeries filtered = filter_inactive(resampled, 0.05);
  const FrameSeries want_filtered = reference_filter(want_resampled, 0.05);
  compare_series(filtered, want_filtered, diff);
  if (!diff.same_shape) return diff;

  const Eigen::MatrixXd scaled = apply_scaler(fit_scaler(filtered), filtered);
  const auto want_scaled = reference_normalize(want_filtered, want_filtered);
  if (scaled.rows() != static_cast<Eigen::Index>(want_scaled.size())) {
    diff.same_shape = false;
    return diff;
  }
  for (std::size_t i = 0; i < want_scaled.size(); ++i) {
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      const double got = scaled(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      diff.max_abs_error = std::max(diff.max_abs_error, std::abs(got - want_scaled[i][k]));
    }
  }
  return diff;
}

// ---------------------------------------------------------------------------
// Best-split oracle

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
};

// Every (feature, midpoint) pair is scored by weighted child Gini computed
// from scratch; the lowest impurity wins, earlier (feature, threshold) on
// ties. nullopt when no feature has two distinct values.
inline std::optional<SplitChoice> exhaustive_best_split(const std::vector<SurrogateSample>& samples,
                                                        int n_features) {
  auto gini = [](const std::vector<int>& labels) {
    if (labels.empty()) return 0.0;
    double g = 1.0;
    for (int c = 0; c < 3; ++c) {
      const double p = static_cast<double>(std::count(labels.begin(), labels.end(), c)) / labels.size();
      g -= p * p;
    }
    return g;
  };
  std::optional<SplitChoice> best;
  double best_impurity = 0.0;
  for (int f = 0; f < n_features; ++f) {
    std::vector<double> values;
    for (const auto& s : samples) values.push_back(s.features[static_cast<std::size_t>(f)]);
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = 0.5 * (values[i] + values[i + 1]);
      std::vector<int> left, right;
      for (const auto& s : samples) {
        (s.features[static_cast<std::size_t>(f)] <= t ? left : right).push_back(static_cast<int>(s.label));
      }
      const double n = static_cast<double>(samples.size());
      const double impurity = left.size() / n * gini(left) + right.size() / n * gini(right);
      if (!best || impurity < best_impurity - 1e-12) {
        best = SplitChoice{f, t};
        best_impurity = impurity;
      }
    }
  }
  return best;
}

struct CartOracleOutcome {
  int instances = 0;
  int agreed = 0;
  std::string first_mismatch;
};

// Random instances of 2..30 samples over two features. Values come from a
// small integer grid half the time so duplicate values and exact ties occur.
inline CartOracleOutcome cart_against_oracle(int instances, std::uint64_t seed) {
  Rng rng(seed);
  CartOracleOutcome out;
  for (int k = 0; k < instances; ++k) {
    const std::size_t n = 2 + rng.below(29);
    const bool grid = rng.uniform() < 0.5;
    std::vector<SurrogateSample> samples(n);
    for (auto& s : samples) {
      for (int f = 0; f < 2; ++f) {
        s.features[static_cast<std::size_t>(f)] =
            grid ? static_cast<double>(rng.below(6)) : rng.uniform(-5.0, 5.0);
      }
      s.label = static_cast<Label>(rng.below(3));
    }
    TreeConfig cfg;
    cfg.max_depth = 1;
    cfg.allowed = {true, true, false, false, false, false, false, false};
    const Tree tree = fit_tree(samples, cfg);
    const TreeNode& root = tree.root();

    bool pure = true;
    for (const auto& s : samples) pure = pure && s.label == samples.front().label;
    const auto want = pure ? std::nullopt : exhaustive_best_split(samples, 2);

    bool ok;
    if (!want) {
      ok = root.is_leaf();
    } else {
      ok = !root.is_leaf() && root.feature == want->feature && root.threshold == want->threshold;
    }
    ++out.instances;
    if (ok) {
      ++out.agreed;
    } else if (out.first_mismatch.empty()) {
      out.first_mismatch = "instance " + std::to_string(k) + ": tree (" + std::to_string(root.feature) + ", " +
                           format_double(root.threshold) + ") vs oracle " +
                           (want ? "(" + std::to_string(want->feature) + ", " + format_double(want->threshold) + ")"
                                 : std::string("no split"));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hand-built trees

struct PathSpec {
  std::vector<Conjunct> conjuncts;
  Label label;
};

// Builds the tree whose pure leaves are exactly the given root-to-leaf paths.
// Branches not covered by any path end in a mixed leaf (Gini 0.5). Paths must
// be listed in left-to-right order and agree on the split at shared prefixes.
inline Tree tree_from_paths(const std::vector<PathSpec>& paths) {
  std::vector<TreeNode> nodes;
  auto build = [&](auto&& self, std::vector<const PathSpec*> group, std::size_t depth) -> int {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (group.empty()) {
      nodes[static_cast<std::size_t>(id)].counts = {1, 1, 0};
      nodes[static_cast<std::size_t>(id)].gini = 0.5;
      return id;
    }
    if (group.size() == 1 && group.front()->conjuncts.size() == depth) {
      TreeNode& leaf = nodes[static_cast<std::size_t>(id)];
      leaf.counts[static_cast<std::size_t>(group.front()->label)] = 5;
      leaf.predicted = group.front()->label;
      return id;
    }
    const Conjunct& split = group.front()->conjuncts[depth];
    std::vector<const PathSpec*> left, right;
    for (const PathSpec* p : group) {
      (p->conjuncts[depth].comparator == Comparator::LessEqual ? left : right).push_back(p);
    }
    const int l = self(self, left, depth + 1);
    const int r = self(self, right, depth + 1);
    TreeNode& node = nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<int>(split.feature);
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    for (std::size_t c = 0; c < kNumLabels; ++c) {
      node.counts[c] = nodes[static_cast<std::size_t>(l)].counts[c] + nodes[static_cast<std::size_t>(r)].counts[c];
    }
    node.gini = gini_of(node.counts);
    node.predicted = majority_of(node.counts);
    return id;
  };
  std::vector<const PathSpec*> all;
  for (const auto& p : paths) all.push_back(&p);
  build(build, all, 0);
  return Tree(std::move(nodes));
}

inline Conjunct le(Signal s, double t) { return {s, Comparator::LessEqual, t}; }
inline Conjunct gt(Signal s, double t) { return {s, Comparator::Greater, t}; }

// Paths of the two reference LSTM surrogate rule sets.
inline Tree first_rule_table_tree() {
  using S = Signal;
  const Label high = Label::HighScore;
  return tree_from_paths({
      {{le(S::RudderAngle, -0.78), le(S::Sog, 0.07), gt(S::StbdRpm, 8.84), gt(S::Sog, 0.04), gt(S::Sog, 0.06)}, high},
      {{le(S::RudderAngle, -0.78), gt(S::Sog, 0.07), le(S::HeadingTrue, 1.11), gt(S::HeadingTrue, 0.48),
        gt(S::StbdRpm, 8.59)},
       high},
      {{gt(S::RudderAngle, -0.78), gt(S::HeadingTrue, 5.98), le(S::RudderAngle, -0.03), gt(S::StbdRpm, 23.15),
        le(S::HeadingTrue, 6.07)},
       high},
  });
}

inline Tree second_rule_table_tree() {
  using S = Signal;
  const Label high = Label::HighScore;
  return tree_from_paths({
      {{le(S::HeadingTrue, 5.58), gt(S::StbdRpm, 26.60), le(S::RudderAngle, -0.04), le(S::RateOfTurn, 0.00),
        le(S::RudderAngle, -0.05)},
       high},
      {{le(S::HeadingTrue, 5.58), gt(S::StbdRpm, 26.60), le(S::RudderAngle, -0.04), gt(S::RateOfTurn, 0.00),
        le(S::Sog, 5.41)},
       high},
      {{le(S::HeadingTrue, 5.58), gt(S::StbdRpm, 26.60), gt(S::RudderAngle, -0.04), le(S::HeadingTrue, 2.37),
        le(S::StbdRpm, 27.25)},
       high},
      {{gt(S::HeadingTrue, 5.58), le(S::PortRpm, 22.85), le(S::PortRpm, 8.97), le(S::RudderAngle, -0.02),
        gt(S::StbdRpm, 11.14)},
       high},
      {{gt(S::HeadingTrue, 5.58), le(S::PortRpm, 22.85), le(S::PortRpm, 8.97), gt(S::RudderAngle, -0.02),
        le(S::Sog, 0.43)},
       high},
      {{gt(S::HeadingTrue, 5.58), le(S::PortRpm, 22.85), gt(S::PortRpm, 8.97), le(S::StbdRpm, 18.15),
        le(S::HeadingTrue, 5.64)},
       high},
  });
}

// ---------------------------------------------------------------------------
// Linear separability

// Perceptron with a bias term on 2-D points; true once an epoch passes with no
// mistakes. Linearly separable finite sets always converge.
inline bool linearly_separable(const Eigen::MatrixXd& Y, const std::vector<int>& cls, int max_epochs = 10000) {
  double w0 = 0.0, w1 = 0.0, b = 0.0;
  const double scale = std::max(1.0, Y.cwiseAbs().maxCoeff());
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    int mistakes = 0;
    for (Eigen::Index i = 0; i < Y.rows(); ++i) {
      const double target = cls[static_cast<std::size_t>(i)] == 0 ? -1.0 : 1.0;
      const double x0 = Y(i, 0) / scale, x1 = Y(i, 1) / scale;
      if (target * (w0 * x0 + w1 * x1 + b) <= 0.0) {
        w0 += target * x0;
        w1 += target * x1;
        b += target;
        ++mistakes;
      }
    }
    if (mistakes == 0) return true;
  }
  return false;
}

// Two 8-D Gaussian blobs of `per_cluster` points, centres 10 apart.
inline std::pair<Eigen::MatrixXd, std::vector<int>> two_clusters(int per_cluster, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd X(2 * per_cluster, 8);
  std::vector<int> cls;
  for (int i = 0; i < 2 * per_cluster; ++i) {
    const int c = i < per_cluster ? 0 : 1;
    for (int k = 0; k < 8; ++k) X(i, k) = rng.normal(c == 0 ? 0.0 : 10.0 / std::sqrt(8.0), 1.0);
    cls.push_back(c);
  }
  return {X, cls};
}

}  // namespace vad::testing
