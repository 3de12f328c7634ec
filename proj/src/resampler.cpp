#include "uiharvest/resampler.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "uiharvest/analysis.hpp"
#include "uiharvest/errors.hpp"

namespace uiharvest {

using nlohmann::json;

namespace {

// Prefix sums over non-negative weights with point updates and inverse
// lookup, so each draw and removal is O(log n).
class FenwickSampler {
 public:
  explicit FenwickSampler(std::size_t n) : tree_(n + 1, 0.0), values_(n, 0.0) {}

  void set(std::size_t i, double value) {
    const double delta = value - values_[i];
    values_[i] = value;
    for (std::size_t k = i + 1; k < tree_.size(); k += k & (~k + 1)) tree_[k] += delta;
  }

  double value(std::size_t i) const { return values_[i]; }

  double total() const {
    double sum = 0.0;
    for (std::size_t k = tree_.size() - 1; k > 0; k -= k & (~k + 1)) sum += tree_[k];
    return sum;
  }

  // Smallest index whose inclusive prefix sum exceeds target.
  std::size_t find(double target) const {
    std::size_t pos = 0;
    std::size_t step = 1;
    while (step * 2 < tree_.size()) step *= 2;
    for (; step > 0; step /= 2) {
      const std::size_t next = pos + step;
      if (next < tree_.size() && tree_[next] <= target) {
        pos = next;
        target -= tree_[next];
      }
    }
    return pos;  // 0-based index of the element after the prefix
  }

  std::size_t draw(Rng& rng) const {
    std::size_t i = find(unit_real(rng) * total());
    if (i < values_.size() && values_[i] > 0.0) return i;
    // Accumulated rounding pushed the lookup onto an empty slot; take the
    // nearest positive entry instead.
    for (std::size_t k = std::min(i, values_.size()); k-- > 0;) {
      if (values_[k] > 0.0) return k;
    }
    for (std::size_t k = i; k < values_.size(); ++k) {
      if (values_[k] > 0.0) return k;
    }
    return values_.size();
  }

 private:
  std::vector<double> tree_;
  std::vector<double> values_;
};

std::optional<double> parse_number(const std::string& s) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

double ratio(double numerator, double denominator) {
  if (denominator > 0.0) return numerator / denominator;
  return numerator > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
}

}  // namespace

Eigen::MatrixXd class_count_matrix(std::span<const PageSample> samples,
                                   const std::vector<std::string>& vocab) {
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(Eigen::Index(samples.size()),
                                                 Eigen::Index(vocab.size()));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const AxTree tree(samples[s].axtree);
    for (const auto& [id, labels] : label_tree(tree)) {
      for (std::size_t c = 0; c < vocab.size(); ++c) {
        if (labels.contains(vocab[c])) counts(Eigen::Index(s), Eigen::Index(c)) += 1.0;
      }
    }
  }
  return counts;
}

ClassFrequencyTable build_frequency_table(std::vector<std::string> sample_ids,
                                          Eigen::MatrixXd counts,
                                          std::vector<std::string> classes) {
  if (counts.rows() != Eigen::Index(sample_ids.size()) ||
      counts.cols() != Eigen::Index(classes.size())) {
    throw Error(ErrorKind::validation, "count matrix shape does not match ids/classes");
  }
  if (counts.size() == 0 || counts.sum() <= 0.0) {
    throw Error(ErrorKind::empty_table, "no labeled elements in the corpus");
  }
  ClassFrequencyTable t;
  t.classes = std::move(classes);
  t.sample_ids = std::move(sample_ids);
  t.totals = counts.colwise().sum().transpose();
  const Eigen::VectorXd row_sums = counts.rowwise().sum();
  t.frequencies = counts;
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    if (row_sums(r) > 0.0) t.frequencies.row(r) /= row_sums(r);
  }
  t.weights = t.totals.unaryExpr([](double f) { return f > 0.0 ? 1.0 / f : 0.0; });
  t.counts = std::move(counts);
  return t;
}

ClassFrequencyTable build_frequency_table(std::span<const PageSample> samples,
                                          const std::vector<std::string>& vocab) {
  std::vector<std::string> ids;
  ids.reserve(samples.size());
  for (const auto& s : samples) ids.push_back(s.sample_id);
  return build_frequency_table(std::move(ids), class_count_matrix(samples, vocab), vocab);
}

std::vector<std::string> resample_split(std::size_t n, const ClassFrequencyTable& table,
                                        Rng& rng, const SampleFilter& exclude) {
  const std::size_t rows = table.sample_ids.size();
  const std::size_t cols = table.classes.size();
  std::vector<bool> eligible(rows, true);
  std::size_t eligible_count = rows;
  if (exclude) {
    for (std::size_t r = 0; r < rows; ++r) {
      if (exclude(r)) {
        eligible[r] = false;
        --eligible_count;
      }
    }
  }
  if (n > eligible_count) {
    throw Error(ErrorKind::size, "requested " + std::to_string(n) + " samples but only " +
                                     std::to_string(eligible_count) + " are eligible");
  }

  std::vector<FenwickSampler> per_class(cols, FenwickSampler(rows));
  std::vector<std::size_t> positive(cols, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!eligible[r]) continue;
    for (std::size_t c = 0; c < cols; ++c) {
      const double f = table.frequencies(Eigen::Index(r), Eigen::Index(c));
      if (f > 0.0) {
        per_class[c].set(r, f);
        ++positive[c];
      }
    }
  }
  std::vector<double> class_weights(cols, 0.0);
  for (std::size_t c = 0; c < cols; ++c) {
    if (positive[c] > 0) class_weights[c] = table.weights(Eigen::Index(c));
  }

  std::vector<std::string> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto cls = weighted_index(rng, class_weights);
    if (!cls) {
      throw Error(ErrorKind::exhaustion,
                  "every labeled sample was drawn after " + std::to_string(out.size()) +
                      " of " + std::to_string(n));
    }
    const std::size_t r = per_class[*cls].draw(rng);
    out.push_back(table.sample_ids[r]);
    for (std::size_t c = 0; c < cols; ++c) {
      if (per_class[c].value(r) > 0.0) {
        per_class[c].set(r, 0.0);
        if (--positive[c] == 0) class_weights[c] = 0.0;
      }
    }
  }
  return out;
}

bool has_visual_defect(const PageSample& sample, const std::vector<std::string>& vocab) {
  const AxTree tree(sample.axtree);
  for (const AxNode* n : tree.nodes()) {
    if (n->boxes && tree.is_leaf(*n) && n->boxes->border.area() <= 0.0) return true;
  }
  if (!occlusion_report(sample).occluded.empty()) return true;
  for (const auto& [id, labels] : label_tree(tree)) {
    const AxNode& n = tree.node(id);
    const auto opacity = n.style.find("opacity");
    if (opacity == n.style.end()) continue;
    const auto value = parse_number(opacity->second);
    if (!value || *value != 0.0) continue;
    for (const auto& v : vocab) {
      if (labels.contains(v)) return true;
    }
  }
  return false;
}

std::vector<ChangeRatio> change_ratio_report(const Eigen::MatrixXd& original_counts,
                                             const Eigen::MatrixXd& resampled_counts,
                                             const std::vector<std::string>& classes) {
  std::vector<ChangeRatio> out;
  const auto present = [](const Eigen::MatrixXd& m, Eigen::Index c) {
    return double((m.col(c).array() > 0.0).count());
  };
  const auto mean = [](const Eigen::MatrixXd& m, Eigen::Index c) {
    return m.rows() > 0 ? m.col(c).mean() : 0.0;
  };
  for (std::size_t i = 0; i < classes.size(); ++i) {
    const auto c = Eigen::Index(i);
    out.push_back(ChangeRatio{
        classes[i],
        ratio(present(resampled_counts, c), present(original_counts, c)),
        ratio(mean(resampled_counts, c), mean(original_counts, c))});
  }
  return out;
}

json change_ratio_json(const std::vector<ChangeRatio>& ratios) {
  const auto value = [](double v) { return std::isinf(v) ? json("inf") : json(v); };
  json rows = json::array();
  for (const auto& r : ratios) {
    rows.push_back({{"class", r.cls},
                    {"screen_ratio", value(r.screen_ratio)},
                    {"element_ratio", value(r.element_ratio)}});
  }
  return json{{"classes", rows}};
}

std::string change_ratio_csv(const std::vector<ChangeRatio>& ratios) {
  std::ostringstream out;
  out << "class,screen_ratio,element_ratio\n";
  const auto value = [](double v) {
    if (std::isinf(v)) return std::string("inf");
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
  };
  for (const auto& r : ratios) {
    out << r.cls << ',' << value(r.screen_ratio) << ',' << value(r.element_ratio) << '\n';
  }
  return out.str();
}

}  // namespace uiharvest
