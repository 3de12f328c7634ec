#include "uiharvest/analysis.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <numeric>
#include <sstream>
#include <thread>

#include "uiharvest/errors.hpp"

namespace uiharvest {

using nlohmann::json;

const std::vector<std::string>& default_vocabulary() {
  static const std::vector<std::string> kVocab{
      "text",    "link",      "listitem",   "list",    "image",
      "heading", "paragraph", "navigation", "textbox", "button"};
  return kVocab;
}

std::string canonical_role(std::string_view role) {
  std::string out(role);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  if (out == "statictext") return "text";
  if (out == "img") return "image";
  return out;
}

ElementLabelSet element_labels(const AxNode& node, const AxTree& tree) {
  ElementLabelSet out{node.node_id, {node.role}};
  for (const AxNode* p = tree.parent(node); p != nullptr && p->parent_id;
       p = tree.parent(*p)) {
    if (tree.children(p->node_id).size() != 1) break;
    out.labels.insert(p->role);
  }
  return out;
}

std::map<std::int64_t, std::set<std::string>> label_tree(const AxTree& tree) {
  std::map<std::int64_t, std::set<std::string>> out;
  for (const AxNode* n : tree.nodes()) {
    if (!n->parent_id) continue;
    out.emplace(n->node_id, element_labels(*n, tree).labels);
  }
  return out;
}

bool is_interactable(const std::set<std::string>& labels) {
  return labels.contains("link") || labels.contains("button");
}

std::vector<std::pair<std::string, std::size_t>> CompositionStats::top(std::size_t k) const {
  std::vector<std::pair<std::string, std::size_t>> rows(class_counts.begin(),
                                                        class_counts.end());
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  if (rows.size() > k) rows.resize(k);
  return rows;
}

CompositionStats composition_stats(std::span<const PageSample> corpus) {
  if (corpus.empty()) throw Error(ErrorKind::empty_corpus, "corpus is empty");
  CompositionStats stats;
  stats.screens = corpus.size();
  std::size_t elements = 0, visible = 0, clickable = 0;
  for (const auto& screen : corpus) {
    const AxTree tree(screen.axtree);
    const Rect viewport{0, 0, double(screen.viewport.width), double(screen.viewport.height)};
    for (const auto& [id, labels] : label_tree(tree)) {
      const AxNode& n = tree.node(id);
      ++elements;
      for (const auto& l : labels) ++stats.class_counts[l];
      if (n.boxes && intersection_area(n.boxes->content, viewport) > 0) ++visible;
      if (n.clickable || is_interactable(labels)) ++clickable;
    }
  }
  const double screens = double(corpus.size());
  stats.mean_elements = double(elements) / screens;
  stats.mean_visible = double(visible) / screens;
  stats.mean_clickable = double(clickable) / screens;
  return stats;
}

SmallTargetReport small_target_report(const PageSample& screen) {
  SmallTargetReport report;
  const AxTree tree(screen.axtree);
  for (const auto& [id, labels] : label_tree(tree)) {
    if (!is_interactable(labels)) continue;
    const AxNode& n = tree.node(id);
    if (!n.boxes) {
      ++report.unmeasured;
      continue;
    }
    ++report.interactable;
    if (n.boxes->border.w < kMinTargetSize || n.boxes->border.h < kMinTargetSize) {
      report.flagged.push_back(id);
    }
  }
  return report;
}

namespace {

std::optional<long> integer_z_index(const AxNode& n) {
  const auto it = n.style.find("z-index");
  if (it == n.style.end()) return std::nullopt;
  long value = 0;
  const auto& s = it->second;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace

const AxNode& occludee_of(const AxNode& a, const AxNode& b) {
  const auto za = integer_z_index(a);
  const auto zb = integer_z_index(b);
  if (za && zb && *za != *zb) return *za < *zb ? a : b;
  if (a.dom_index != b.dom_index) return a.dom_index < b.dom_index ? a : b;
  return a.node_id < b.node_id ? a : b;
}

OcclusionReport occlusion_report(const std::vector<AxNode>& nodes, double threshold) {
  const AxTree tree(nodes);
  std::vector<const AxNode*> leaves;
  for (const AxNode* n : tree.nodes()) {
    if (n->boxes && tree.is_leaf(*n) && n->boxes->border.area() > 0) leaves.push_back(n);
  }
  // Sort-and-sweep on x: only boxes whose x-ranges overlap are compared.
  std::sort(leaves.begin(), leaves.end(), [](const AxNode* a, const AxNode* b) {
    return a->boxes->border.x < b->boxes->border.x;
  });
  OcclusionReport report;
  std::set<std::int64_t> occluded;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const Rect& ri = leaves[i]->boxes->border;
    for (std::size_t j = i + 1; j < leaves.size(); ++j) {
      const Rect& rj = leaves[j]->boxes->border;
      if (rj.x >= ri.right()) break;
      const double area = intersection_area(ri, rj);
      if (area <= 0) continue;
      const AxNode& under = occludee_of(*leaves[i], *leaves[j]);
      OverlapPair pair;
      pair.first = std::min(leaves[i]->node_id, leaves[j]->node_id);
      pair.second = std::max(leaves[i]->node_id, leaves[j]->node_id);
      pair.occludee = under.node_id;
      pair.area = area;
      pair.occluded_fraction = area / under.boxes->border.area();
      if (pair.occluded_fraction > threshold) occluded.insert(under.node_id);
      report.pairs.push_back(pair);
    }
  }
  std::sort(report.pairs.begin(), report.pairs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.first, a.second) < std::tie(b.first, b.second);
  });
  report.occluded.assign(occluded.begin(), occluded.end());
  return report;
}

OcclusionReport occlusion_report(const PageSample& screen, double threshold) {
  return occlusion_report(screen.axtree, threshold);
}

ResponsivenessSummary responsiveness_report(std::span<const PageSample> corpus) {
  ResponsivenessSummary out;
  std::size_t width_ok = 0, meta_ok = 0;
  for (const auto& s : corpus) {
    if (!s.probe) continue;
    if (s.probe->content_width_ok) {
      ++out.width_measured;
      width_ok += *s.probe->content_width_ok ? 1 : 0;
    }
    if (s.probe->has_viewport_meta) {
      ++out.meta_measured;
      meta_ok += *s.probe->has_viewport_meta ? 1 : 0;
    }
  }
  if (out.width_measured > 0) out.content_width_ok = double(width_ok) / out.width_measured;
  if (out.meta_measured > 0) out.has_viewport_meta = double(meta_ok) / out.meta_measured;
  return out;
}

Eigen::RowVectorXd class_distribution(const PageSample& screen,
                                      const std::vector<std::string>& vocab) {
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(Eigen::Index(vocab.size()));
  const AxTree tree(screen.axtree);
  for (const auto& [id, labels] : label_tree(tree)) {
    for (Eigen::Index c = 0; c < row.size(); ++c) {
      if (labels.contains(vocab[std::size_t(c)])) row(c) += 1.0;
    }
  }
  const double total = row.sum();
  if (total > 0) row /= total;
  return row;
}

Eigen::MatrixXd class_distribution_matrix(std::span<const PageSample> corpus,
                                          const std::vector<std::string>& vocab) {
  Eigen::MatrixXd m(Eigen::Index(corpus.size()), Eigen::Index(vocab.size()));
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    m.row(Eigen::Index(i)) = class_distribution(corpus[i], vocab);
  }
  return m;
}

ClassPercentileProfile percentile_profile(std::string screen_id,
                                          const Eigen::RowVectorXd& screen,
                                          const Eigen::MatrixXd& corpus,
                                          const std::vector<std::string>& vocab) {
  ClassPercentileProfile profile;
  profile.screen_id = std::move(screen_id);
  const double rows = double(corpus.rows());
  for (Eigen::Index c = 0; c < screen.size(); ++c) {
    const auto& name = vocab[std::size_t(c)];
    profile.frequency[name] = screen(c);
    const auto below = (corpus.col(c).array() < screen(c)).count();
    profile.percentile_rank[name] = rows > 0 ? 100.0 * double(below) / rows : 0.0;
  }
  return profile;
}

ScreenQuality screen_quality(const PageSample& screen) {
  ScreenQuality q;
  q.sample_id = screen.sample_id;
  q.elements = screen.axtree.empty() ? 0 : screen.axtree.size() - 1;
  const auto small = small_target_report(screen);
  q.small_target_count = small.flagged.size();
  q.interactable_count = small.interactable;
  const auto occ = occlusion_report(screen);
  q.overlap_pair_count = occ.pairs.size();
  q.occluded_gt20_count = occ.occluded.size();
  if (screen.probe) {
    q.content_width_ok = screen.probe->content_width_ok;
    q.has_viewport_meta = screen.probe->has_viewport_meta;
  }
  return q;
}

QualityReport quality_report(std::span<const PageSample> corpus, unsigned jobs) {
  QualityReport report;
  report.screens.resize(corpus.size());
  jobs = std::max(1u, std::min<unsigned>(jobs, unsigned(corpus.size())));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < corpus.size(); ++i) report.screens[i] = screen_quality(corpus[i]);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned t = 0; t < jobs; ++t) {
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < corpus.size(); i += jobs) {
            report.screens[i] = screen_quality(corpus[i]);
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::size_t with_overlap = 0, small = 0, interactable = 0;
  for (const auto& q : report.screens) {
    with_overlap += q.overlap_pair_count > 0 ? 1 : 0;
    small += q.small_target_count;
    interactable += q.interactable_count;
  }
  if (!corpus.empty()) {
    report.fraction_screens_with_overlap = double(with_overlap) / double(corpus.size());
  }
  if (interactable > 0) report.fraction_small_interactables = double(small) / interactable;
  const auto resp = responsiveness_report(corpus);
  report.fraction_responsive_width = resp.content_width_ok;
  report.fraction_viewport_meta = resp.has_viewport_meta;

  double area = 0.0;
  std::size_t boxes = 0;
  for (const auto& s : corpus) {
    for (const auto& n : s.axtree) {
      if (!n.parent_id || !n.boxes) continue;
      area += n.boxes->border.area();
      ++boxes;
    }
  }
  if (boxes > 0) report.mean_bbox_area = area / double(boxes);
  return report;
}

namespace {

template <typename T>
json nullable(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json QualityReport::to_json() const {
  json rows = json::array();
  for (const auto& q : screens) {
    rows.push_back({{"sample_id", q.sample_id},
                    {"elements", q.elements},
                    {"small_target_count", q.small_target_count},
                    {"interactable_count", q.interactable_count},
                    {"overlap_pair_count", q.overlap_pair_count},
                    {"occluded_gt20_count", q.occluded_gt20_count},
                    {"content_width_ok", nullable(q.content_width_ok)},
                    {"has_viewport_meta", nullable(q.has_viewport_meta)}});
  }
  return json{{"screens", rows},
              {"fraction_screens_with_overlap", fraction_screens_with_overlap},
              {"fraction_small_interactables", nullable(fraction_small_interactables)},
              {"fraction_responsive_width", nullable(fraction_responsive_width)},
              {"fraction_viewport_meta", nullable(fraction_viewport_meta)},
              {"mean_bbox_area", nullable(mean_bbox_area)}};
}

std::string QualityReport::to_csv() const {
  std::ostringstream out;
  out << "sample_id,elements,small_target_count,interactable_count,overlap_pair_count,"
         "occluded_gt20_count,content_width_ok,has_viewport_meta\n";
  auto flag = [](const std::optional<bool>& b) {
    return b ? (*b ? "true" : "false") : "";
  };
  for (const auto& q : screens) {
    out << q.sample_id << ',' << q.elements << ',' << q.small_target_count << ','
        << q.interactable_count << ',' << q.overlap_pair_count << ','
        << q.occluded_gt20_count << ',' << flag(q.content_width_ok) << ','
        << flag(q.has_viewport_meta) << '\n';
  }
  return out.str();
}

}  // namespace uiharvest
