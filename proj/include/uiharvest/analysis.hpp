#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "uiharvest/sample.hpp"

namespace uiharvest {

/// The ten element classes used for class statistics and resampling.
const std::vector<std::string>& default_vocabulary();

/// Maps a browser accessibility role onto the label vocabulary spelling:
/// lowercase, "StaticText" -> "text", "img" -> "image".
std::string canonical_role(std::string_view role);

struct ElementLabelSet {
  std::int64_t node_id = 0;
  std::set<std::string> labels;
};

/// The node's own role plus the roles of its singleton-parent chain: walking
/// up while each parent has exactly one child. The tree root contributes no
/// label.
ElementLabelSet element_labels(const AxNode& node, const AxTree& tree);

/// Labels for every node of the tree except the root, keyed by node id.
std::map<std::int64_t, std::set<std::string>> label_tree(const AxTree& tree);

/// Interactable: labels include link or button.
bool is_interactable(const std::set<std::string>& labels);

struct CompositionStats {
  std::size_t screens = 0;
  std::map<std::string, std::size_t> class_counts;
  double mean_elements = 0.0;
  double mean_visible = 0.0;
  double mean_clickable = 0.0;

  /// Classes by descending count (ties by name), at most k.
  std::vector<std::pair<std::string, std::size_t>> top(std::size_t k) const;
};

/// Element = any non-root node. Visible = content box intersects the
/// device viewport. Clickable = clickable flag, link or button label.
/// Throws Error{empty_corpus}.
CompositionStats composition_stats(std::span<const PageSample> corpus);

struct SmallTargetReport {
  std::vector<std::int64_t> flagged;  // border box narrower or shorter than 44
  std::size_t interactable = 0;       // measured interactable nodes
  std::size_t unmeasured = 0;         // interactable nodes without boxes
};

inline constexpr double kMinTargetSize = 44.0;

SmallTargetReport small_target_report(const PageSample& screen);

struct OverlapPair {
  std::int64_t first = 0;   // smaller node id
  std::int64_t second = 0;  // larger node id
  std::int64_t occludee = 0;
  double area = 0.0;
  double occluded_fraction = 0.0;  // area / occludee border-box area

  friend bool operator==(const OverlapPair&, const OverlapPair&) = default;
};

struct OcclusionReport {
  std::vector<OverlapPair> pairs;          // sorted by (first, second)
  std::vector<std::int64_t> occluded;      // sorted, unique
  friend bool operator==(const OcclusionReport&, const OcclusionReport&) = default;
};

/// Which of two overlapping leaves is painted underneath: the lower
/// z-index when both carry differing integer z-index styles, otherwise the
/// earlier dom_index.
const AxNode& occludee_of(const AxNode& a, const AxNode& b);

/// Overlaps between leaf border boxes (positive intersection area) and the
/// occludees covered by more than threshold of their own area.
OcclusionReport occlusion_report(const PageSample& screen, double threshold = 0.20);
OcclusionReport occlusion_report(const std::vector<AxNode>& nodes, double threshold = 0.20);

struct ResponsivenessSummary {
  std::size_t width_measured = 0;
  std::size_t meta_measured = 0;
  std::optional<double> content_width_ok;   // null when nothing was measured
  std::optional<double> has_viewport_meta;
};

ResponsivenessSummary responsiveness_report(std::span<const PageSample> corpus);

/// Per-screen normalized class frequencies over vocab (row per screen). Rows
/// of screens without any vocabulary label are zero.
Eigen::MatrixXd class_distribution_matrix(std::span<const PageSample> corpus,
                                          const std::vector<std::string>& vocab);
Eigen::RowVectorXd class_distribution(const PageSample& screen,
                                      const std::vector<std::string>& vocab);

struct ClassPercentileProfile {
  std::string screen_id;
  std::map<std::string, double> frequency;
  std::map<std::string, double> percentile_rank;  // in [0, 100]
};

/// rank(c) = 100 * share of corpus rows whose frequency of c is strictly
/// below the screen's.
ClassPercentileProfile percentile_profile(std::string screen_id,
                                          const Eigen::RowVectorXd& screen,
                                          const Eigen::MatrixXd& corpus,
                                          const std::vector<std::string>& vocab);

struct ScreenQuality {
  std::string sample_id;
  std::size_t elements = 0;
  std::size_t small_target_count = 0;
  std::size_t interactable_count = 0;
  std::size_t overlap_pair_count = 0;
  std::size_t occluded_gt20_count = 0;
  std::optional<bool> content_width_ok;
  std::optional<bool> has_viewport_meta;
};

struct QualityReport {
  std::vector<ScreenQuality> screens;
  double fraction_screens_with_overlap = 0.0;
  std::optional<double> fraction_small_interactables;
  std::optional<double> fraction_responsive_width;
  std::optional<double> fraction_viewport_meta;
  std::optional<double> mean_bbox_area;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

ScreenQuality screen_quality(const PageSample& screen);

/// Runs the per-screen metrics on up to jobs threads and reduces them.
QualityReport quality_report(std::span<const PageSample> corpus, unsigned jobs = 1);

}  // namespace uiharvest
