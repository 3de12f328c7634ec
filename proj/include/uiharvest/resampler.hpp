#pragma once

#include <Eigen/Core>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "uiharvest/random.hpp"
#include "uiharvest/sample.hpp"

namespace uiharvest {

// Class statistics over a sample list S and class list C.
struct ClassFrequencyTable {
  std::vector<std::string> classes;
  std::vector<std::string> sample_ids;
  Eigen::MatrixXd counts;       // |S| x |C| element counts
  Eigen::VectorXd totals;       // f_C: column sums of counts
  Eigen::MatrixXd frequencies;  // f_S: counts rows normalized to sum 1
  Eigen::VectorXd weights;      // w_C: 1 / f_C, 0 for classes with f_C == 0
};

/// Elements of each screen carrying each vocabulary label (a multi-label
/// element counts once per class).
Eigen::MatrixXd class_count_matrix(std::span<const PageSample> samples,
                                   const std::vector<std::string>& vocab);

/// Throws Error{empty_table} when there are no samples or every count is 0.
ClassFrequencyTable build_frequency_table(std::vector<std::string> sample_ids,
                                          Eigen::MatrixXd counts,
                                          std::vector<std::string> classes);
ClassFrequencyTable build_frequency_table(std::span<const PageSample> samples,
                                          const std::vector<std::string>& vocab);

/// Predicate over table row indices; true drops the sample from the pool.
using SampleFilter = std::function<bool(std::size_t row)>;

/// Frequency-based resampling without replacement: repeatedly draw a class
/// with probability proportional to w_C, then a not-yet-chosen sample with
/// probability proportional to its normalized frequency of that class.
/// Classes with no remaining positive frequency are masked from the class
/// draw. Returns n distinct ids in draw order.
/// Throws Error{size} when n exceeds the eligible samples and
/// Error{exhaustion} when the samples carrying any label run out first.
std::vector<std::string> resample_split(std::size_t n, const ClassFrequencyTable& table,
                                        Rng& rng, const SampleFilter& exclude = {});

/// Default screen filter for the resampled subset: a zero-area leaf, a leaf
/// occluded by more than 20%, or a labeled node with opacity 0.
bool has_visual_defect(const PageSample& sample, const std::vector<std::string>& vocab);

struct ChangeRatio {
  std::string cls;
  double screen_ratio = 1.0;   // screens containing >= 1 element of the class
  double element_ratio = 1.0;  // mean elements of the class per screen
};

/// Ratios resampled / original per class. A zero denominator yields +inf,
/// or 1 when the numerator is zero too.
std::vector<ChangeRatio> change_ratio_report(const Eigen::MatrixXd& original_counts,
                                             const Eigen::MatrixXd& resampled_counts,
                                             const std::vector<std::string>& classes);

/// {"classes": [{"class", "screen_ratio", "element_ratio"}]}; infinity is
/// written as the string "inf".
nlohmann::json change_ratio_json(const std::vector<ChangeRatio>& ratios);
std::string change_ratio_csv(const std::vector<ChangeRatio>& ratios);

}  // namespace uiharvest
