#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "uiharvest/random.hpp"
#include "uiharvest/sample.hpp"

namespace uiharvest {

class DatasetStore;

enum class PairLabel { same, different };
enum class Provenance { revisit, scroll, same_domain_diff_path, cross_domain };

const char* to_string(PairLabel label);
const char* to_string(Provenance provenance);
PairLabel label_of(Provenance provenance);

// A whole viewport capture, or a viewport-sized window of the full-page
// capture starting at crop_top (CSS px). Serialized as "id" or "id#top=PX".
struct ImageRef {
  std::string sample_id;
  std::optional<int> crop_top;

  std::string str() const;
  static ImageRef parse(std::string_view text);

  friend bool operator==(const ImageRef&, const ImageRef&) = default;
};

struct ScrollCrop {
  std::string sample_id;
  int window_top = 0;
  int window_width = 0;
  int window_height = 0;
};

/// Tops 0, stride, 2*stride, ... plus a final top flush with the page bottom.
/// A page no taller than the viewport yields the single top 0.
std::vector<int> scroll_tops(int page_height, int viewport_height, int stride);

/// Default stride is half the viewport height.
std::vector<ScrollCrop> scroll_windows(const PageSample& sample,
                                       std::optional<int> stride = std::nullopt);

struct PairExample {
  ImageRef a;
  ImageRef b;
  PairLabel label = PairLabel::same;
  Provenance provenance = Provenance::revisit;
  std::optional<int> phash_distance;
};

nlohmann::json to_json(const PairExample& pair);

using ImageHasher = std::function<std::uint64_t(const ImageRef&)>;

struct PairConfig {
  bool filter_duplicates = false;  // set for the test split
  int dup_threshold = 4;
  int max_redraws = 64;
  std::optional<int> stride;
};

struct PairResult {
  std::vector<PairExample> pairs;
  std::vector<std::string> warnings;
};

/// Draws count pairs. Each pair picks a provenance with probability 1/4,
/// then two same-device references. With a hasher, every pair carries its
/// dHash distance; with filter_duplicates, same pairs at or below
/// dup_threshold are redrawn within their provenance.
PairResult generate_pairs(std::span<const PageSample> corpus, std::size_t count, Rng& rng,
                          const PairConfig& config = {}, const ImageHasher& hasher = {});

// Memoizing hasher over a dataset store. Viewport refs hash viewport.<ext>;
// crop refs hash the matching rows of fullpage.<ext>.
class StoreImageHasher {
 public:
  StoreImageHasher(const DatasetStore& store, std::span<const PageSample> corpus);

  std::uint64_t operator()(const ImageRef& ref);

 private:
  const DatasetStore& store_;
  std::map<std::string, const PageSample*> samples_;
  std::map<std::string, std::uint64_t> cache_;
  std::mutex mutex_;
};

}  // namespace uiharvest
