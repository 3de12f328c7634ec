#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uiharvest/random.hpp"
#include "uiharvest/sample.hpp"

namespace uiharvest {

enum class Split { train, val, test };

const char* to_string(Split split);
std::optional<Split> parse_split(std::string_view text);

struct SplitRatios {
  double train = 0.70;
  double val = 0.10;
  double test = 0.20;
};

/// Stable 64-bit hash of salt||domain mapped to [0,1): train below 0.70,
/// val below 0.80, test otherwise.
Split assign_split(std::string_view registrable_domain, std::string_view salt,
                   const SplitRatios& ratios = {});

// Encoded screenshot bytes handed to put_sample.
struct EncodedImages {
  std::string viewport;
  std::string fullpage;
  std::string extension = "jpg";
};

struct SampleLocation {
  std::string sample_id;
  Split split = Split::train;
  std::filesystem::path dir;
};

// Dataset on disk:
//   root/<split>/<domain>/<url_hash>/<device>/<ts>/{meta.json, axtree.json,
//   viewport.<ext>, fullpage.<ext>}
// Samples are staged under root/.tmp and renamed into place, so a sample
// directory either exists completely or not at all.
class DatasetStore {
 public:
  explicit DatasetStore(std::filesystem::path root, std::string salt = "uiharvest");

  const std::filesystem::path& root() const noexcept { return root_; }
  const std::string& salt() const noexcept { return salt_; }

  /// Writes the sample and returns its id. The id and image refs are filled
  /// in from the content; an existing sample with the same id is left as is.
  /// Throws Error{storage} on I/O failure (nothing is left in place) and
  /// Error{validation} if the sample breaks an invariant.
  std::string put_sample(PageSample sample, const EncodedImages& images);

  /// Throws Error{corrupt_sample} naming a missing file, or
  /// Error{validation} on an invariant violation.
  PageSample load_sample(std::string_view sample_id) const;

  /// Directory holding the sample (used for lazy image access).
  std::filesystem::path sample_dir(std::string_view sample_id) const;

  /// Every committed sample, sorted by id. Staging leftovers are ignored.
  std::vector<SampleLocation> list() const;

  /// Removes staging leftovers from interrupted writes.
  void clean_staging() const;

  /// Reads a sample directory directly.
  static PageSample load_dir(const std::filesystem::path& dir);

 private:
  void refresh_index() const;

  std::filesystem::path root_;
  std::string salt_;
  mutable std::mutex index_mutex_;
  mutable std::map<std::string, SampleLocation, std::less<>> index_;
};

struct SplitManifest {
  std::string dataset_root;
  SplitRatios ratios;
  std::string salt = "uiharvest";
  std::map<std::string, std::vector<std::string>> subsets;

  nlohmann::json to_json() const;
  static SplitManifest from_json(const nlohmann::json& j);
};

/// Uniform sample of n train ids without replacement, recorded in the
/// manifest under name. train_ids are sorted before sampling so the result
/// depends only on the id set and the RNG. Throws Error{size} if n exceeds
/// the train split.
std::vector<std::string> make_subset(SplitManifest& manifest, const std::string& name,
                                     std::size_t n, std::vector<std::string> train_ids,
                                     Rng& rng);

/// Whole file contents. Throws Error{corrupt_sample} if it cannot be read.
std::string read_file(const std::filesystem::path& path);

/// Writes bytes to path via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace uiharvest
