#include "uiharvest/store.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "uiharvest/errors.hpp"
#include "uiharvest/hash.hpp"

namespace uiharvest {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStaging = ".tmp";

std::string unique_suffix() {
  static std::atomic<std::uint64_t> counter{0};
  return std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1));
}

void write_bytes(const fs::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(ErrorKind::storage, "cannot write " + path.string());
}

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::corrupt_sample,
                "unparseable " + path.filename().string() + ": " + e.what());
  }
}

// <domain>/<url_hash>/<device>/<ts> below each split directory.
constexpr int kSampleDirDepth = 3;

}  // namespace

const char* to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "train";
}

std::optional<Split> parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  return std::nullopt;
}

Split assign_split(std::string_view registrable_domain, std::string_view salt,
                   const SplitRatios& ratios) {
  std::string key(salt);
  key += registrable_domain;
  const double u = static_cast<double>(stable_hash64(key) >> 11) * 0x1.0p-53;
  if (u < ratios.train) return Split::train;
  if (u < ratios.train + ratios.val) return Split::val;
  return Split::test;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::corrupt_sample, "missing file: " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp-" + unique_suffix();
  try {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    write_bytes(tmp, bytes);
    fs::rename(tmp, path);
  } catch (const fs::filesystem_error& e) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw Error(ErrorKind::storage, e.what());
  } catch (const Error&) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

DatasetStore::DatasetStore(fs::path root, std::string salt)
    : root_(std::move(root)), salt_(std::move(salt)) {}

std::string DatasetStore::put_sample(PageSample sample, const EncodedImages& images) {
  const std::string id = compute_sample_id(sample.url, sample.device, sample.captured_at);
  if (!sample.sample_id.empty() && sample.sample_id != id) {
    throw Error(ErrorKind::validation, "sample_id does not match content hash");
  }
  sample.sample_id = id;
  sample.viewport_image_ref = "viewport." + images.extension;
  sample.fullpage_image_ref = "fullpage." + images.extension;
  AxTree validate(sample.axtree);

  const Split split = assign_split(sample.registrable_domain, salt_);
  const fs::path final_dir = root_ / to_string(split) / sample.registrable_domain /
                             sha256_hex(sample.url, 16) / sample.device /
                             format_timestamp_compact(sample.captured_at);
  std::error_code ec;
  if (fs::exists(final_dir / "meta.json", ec)) return id;

  const fs::path staging = root_ / kStaging / (id + "-" + unique_suffix());
  try {
    fs::create_directories(staging);
    write_bytes(staging / sample.viewport_image_ref, images.viewport);
    write_bytes(staging / sample.fullpage_image_ref, images.fullpage);
    write_bytes(staging / "axtree.json", json(sample.axtree).dump(1));
    write_bytes(staging / "meta.json", sample_meta_json(sample).dump(1));
    fs::create_directories(final_dir.parent_path());
    fs::rename(staging, final_dir, ec);
    if (ec) {
      // A concurrent writer may have committed the same sample first.
      if (fs::exists(final_dir / "meta.json")) {
        fs::remove_all(staging);
        return id;
      }
      throw fs::filesystem_error("rename", staging, final_dir, ec);
    }
  } catch (const fs::filesystem_error& e) {
    fs::remove_all(staging, ec);
    throw Error(ErrorKind::storage, e.what());
  } catch (const Error&) {
    fs::remove_all(staging, ec);
    throw;
  }
  std::lock_guard lock(index_mutex_);
  index_[id] = SampleLocation{id, split, final_dir};
  return id;
}

PageSample DatasetStore::load_dir(const fs::path& dir) {
  PageSample s;
  const json meta = parse_json_file(dir / "meta.json");
  const json tree = parse_json_file(dir / "axtree.json");
  try {
    read_sample_meta(meta, s);
    s.axtree = tree.get<std::vector<AxNode>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::validation, std::string("schema mismatch: ") + e.what());
  }
  for (const auto& ref : {s.viewport_image_ref, s.fullpage_image_ref}) {
    if (ref.empty() || !fs::exists(dir / ref)) {
      throw Error(ErrorKind::corrupt_sample, "missing file: " + (dir / ref).string());
    }
  }
  if (compute_sample_id(s.url, s.device, s.captured_at) != s.sample_id) {
    throw Error(ErrorKind::validation, "sample_id does not match content hash");
  }
  AxTree validate(s.axtree);
  return s;
}

void DatasetStore::refresh_index() const {
  std::map<std::string, SampleLocation, std::less<>> fresh;
  for (Split split : {Split::train, Split::val, Split::test}) {
    const fs::path base = root_ / to_string(split);
    std::error_code ec;
    if (!fs::is_directory(base, ec)) continue;
    for (auto it = fs::recursive_directory_iterator(base);
         it != fs::recursive_directory_iterator(); ++it) {
      if (!it->is_directory() || it.depth() != kSampleDirDepth) continue;
      it.disable_recursion_pending();
      const fs::path meta = it->path() / "meta.json";
      if (!fs::exists(meta)) continue;
      try {
        const json j = json::parse(read_file(meta));
        const std::string id = j.at("sample_id").get<std::string>();
        fresh[id] = SampleLocation{id, split, it->path()};
      } catch (const std::exception&) {
        // Unreadable meta; surfaces as corrupt when loaded by path.
      }
    }
  }
  index_ = std::move(fresh);
}

fs::path DatasetStore::sample_dir(std::string_view sample_id) const {
  std::lock_guard lock(index_mutex_);
  auto it = index_.find(sample_id);
  if (it == index_.end()) {
    refresh_index();
    it = index_.find(sample_id);
  }
  if (it == index_.end()) {
    throw Error(ErrorKind::corrupt_sample,
                "no sample with id " + std::string(sample_id) + " (meta.json missing?)");
  }
  return it->second.dir;
}

PageSample DatasetStore::load_sample(std::string_view sample_id) const {
  const fs::path dir = sample_dir(sample_id);
  PageSample s = load_dir(dir);
  if (s.sample_id != sample_id) {
    throw Error(ErrorKind::validation, "directory holds a different sample");
  }
  return s;
}

std::vector<SampleLocation> DatasetStore::list() const {
  std::lock_guard lock(index_mutex_);
  refresh_index();
  std::vector<SampleLocation> out;
  out.reserve(index_.size());
  for (const auto& [id, loc] : index_) out.push_back(loc);
  return out;
}

void DatasetStore::clean_staging() const {
  std::error_code ec;
  fs::remove_all(root_ / kStaging, ec);
}

json SplitManifest::to_json() const {
  return json{{"dataset_root", dataset_root},
              {"ratios", {{"train", ratios.train}, {"val", ratios.val}, {"test", ratios.test}}},
              {"salt", salt},
              {"subsets", subsets}};
}

SplitManifest SplitManifest::from_json(const json& j) {
  SplitManifest m;
  m.dataset_root = j.value("dataset_root", "");
  if (j.contains("ratios")) {
    const auto& r = j.at("ratios");
    m.ratios = SplitRatios{r.at("train").get<double>(), r.at("val").get<double>(),
                           r.at("test").get<double>()};
  }
  m.salt = j.value("salt", "uiharvest");
  m.subsets = j.value("subsets", std::map<std::string, std::vector<std::string>>{});
  if (std::abs(m.ratios.train + m.ratios.val + m.ratios.test - 1.0) > 1e-9) {
    throw Error(ErrorKind::validation, "split ratios must sum to 1");
  }
  return m;
}

std::vector<std::string> make_subset(SplitManifest& manifest, const std::string& name,
                                     std::size_t n, std::vector<std::string> train_ids,
                                     Rng& rng) {
  if (n > train_ids.size()) {
    throw Error(ErrorKind::size, "subset of " + std::to_string(n) +
                                     " requested but the train split has " +
                                     std::to_string(train_ids.size()) + " samples");
  }
  std::sort(train_ids.begin(), train_ids.end());
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + uniform_index(rng, train_ids.size() - i);
    std::swap(train_ids[i], train_ids[j]);
  }
  train_ids.resize(n);
  manifest.subsets[name] = train_ids;
  return train_ids;
}

}  // namespace uiharvest
