#include "uiharvest/pairgen.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include "uiharvest/errors.hpp"
#include "uiharvest/image.hpp"
#include "uiharvest/store.hpp"
#include "uiharvest/url.hpp"

namespace uiharvest {

namespace {

constexpr std::string_view kTopMarker = "#top=";
constexpr std::array kProvenances{Provenance::revisit, Provenance::scroll,
                                  Provenance::same_domain_diff_path, Provenance::cross_domain};
constexpr int kPartnerRejectionTries = 32;

std::string path_of(const std::string& url) {
  std::string pq = url_path_and_query(url);
  return pq.substr(0, pq.find('?'));
}

// Anchor-then-partner candidate pools, one per provenance.
struct Pools {
  std::vector<const PageSample*> samples;  // sorted by id
  std::map<std::string, std::vector<std::size_t>> by_url_device;
  std::map<std::string, std::vector<std::size_t>> by_domain_device;
  std::map<std::string, std::vector<std::size_t>> by_device;
  std::vector<std::vector<int>> tops;
  std::array<std::vector<std::size_t>, 4> anchors;
};

template <typename Pred>
bool any_member(const std::vector<std::size_t>& group, Pred pred) {
  return std::any_of(group.begin(), group.end(), pred);
}

// Uniform member of group satisfying pred; at least one must exist.
template <typename Pred>
std::size_t draw_partner(const std::vector<std::size_t>& group, Rng& rng, Pred pred) {
  for (int i = 0; i < kPartnerRejectionTries; ++i) {
    const std::size_t pick = group[uniform_index(rng, group.size())];
    if (pred(pick)) return pick;
  }
  std::vector<std::size_t> eligible;
  std::copy_if(group.begin(), group.end(), std::back_inserter(eligible), pred);
  return eligible[uniform_index(rng, eligible.size())];
}

Pools build_pools(std::span<const PageSample> corpus, std::optional<int> stride) {
  Pools p;
  for (const auto& s : corpus) p.samples.push_back(&s);
  std::sort(p.samples.begin(), p.samples.end(),
            [](const PageSample* a, const PageSample* b) { return a->sample_id < b->sample_id; });
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    const PageSample& s = *p.samples[i];
    p.by_url_device[s.url + '\n' + s.device].push_back(i);
    p.by_domain_device[s.registrable_domain + '\n' + s.device].push_back(i);
    p.by_device[s.device].push_back(i);
    std::vector<int> tops;
    for (const auto& crop : scroll_windows(s, stride)) tops.push_back(crop.window_top);
    p.tops.push_back(std::move(tops));
  }
  for (std::size_t i = 0; i < p.samples.size(); ++i) {
    const PageSample& s = *p.samples[i];
    const auto& same_url = p.by_url_device[s.url + '\n' + s.device];
    if (any_member(same_url, [&](std::size_t j) {
          return p.samples[j]->captured_at != s.captured_at;
        })) {
      p.anchors[0].push_back(i);
    }
    if (p.tops[i].size() >= 2) p.anchors[1].push_back(i);
    const std::string path = path_of(s.url);
    if (any_member(p.by_domain_device[s.registrable_domain + '\n' + s.device],
                   [&](std::size_t j) { return path_of(p.samples[j]->url) != path; })) {
      p.anchors[2].push_back(i);
    }
    if (any_member(p.by_device[s.device], [&](std::size_t j) {
          return p.samples[j]->registrable_domain != s.registrable_domain;
        })) {
      p.anchors[3].push_back(i);
    }
  }
  return p;
}

PairExample draw_pair(Pools& p, Provenance provenance, Rng& rng) {
  const auto& anchors = p.anchors[std::size_t(provenance)];
  const std::size_t a = anchors[uniform_index(rng, anchors.size())];
  const PageSample& s = *p.samples[a];
  PairExample pair;
  pair.provenance = provenance;
  pair.label = label_of(provenance);
  pair.a.sample_id = s.sample_id;
  switch (provenance) {
    case Provenance::revisit: {
      const std::size_t b = draw_partner(p.by_url_device[s.url + '\n' + s.device], rng,
                                         [&](std::size_t j) {
                                           return p.samples[j]->captured_at != s.captured_at;
                                         });
      pair.b.sample_id = p.samples[b]->sample_id;
      break;
    }
    case Provenance::scroll: {
      const auto& tops = p.tops[a];
      const std::size_t i = uniform_index(rng, tops.size());
      std::size_t j = uniform_index(rng, tops.size() - 1);
      if (j >= i) ++j;
      pair.a.crop_top = tops[i];
      pair.b = ImageRef{s.sample_id, tops[j]};
      break;
    }
    case Provenance::same_domain_diff_path: {
      const std::string path = path_of(s.url);
      const std::size_t b = draw_partner(
          p.by_domain_device[s.registrable_domain + '\n' + s.device], rng,
          [&](std::size_t j) { return path_of(p.samples[j]->url) != path; });
      pair.b.sample_id = p.samples[b]->sample_id;
      break;
    }
    case Provenance::cross_domain: {
      const std::size_t b = draw_partner(p.by_device[s.device], rng, [&](std::size_t j) {
        return p.samples[j]->registrable_domain != s.registrable_domain;
      });
      pair.b.sample_id = p.samples[b]->sample_id;
      break;
    }
  }
  return pair;
}

// 1/4 each; a missing provenance passes its share to the other member of its
// label group, or to the other group when the whole label is missing.
std::array<double, 4> provenance_weights(const std::array<bool, 4>& available) {
  std::array<double, 4> w{};
  const bool same = available[0] || available[1];
  const bool different = available[2] || available[3];
  const double same_share = same ? (different ? 0.5 : 1.0) : 0.0;
  const double different_share = different ? (same ? 0.5 : 1.0) : 0.0;
  for (std::size_t base : {0u, 2u}) {
    const double share = base == 0 ? same_share : different_share;
    const int n = int(available[base]) + int(available[base + 1]);
    for (std::size_t k = base; k < base + 2; ++k) w[k] = available[k] ? share / n : 0.0;
  }
  return w;
}

}  // namespace

const char* to_string(PairLabel label) {
  return label == PairLabel::same ? "same" : "different";
}

const char* to_string(Provenance provenance) {
  switch (provenance) {
    case Provenance::revisit: return "revisit";
    case Provenance::scroll: return "scroll";
    case Provenance::same_domain_diff_path: return "same_domain_diff_path";
    case Provenance::cross_domain: return "cross_domain";
  }
  return "?";
}

PairLabel label_of(Provenance provenance) {
  return provenance == Provenance::revisit || provenance == Provenance::scroll
             ? PairLabel::same
             : PairLabel::different;
}

std::string ImageRef::str() const {
  if (!crop_top) return sample_id;
  return sample_id + std::string(kTopMarker) + std::to_string(*crop_top);
}

ImageRef ImageRef::parse(std::string_view text) {
  ImageRef ref;
  const auto pos = text.find(kTopMarker);
  if (pos == std::string_view::npos) {
    ref.sample_id = std::string(text);
  } else {
    ref.sample_id = std::string(text.substr(0, pos));
    const auto digits = text.substr(pos + kTopMarker.size());
    int top = 0;
    const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), top);
    if (ec != std::errc{} || end != digits.data() + digits.size() || top < 0) {
      throw Error(ErrorKind::parse, "bad image reference: " + std::string(text));
    }
    ref.crop_top = top;
  }
  if (ref.sample_id.empty()) {
    throw Error(ErrorKind::parse, "bad image reference: " + std::string(text));
  }
  return ref;
}

std::vector<int> scroll_tops(int page_height, int viewport_height, int stride) {
  if (stride <= 0) throw Error(ErrorKind::validation, "scroll stride must be positive");
  std::vector<int> tops{0};
  if (page_height <= viewport_height) return tops;
  for (int top = stride; top + viewport_height <= page_height; top += stride) {
    tops.push_back(top);
  }
  if (tops.back() != page_height - viewport_height) tops.push_back(page_height - viewport_height);
  return tops;
}

std::vector<ScrollCrop> scroll_windows(const PageSample& sample, std::optional<int> stride) {
  const int vh = sample.viewport.height;
  const int height = std::min(vh, sample.fullpage_height);
  std::vector<ScrollCrop> out;
  for (int top : scroll_tops(sample.fullpage_height, vh, stride.value_or(std::max(1, vh / 2)))) {
    out.push_back(ScrollCrop{sample.sample_id, top, sample.viewport.width, height});
  }
  return out;
}

nlohmann::json to_json(const PairExample& pair) {
  return nlohmann::json{
      {"a_ref", pair.a.str()},
      {"b_ref", pair.b.str()},
      {"label", to_string(pair.label)},
      {"provenance", to_string(pair.provenance)},
      {"phash_distance",
       pair.phash_distance ? nlohmann::json(*pair.phash_distance) : nlohmann::json(nullptr)}};
}

PairResult generate_pairs(std::span<const PageSample> corpus, std::size_t count, Rng& rng,
                          const PairConfig& config, const ImageHasher& hasher) {
  if (config.filter_duplicates && !hasher) {
    throw Error(ErrorKind::config, "duplicate filtering needs an image hasher");
  }
  PairResult result;
  Pools pools = build_pools(corpus, config.stride);
  std::array<bool, 4> available{};
  for (std::size_t k = 0; k < 4; ++k) {
    available[k] = !pools.anchors[k].empty();
    if (!available[k]) {
      result.warnings.push_back(std::string("no ") + to_string(kProvenances[k]) +
                                " candidates; reweighting the remaining provenances");
    }
  }
  auto weights = provenance_weights(available);
  while (result.pairs.size() < count) {
    const auto k = weighted_index(rng, weights);
    if (!k) {
      result.warnings.push_back("generated " + std::to_string(result.pairs.size()) + " of " +
                                std::to_string(count) + " pairs");
      break;
    }
    const Provenance provenance = kProvenances[*k];
    const bool filtered = config.filter_duplicates && label_of(provenance) == PairLabel::same;
    bool emitted = false;
    for (int attempt = 0; attempt <= config.max_redraws; ++attempt) {
      PairExample pair = draw_pair(pools, provenance, rng);
      if (hasher) pair.phash_distance = hamming_distance(hasher(pair.a), hasher(pair.b));
      if (filtered && *pair.phash_distance <= config.dup_threshold) continue;
      result.pairs.push_back(std::move(pair));
      emitted = true;
      break;
    }
    if (!emitted) {
      available[*k] = false;
      weights = provenance_weights(available);
      result.warnings.push_back(std::string("no ") + to_string(provenance) +
                                " pair above the duplicate threshold after " +
                                std::to_string(config.max_redraws) +
                                " redraws; reweighting the remaining provenances");
    }
  }
  return result;
}

StoreImageHasher::StoreImageHasher(const DatasetStore& store, std::span<const PageSample> corpus)
    : store_(store) {
  for (const auto& s : corpus) samples_[s.sample_id] = &s;
}

std::uint64_t StoreImageHasher::operator()(const ImageRef& ref) {
  const std::string key = ref.str();
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
  }
  const auto it = samples_.find(ref.sample_id);
  if (it == samples_.end()) throw Error(ErrorKind::validation, "unknown sample " + ref.sample_id);
  const PageSample& s = *it->second;
  const auto dir = store_.sample_dir(s.sample_id);
  std::uint64_t hash = 0;
  if (!ref.crop_top) {
    hash = dhash(decode_gray(read_file(dir / s.viewport_image_ref)));
  } else {
    const GrayImage page = decode_gray(read_file(dir / s.fullpage_image_ref));
    const double scale = s.fullpage_height > 0 ? double(page.rows()) / s.fullpage_height : 1.0;
    const auto top = Eigen::Index(std::lround(*ref.crop_top * scale));
    const auto height = Eigen::Index(std::lround(s.viewport.height * scale));
    hash = dhash(crop_rows(page, top, std::max<Eigen::Index>(1, height)));
  }
  std::lock_guard lock(mutex_);
  cache_.emplace(key, hash);
  return hash;
}

}  // namespace uiharvest
