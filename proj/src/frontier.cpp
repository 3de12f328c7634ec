#include "uiharvest/frontier.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>

#include "uiharvest/errors.hpp"

namespace uiharvest {
namespace {

void erase_value(std::vector<std::string>& v, std::string_view value) {
  const auto it = std::find(v.begin(), v.end(), value);
  if (it != v.end()) v.erase(it);
}

std::string format_weight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", w);
  return buf;
}

}  // namespace

void FrontierConfig::validate() const {
  if (!(p_min > 0.0 && p_min <= 1.0)) {
    throw Error(ErrorKind::config, "p_min must be in (0, 1]");
  }
  if (max_queued_per_host < 1) {
    throw Error(ErrorKind::config, "max_queued_per_host must be >= 1");
  }
}

double segment_similarity(std::span<const std::string> a,
                          std::span<const std::string> b) {
  const std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  std::size_t common = 0;
  while (common < a.size() && common < b.size() && a[common] == b[common]) {
    ++common;
  }
  return static_cast<double>(common) / static_cast<double>(longest);
}

double path_similarity(const UrlRecord& candidate,
                       std::span<const UrlRecord> visited_same_host) {
  double best = 0.0;
  for (const auto& v : visited_same_host) {
    best = std::max(best, segment_similarity(candidate.path_segments, v.path_segments));
  }
  return best;
}

double url_weight(double similarity, const FrontierConfig& cfg) {
  return std::max(cfg.p_min, 1.0 - similarity);
}

Frontier::Frontier(FrontierConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

Frontier::Host& Frontier::host_for(const std::string& name) {
  auto [it, inserted] = host_index_.try_emplace(name, hosts_.size());
  if (inserted) {
    Host host;
    host.name = name;
    hosts_.push_back(std::move(host));
  }
  return hosts_[it->second];
}

double Frontier::similarity_to_visited(const Host& host,
                                       const UrlRecord& record) const {
  double best = 0.0;
  for (const auto& url : host.visited) {
    const auto& v = records_.at(url);
    best = std::max(best, segment_similarity(record.path_segments, v.path_segments));
    if (best >= 1.0) break;
  }
  return best;
}

bool Frontier::enqueue(UrlRecord record, Rng& rng) {
  const auto existing = records_.find(record.url);
  if (existing != records_.end() && existing->second.state != UrlState::visited) {
    return false;
  }
  Host& host = host_for(record.host);
  if (host.queued.size() >= cfg_.max_queued_per_host) return false;

  if (existing != records_.end()) {
    if (unit_real(rng) >= cfg_.p_min) return false;
    UrlRecord& stored = existing->second;
    stored.weight = url_weight(similarity_to_visited(host, stored), cfg_);
    stored.state = UrlState::queued;
    erase_value(host.visited, stored.url);
    host.queued.push_back(stored.url);
    --visited_total_;
    ++queued_total_;
    return true;
  }

  record.weight = url_weight(similarity_to_visited(host, record), cfg_);
  record.state = UrlState::queued;
  host.queued.push_back(record.url);
  host.members.push_back(record.url);
  ++queued_total_;
  records_.emplace(record.url, std::move(record));
  return true;
}

std::optional<UrlRecord> Frontier::next_url(Rng& rng) {
  std::vector<Host*> candidates;
  for (auto& h : hosts_) {
    if (!h.queued.empty()) candidates.push_back(&h);
  }
  if (candidates.empty()) return std::nullopt;
  Host& host = *candidates[uniform_index(rng, candidates.size())];

  std::vector<double> weights;
  weights.reserve(host.queued.size());
  for (const auto& url : host.queued) weights.push_back(records_.at(url).weight);
  const std::size_t pick = weighted_index(rng, weights).value_or(0);

  UrlRecord& chosen = records_.at(host.queued[pick]);
  host.queued.erase(host.queued.begin() + static_cast<std::ptrdiff_t>(pick));
  chosen.state = UrlState::leased;
  ++host.leased;
  --queued_total_;
  ++leased_total_;
  return chosen;
}

bool Frontier::mark_visited(std::string_view url) {
  const auto it = records_.find(std::string(url));
  if (it == records_.end() || it->second.state == UrlState::visited) return false;
  UrlRecord& rec = it->second;
  Host& host = hosts_[host_index_.at(rec.host)];
  if (rec.state == UrlState::queued) {
    erase_value(host.queued, rec.url);
    --queued_total_;
  } else {
    --host.leased;
    --leased_total_;
  }
  rec.state = UrlState::visited;
  host.visited.push_back(rec.url);
  ++visited_total_;
  return true;
}

bool Frontier::release(std::string_view url) {
  const auto it = records_.find(std::string(url));
  if (it == records_.end() || it->second.state != UrlState::leased) return false;
  UrlRecord& rec = it->second;
  Host& host = hosts_[host_index_.at(rec.host)];
  rec.state = UrlState::queued;
  --host.leased;
  --leased_total_;
  host.queued.push_back(rec.url);
  ++queued_total_;
  return true;
}

std::vector<std::string> Frontier::urls_in_state(UrlState state) const {
  std::vector<std::string> out;
  for (const auto& [url, rec] : records_) {
    if (rec.state == state) out.push_back(url);
  }
  std::sort(out.begin(), out.end());
  return out;
}

const UrlRecord* Frontier::find(std::string_view url) const {
  const auto it = records_.find(std::string(url));
  return it == records_.end() ? nullptr : &it->second;
}

std::vector<HostCounts> Frontier::host_counts() const {
  std::vector<HostCounts> out;
  out.reserve(hosts_.size());
  for (const auto& h : hosts_) {
    out.push_back({h.name, h.queued.size(), h.leased, h.visited.size()});
  }
  return out;
}

void Frontier::save(std::ostream& out) const {
  for (const auto& host : hosts_) {
    for (const auto& url : host.queued) {
      out << "queued\t" << format_weight(records_.at(url).weight) << '\t' << url << '\n';
    }
    for (const auto& url : host.members) {
      const auto& rec = records_.at(url);
      if (rec.state == UrlState::queued) continue;
      out << to_string(rec.state) << '\t' << format_weight(rec.weight) << '\t'
          << url << '\n';
    }
  }
}

void Frontier::insert_loaded(UrlRecord record) {
  Host& host = host_for(record.host);
  switch (record.state) {
    case UrlState::queued:
      host.queued.push_back(record.url);
      ++queued_total_;
      break;
    case UrlState::leased:
      ++host.leased;
      ++leased_total_;
      break;
    case UrlState::visited:
      host.visited.push_back(record.url);
      ++visited_total_;
      break;
  }
  host.members.push_back(record.url);
  records_.emplace(record.url, std::move(record));
}

Frontier Frontier::load(std::istream& in, FrontierConfig cfg,
                        const PublicSuffixList* psl) {
  Frontier frontier(std::move(cfg));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab1 = line.find('\t');
    const auto tab2 = tab1 == std::string::npos ? tab1 : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw Error(ErrorKind::parse, "snapshot line " + std::to_string(line_no) +
                                        ": expected state\\tweight\\turl");
    }
    const auto state = parse_url_state(std::string_view(line).substr(0, tab1));
    if (!state) {
      throw Error(ErrorKind::parse, "snapshot line " + std::to_string(line_no) +
                                        ": unknown state");
    }
    double weight = 0.0;
    try {
      weight = std::stod(line.substr(tab1 + 1, tab2 - tab1 - 1));
    } catch (const std::exception&) {
      throw Error(ErrorKind::parse, "snapshot line " + std::to_string(line_no) +
                                        ": bad weight");
    }
    UrlRecord rec = normalize_url(std::string_view(line).substr(tab2 + 1), std::nullopt, psl);
    if (frontier.records_.contains(rec.url)) {
      throw Error(ErrorKind::parse, "snapshot line " + std::to_string(line_no) +
                                        ": duplicate url " + rec.url);
    }
    rec.state = *state;
    rec.weight = std::clamp(weight, frontier.cfg_.p_min, 1.0);
    frontier.insert_loaded(std::move(rec));
  }
  return frontier;
}

}  // namespace uiharvest
