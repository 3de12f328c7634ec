#pragma once

// Straight-line model of the crawl policy used as an oracle for Frontier.
// It shares no code with the library: its own containers, its own similarity
// loop and the standard distributions for every draw.

#include <algorithm>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace oracle {

struct Entry {
  std::vector<std::string> path;
  double weight;
};

class PolicyModel {
 public:
  explicit PolicyModel(double p_min) : p_min_(p_min) {}

  void add(const std::string& host, std::vector<std::string> path) {
    double sim = 0.0;
    for (const auto& v : visited_[host]) {
      const std::size_t longest = std::max(v.size(), path.size());
      std::size_t k = 0;
      while (k < v.size() && k < path.size() && v[k] == path[k]) ++k;
      sim = std::max(sim, longest == 0 ? 1.0 : double(k) / double(longest));
    }
    queued_[host].push_back({std::move(path), std::max(p_min_, 1.0 - sim)});
    if (std::find(order_.begin(), order_.end(), host) == order_.end()) {
      order_.push_back(host);
    }
  }

  // Returns (host, path) of the leased URL and marks it visited.
  std::pair<std::string, std::vector<std::string>> lease(std::mt19937_64& gen) {
    std::vector<std::string> live;
    for (const auto& h : order_) {
      if (!queued_[h].empty()) live.push_back(h);
    }
    std::uniform_int_distribution<std::size_t> pick_host(0, live.size() - 1);
    const std::string host = live[pick_host(gen)];
    auto& q = queued_[host];
    std::vector<double> w;
    for (const auto& e : q) w.push_back(e.weight);
    std::discrete_distribution<std::size_t> pick_url(w.begin(), w.end());
    const std::size_t i = pick_url(gen);
    auto path = q[i].path;
    q.erase(q.begin() + static_cast<long>(i));
    visited_[host].push_back(path);
    return {host, path};
  }

 private:
  double p_min_;
  std::vector<std::string> order_;
  std::map<std::string, std::vector<Entry>> queued_;
  std::map<std::string, std::vector<std::vector<std::string>>> visited_;
};

}  // namespace oracle
