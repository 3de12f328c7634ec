#pragma once

// Random screens for occlusion property checks: a root, a few containers
// and up to max_leaves leaf boxes on a half-pixel grid (exact in double).

#include "uiharvest/random.hpp"
#include "uiharvest/sample.hpp"

namespace fixtures {

inline std::vector<uiharvest::AxNode> random_screen(uiharvest::Rng& rng,
                                                    std::size_t max_leaves) {
  using uiharvest::uniform_index;
  std::vector<uiharvest::AxNode> nodes;
  uiharvest::AxNode root;
  root.node_id = 1;
  root.role = "rootwebarea";
  root.boxes = uiharvest::BoxModel{{0, 0, 400, 800}, {0, 0, 400, 800}, {0, 0, 400, 800},
                                   {0, 0, 400, 800}};
  nodes.push_back(root);
  const std::size_t containers = uniform_index(rng, 4);
  for (std::size_t c = 0; c < containers; ++c) {
    uiharvest::AxNode n;
    n.node_id = std::int64_t(nodes.size() + 1);
    n.parent_id = 1;
    n.role = "list";
    nodes.push_back(n);
  }
  const std::size_t leaves = uniform_index(rng, max_leaves + 1);
  for (std::size_t i = 0; i < leaves; ++i) {
    uiharvest::AxNode n;
    n.node_id = std::int64_t(nodes.size() + 1);
    n.parent_id = std::int64_t(1 + uniform_index(rng, containers + 1));
    n.role = "text";
    n.dom_index = std::int64_t(uniform_index(rng, 2 * max_leaves + 1));
    const double x = 0.5 * double(uniform_index(rng, 600));
    const double y = 0.5 * double(uniform_index(rng, 1200));
    const double w = 0.5 * double(uniform_index(rng, 240));
    const double h = 0.5 * double(uniform_index(rng, 240));
    const uiharvest::Rect r{x, y, w, h};
    if (uniform_index(rng, 20) != 0) n.boxes = uiharvest::BoxModel{r, r, r, r};
    switch (uniform_index(rng, 4)) {
      case 0: n.style["z-index"] = std::to_string(int(uniform_index(rng, 3)) - 1); break;
      case 1: n.style["z-index"] = "auto"; break;
      default: break;
    }
    nodes.push_back(n);
  }
  return nodes;
}

}  // namespace fixtures
