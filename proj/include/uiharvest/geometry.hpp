#pragma once

#include <algorithm>

namespace uiharvest {

// Axis-aligned rectangle in CSS px; (x, y) is the top-left corner.
template <typename Scalar>
struct RectT {
  Scalar x{};
  Scalar y{};
  Scalar w{};
  Scalar h{};

  Scalar right() const { return x + w; }
  Scalar bottom() const { return y + h; }
  Scalar area() const { return w * h; }

  bool contains(const RectT& o) const {
    return o.x >= x && o.y >= y && o.right() <= right() && o.bottom() <= bottom();
  }

  friend bool operator==(const RectT&, const RectT&) = default;
};

template <typename Scalar>
Scalar intersection_area(const RectT<Scalar>& a, const RectT<Scalar>& b) {
  const Scalar iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const Scalar ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= Scalar{0} || ih <= Scalar{0}) return Scalar{0};
  return iw * ih;
}

using Rect = RectT<double>;

// The four nested CSS box-model rectangles of a rendered element.
struct BoxModel {
  Rect content;
  Rect padding;
  Rect border;
  Rect margin;

  friend bool operator==(const BoxModel&, const BoxModel&) = default;
};

}  // namespace uiharvest
