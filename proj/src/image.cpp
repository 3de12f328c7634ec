#include "uiharvest/image.hpp"

#include <algorithm>
#include <bit>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "uiharvest/errors.hpp"

namespace uiharvest {

GrayImage decode_gray(std::string_view bytes) {
  if (bytes.empty()) throw Error(ErrorKind::decode, "empty image");
  const cv::Mat raw(1, int(bytes.size()), CV_8UC1, const_cast<char*>(bytes.data()));
  cv::Mat gray;
  try {
    gray = cv::imdecode(raw, cv::IMREAD_GRAYSCALE);
  } catch (const cv::Exception& e) {
    throw Error(ErrorKind::decode, e.what());
  }
  if (gray.empty()) throw Error(ErrorKind::decode, "undecodable image");
  GrayImage out(gray.rows, gray.cols);
  for (int r = 0; r < gray.rows; ++r) {
    const auto* row = gray.ptr<std::uint8_t>(r);
    for (int c = 0; c < gray.cols; ++c) out(r, c) = row[c];
  }
  return out;
}

std::string encode_gray(const GrayImage& image, std::string_view extension) {
  cv::Mat mat(int(image.rows()), int(image.cols()), CV_8UC1);
  for (int r = 0; r < mat.rows; ++r) {
    auto* row = mat.ptr<std::uint8_t>(r);
    for (int c = 0; c < mat.cols; ++c) {
      row[c] = std::uint8_t(std::clamp(std::lround(image(r, c)), 0L, 255L));
    }
  }
  std::vector<std::uint8_t> buffer;
  const std::string ext = "." + std::string(extension);
  if (!cv::imencode(ext, mat, buffer)) {
    throw Error(ErrorKind::decode, "cannot encode image as " + std::string(extension));
  }
  return std::string(buffer.begin(), buffer.end());
}

GrayImage crop_rows(const GrayImage& image, Eigen::Index top, Eigen::Index height) {
  top = std::clamp<Eigen::Index>(top, 0, image.rows());
  height = std::clamp<Eigen::Index>(height, 0, image.rows() - top);
  return image.middleRows(top, height);
}

GrayImage area_downscale(const GrayImage& image, Eigen::Index rows, Eigen::Index cols) {
  if (image.size() == 0) throw Error(ErrorKind::decode, "empty image");
  GrayImage out(rows, cols);
  const Eigen::Index h = image.rows();
  const Eigen::Index w = image.cols();
  for (Eigen::Index r = 0; r < rows; ++r) {
    const Eigen::Index r0 = std::min(r * h / rows, h - 1);
    const Eigen::Index r1 = std::max(r0 + 1, (r + 1) * h / rows);
    for (Eigen::Index c = 0; c < cols; ++c) {
      const Eigen::Index c0 = std::min(c * w / cols, w - 1);
      const Eigen::Index c1 = std::max(c0 + 1, (c + 1) * w / cols);
      out(r, c) = image.block(r0, c0, r1 - r0, c1 - c0).mean();
    }
  }
  return out;
}

std::uint64_t dhash(const GrayImage& image) {
  const GrayImage small = area_downscale(image, 8, 9);
  std::uint64_t hash = 0;
  int bit = 0;
  for (Eigen::Index r = 0; r < 8; ++r) {
    for (Eigen::Index c = 0; c < 8; ++c, ++bit) {
      if (small(r, c) > small(r, c + 1)) hash |= std::uint64_t{1} << bit;
    }
  }
  return hash;
}

int hamming_distance(std::uint64_t a, std::uint64_t b) { return std::popcount(a ^ b); }

int phash_distance(std::string_view image_a, std::string_view image_b) {
  return hamming_distance(dhash(decode_gray(image_a)), dhash(decode_gray(image_b)));
}

}  // namespace uiharvest
