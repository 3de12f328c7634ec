#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace uiharvest {

// Row-major grayscale image, values in [0, 255]; rows() is the height.
using GrayImage = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Throws Error{decode} when the bytes are not a supported image.
GrayImage decode_gray(std::string_view bytes);

/// Encodes as PNG or JPEG according to extension ("png", "jpg").
std::string encode_gray(const GrayImage& image, std::string_view extension);

/// Rows [top, top + height) clamped to the image.
GrayImage crop_rows(const GrayImage& image, Eigen::Index top, Eigen::Index height);

/// Mean of each cell of a rows x cols grid laid over the image.
GrayImage area_downscale(const GrayImage& image, Eigen::Index rows, Eigen::Index cols);

/// 64-bit difference hash: 9x8 area downscale, bit set when a pixel is
/// brighter than its right neighbour. Bit order is row-major.
std::uint64_t dhash(const GrayImage& image);

int hamming_distance(std::uint64_t a, std::uint64_t b);

/// Hamming distance between the dHashes of two encoded images.
int phash_distance(std::string_view image_a, std::string_view image_b);

}  // namespace uiharvest
