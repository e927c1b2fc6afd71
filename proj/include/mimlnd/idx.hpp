#pragma once

#include <cstdint>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "mimlnd/datagen.hpp"
#include "mimlnd/error.hpp"

namespace mimlnd {

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t offset,
                               const std::string& path) {
  if (offset + 4 > buf.size())
    throw FormatError(path + ": truncated header at byte offset " + std::to_string(offset));
  return (std::uint32_t{buf[offset]} << 24) | (std::uint32_t{buf[offset + 1]} << 16) |
         (std::uint32_t{buf[offset + 2]} << 8) | std::uint32_t{buf[offset + 3]};
}

}  // namespace detail

// IDX image/label pair (big-endian headers, unsigned-byte payload). Pixels
// are scaled by 1/255; classes are the digit strings that occur, ascending.
inline InstancePool load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);

  const std::uint32_t img_magic = detail::read_be32(img, 0, images_path);
  if (img_magic != kIdxImagesMagic)
    throw FormatError(images_path + ": bad magic number at byte offset 0");
  const std::uint32_t lab_magic = detail::read_be32(lab, 0, labels_path);
  if (lab_magic != kIdxLabelsMagic)
    throw FormatError(labels_path + ": bad magic number at byte offset 0");

  const std::uint32_t n_images = detail::read_be32(img, 4, images_path);
  const std::uint32_t rows = detail::read_be32(img, 8, images_path);
  const std::uint32_t cols = detail::read_be32(img, 12, images_path);
  const std::uint32_t n_labels = detail::read_be32(lab, 4, labels_path);
  if (n_images != n_labels)
    throw FormatError(labels_path + ": item count at byte offset 4 (" + std::to_string(n_labels) +
                      ") does not match image count (" + std::to_string(n_images) + ")");
  const std::size_t dim = std::size_t{rows} * cols;
  if (dim == 0) throw FormatError(images_path + ": zero image size at byte offset 8");
  const std::size_t img_need = 16 + std::size_t{n_images} * dim;
  if (img.size() < img_need)
    throw FormatError(images_path + ": truncated payload at byte offset " + std::to_string(img.size()) +
                      " (expected " + std::to_string(img_need) + " bytes)");
  if (lab.size() < 8 + std::size_t{n_labels})
    throw FormatError(labels_path + ": truncated payload at byte offset " + std::to_string(lab.size()) +
                      " (expected " + std::to_string(8 + std::size_t{n_labels}) + " bytes)");

  std::map<int, std::vector<std::size_t>> by_digit;
  for (std::size_t i = 0; i < n_labels; ++i) by_digit[lab[8 + i]].push_back(i);

  InstancePool pool;
  for (const auto& [digit, items] : by_digit) {
    InstanceTable t(static_cast<Index>(items.size()), static_cast<Index>(dim));
    for (std::size_t r = 0; r < items.size(); ++r) {
      const unsigned char* px = img.data() + 16 + items[r] * dim;
      for (std::size_t j = 0; j < dim; ++j)
        t(static_cast<Index>(r), static_cast<Index>(j)) = px[j] / 255.0;
    }
    pool.classes.push_back(std::to_string(digit));
    pool.instances.push_back(std::move(t));
  }
  return pool;
}

}  // namespace mimlnd
