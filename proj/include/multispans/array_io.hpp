#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace multispans {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

// Dense row-major 3-D array, indexed (time, node, channel) for series data.
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(std::size_t d0, std::size_t d1, std::size_t d2, double fill = 0.0)
      : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, fill) {}

  std::size_t dim0() const { return d0_; }
  std::size_t dim1() const { return d1_; }
  std::size_t dim2() const { return d2_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * d1_ + j) * d2_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * d1_ + j) * d2_ + k];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  // d1 x d2 view of the i-th outer slice.
  Eigen::Map<RowMatrix> slice(std::size_t i) {
    return {data_.data() + i * d1_ * d2_, static_cast<Eigen::Index>(d1_),
            static_cast<Eigen::Index>(d2_)};
  }
  Eigen::Map<const RowMatrix> slice(std::size_t i) const {
    return {data_.data() + i * d1_ * d2_, static_cast<Eigen::Index>(d1_),
            static_cast<Eigen::Index>(d2_)};
  }

  bool all_finite() const;

  friend bool operator==(const Tensor3&, const Tensor3&) = default;

 private:
  std::size_t d0_ = 0;
  std::size_t d1_ = 0;
  std::size_t d2_ = 0;
  std::vector<double> data_;
};

// Binary container: 8-byte magic, three little-endian uint64 dims, then
// row-major little-endian float64 values.
inline constexpr std::string_view kArrayMagic = "MSPANS3D";

void save_array(const Tensor3& a, const std::filesystem::path& path);
Tensor3 load_array(const std::filesystem::path& path);

// Comma-separated rows; every row must have the same number of fields.
RowMatrix read_csv_matrix(const std::filesystem::path& path);
// Reals are written with 9 decimals.
void write_csv_matrix(const Eigen::Ref<const RowMatrix>& m,
                      const std::filesystem::path& path);
void write_csv_mask(const BoolMatrix& m, const std::filesystem::path& path);

// Splits one CSV line on commas and trims surrounding whitespace.
std::vector<std::string> split_csv_line(std::string_view line);

// Strict numeric parse of a full field.
double parse_double(std::string_view field);

}  // namespace multispans
