#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "icm/la.hpp"

namespace icm {

// Dense individuals-by-SNPs matrix of minor allele counts in {0, 1, 2},
// stored row-major per individual so the memory layout matches the on-disk
// payload.
class GenotypeMatrix {
 public:
  GenotypeMatrix() = default;
  GenotypeMatrix(int individuals, int snps);

  int individuals() const { return individuals_; }
  int snps() const { return snps_; }

  std::uint8_t operator()(int n, int m) const {
    return data_[static_cast<std::size_t>(n) * static_cast<std::size_t>(snps_) +
                 static_cast<std::size_t>(m)];
  }
  std::uint8_t& operator()(int n, int m) {
    return data_[static_cast<std::size_t>(n) * static_cast<std::size_t>(snps_) +
                 static_cast<std::size_t>(m)];
  }

  Vector snp_column(int m) const;
  // Dense double submatrix (individuals by |snp_indices|).
  Matrix columns(std::span<const int> snp_indices) const;
  double mean() const;

  std::vector<std::uint8_t>& data() { return data_; }
  const std::vector<std::uint8_t>& data() const { return data_; }

 private:
  int individuals_ = 0;
  int snps_ = 0;
  std::vector<std::uint8_t> data_;
};

}  // namespace icm
