#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace nscomp {

// Channel-major shape of an activation. Dense vectors use (n, 1, 1).
struct Shape {
  std::size_t channels = 0;
  std::size_t height = 1;
  std::size_t width = 1;

  std::size_t size() const { return channels * height * width; }
  std::size_t pixels() const { return height * width; }
  bool is_flat() const { return height == 1 && width == 1; }
  bool operator==(const Shape&) const = default;
  std::string str() const;

  static Shape flat(std::size_t n) { return {n, 1, 1}; }
};

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  // Throws ShapeError if data.size() != rows*cols, DegenerateError on non-finite data.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  DenseMatrix transpose() const;
  DenseMatrix operator-(const DenseMatrix& other) const;
  DenseMatrix operator+(const DenseMatrix& other) const;
  DenseMatrix& operator*=(double s);
  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Convolution weights A in R^{out x in x width x width}, stored in that order.
class ConvFilter {
 public:
  ConvFilter() = default;
  ConvFilter(std::size_t out_channels, std::size_t in_channels, std::size_t width, double fill = 0.0);
  ConvFilter(std::size_t out_channels, std::size_t in_channels, std::size_t width,
             std::vector<double> data);

  std::size_t out_channels() const { return out_; }
  std::size_t in_channels() const { return in_; }
  std::size_t width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t o, std::size_t c, std::size_t u, std::size_t v) {
    return data_[((o * in_ + c) * width_ + u) * width_ + v];
  }
  double operator()(std::size_t o, std::size_t c, std::size_t u, std::size_t v) const {
    return data_[((o * in_ + c) * width_ + u) * width_ + v];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  ConvFilter& operator*=(double s);
  bool operator==(const ConvFilter&) const = default;

 private:
  std::size_t out_ = 0;
  std::size_t in_ = 0;
  std::size_t width_ = 0;
  std::vector<double> data_;
};

// X in R^{channels x height x width}.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0);
  FeatureMap(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> data);

  Shape shape() const { return {ch_, h_, w_}; }
  std::size_t channels() const { return ch_; }
  std::size_t height() const { return h_; }
  std::size_t width() const { return w_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t c, std::size_t i, std::size_t j) { return data_[(c * h_ + i) * w_ + j]; }
  double operator()(std::size_t c, std::size_t i, std::size_t j) const {
    return data_[(c * h_ + i) * w_ + j];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

 private:
  std::size_t ch_ = 0;
  std::size_t h_ = 0;
  std::size_t w_ = 0;
  std::vector<double> data_;
};

bool all_finite(std::span<const double> values);

}  // namespace nscomp
