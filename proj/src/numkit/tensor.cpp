#include "nscomp/numkit/tensor.hpp"

#include <cmath>

#include "nscomp/error.hpp"

namespace nscomp {

std::string Shape::str() const {
  return std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width);
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void check_data(std::size_t expected, const std::vector<double>& data, const char* what) {
  if (data.size() != expected) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                     std::to_string(data.size()));
  }
  if (!all_finite(data)) throw DegenerateError(std::string(what) + ": non-finite entry");
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  check_data(rows * cols, data_, "DenseMatrix");
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

DenseMatrix DenseMatrix::operator-(const DenseMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw ShapeError("DenseMatrix subtraction: shape mismatch");
  DenseMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] - other.data_[i];
  return out;
}

DenseMatrix DenseMatrix::operator+(const DenseMatrix& other) const {
  if (rows_ != other.rows_ || cols_ != other.cols_) throw ShapeError("DenseMatrix addition: shape mismatch");
  DenseMatrix out(rows_, cols_);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] = data_[i] + other.data_[i];
  return out;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

ConvFilter::ConvFilter(std::size_t out_channels, std::size_t in_channels, std::size_t width, double fill)
    : out_(out_channels), in_(in_channels), width_(width),
      data_(out_channels * in_channels * width * width, fill) {
  if (width == 0) throw ShapeError("ConvFilter: width must be >= 1");
}

ConvFilter::ConvFilter(std::size_t out_channels, std::size_t in_channels, std::size_t width,
                       std::vector<double> data)
    : out_(out_channels), in_(in_channels), width_(width), data_(std::move(data)) {
  if (width == 0) throw ShapeError("ConvFilter: width must be >= 1");
  check_data(out_ * in_ * width_ * width_, data_, "ConvFilter");
}

ConvFilter& ConvFilter::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width, double fill)
    : ch_(channels), h_(height), w_(width), data_(channels * height * width, fill) {}

FeatureMap::FeatureMap(std::size_t channels, std::size_t height, std::size_t width,
                       std::vector<double> data)
    : ch_(channels), h_(height), w_(width), data_(std::move(data)) {
  check_data(ch_ * h_ * w_, data_, "FeatureMap");
}

}  // namespace nscomp
