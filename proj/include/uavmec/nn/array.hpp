#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace uavmec::nn {

using Real = double;
using Shape = std::vector<std::size_t>;

std::size_t element_count(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of reals. `data.size()` always equals the product of
/// `shape`.
struct RealArray {
  Shape shape;
  std::vector<Real> data;

  RealArray() = default;
  explicit RealArray(Shape s, Real fill = 0.0);
  RealArray(Shape s, std::vector<Real> values);

  static RealArray vector(std::vector<Real> values);
  static RealArray scalar(Real value);

  std::size_t size() const { return data.size(); }
  Real& operator[](std::size_t i) { return data[i]; }
  Real operator[](std::size_t i) const { return data[i]; }

  bool all_finite() const;
  bool operator==(const RealArray&) const = default;
};

}  // namespace uavmec::nn
