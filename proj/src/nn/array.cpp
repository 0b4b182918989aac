#include "uavmec/nn/array.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "uavmec/errors.hpp"

namespace uavmec::nn {

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

RealArray::RealArray(Shape s, Real fill) : shape(std::move(s)), data(element_count(shape), fill) {}

RealArray::RealArray(Shape s, std::vector<Real> values) : shape(std::move(s)), data(std::move(values)) {
  if (element_count(shape) != data.size()) {
    throw ShapeError("array shape " + shape_string(shape) + " does not hold " +
                     std::to_string(data.size()) + " values");
  }
}

RealArray RealArray::vector(std::vector<Real> values) {
  Shape s{values.size()};
  return RealArray(std::move(s), std::move(values));
}

RealArray RealArray::scalar(Real value) { return RealArray(Shape{1}, std::vector<Real>{value}); }

bool RealArray::all_finite() const {
  for (Real v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace uavmec::nn
