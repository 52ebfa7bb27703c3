#pragma once

#include <cstddef>
#include <vector>

namespace ivdoa {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> v;

  static Tensor zeros(std::vector<std::size_t> shape) {
    Tensor t;
    t.shape = std::move(shape);
    std::size_t n = 1;
    for (const std::size_t d : t.shape) n *= d;
    t.v.assign(n, 0.0);
    return t;
  }
  std::size_t size() const { return v.size(); }
};

}  // namespace ivdoa
