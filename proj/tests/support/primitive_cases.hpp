#pragma once

// One gradient-check case per autodiff primitive, parameterized by seed.
// Shared by the unit tests and the acceptance suite.

#include <string>
#include <vector>

#include "support/gradcheck.hpp"

namespace cpgan::testing {

struct PrimitiveCase {
  std::string name;
  // Builds random inputs for a seed and returns the function under test.
  std::function<std::pair<Builder, std::vector<TensorD>>(util::Rng&)> make;
};

inline ad::Shape random_shape(util::Rng& rng, std::size_t min_rank = 2, std::size_t max_rank = 4) {
  const std::size_t rank = min_rank + util::uniform_index(rng, max_rank - min_rank + 1);
  ad::Shape s(rank);
  for (auto& d : s) d = 1 + util::uniform_index(rng, 3);
  return s;
}

inline TensorD positive_tensor(ad::Shape shape, util::Rng& rng) {
  std::vector<double> v(ad::numel(shape));
  for (auto& x : v) x = util::uniform(rng, 0.2, 2.0);
  return TensorD::from(std::move(shape), std::move(v));
}

inline std::vector<PrimitiveCase> primitive_cases() {
  using namespace cpgan::ad;
  std::vector<PrimitiveCase> cases;
  auto elementwise2 = [](std::string name, auto op) {
    return PrimitiveCase{name, [op](util::Rng& rng) {
                           const Shape s = random_shape(rng);
                           return std::pair<Builder, std::vector<TensorD>>{
                               [op](const std::vector<TensorD>& in) { return op(in[0], in[1]); },
                               {random_tensor(s, rng), random_tensor(s, rng)}};
                         }};
  };
  auto elementwise1 = [](std::string name, auto op, auto make_input) {
    return PrimitiveCase{name, [op, make_input](util::Rng& rng) {
                           const Shape s = random_shape(rng);
                           return std::pair<Builder, std::vector<TensorD>>{
                               [op](const std::vector<TensorD>& in) { return op(in[0]); },
                               {make_input(s, rng)}};
                         }};
  };
  auto normal_input = [](const Shape& s, util::Rng& rng) { return random_tensor(s, rng); };

  cases.push_back(elementwise2("add", [](auto a, auto b) { return add(a, b); }));
  cases.push_back(elementwise2("sub", [](auto a, auto b) { return sub(a, b); }));
  cases.push_back(elementwise2("mul", [](auto a, auto b) { return mul(a, b); }));
  cases.push_back(elementwise1("tanh", [](auto a) { return ad::tanh(a); }, normal_input));
  cases.push_back(elementwise1("sigmoid", [](auto a) { return sigmoid(a); }, normal_input));
  cases.push_back(elementwise1("square", [](auto a) { return square(a); }, normal_input));
  cases.push_back(elementwise1("log", [](auto a) { return ad::log(a); },
                               [](const Shape& s, util::Rng& rng) { return positive_tensor(s, rng); }));
  cases.push_back(elementwise1("leaky_relu", [](auto a) { return leaky_relu(a, 0.2); },
                               [](const Shape& s, util::Rng& rng) {
                                 return away_from(random_tensor(s, rng), {0.0});
                               }));
  cases.push_back(elementwise1("clamp", [](auto a) { return clamp(a, -0.5, 0.5); },
                               [](const Shape& s, util::Rng& rng) {
                                 return away_from(random_tensor(s, rng), {-0.5, 0.5});
                               }));
  cases.push_back(elementwise1("affine", [](auto a) { return affine(a, -1.7, 0.3); }, normal_input));
  cases.push_back(elementwise1("sum", [](auto a) { return sum(a); }, normal_input));
  cases.push_back(elementwise1("mean", [](auto a) { return mean(a); }, normal_input));

  cases.push_back({"matmul", [](util::Rng& rng) {
                     const std::size_t m = 1 + util::uniform_index(rng, 4);
                     const std::size_t k = 1 + util::uniform_index(rng, 4);
                     const std::size_t n = 1 + util::uniform_index(rng, 4);
                     return std::pair<Builder, std::vector<TensorD>>{
                         [](const std::vector<TensorD>& in) { return matmul(in[0], in[1]); },
                         {random_tensor({m, k}, rng), random_tensor({k, n}, rng)}};
                   }});
  cases.push_back({"reshape", [](util::Rng& rng) {
                     const Shape s = random_shape(rng);
                     const Shape flat{numel(s)};
                     return std::pair<Builder, std::vector<TensorD>>{
                         [flat](const std::vector<TensorD>& in) { return reshape(in[0], flat); },
                         {random_tensor(s, rng)}};
                   }});
  cases.push_back({"concat", [](util::Rng& rng) {
                     Shape a = random_shape(rng);
                     const std::size_t axis = util::uniform_index(rng, a.size());
                     Shape b = a;
                     b[axis] = 1 + util::uniform_index(rng, 3);
                     return std::pair<Builder, std::vector<TensorD>>{
                         [axis](const std::vector<TensorD>& in) {
                           return concat<double>({in[0], in[1]}, axis);
                         },
                         {random_tensor(a, rng), random_tensor(b, rng)}};
                   }});
  cases.push_back({"broadcast", [](util::Rng& rng) {
                     Shape target = random_shape(rng, 3, 4);
                     // Trailing source: drop the leading dim and collapse one more to 1.
                     Shape source(target.begin() + 1, target.end());
                     source[util::uniform_index(rng, source.size())] = 1;
                     return std::pair<Builder, std::vector<TensorD>>{
                         [target](const std::vector<TensorD>& in) {
                           return broadcast_to(in[0], target);
                         },
                         {random_tensor(source, rng)}};
                   }});
  cases.push_back({"add_bias", [](util::Rng& rng) {
                     const Shape s = random_shape(rng, 2, 4);
                     return std::pair<Builder, std::vector<TensorD>>{
                         [](const std::vector<TensorD>& in) { return add_bias(in[0], in[1]); },
                         {random_tensor(s, rng), random_tensor({s[1]}, rng)}};
                   }});
  cases.push_back({"conv2d", [](util::Rng& rng) {
                     const std::size_t n = 1 + util::uniform_index(rng, 2);
                     const std::size_t c = 1 + util::uniform_index(rng, 2);
                     const std::size_t o = 1 + util::uniform_index(rng, 2);
                     const std::size_t k = 1 + util::uniform_index(rng, 3);
                     const std::size_t stride = 1 + util::uniform_index(rng, 2);
                     const std::size_t pad = util::uniform_index(rng, k);
                     const std::size_t hw = k + util::uniform_index(rng, 4);
                     return std::pair<Builder, std::vector<TensorD>>{
                         [stride, pad](const std::vector<TensorD>& in) {
                           return conv2d(in[0], in[1], ConvGeometry{stride, pad});
                         },
                         {random_tensor({n, c, hw, hw}, rng), random_tensor({o, c, k, k}, rng)}};
                   }});
  cases.push_back({"conv_transpose2d", [](util::Rng& rng) {
                     const std::size_t n = 1 + util::uniform_index(rng, 2);
                     const std::size_t c = 1 + util::uniform_index(rng, 2);
                     const std::size_t o = 1 + util::uniform_index(rng, 2);
                     const std::size_t k = 2 + util::uniform_index(rng, 3);
                     const std::size_t stride = 1 + util::uniform_index(rng, 2);
                     const std::size_t pad = util::uniform_index(rng, k / 2 + 1);
                     const std::size_t hw = 2 + util::uniform_index(rng, 3);
                     return std::pair<Builder, std::vector<TensorD>>{
                         [stride, pad](const std::vector<TensorD>& in) {
                           return conv_transpose2d(in[0], in[1], ConvGeometry{stride, pad});
                         },
                         {random_tensor({n, c, hw, hw}, rng), random_tensor({c, o, k, k}, rng)}};
                   }});
  return cases;
}

}  // namespace cpgan::testing
