#include "alforge/dataset.hpp"

#include <algorithm>

namespace alforge {

Shape Dataset::feature_shape() const {
  const Shape& s = features.shape();
  if (s.empty()) return {};
  return Shape(s.begin() + 1, s.end());
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  Shape fshape = features.shape();
  fshape[0] = indices.size();
  out.features = Tensor(fshape);
  out.locations = Tensor({indices.size(), kLocationOutputs});
  out.labels.reserve(indices.size());
  out.loc_mask.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    if (i >= size()) throw ContractError("subset index " + std::to_string(i) + " out of range");
    std::ranges::copy(features.row(i), out.features.row(r).begin());
    std::ranges::copy(locations.row(i), out.locations.row(r).begin());
    out.labels.push_back(labels[i]);
    out.loc_mask.push_back(loc_mask[i]);
  }
  out.class_names = class_names;
  out.caps = caps;
  out.generator = generator;
  return out;
}

std::vector<std::size_t> Dataset::class_counts() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (auto y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::vector<std::size_t> Dataset::class_counts(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (std::size_t i : indices) ++counts.at(static_cast<std::size_t>(labels.at(i)));
  return counts;
}

void Dataset::validate() const {
  const std::size_t n = labels.size();
  if (features.rank() < 2 || features.dim(0) != n) {
    throw ContractError("dataset features " + shape_string(features.shape()) + " do not hold " + std::to_string(n) +
                        " samples");
  }
  if (locations.shape() != Shape{n, kLocationOutputs}) {
    throw ContractError("dataset locations must be [n x 4], got " + shape_string(locations.shape()));
  }
  if (loc_mask.size() != n) throw ContractError("dataset loc_mask length mismatch");
  if (class_names.empty()) throw ContractError("dataset has no classes");
  for (auto y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= class_names.size()) {
      throw ContractError("label " + std::to_string(y) + " out of range");
    }
  }
  for (auto m : loc_mask) {
    if (m != 0 && m != 1) throw ContractError("loc_mask entries must be 0 or 1");
  }
}

Dataset concat(const Dataset& a, const Dataset& b) {
  if (a.feature_shape() != b.feature_shape()) {
    throw DimensionError("cannot concatenate features " + shape_string(a.features.shape()) + " and " +
                         shape_string(b.features.shape()));
  }
  Dataset out = a;
  Shape shape = a.features.shape();
  shape[0] = a.size() + b.size();
  out.features = Tensor(shape);
  std::ranges::copy(a.features.data(), out.features.raw());
  std::ranges::copy(b.features.data(), out.features.raw() + a.features.size());
  out.locations = Tensor({a.size() + b.size(), kLocationOutputs});
  std::ranges::copy(a.locations.data(), out.locations.raw());
  std::ranges::copy(b.locations.data(), out.locations.raw() + a.locations.size());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.loc_mask.insert(out.loc_mask.end(), b.loc_mask.begin(), b.loc_mask.end());
  return out;
}

}  // namespace alforge
