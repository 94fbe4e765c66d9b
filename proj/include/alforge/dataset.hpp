#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "alforge/keyvalue.hpp"
#include "alforge/tensor.hpp"

namespace alforge {

inline constexpr std::size_t kLocationOutputs = 4;

/// Normalization caps (meters) for the (width, length, height, distance)
/// location encoding.
struct LocationCaps {
  double width = 3.0;
  double length = 30.0;
  double height = 4.0;
  double distance = 80.0;
};

/// Samples with class labels and normalized location targets.
///
/// `features` has shape [n x feature shape...]. `locations` is [n x 4] with
/// entries in [0, 1]; `loc_mask[i]` is 0 for samples without a location
/// target (background proposals), 1 otherwise.
struct Dataset {
  Tensor features;
  std::vector<std::int32_t> labels;
  Tensor locations;
  std::vector<std::int32_t> loc_mask;
  std::vector<std::string> class_names;
  LocationCaps caps;
  /// Free-form generator parameters echoed into the manifest.
  KeyValues generator;

  std::size_t size() const { return labels.size(); }
  std::size_t num_classes() const { return class_names.size(); }
  /// Per-sample feature shape (features shape without the leading n).
  Shape feature_shape() const;

  /// Copy of the listed samples, in the listed order.
  Dataset subset(std::span<const std::size_t> indices) const;
  /// Samples per class, over the whole set or over `indices`.
  std::vector<std::size_t> class_counts() const;
  std::vector<std::size_t> class_counts(std::span<const std::size_t> indices) const;

  /// Throws ContractError when the fields disagree in length or labels are out of range.
  void validate() const;
};

/// Rows of `a` followed by rows of `b`; class names and caps come from `a`.
Dataset concat(const Dataset& a, const Dataset& b);

}  // namespace alforge
