#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "alforge/dataset.hpp"
#include "alforge/rng.hpp"

namespace alforge {

class EncodingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raw location range (meters) for one class.
struct LocationRange {
  double width_min, width_max;
  double length_min, length_max;
  double height_min, height_max;
  double distance_min, distance_max;
};

struct ClassProfile {
  std::vector<std::string> names;
  std::vector<double> fractions;
  std::vector<LocationRange> ranges;
  LocationCaps caps;

  /// Small Vehicle, Human, Truck, Tram, Misc at {0.78, 0.156, 0.027, 0.013, 0.024}.
  static ClassProfile kitti_ratios();
  /// Small Vehicle and Human renormalized to the two-class pool that the
  /// proposal simulator extends with Background.
  static ClassProfile proposal_objects();
  /// Looks up "kitti-ratios" or "proposals"; throws ConfigError otherwise.
  static ClassProfile preset(const std::string& name);

  std::size_t size() const { return names.size(); }
  /// Throws ContractError when lengths disagree, fractions are not positive
  /// or do not sum to 1 within 1e-9, or a range exceeds the caps.
  void validate() const;
};

/// Largest-remainder rounding of fractions * n; ties in the remainder go to
/// the lower class index. Throws ContractError when n < number of classes.
std::vector<std::size_t> class_counts_for(const std::vector<double>& fractions, std::size_t n);

struct LocationGroundTruth {
  double width = 0.0;
  double length = 0.0;
  double height = 0.0;
  double distance = 0.0;
};

/// Componentwise ratio to the caps, each in (0, 1]. Throws EncodingError
/// for non-positive raw values, raw values above a cap, or bad caps.
std::array<double, 4> encode_location(const LocationGroundTruth& gt, const LocationCaps& caps);
LocationGroundTruth decode_location(const std::array<double, 4>& t, const LocationCaps& caps);

struct ClusterSplit {
  Dataset train;
  Dataset test;
};

/// Gaussian clusters with unit noise. Class means sit on scaled basis
/// vectors (pairwise distance `separation`) when classes <= dim, else on a
/// circle of the same chord length in the first two axes. Location targets
/// are drawn from the class ranges through the normal CDF of the first four
/// noise components, so they are learnable from the features.
ClusterSplit gen_cluster_dataset(const ClassProfile& profile, std::size_t n_train, std::size_t n_test,
                                 std::size_t feature_dim, double separation, const RngStream& stream);

/// Two-channel sparse patches [n x 2 x size x size] with a per-class motif.
/// Each pixel is zeroed in both channels with probability `zero_fill`;
/// every kept value is strictly positive.
Dataset gen_patch_dataset(const ClassProfile& profile, std::size_t patch_size, std::size_t n, double zero_fill,
                          const RngStream& stream);

struct ProposalProfile {
  std::vector<double> recall;        // per object class, in (0, 1]
  double background_fraction = 0.3;  // of emitted pool proposals
  double band_fraction = 0.1;        // IoU 0.2-0.5 test-only samples, relative to survivors

  /// Recall {0.917, 0.862} for Small Vehicle and Human.
  static ProposalProfile detector_preset();
};

struct ProposalPool {
  Dataset pool;       // survivors then background, labels over names + "Background"
  Dataset band;       // IoU in [0.2, 0.5), labelled Background, loc_mask 0
  std::vector<std::size_t> source;  // pool row -> object index, or kNoSource for background
  std::vector<double> iou;          // per pool row
  std::vector<double> band_iou;
  std::vector<std::size_t> dropped;  // objects the detector missed
  static constexpr std::size_t kNoSource = static_cast<std::size_t>(-1);
};

/// Simulates a 2D detector in front of `objects`: each object survives
/// with its class recall and keeps features, label and location unchanged
/// (IoU drawn in (0.5, 1]). Background proposals blend a random object's
/// features with noise by their IoU in [0, 0.2).
ProposalPool simulate_proposals(const Dataset& objects, const ProposalProfile& pp, const RngStream& stream);

/// Container directory: manifest + features.bin, labels.bin, locations.bin,
/// locmask.bin. `seed` is echoed in the manifest.
void dataset_write(const std::string& dir, const Dataset& ds, std::uint64_t seed = 0);
Dataset dataset_read(const std::string& dir);
/// Stable hash of a container's payload files and manifest.
std::uint64_t dataset_hash(const std::string& dir);

}  // namespace alforge
