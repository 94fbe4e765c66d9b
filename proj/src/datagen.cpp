#include "alforge/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <numeric>

#include "alforge/keyvalue.hpp"
#include "alforge/tensor_io.hpp"

namespace alforge {

namespace {

constexpr LocationRange kSmallVehicle{1.4, 2.0, 3.5, 5.0, 1.4, 1.8, 5.0, 70.0};
constexpr LocationRange kHuman{0.4, 0.8, 0.4, 1.8, 1.5, 1.9, 5.0, 70.0};
constexpr LocationRange kTruck{2.2, 3.0, 6.0, 12.0, 2.5, 3.8, 5.0, 70.0};
constexpr LocationRange kTram{2.4, 3.0, 12.0, 30.0, 3.0, 3.8, 5.0, 70.0};
constexpr LocationRange kMisc{0.5, 3.0, 0.5, 8.0, 0.5, 3.0, 5.0, 70.0};

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

LocationGroundTruth draw_location(const LocationRange& r, const std::array<double, 4>& u) {
  return {r.width_min + u[0] * (r.width_max - r.width_min), r.length_min + u[1] * (r.length_max - r.length_min),
          r.height_min + u[2] * (r.height_max - r.height_min),
          r.distance_min + u[3] * (r.distance_max - r.distance_min)};
}

// Labels in class blocks, then shuffled.
std::vector<std::int32_t> shuffled_labels(const std::vector<std::size_t>& counts, RngStream stream) {
  std::vector<std::size_t> order;
  for (std::size_t c = 0; c < counts.size(); ++c) order.insert(order.end(), counts[c], c);
  rng_shuffle(stream, order);
  return {order.begin(), order.end()};
}

Dataset empty_like(const ClassProfile& profile, Shape feature_shape, std::size_t n) {
  Dataset ds;
  feature_shape.insert(feature_shape.begin(), n);
  ds.features = Tensor(feature_shape);
  ds.locations = Tensor({n, kLocationOutputs});
  ds.labels.assign(n, 0);
  ds.loc_mask.assign(n, 1);
  ds.class_names = profile.names;
  ds.caps = profile.caps;
  return ds;
}

void set_location(Dataset& ds, std::size_t i, const std::array<double, 4>& t) {
  for (std::size_t k = 0; k < kLocationOutputs; ++k) ds.locations.at(i, k) = t[k];
}

Dataset cluster_split(const ClassProfile& profile, std::size_t n, const std::vector<Tensor>& means, std::size_t dim,
                      const RngStream& stream) {
  Dataset ds = empty_like(profile, {dim}, n);
  ds.labels = shuffled_labels(class_counts_for(profile.fractions, n), stream.substream(0));
  for (std::size_t i = 0; i < n; ++i) {
    RngStream s = stream.substream(1, i);
    const auto c = static_cast<std::size_t>(ds.labels[i]);
    const std::vector<double> z = rng_normal(s, std::max<std::size_t>(dim, 4));
    for (std::size_t j = 0; j < dim; ++j) ds.features.at(i, j) = means[c][j] + z[j];
    std::array<double, 4> u{};
    for (std::size_t k = 0; k < 4; ++k) u[k] = normal_cdf(z[k]);
    set_location(ds, i, encode_location(draw_location(profile.ranges[c], u), profile.caps));
  }
  return ds;
}

bool on_motif(std::size_t cls, long r, long c, long size) {
  const long mid = size / 2;
  switch (cls % 5) {
    case 0:
      return std::abs(r - mid) <= 1;
    case 1:
      return std::abs(c - mid) <= 1;
    case 2:
      return std::abs(r - c) <= 1;
    case 3:
      return (r == 1 || r == size - 2 || c == 1 || c == size - 2) && r >= 1 && c >= 1 && r <= size - 2 &&
             c <= size - 2;
    default:
      return std::abs(r - mid) <= 0 || std::abs(c - mid) <= 0;
  }
}

}  // namespace

ClassProfile ClassProfile::kitti_ratios() {
  ClassProfile p;
  p.names = {"Small Vehicle", "Human", "Truck", "Tram", "Misc"};
  p.fractions = {0.78, 0.156, 0.027, 0.013, 0.024};
  p.ranges = {kSmallVehicle, kHuman, kTruck, kTram, kMisc};
  return p;
}

ClassProfile ClassProfile::proposal_objects() {
  ClassProfile p;
  p.names = {"Small Vehicle", "Human"};
  p.fractions = {0.78 / 0.936, 0.156 / 0.936};
  p.ranges = {kSmallVehicle, kHuman};
  return p;
}

ClassProfile ClassProfile::preset(const std::string& name) {
  if (name == "kitti-ratios") return kitti_ratios();
  if (name == "proposals") return proposal_objects();
  throw ConfigError("unknown preset '" + name + "' (expected kitti-ratios or proposals)");
}

void ClassProfile::validate() const {
  if (names.empty() || fractions.size() != names.size() || ranges.size() != names.size()) {
    throw ContractError("class profile needs matching names, fractions and ranges");
  }
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ContractError("class fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ContractError("class fractions sum to " + format_double(sum));
  for (const auto& r : ranges) {
    if (r.width_max > caps.width || r.length_max > caps.length || r.height_max > caps.height ||
        r.distance_max > caps.distance) {
      throw ContractError("class location range exceeds the caps");
    }
  }
}

std::vector<std::size_t> class_counts_for(const std::vector<double>& fractions, std::size_t n) {
  if (n < fractions.size()) {
    throw ContractError("cannot split " + std::to_string(n) + " samples over " + std::to_string(fractions.size()) +
                        " classes");
  }
  const std::size_t c = fractions.size();
  std::vector<std::size_t> counts(c);
  std::vector<double> rem(c);
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < c; ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    counts[k] = static_cast<std::size_t>(std::floor(exact));
    rem[k] = exact - static_cast<double>(counts[k]);
    assigned += counts[k];
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) ++counts[order[r % c]];
  return counts;
}

std::array<double, 4> encode_location(const LocationGroundTruth& gt, const LocationCaps& caps) {
  const std::array<double, 4> raw{gt.width, gt.length, gt.height, gt.distance};
  const std::array<double, 4> cap{caps.width, caps.length, caps.height, caps.distance};
  static constexpr const char* kNames[] = {"width", "length", "height", "distance"};
  std::array<double, 4> t{};
  for (std::size_t k = 0; k < 4; ++k) {
    if (!(cap[k] > 0.0)) throw EncodingError(std::string(kNames[k]) + " cap must be positive");
    if (!(raw[k] > 0.0) || raw[k] > cap[k]) {
      throw EncodingError(std::string(kNames[k]) + " " + format_double(raw[k]) + " outside (0, " +
                          format_double(cap[k]) + "]");
    }
    t[k] = raw[k] / cap[k];
  }
  return t;
}

LocationGroundTruth decode_location(const std::array<double, 4>& t, const LocationCaps& caps) {
  return {t[0] * caps.width, t[1] * caps.length, t[2] * caps.height, t[3] * caps.distance};
}

ClusterSplit gen_cluster_dataset(const ClassProfile& profile, std::size_t n_train, std::size_t n_test,
                                 std::size_t feature_dim, double separation, const RngStream& stream) {
  profile.validate();
  if (feature_dim < 2) throw ContractError("cluster features need at least 2 dimensions");
  if (separation < 0.0) throw ContractError("separation must be non-negative");
  const std::size_t c = profile.size();
  std::vector<Tensor> means(c, Tensor({feature_dim}));
  for (std::size_t k = 0; k < c; ++k) {
    if (c <= feature_dim) {
      means[k][k] = separation / std::numbers::sqrt2;
    } else {
      const double radius = separation / (2.0 * std::sin(std::numbers::pi / static_cast<double>(c)));
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(c);
      means[k][0] = radius * std::cos(angle);
      means[k][1] = radius * std::sin(angle);
    }
  }
  ClusterSplit out{cluster_split(profile, n_train, means, feature_dim, stream.substream(1)),
                   cluster_split(profile, n_test, means, feature_dim, stream.substream(2))};
  for (Dataset* ds : {&out.train, &out.test}) {
    ds->generator = {{"kind", "cluster"},
                     {"feature_dim", std::to_string(feature_dim)},
                     {"separation", format_double(separation)}};
  }
  return out;
}

Dataset gen_patch_dataset(const ClassProfile& profile, std::size_t patch_size, std::size_t n, double zero_fill,
                          const RngStream& stream) {
  profile.validate();
  if (patch_size < 8) throw ContractError("patch size must be at least 8");
  if (zero_fill < 0.0 || zero_fill >= 1.0) throw ContractError("zero-fill fraction must be in [0, 1)");
  const std::size_t hw = patch_size * patch_size;
  Dataset ds = empty_like(profile, {2, patch_size, patch_size}, n);
  ds.labels = shuffled_labels(class_counts_for(profile.fractions, n), stream.substream(0));
  const auto size = static_cast<long>(patch_size);
  for (std::size_t i = 0; i < n; ++i) {
    RngStream s = stream.substream(1, i);
    const auto c = static_cast<std::size_t>(ds.labels[i]);
    const long dr = static_cast<long>(s.below(5)) - 2;
    const long dc = static_cast<long>(s.below(5)) - 2;
    double* px = ds.features.raw() + i * 2 * hw;
    for (long r = 0; r < size; ++r) {
      for (long col = 0; col < size; ++col) {
        const std::size_t p = static_cast<std::size_t>(r * size + col);
        const bool hit = on_motif(c, r - dr, col - dc, size);
        const double depth = hit ? 0.6 + 0.4 * s.uniform() : 0.05 + 0.15 * s.uniform();
        const double intensity = hit ? 0.3 + 0.5 * s.uniform() : 0.05 + 0.1 * s.uniform();
        const bool empty = s.uniform() < zero_fill;
        px[p] = empty ? 0.0 : depth;
        px[hw + p] = empty ? 0.0 : intensity;
      }
    }
    std::array<double, 4> u{};
    // Width follows the motif shift so the location head has signal.
    u[0] = (static_cast<double>(dc + 2) + s.uniform()) / 5.0;
    for (std::size_t k = 1; k < 4; ++k) u[k] = s.uniform();
    set_location(ds, i, encode_location(draw_location(profile.ranges[c], u), profile.caps));
  }
  ds.generator = {{"kind", "patch"},
                  {"patch_size", std::to_string(patch_size)},
                  {"zero_fill", format_double(zero_fill)}};
  return ds;
}

ProposalProfile ProposalProfile::detector_preset() {
  ProposalProfile p;
  p.recall = {0.917, 0.862};
  return p;
}

ProposalPool simulate_proposals(const Dataset& objects, const ProposalProfile& pp, const RngStream& stream) {
  objects.validate();
  if (pp.recall.size() != objects.num_classes()) {
    throw ContractError("proposal profile has " + std::to_string(pp.recall.size()) + " recall values for " +
                        std::to_string(objects.num_classes()) + " classes");
  }
  for (double r : pp.recall) {
    if (!(r > 0.0 && r <= 1.0)) throw ContractError("recall must be in (0, 1]");
  }
  if (pp.background_fraction < 0.0 || pp.background_fraction >= 1.0 || pp.band_fraction < 0.0) {
    throw ContractError("background fraction must be in [0, 1) and band fraction non-negative");
  }
  ProposalPool out;
  std::vector<std::size_t> survivors;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    RngStream s = stream.substream(1, i);
    if (s.uniform() < pp.recall[static_cast<std::size_t>(objects.labels[i])]) {
      survivors.push_back(i);
      out.iou.push_back(0.5 + 0.5 * (1.0 - s.uniform()));
    } else {
      out.dropped.push_back(i);
    }
  }
  const double ns = static_cast<double>(survivors.size());
  const auto n_bg = static_cast<std::size_t>(std::llround(pp.background_fraction / (1.0 - pp.background_fraction) * ns));
  const auto n_band = static_cast<std::size_t>(std::llround(pp.band_fraction * ns));
  const auto background = static_cast<std::int32_t>(objects.num_classes());
  const std::size_t row = objects.features.row_size();

  auto blend = [&](Dataset& ds, std::size_t r, RngStream& s, double iou) {
    const std::size_t src = s.below(objects.size());
    const auto x = objects.features.row(src);
    auto dst = ds.features.row(r);
    for (std::size_t k = 0; k < row; ++k) dst[k] = iou * x[k] + (1.0 - iou) * s.normal();
    ds.labels[r] = background;
    ds.loc_mask[r] = 0;
  };
  auto make = [&](std::size_t n) {
    Dataset ds;
    Shape shape = objects.features.shape();
    shape[0] = n;
    ds.features = Tensor(shape);
    ds.locations = Tensor({n, kLocationOutputs});
    ds.labels.assign(n, 0);
    ds.loc_mask.assign(n, 0);
    ds.class_names = objects.class_names;
    ds.class_names.push_back("Background");
    ds.caps = objects.caps;
    ds.generator = objects.generator;
    return ds;
  };

  out.pool = make(survivors.size() + n_bg);
  for (std::size_t r = 0; r < survivors.size(); ++r) {
    const std::size_t i = survivors[r];
    std::ranges::copy(objects.features.row(i), out.pool.features.row(r).begin());
    std::ranges::copy(objects.locations.row(i), out.pool.locations.row(r).begin());
    out.pool.labels[r] = objects.labels[i];
    out.pool.loc_mask[r] = objects.loc_mask[i];
    out.source.push_back(i);
  }
  for (std::size_t j = 0; j < n_bg; ++j) {
    RngStream s = stream.substream(2, j);
    const double iou = 0.2 * s.uniform();
    blend(out.pool, survivors.size() + j, s, iou);
    out.source.push_back(ProposalPool::kNoSource);
    out.iou.push_back(iou);
  }
  out.band = make(n_band);
  for (std::size_t j = 0; j < n_band; ++j) {
    RngStream s = stream.substream(3, j);
    const double iou = 0.2 + 0.3 * s.uniform();
    blend(out.band, j, s, iou);
    out.band_iou.push_back(iou);
  }
  out.pool.generator["recall"] = join([&] {
    std::vector<std::string> v;
    for (double r : pp.recall) v.push_back(format_double(r));
    return v;
  }(), ",");
  out.pool.generator["background_fraction"] = format_double(pp.background_fraction);
  return out;
}

void dataset_write(const std::string& dir, const Dataset& ds, std::uint64_t seed) {
  ds.validate();
  for (const auto& name : ds.class_names) {
    if (name.find(',') != std::string::npos || name.find('\n') != std::string::npos) {
      throw ContractError("class name '" + name + "' may not contain commas or newlines");
    }
  }
  std::filesystem::create_directories(dir);
  const std::size_t n = ds.size();
  KeyValues m;
  m["format"] = "alforge-dataset";
  m["version"] = "1";
  m["samples"] = std::to_string(n);
  m["classes"] = join(ds.class_names, ",");
  std::vector<std::string> dims;
  for (std::size_t d : ds.feature_shape()) dims.push_back(std::to_string(d));
  m["feature_shape"] = join(dims, "x");
  m["caps.width"] = format_double(ds.caps.width);
  m["caps.length"] = format_double(ds.caps.length);
  m["caps.height"] = format_double(ds.caps.height);
  m["caps.distance"] = format_double(ds.caps.distance);
  m["seed"] = std::to_string(seed);
  for (const auto& [k, v] : ds.generator) m["gen." + k] = v;

  write_tensor_file(dir + "/features.bin", ds.features);
  write_tensor_file(dir + "/labels.bin", IntTensor{{n}, ds.labels});
  write_tensor_file(dir + "/locations.bin", ds.locations);
  write_tensor_file(dir + "/locmask.bin", IntTensor{{n}, ds.loc_mask});
  const std::string text = format_key_values(m);
  write_bytes(dir + "/manifest", std::vector<std::uint8_t>(text.begin(), text.end()));
}

Dataset dataset_read(const std::string& dir) {
  const KeyValues m = read_key_values(dir + "/manifest");
  if (kv_string(m, "format", "") != "alforge-dataset" || kv_string(m, "version", "") != "1") {
    throw ConfigError(dir + "/manifest: not an alforge-dataset version 1 manifest");
  }
  const std::size_t n = kv_uint(m, "samples", 0);
  Dataset ds;
  ds.class_names = split(kv_string(m, "classes", ""), ',');
  ds.caps.width = kv_double(m, "caps.width", ds.caps.width);
  ds.caps.length = kv_double(m, "caps.length", ds.caps.length);
  ds.caps.height = kv_double(m, "caps.height", ds.caps.height);
  ds.caps.distance = kv_double(m, "caps.distance", ds.caps.distance);
  for (const auto& [k, v] : m) {
    if (k.starts_with("gen.")) ds.generator[k.substr(4)] = v;
  }
  ds.features = read_float_tensor_file(dir + "/features.bin");
  ds.locations = read_float_tensor_file(dir + "/locations.bin");
  IntTensor labels = read_int_tensor_file(dir + "/labels.bin");
  IntTensor mask = read_int_tensor_file(dir + "/locmask.bin");
  if (labels.shape != Shape{n} || mask.shape != Shape{n}) {
    throw ConfigError(dir + ": labels or locmask do not hold " + std::to_string(n) + " samples");
  }
  ds.labels = std::move(labels.data);
  ds.loc_mask = std::move(mask.data);
  Shape expected = {n};
  for (const auto& d : split(kv_string(m, "feature_shape", ""), 'x')) expected.push_back(parse_uint(d, "feature_shape"));
  if (ds.features.shape() != expected) {
    throw ConfigError(dir + ": features are " + shape_string(ds.features.shape()) + ", manifest says " +
                      shape_string(expected));
  }
  try {
    ds.validate();
  } catch (const ContractError& e) {
    throw ConfigError(dir + ": " + e.what());
  }
  return ds;
}

std::uint64_t dataset_hash(const std::string& dir) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char* name : {"manifest", "features.bin", "labels.bin", "locations.bin", "locmask.bin"}) {
    const auto bytes = read_bytes(dir + "/" + name);
    h = fnv1a(std::string(bytes.begin(), bytes.end()), h);
  }
  return h;
}

}  // namespace alforge
