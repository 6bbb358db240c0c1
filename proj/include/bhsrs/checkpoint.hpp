#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "bhsrs/adam.hpp"
#include "bhsrs/cube.hpp"
#include "bhsrs/layers.hpp"
#include "nlohmann/json.hpp"

namespace bhsrs {

// Binary container shared by model checkpoints and feature caches:
//   "BHSRS1"  u64 header length  JSON header  float64 blobs (little endian)
// The header lists every blob with shape and element offset; blobs are
// stored sorted by name, keys serialized in sorted order, so equal content
// always produces identical bytes.
struct NamedBlob {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<double> data;
};

struct Archive {
  std::string kind;      // "model" or "features"
  nlohmann::json meta;   // free-form scalars only, no blobs
  std::vector<NamedBlob> blobs;

  const NamedBlob& blob(const std::string& name) const;
  bool has_blob(const std::string& name) const;
};

void archive_save(const Archive& archive, const std::string& path);
Archive archive_load(const std::string& path);

// FNV-1a over the raw little-endian bytes, used to fingerprint cached
// feature content.
uint64_t fnv1a64(const void* data, size_t n);

// Bookkeeping carried alongside the weights.
struct TrainMeta {
  int64_t epoch = 0;
  uint64_t seed = 0;
  double val_kappa = 0.0;
};

// One file with the network configuration, all parameters, the training
// bookkeeping, and (when given) the optimizer moments for exact resumption.
void save_model(const std::string& path, const Network& net, const TrainMeta& meta,
                const AdamState* adam = nullptr);

struct LoadedModel {
  std::unique_ptr<Network> net;
  TrainMeta meta;
  bool has_adam = false;
  AdamState adam;
};

LoadedModel load_model(const std::string& path);

// Feature cache: the cube plus provenance (stored verbatim in the header)
// and a content hash that load_features verifies.
void save_features(const std::string& path, const FeatureCube& cube,
                   const nlohmann::json& provenance);
FeatureCube load_features(const std::string& path, nlohmann::json* provenance = nullptr);

}  // namespace bhsrs
