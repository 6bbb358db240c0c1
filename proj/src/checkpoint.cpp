#include "bhsrs/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "bhsrs/rng.hpp"

namespace bhsrs {

namespace {

constexpr char kMagic[6] = {'B', 'H', 'S', 'R', 'S', '1'};

uint64_t to_le(uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap64(v);
  return v;
}

void append_f64le(std::vector<char>& out, const std::vector<double>& values) {
  const size_t start = out.size();
  out.resize(start + values.size() * 8);
  for (size_t i = 0; i < values.size(); ++i) {
    uint64_t bits;
    std::memcpy(&bits, &values[i], 8);
    bits = to_le(bits);
    std::memcpy(out.data() + start + i * 8, &bits, 8);
  }
}

std::vector<double> decode_f64le(const char* bytes, size_t count) {
  std::vector<double> out(count);
  for (size_t i = 0; i < count; ++i) {
    uint64_t bits;
    std::memcpy(&bits, bytes + i * 8, 8);
    bits = to_le(bits);
    std::memcpy(&out[i], &bits, 8);
  }
  return out;
}

int64_t blob_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 1) throw InputError("archive: blob shape dimensions must be positive");
    n *= d;
  }
  return n;
}

}  // namespace

const NamedBlob& Archive::blob(const std::string& name) const {
  for (const NamedBlob& b : blobs) {
    if (b.name == name) return b;
  }
  throw ParseError(cat("archive: no blob named '", name, "'"));
}

bool Archive::has_blob(const std::string& name) const {
  return std::any_of(blobs.begin(), blobs.end(),
                     [&](const NamedBlob& b) { return b.name == name; });
}

void archive_save(const Archive& archive, const std::string& path) {
  std::vector<const NamedBlob*> order;
  order.reserve(archive.blobs.size());
  for (const NamedBlob& b : archive.blobs) {
    if (b.name.empty()) throw InputError("archive: blob without a name");
    if (blob_numel(b.shape) != static_cast<int64_t>(b.data.size())) {
      throw InputError(cat("archive: blob '", b.name, "' shape does not cover ",
                           b.data.size(), " values"));
    }
    order.push_back(&b);
  }
  std::sort(order.begin(), order.end(),
            [](const NamedBlob* a, const NamedBlob* b) { return a->name < b->name; });
  for (size_t i = 1; i < order.size(); ++i) {
    if (order[i - 1]->name == order[i]->name) {
      throw InputError(cat("archive: duplicate blob name '", order[i]->name, "'"));
    }
  }

  nlohmann::json header;
  header["kind"] = archive.kind;
  header["meta"] = archive.meta;
  nlohmann::json blobs = nlohmann::json::array();
  int64_t offset = 0;
  for (const NamedBlob* b : order) {
    blobs.push_back({{"name", b->name},
                     {"shape", b->shape},
                     {"offset", offset},
                     {"count", static_cast<int64_t>(b->data.size())}});
    offset += static_cast<int64_t>(b->data.size());
  }
  header["blobs"] = std::move(blobs);
  const std::string header_text = header.dump();

  std::vector<char> bytes;
  bytes.reserve(sizeof(kMagic) + 8 + header_text.size() + static_cast<size_t>(offset) * 8);
  bytes.insert(bytes.end(), kMagic, kMagic + sizeof(kMagic));
  const uint64_t len = to_le(static_cast<uint64_t>(header_text.size()));
  const char* len_bytes = reinterpret_cast<const char*>(&len);
  bytes.insert(bytes.end(), len_bytes, len_bytes + 8);
  bytes.insert(bytes.end(), header_text.begin(), header_text.end());
  for (const NamedBlob* b : order) append_f64le(bytes, b->data);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(cat("cannot open '", path, "' for writing"));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(cat("short write to '", path, "'"));
}

Archive archive_load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot open '", path, "' for reading"));
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};

  if (bytes.size() < sizeof(kMagic) + 8 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(cat("'", path, "' is not a checkpoint container"));
  }
  uint64_t len;
  std::memcpy(&len, bytes.data() + sizeof(kMagic), 8);
  len = to_le(len);
  const size_t header_start = sizeof(kMagic) + 8;
  if (header_start + len > bytes.size()) {
    throw ParseError(cat("'", path, "': truncated header"));
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(header_start + len));
  } catch (const std::exception& e) {
    throw ParseError(cat("'", path, "': bad container header: ", e.what()));
  }

  try {
    Archive archive;
    archive.kind = header.at("kind").get<std::string>();
    archive.meta = header.at("meta");
    const size_t payload_start = header_start + len;
    const size_t payload_count = (bytes.size() - payload_start) / 8;
    if ((bytes.size() - payload_start) % 8 != 0) {
      throw ParseError(cat("'", path, "': payload is not whole float64 values"));
    }
    int64_t expected = 0;
    for (const auto& b : header.at("blobs")) {
      NamedBlob blob;
      blob.name = b.at("name").get<std::string>();
      blob.shape = b.at("shape").get<std::vector<int64_t>>();
      const int64_t off = b.at("offset").get<int64_t>();
      const int64_t count = b.at("count").get<int64_t>();
      if (off != expected || count != blob_numel(blob.shape)) {
        throw ParseError(cat("'", path, "': inconsistent blob table at '", blob.name, "'"));
      }
      if (static_cast<size_t>(off + count) > payload_count) {
        throw ParseError(cat("'", path, "': blob '", blob.name, "' runs past end of file"));
      }
      blob.data = decode_f64le(bytes.data() + payload_start + static_cast<size_t>(off) * 8,
                               static_cast<size_t>(count));
      expected = off + count;
      archive.blobs.push_back(std::move(blob));
    }
    if (static_cast<size_t>(expected) != payload_count) {
      throw ParseError(cat("'", path, "': ", payload_count - static_cast<size_t>(expected),
                           " trailing values after the last blob"));
    }
    return archive;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(cat("'", path, "': missing or mistyped header field: ", e.what()));
  }
}

uint64_t fnv1a64(const void* data, size_t n) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

void save_model(const std::string& path, const Network& net, const TrainMeta& meta,
                const AdamState* adam) {
  const NetworkConfig& cfg = net.config();
  Archive archive;
  archive.kind = "model";
  archive.meta = {
      {"mode", mode_name(cfg.mode)},
      {"in_channels", cfg.in_channels},
      {"n_classes", cfg.n_classes},
      {"patch", cfg.patch},
      {"kernel", cfg.kernel},
      {"widths", cfg.widths},
      {"prior_sigma", cfg.prior_sigma},
      {"init_rho", cfg.init_rho},
      {"ln_eps", cfg.ln_eps},
      {"epoch", meta.epoch},
      {"seed", meta.seed},
      {"val_kappa", meta.val_kappa},
  };
  for (const auto& [name, tensor] : net.named_params()) {
    archive.blobs.push_back({"param/" + name, tensor.shape(), tensor.vec()});
  }
  if (adam != nullptr) {
    archive.meta["adam_t"] = adam->t;
    for (const auto& [name, values] : adam->m) {
      archive.blobs.push_back({"adam_m/" + name, {static_cast<int64_t>(values.size())}, values});
    }
    for (const auto& [name, values] : adam->v) {
      archive.blobs.push_back({"adam_v/" + name, {static_cast<int64_t>(values.size())}, values});
    }
  }
  archive_save(archive, path);
}

LoadedModel load_model(const std::string& path) {
  const Archive archive = archive_load(path);
  if (archive.kind != "model") {
    throw ParseError(cat("'", path, "' holds '", archive.kind, "', expected a model"));
  }
  try {
    NetworkConfig cfg;
    cfg.mode = mode_from_name(archive.meta.at("mode").get<std::string>());
    cfg.in_channels = archive.meta.at("in_channels").get<int64_t>();
    cfg.n_classes = archive.meta.at("n_classes").get<int64_t>();
    cfg.patch = archive.meta.at("patch").get<int64_t>();
    cfg.kernel = archive.meta.at("kernel").get<int64_t>();
    cfg.widths = archive.meta.at("widths").get<std::vector<int64_t>>();
    cfg.prior_sigma = archive.meta.at("prior_sigma").get<double>();
    cfg.init_rho = archive.meta.at("init_rho").get<double>();
    cfg.ln_eps = archive.meta.at("ln_eps").get<double>();

    LoadedModel loaded;
    Rng scratch(0);  // every value is overwritten below
    loaded.net = std::make_unique<Network>(cfg, scratch);
    for (auto& [name, tensor] : loaded.net->named_params()) {
      const NamedBlob& blob = archive.blob("param/" + name);
      if (blob.shape != tensor.shape()) {
        throw ParseError(cat("'", path, "': parameter '", name, "' has the wrong shape"));
      }
      std::copy(blob.data.begin(), blob.data.end(), tensor.data());
    }
    loaded.meta.epoch = archive.meta.at("epoch").get<int64_t>();
    loaded.meta.seed = archive.meta.at("seed").get<uint64_t>();
    loaded.meta.val_kappa = archive.meta.at("val_kappa").get<double>();

    if (archive.meta.contains("adam_t")) {
      loaded.has_adam = true;
      loaded.adam.t = archive.meta.at("adam_t").get<int64_t>();
      for (const auto& [name, tensor] : loaded.net->named_params()) {
        (void)tensor;
        loaded.adam.m[name] = archive.blob("adam_m/" + name).data;
        loaded.adam.v[name] = archive.blob("adam_v/" + name).data;
      }
    }
    return loaded;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(cat("'", path, "': missing or mistyped header field: ", e.what()));
  }
}

void save_features(const std::string& path, const FeatureCube& cube,
                   const nlohmann::json& provenance) {
  cube.validate();
  std::vector<char> le_bytes;
  append_f64le(le_bytes, cube.data);
  Archive archive;
  archive.kind = "features";
  archive.meta = {
      {"h", cube.h},
      {"w", cube.w},
      {"bands", cube.bands},
      {"content_hash", cat(std::hex, fnv1a64(le_bytes.data(), le_bytes.size()))},
      {"provenance", provenance},
  };
  archive.blobs.push_back({"features", {cube.bands, cube.h, cube.w}, cube.data});
  archive_save(archive, path);
}

FeatureCube load_features(const std::string& path, nlohmann::json* provenance) {
  const Archive archive = archive_load(path);
  if (archive.kind != "features") {
    throw ParseError(cat("'", path, "' holds '", archive.kind, "', expected features"));
  }
  try {
    FeatureCube cube;
    cube.h = archive.meta.at("h").get<int64_t>();
    cube.w = archive.meta.at("w").get<int64_t>();
    cube.bands = archive.meta.at("bands").get<int64_t>();
    const NamedBlob& blob = archive.blob("features");
    if (blob.shape != std::vector<int64_t>{cube.bands, cube.h, cube.w}) {
      throw ParseError(cat("'", path, "': feature blob shape disagrees with header"));
    }
    cube.data = blob.data;
    cube.validate();

    std::vector<char> le_bytes;
    append_f64le(le_bytes, cube.data);
    const std::string hash = cat(std::hex, fnv1a64(le_bytes.data(), le_bytes.size()));
    if (hash != archive.meta.at("content_hash").get<std::string>()) {
      throw ParseError(cat("'", path, "': content hash mismatch, file is corrupt"));
    }
    if (provenance != nullptr) *provenance = archive.meta.at("provenance");
    return cube;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(cat("'", path, "': missing or mistyped header field: ", e.what()));
  }
}

}  // namespace bhsrs
