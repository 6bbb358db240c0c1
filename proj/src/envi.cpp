#include "bhsrs/envi.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace bhsrs {
namespace {

namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot open '", path, "' for reading"));
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::vector<char> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(cat("cannot open '", path, "' for reading"));
  return std::vector<char>{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

int64_t parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int64_t x = std::stoll(v, &pos);
    if (trim(v.substr(pos)).empty()) return x;
  } catch (const std::exception&) {
  }
  throw ParseError(cat("ENVI header: '", key, "' is not an integer: '", v, "'"));
}

uint16_t swap16(uint16_t x) { return static_cast<uint16_t>((x >> 8) | (x << 8)); }
uint32_t swap32(uint32_t x) {
  return (x >> 24) | ((x >> 8) & 0xff00u) | ((x << 8) & 0xff0000u) | (x << 24);
}

bool host_is_little_endian() {
  const uint16_t probe = 1;
  return *reinterpret_cast<const unsigned char*>(&probe) == 1;
}

struct DType {
  int code;
  int size;
};

DType dtype_from_code(int code) {
  switch (code) {
    case 2:
      return {2, 2};  // int16
    case 4:
      return {4, 4};  // float32
    case 12:
      return {12, 2};  // uint16
    default:
      throw ParseError(cat("ENVI: unsupported data type ", code,
                           " (supported: 2=int16, 4=float32, 12=uint16)"));
  }
}

double decode_value(const char* p, const DType& dt, bool swap) {
  switch (dt.code) {
    case 2: {
      uint16_t raw;
      std::memcpy(&raw, p, 2);
      if (swap) raw = swap16(raw);
      int16_t v;
      std::memcpy(&v, &raw, 2);
      return static_cast<double>(v);
    }
    case 12: {
      uint16_t raw;
      std::memcpy(&raw, p, 2);
      if (swap) raw = swap16(raw);
      return static_cast<double>(raw);
    }
    default: {
      uint32_t raw;
      std::memcpy(&raw, p, 4);
      if (swap) raw = swap32(raw);
      float v;
      std::memcpy(&v, &raw, 4);
      return static_cast<double>(v);
    }
  }
}

void encode_value(double x, const DType& dt, bool swap, char* out) {
  switch (dt.code) {
    case 2: {
      const double r = std::nearbyint(x);
      if (r < -32768.0 || r > 32767.0) {
        throw InputError(cat("ENVI write: value ", x, " does not fit int16"));
      }
      int16_t v = static_cast<int16_t>(r);
      uint16_t raw;
      std::memcpy(&raw, &v, 2);
      if (swap) raw = swap16(raw);
      std::memcpy(out, &raw, 2);
      return;
    }
    case 12: {
      const double r = std::nearbyint(x);
      if (r < 0.0 || r > 65535.0) {
        throw InputError(cat("ENVI write: value ", x, " does not fit uint16"));
      }
      uint16_t raw = static_cast<uint16_t>(r);
      if (swap) raw = swap16(raw);
      std::memcpy(out, &raw, 2);
      return;
    }
    default: {
      float v = static_cast<float>(x);
      uint32_t raw;
      std::memcpy(&raw, &v, 4);
      if (swap) raw = swap32(raw);
      std::memcpy(out, &raw, 4);
      return;
    }
  }
}

// File element index for pixel (b, y, x) under the given interleave.
int64_t file_index(const std::string& il, int64_t b, int64_t y, int64_t x, int64_t h, int64_t w,
                   int64_t bands) {
  (void)h;
  if (il == "bsq") return (b * h + y) * w + x;
  if (il == "bil") return (y * bands + b) * w + x;
  return (y * w + x) * bands + b;  // bip
}

// Given either member of the pair, return {header path, data path}.
std::pair<std::string, std::string> resolve_pair(const std::string& path) {
  const fs::path p(path);
  if (lower(p.extension().string()) == ".hdr") {
    fs::path data = p;
    data.replace_extension();  // strip .hdr
    if (!fs::exists(data)) {
      throw IoError(cat("ENVI: header '", path, "' has no data file '", data.string(), "'"));
    }
    return {path, data.string()};
  }
  fs::path hdr = p;
  hdr += ".hdr";
  if (!fs::exists(hdr)) {
    fs::path alt = p;
    alt.replace_extension(".hdr");
    if (fs::exists(alt)) {
      hdr = alt;
    } else {
      throw IoError(cat("ENVI: no header found for '", path, "' (tried '", hdr.string(), "' and '",
                        alt.string(), "')"));
    }
  }
  return {hdr.string(), path};
}

}  // namespace

std::map<std::string, std::string> envi_parse_header(const std::string& text) {
  std::map<std::string, std::string> out;
  size_t pos = 0;
  auto next_line = [&](std::string& line) {
    if (pos >= text.size()) return false;
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    line = text.substr(pos, end - pos);
    pos = end + 1;
    return true;
  };

  std::string line;
  // First non-blank line must be the magic word.
  bool magic = false;
  while (next_line(line)) {
    if (trim(line).empty()) continue;
    magic = lower(trim(line)) == "envi";
    break;
  }
  if (!magic) throw ParseError("ENVI header: missing 'ENVI' magic line");

  while (next_line(line)) {
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) continue;  // tolerated, like trailing comments
    std::string key = lower(trim(line.substr(0, eq)));
    std::string value = trim(line.substr(eq + 1));
    if (!value.empty() && value.front() == '{') {
      // Brace values may span lines; gather until the closing brace.
      std::string body = value.substr(1);
      while (body.find('}') == std::string::npos) {
        std::string more;
        if (!next_line(more)) throw ParseError(cat("ENVI header: unterminated { in '", key, "'"));
        body += "\n" + more;
      }
      body = body.substr(0, body.find('}'));
      value = trim(body);
    }
    out[key] = value;
  }
  return out;
}

HyperCube envi_read(const std::string& path) {
  const auto [hdr_path, data_path] = resolve_pair(path);
  const auto hdr = envi_parse_header(read_text_file(hdr_path));

  auto require = [&](const char* key) -> const std::string& {
    auto it = hdr.find(key);
    if (it == hdr.end()) throw ParseError(cat("ENVI header '", hdr_path, "': missing '", key, "'"));
    return it->second;
  };
  const int64_t w = parse_int(require("samples"), "samples");
  const int64_t h = parse_int(require("lines"), "lines");
  const int64_t bands = parse_int(require("bands"), "bands");
  if (w < 1 || h < 1 || bands < 1) {
    throw ParseError(cat("ENVI header '", hdr_path, "': non-positive dimensions"));
  }
  const DType dt = dtype_from_code(static_cast<int>(parse_int(require("data type"), "data type")));
  std::string il = lower(require("interleave"));
  if (il != "bsq" && il != "bil" && il != "bip") {
    throw ParseError(cat("ENVI: unsupported interleave '", il, "'"));
  }
  int64_t byte_order = 0;
  if (auto it = hdr.find("byte order"); it != hdr.end()) {
    byte_order = parse_int(it->second, "byte order");
  }
  if (byte_order != 0 && byte_order != 1) {
    throw ParseError(cat("ENVI: byte order must be 0 or 1, got ", byte_order));
  }
  int64_t offset = 0;
  if (auto it = hdr.find("header offset"); it != hdr.end()) {
    offset = parse_int(it->second, "header offset");
  }

  const std::vector<char> bytes = read_binary_file(data_path);
  const int64_t n = h * w * bands;
  const int64_t want = offset + n * dt.size;
  if (static_cast<int64_t>(bytes.size()) != want) {
    throw IoError(cat("ENVI: '", data_path, "' is ", bytes.size(), " bytes but ", h, "x", w, "x",
                      bands, " of type ", dt.code, " needs ", want));
  }
  const bool swap = (byte_order == 1) == host_is_little_endian();

  HyperCube cube;
  cube.h = h;
  cube.w = w;
  cube.bands = bands;
  cube.data.resize(n);
  const char* base = bytes.data() + offset;
  parallel_for(bands, [&](int64_t b0, int64_t b1) {
    for (int64_t b = b0; b < b1; ++b) {
      for (int64_t y = 0; y < h; ++y) {
        for (int64_t x = 0; x < w; ++x) {
          const int64_t src = file_index(il, b, y, x, h, w, bands);
          cube.data[(b * h + y) * w + x] = decode_value(base + src * dt.size, dt, swap);
        }
      }
    }
  });
  return cube;
}

void envi_write(const std::string& data_path, const HyperCube& cube,
                const EnviWriteOptions& options) {
  cube.validate();
  const DType dt = dtype_from_code(options.data_type);
  const std::string il = lower(options.interleave);
  if (il != "bsq" && il != "bil" && il != "bip") {
    throw InputError(cat("ENVI write: unsupported interleave '", options.interleave, "'"));
  }
  if (options.byte_order != 0 && options.byte_order != 1) {
    throw InputError("ENVI write: byte order must be 0 or 1");
  }
  const bool swap = (options.byte_order == 1) == host_is_little_endian();

  const int64_t n = cube.h * cube.w * cube.bands;
  std::vector<char> bytes(n * dt.size);
  for (int64_t b = 0; b < cube.bands; ++b) {
    for (int64_t y = 0; y < cube.h; ++y) {
      for (int64_t x = 0; x < cube.w; ++x) {
        const int64_t dst = file_index(il, b, y, x, cube.h, cube.w, cube.bands);
        encode_value(cube.at(b, y, x), dt, swap, bytes.data() + dst * dt.size);
      }
    }
  }
  {
    std::ofstream out(data_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(cat("cannot open '", data_path, "' for writing"));
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError(cat("short write to '", data_path, "'"));
  }
  {
    std::ofstream out(data_path + ".hdr", std::ios::trunc);
    if (!out) throw IoError(cat("cannot open '", data_path, ".hdr' for writing"));
    out << "ENVI\n"
        << "description = {written by bhsrs}\n"
        << "samples = " << cube.w << "\n"
        << "lines = " << cube.h << "\n"
        << "bands = " << cube.bands << "\n"
        << "header offset = 0\n"
        << "file type = ENVI Standard\n"
        << "data type = " << dt.code << "\n"
        << "interleave = " << il << "\n"
        << "byte order = " << options.byte_order << "\n";
    if (!out) throw IoError(cat("short write to '", data_path, ".hdr'"));
  }
}

namespace {

// Reads one whitespace-delimited PGM header token, skipping '#' comments.
std::string pgm_token(const std::vector<char>& bytes, size_t& pos) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw ParseError("PGM: truncated header");
  return std::string(bytes.begin() + start, bytes.begin() + pos);
}

}  // namespace

LabelMap pgm_read(const std::string& path) {
  const std::vector<char> bytes = read_binary_file(path);
  size_t pos = 0;
  if (pgm_token(bytes, pos) != "P5") throw ParseError(cat("'", path, "' is not a binary PGM"));
  int64_t w, h, maxval;
  try {
    w = std::stoll(pgm_token(bytes, pos));
    h = std::stoll(pgm_token(bytes, pos));
    maxval = std::stoll(pgm_token(bytes, pos));
  } catch (const std::exception&) {
    throw ParseError(cat("PGM '", path, "': malformed header"));
  }
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) {
    throw ParseError(cat("PGM '", path, "': bad dimensions or maxval"));
  }
  ++pos;  // single whitespace after maxval
  const int bytes_per = maxval > 255 ? 2 : 1;
  if (bytes.size() - pos != static_cast<size_t>(h * w * bytes_per)) {
    throw IoError(cat("PGM '", path, "': expected ", h * w * bytes_per, " data bytes, found ",
                      bytes.size() - pos));
  }
  LabelMap out;
  out.h = h;
  out.w = w;
  out.data.resize(h * w);
  for (int64_t i = 0; i < h * w; ++i) {
    if (bytes_per == 1) {
      out.data[i] = static_cast<unsigned char>(bytes[pos + i]);
    } else {
      const auto hi = static_cast<unsigned char>(bytes[pos + 2 * i]);
      const auto lo = static_cast<unsigned char>(bytes[pos + 2 * i + 1]);
      out.data[i] = (static_cast<int32_t>(hi) << 8) | lo;
    }
  }
  return out;
}

void pgm_write(const std::string& path, const LabelMap& labels) {
  labels.validate();
  const int32_t top = labels.max_class();
  const int64_t maxval = top > 255 ? 65535 : 255;
  if (top > 65535) throw InputError(cat("PGM write: class id ", top, " exceeds 16 bits"));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(cat("cannot open '", path, "' for writing"));
  out << "P5\n" << labels.w << " " << labels.h << "\n" << maxval << "\n";
  for (int32_t v : labels.data) {
    if (maxval > 255) {
      out.put(static_cast<char>((v >> 8) & 0xff));
      out.put(static_cast<char>(v & 0xff));
    } else {
      out.put(static_cast<char>(v & 0xff));
    }
  }
  if (!out) throw IoError(cat("short write to '", path, "'"));
}

}  // namespace bhsrs
