#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "bhsrs/cube.hpp"

namespace bhsrs {

// ENVI raster pair (.hdr text + headerless binary). The reader accepts the
// path of either file and finds its mate. Supported: data types 2 (int16),
// 4 (float32), 12 (uint16); interleaves bsq, bil, bip; byte order 0 or 1.
// Values are widened to float64 and returned band-sequential.
HyperCube envi_read(const std::string& path);

struct EnviWriteOptions {
  int data_type = 4;            // 2, 4 or 12
  std::string interleave = "bsq";
  int byte_order = 0;           // 0 little endian, 1 big endian
};

// Writes data_path plus data_path.hdr. Values are narrowed to the requested
// type; integer types are rounded and range-checked (InputError on overflow).
void envi_write(const std::string& data_path, const HyperCube& cube,
                const EnviWriteOptions& options = {});

// Parsed key/value view of a header (keys lowercased, brace values kept
// verbatim without the braces). Exposed for tests and diagnostics.
std::map<std::string, std::string> envi_parse_header(const std::string& text);

// Binary PGM (P5). Label convention: 0 = unlabeled, classes 1-based.
// Files with maxval > 255 hold big-endian 2-byte samples.
LabelMap pgm_read(const std::string& path);
void pgm_write(const std::string& path, const LabelMap& labels);

}  // namespace bhsrs
