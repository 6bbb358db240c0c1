#pragma once

#include <cstdint>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

namespace bhsrs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape/axis disagreements between tensors.
struct ShapeError : Error {
  using Error::Error;
};
// Malformed text input (headers, config files).
struct ParseError : Error {
  using Error::Error;
};
// Filesystem and byte-level integrity problems.
struct IoError : Error {
  using Error::Error;
};
// Semantically invalid caller-supplied values.
struct InputError : Error {
  using Error::Error;
};
// API misuse (e.g. backward without a tape).
struct UsageError : Error {
  using Error::Error;
};
// Violated internal invariant; indicates a bug.
struct InternalError : Error {
  using Error::Error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void cat_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  cat_into(os, rest...);
}
}  // namespace detail

// Builds an error message from heterogeneous pieces.
template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  detail::cat_into(os, args...);
  return os.str();
}

// Runtime toggle for the finite-value checks that run after forward ops.
// Defaults to on in debug builds, off when NDEBUG is defined.
bool finite_checks_enabled();
void set_finite_checks(bool on);

// Warnings go to stderr with a common prefix.
void warn(const std::string& message);

// Maximum worker threads: BHSRS_THREADS if set, else hardware concurrency.
int max_threads();

// Chunked parallel loop over [0, n). Calls fn(begin, end) on worker threads.
// Nested calls run serially in the calling thread.
void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn);

}  // namespace bhsrs
