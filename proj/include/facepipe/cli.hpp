#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace facepipe::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDataError = 1;
inline constexpr int kExitUsage = 2;

/// Entry point for the `facepipe` tool. Results go to `out`, diagnostics
/// to `err`. Returns 0 on success, 2 on usage errors and 1 on data or
/// computation errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same as above; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchReport {
  std::size_t frames = 0;
  std::size_t dim = 0;
  std::size_t reps = 0;
  std::uint64_t seed = 42;
  double mean_ms = 0;   // per descriptor
  double std_ms = 0;
  double p95_ms = 0;
  double total_ms = 0;
  unsigned cores = 0;
};

/// Times stat pooling of a random frames x dim matrix, `reps` times.
BenchReport bench_pooling(std::size_t frames, std::size_t dim, std::size_t reps, std::uint64_t seed = 42);

std::string bench_to_json(const BenchReport& report);

}  // namespace facepipe::cli
