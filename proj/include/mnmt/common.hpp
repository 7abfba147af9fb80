#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mnmt {

inline constexpr std::string_view kVersion = "0.1.0";

enum class ErrorCode {
  EmptyCorpus,
  NoLinks,
  ShapeMismatch,
  NonFiniteValue,
  NonFiniteGradient,
  EmptyInput,
  Divergence,
  EmptyMemory,
  InvalidBeta,
  NoTrainableSteps,
  NoUsableCandidate,
  LengthMismatch,
  EmptyTestSet,
  Io,
  Format,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Warnings go to stderr unless a sink is installed (tests silence them).
using WarningSink = void (*)(std::string_view);
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

// 64-bit FNV-1a; stable across platforms, used for config hashes and checksums.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

// First line of every text artifact: "## mnmt version=<v> config=<hash> seed=<n>".
std::string artifact_header(std::string_view config_text, std::uint64_t seed);
bool is_artifact_header(std::string_view line);

// Runs fn(0..n-1) on up to `threads` workers; the first exception is rethrown.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);
std::size_t default_threads();

}  // namespace mnmt
