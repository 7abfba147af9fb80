#include "mnmt/common.hpp"

#include <algorithm>
#include <cstdio>
#include <atomic>
#include <exception>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

namespace mnmt {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::NoLinks: return "NoLinks";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::Divergence: return "Divergence";
    case ErrorCode::EmptyMemory: return "EmptyMemory";
    case ErrorCode::InvalidBeta: return "InvalidBeta";
    case ErrorCode::NoTrainableSteps: return "NoTrainableSteps";
    case ErrorCode::NoUsableCandidate: return "NoUsableCandidate";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyTestSet: return "EmptyTestSet";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

namespace {
WarningSink g_sink = nullptr;
}

void set_warning_sink(WarningSink sink) { g_sink = sink; }

void warn(std::string_view message) {
  if (g_sink != nullptr) {
    g_sink(message);
    return;
  }
  std::cerr << "warning: " << message << '\n';
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string artifact_header(std::string_view config_text, std::uint64_t seed) {
  return "## mnmt version=" + std::string(kVersion) + " config=" + hex64(fnv1a(config_text)) +
         " seed=" + std::to_string(seed);
}

bool is_artifact_header(std::string_view line) { return line.starts_with("## mnmt "); }

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

std::size_t default_threads() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

}  // namespace mnmt
