// Shared error type, logging, and a small deterministic parallel_for.
#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace vid {

enum class ErrorCode {
  kInvalidArgs,
  kMissingInput,
  kInvalidConfig,
  kMalformedLine,
  kChannelMismatch,
  kLabelOutOfRange,
  kDimensionMismatch,
  kInvalidPermutation,
  kEmptyBatch,
  kEmptyIndex,
  kEmptyVocabulary,
  kEmptyCorpus,
  kInvalidK,
  kUnknownCategory,
  kDivergence,
  kInvalidGraph,
  kIoError,
  kUnknownStage,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgs: return "InvalidArgs";
    case ErrorCode::kMissingInput: return "MissingInput";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kChannelMismatch: return "ChannelMismatch";
    case ErrorCode::kLabelOutOfRange: return "LabelOutOfRange";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kInvalidPermutation: return "InvalidPermutation";
    case ErrorCode::kEmptyBatch: return "EmptyBatch";
    case ErrorCode::kEmptyIndex: return "EmptyIndex";
    case ErrorCode::kEmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::kEmptyCorpus: return "EmptyCorpus";
    case ErrorCode::kInvalidK: return "InvalidK";
    case ErrorCode::kUnknownCategory: return "UnknownCategory";
    case ErrorCode::kDivergence: return "Divergence";
    case ErrorCode::kInvalidGraph: return "InvalidGraph";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kUnknownStage: return "UnknownStage";
  }
  return "Unknown";
}

// Process exit code used by the CLI for each error kind.
inline int error_exit_code(ErrorCode code) { return 10 + static_cast<int>(code); }

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

// ---------------------------------------------------------------------------
// Logging, controlled by the VID_LOG environment variable (debug|info|warn).

enum class LogLevel { kDebug = 0, kInfo = 1, kWarn = 2 };

inline LogLevel log_threshold() {
  static LogLevel level = [] {
    const char* env = std::getenv("VID_LOG");
    if (env == nullptr) return LogLevel::kInfo;
    std::string v(env);
    if (v == "debug") return LogLevel::kDebug;
    if (v == "warn") return LogLevel::kWarn;
    return LogLevel::kInfo;
  }();
  return level;
}

inline void log_at(LogLevel level, const char* tag, const char* fmt, va_list args) {
  if (level < log_threshold()) return;
  std::fprintf(stderr, "[%s] ", tag);
  std::vfprintf(stderr, fmt, args);
  std::fprintf(stderr, "\n");
}

inline void log_debug(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  log_at(LogLevel::kDebug, "debug", fmt, args);
  va_end(args);
}

inline void log_info(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  log_at(LogLevel::kInfo, "info", fmt, args);
  va_end(args);
}

inline void log_warn(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  log_at(LogLevel::kWarn, "warn", fmt, args);
  va_end(args);
}

// ---------------------------------------------------------------------------
// Deterministic data-parallel loop: the body writes only to slot i, so the
// result is identical for any thread count.

template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const int workers = static_cast<int>(std::min<std::int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([t, workers, n, &fn] {
      for (std::int64_t i = t; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

inline int default_thread_count() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace vid
