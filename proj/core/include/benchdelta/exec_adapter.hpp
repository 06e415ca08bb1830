#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>

#include "benchdelta/grader.hpp"

namespace benchdelta {

/// Name of the environment variable holding the worker command line.
inline constexpr std::string_view kExecAdapterEnv = "BENCHDELTA_EXEC_ADAPTER";

/// Wire format of the worker protocol: one JSON object per line.
///   request:  {"source": str, "timeout_ms": int}
///   response: {"status": "ok"|"raised"|"no_value", "error_class": str|null, "value": str|null}
std::string encode_execution_request(std::string_view source, std::chrono::milliseconds timeout);
/// Throws DataError on a malformed response line.
ExecutionOutcome decode_execution_response(std::string_view line);

/// Keeps one worker process (`/bin/sh -c <command>`) alive and talks the
/// line protocol over its stdin/stdout. A request that outlives its timeout
/// (plus a grace period) kills the worker, which is restarted on the next
/// call; the request is reported as raised "TimeoutError".
class SubprocessExecutionAdapter final : public ExecutionAdapter {
 public:
  explicit SubprocessExecutionAdapter(std::string command,
                                      std::chrono::milliseconds grace = std::chrono::milliseconds{2000});
  ~SubprocessExecutionAdapter() override;

  SubprocessExecutionAdapter(const SubprocessExecutionAdapter&) = delete;
  SubprocessExecutionAdapter& operator=(const SubprocessExecutionAdapter&) = delete;

  ExecutionOutcome execute(std::string_view source, std::chrono::milliseconds timeout) override;

  const std::string& command() const noexcept { return command_; }

 private:
  void start();
  void stop() noexcept;

  std::string command_;
  std::chrono::milliseconds grace_;
  int pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

/// Adapter from BENCHDELTA_EXEC_ADAPTER, or nullptr when it is unset/empty.
std::unique_ptr<ExecutionAdapter> adapter_from_environment();

}  // namespace benchdelta
