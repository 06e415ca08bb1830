#include "benchdelta/exec_adapter.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "benchdelta/errors.hpp"
#include <nlohmann/json.hpp>

namespace benchdelta {

using json = nlohmann::json;

std::string encode_execution_request(std::string_view source, std::chrono::milliseconds timeout) {
  nlohmann::ordered_json req;
  req["source"] = std::string(source);
  req["timeout_ms"] = timeout.count();
  return req.dump(-1, ' ', false, json::error_handler_t::replace);
}

ExecutionOutcome decode_execution_response(std::string_view line) {
  json obj;
  try {
    obj = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("execution adapter: invalid JSON response: ") + e.what());
  }
  if (!obj.is_object() || !obj.contains("status") || !obj["status"].is_string()) {
    throw DataError("execution adapter: response lacks a string 'status'");
  }
  ExecutionOutcome out;
  const auto status = obj["status"].get<std::string>();
  if (status == "ok") {
    out.status = ExecutionOutcome::Status::ok;
  } else if (status == "raised") {
    out.status = ExecutionOutcome::Status::raised;
  } else if (status == "no_value") {
    out.status = ExecutionOutcome::Status::no_value;
  } else {
    throw DataError("execution adapter: unknown status '" + status + "'");
  }
  if (auto it = obj.find("error_class"); it != obj.end() && it->is_string()) out.error_class_name = it->get<std::string>();
  if (auto it = obj.find("value"); it != obj.end() && it->is_string()) out.returned_value_repr = it->get<std::string>();
  if (out.status == ExecutionOutcome::Status::raised && !out.error_class_name) {
    throw DataError("execution adapter: 'raised' response without error_class");
  }
  return out;
}

SubprocessExecutionAdapter::SubprocessExecutionAdapter(std::string command, std::chrono::milliseconds grace)
    : command_(std::move(command)), grace_(grace) {
  if (command_.empty()) throw UsageError("execution adapter command is empty");
}

SubprocessExecutionAdapter::~SubprocessExecutionAdapter() { stop(); }

void SubprocessExecutionAdapter::start() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw EnvironmentError(std::string("socketpair failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setsid();
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(fds[1]);
  pid_ = pid;
  fd_ = fds[0];
  buffer_.clear();
}

void SubprocessExecutionAdapter::stop() noexcept {
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
  if (pid_ > 0) {
    ::kill(-pid_, SIGKILL);  // worker runs in its own session
    ::kill(pid_, SIGKILL);
    int status = 0;
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
  buffer_.clear();
}

ExecutionOutcome SubprocessExecutionAdapter::execute(std::string_view source, std::chrono::milliseconds timeout) {
  if (fd_ < 0) start();

  std::string request = encode_execution_request(source, timeout);
  request.push_back('\n');
  std::size_t sent = 0;
  while (sent < request.size()) {
    const ssize_t n = ::send(fd_, request.data() + sent, request.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      stop();
      throw EnvironmentError("execution adapter '" + command_ + "' is not accepting requests");
    }
    sent += static_cast<std::size_t>(n);
  }

  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + timeout + grace_;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      return decode_execution_response(line);
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (remaining.count() <= 0) {
      stop();
      return ExecutionOutcome{ExecutionOutcome::Status::raised, "TimeoutError", std::nullopt};
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
    if (ready < 0) {
      if (errno == EINTR) continue;
      stop();
      throw EnvironmentError(std::string("poll failed: ") + std::strerror(errno));
    }
    if (ready == 0) continue;
    char chunk[4096];
    const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      stop();
      throw EnvironmentError("execution adapter '" + command_ + "' exited without answering");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

std::unique_ptr<ExecutionAdapter> adapter_from_environment() {
  const char* command = std::getenv(std::string(kExecAdapterEnv).c_str());
  if (command == nullptr || *command == '\0') return nullptr;
  return std::make_unique<SubprocessExecutionAdapter>(command);
}

}  // namespace benchdelta
