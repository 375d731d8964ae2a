//===- adapter.cpp - Running external analyzers under a timeout -----------===//
//
// Licensed under the Apache License v2.0.
// SPDX-License-Identifier: Apache-2.0
//
//===----------------------------------------------------------------------===//
#include "spire/nexus/adapter.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <fmt/format.h>

#include "spire/error.hpp"
#include "spire/nexus/workspace.hpp"

extern char** environ;

namespace spire::nexus {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kStderrCap = 4096;

[[noreturn]] void invalid(const std::string& why) { throw Error(ErrorCode::ValidationFailed, why); }

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  }
  return out + "'";
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
  for (std::size_t at = s.find(from); at != std::string::npos; at = s.find(from, at + to.size()))
    s.replace(at, from.size(), to);
}

class TempDir {
 public:
  TempDir() {
    std::string pattern = (fs::temp_directory_path() / "spire-adapter-XXXXXX").string();
    if (!::mkdtemp(pattern.data()))
      throw Error(ErrorCode::Io, "cannot create a temporary directory for the adapter");
    path_ = pattern;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const noexcept { return path_; }

 private:
  fs::path path_;
};

class Pipe {
 public:
  Pipe() {
    if (::pipe2(fds_, O_CLOEXEC) != 0)
      throw Error(ErrorCode::Io, "pipe failed");
  }
  ~Pipe() {
    close_read();
    close_write();
  }
  int read_end() const noexcept { return fds_[0]; }
  int write_end() const noexcept { return fds_[1]; }
  void close_read() noexcept {
    if (fds_[0] >= 0) ::close(fds_[0]);
    fds_[0] = -1;
  }
  void close_write() noexcept {
    if (fds_[1] >= 0) ::close(fds_[1]);
    fds_[1] = -1;
  }

 private:
  int fds_[2] = {-1, -1};
};

struct SemaphoreSlot {
  explicit SemaphoreSlot(std::counting_semaphore<>& s) : sem(s) { sem.acquire(); }
  ~SemaphoreSlot() { sem.release(); }
  std::counting_semaphore<>& sem;
};

struct ProcessOutcome {
  std::string out;
  bool truncated = false;
  std::string err;
  int status = 0;
  bool timed_out = false;
};

ProcessOutcome run_shell(const std::string& command, double timeout_seconds, std::size_t cap) {
  Pipe out_pipe;
  Pipe err_pipe;

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, 0, "/dev/null", O_RDONLY, 0);
  posix_spawn_file_actions_adddup2(&actions, out_pipe.write_end(), 1);
  posix_spawn_file_actions_adddup2(&actions, err_pipe.write_end(), 2);
  posix_spawnattr_t attr;
  posix_spawnattr_init(&attr);
  posix_spawnattr_setflags(&attr, POSIX_SPAWN_SETPGROUP);
  posix_spawnattr_setpgroup(&attr, 0);

  const char* argv[] = {"sh", "-c", command.c_str(), nullptr};
  pid_t pid = -1;
  const int rc = ::posix_spawn(&pid, "/bin/sh", &actions, &attr, const_cast<char* const*>(argv), environ);
  posix_spawn_file_actions_destroy(&actions);
  posix_spawnattr_destroy(&attr);
  if (rc != 0)
    throw Error(ErrorCode::AdapterFailed, fmt::format("cannot start /bin/sh: {}", std::strerror(rc)));
  out_pipe.close_write();
  err_pipe.close_write();

  using Clock = std::chrono::steady_clock;
  const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                           std::chrono::duration<double>(timeout_seconds));
  ProcessOutcome result;
  auto remaining_ms = [&] {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
    return static_cast<int>(std::max<long long>(0, std::min<long long>(left, 1000)));
  };
  auto kill_group = [&] {
    ::kill(-pid, SIGKILL);
    int status = 0;
    ::waitpid(pid, &status, 0);
    result.timed_out = true;
  };

  bool out_open = true;
  bool err_open = true;
  char buffer[8192];
  while (out_open || err_open) {
    if (Clock::now() >= deadline) {
      kill_group();
      return result;
    }
    pollfd fds[2];
    nfds_t count = 0;
    if (out_open) fds[count++] = {out_pipe.read_end(), POLLIN, 0};
    if (err_open) fds[count++] = {err_pipe.read_end(), POLLIN, 0};
    if (::poll(fds, count, remaining_ms()) <= 0)
      continue;
    for (nfds_t i = 0; i < count; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR)))
        continue;
      const bool is_out = fds[i].fd == out_pipe.read_end();
      const ssize_t n = ::read(fds[i].fd, buffer, sizeof buffer);
      if (n <= 0) {
        (is_out ? out_open : err_open) = false;
        continue;
      }
      std::string& sink = is_out ? result.out : result.err;
      const std::size_t limit = is_out ? cap : kStderrCap;
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(n), limit - std::min(limit, sink.size()));
      sink.append(buffer, take);
      if (is_out && take < static_cast<std::size_t>(n))
        result.truncated = true;
    }
  }

  // Pipes are closed; the shell may still be running.
  for (;;) {
    int status = 0;
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) {
      result.status = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
      ::kill(-pid, SIGKILL);  // stray children of the shell
      return result;
    }
    if (Clock::now() >= deadline) {
      kill_group();
      return result;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

}  // namespace

std::string_view to_string(AdapterKind kind) noexcept {
  switch (kind) {
    case AdapterKind::Disassembly: return "disassembly";
    case AdapterKind::Decompilation: return "decompilation";
    case AdapterKind::Custom: return "custom";
  }
  return "custom";
}

Json to_json(const AdapterDescriptor& d) {
  return {{"name", d.name}, {"kind", to_string(d.kind)}, {"invocation", d.invocation}, {"timeout", d.timeout_seconds}};
}

AdapterDescriptor adapter_from_json(const Json& j) {
  if (!j.is_object())
    invalid("adapter descriptor must be an object");
  AdapterDescriptor d;
  for (const auto& [key, value] : j.items()) {
    if (key == "name" && value.is_string()) {
      d.name = value.get<std::string>();
    } else if (key == "kind" && value.is_string()) {
      const auto kind = value.get<std::string>();
      if (kind == "disassembly") d.kind = AdapterKind::Disassembly;
      else if (kind == "decompilation") d.kind = AdapterKind::Decompilation;
      else if (kind == "custom") d.kind = AdapterKind::Custom;
      else invalid(fmt::format("unknown adapter kind '{}'", kind));
    } else if (key == "invocation" && value.is_string()) {
      d.invocation = value.get<std::string>();
    } else if (key == "timeout" && value.is_number()) {
      d.timeout_seconds = value.get<double>();
    } else {
      invalid(fmt::format("adapter descriptor: bad key '{}'", key));
    }
  }
  validate(d);
  return d;
}

void validate(const AdapterDescriptor& d) {
  if (!is_valid_token(d.name))
    invalid(fmt::format("adapter name '{}' is not a token", d.name));
  if (!(d.timeout_seconds > 0) || !std::isfinite(d.timeout_seconds))
    invalid(fmt::format("adapter '{}': timeout must be positive", d.name));
  if (d.invocation.find("{input_path}") == std::string::npos)
    invalid(fmt::format("adapter '{}': invocation must contain {{input_path}}", d.name));
}

Json to_json(const AdapterResult& r) {
  return {{"output", r.output},
          {"truncated", r.truncated},
          {"exit_status", r.exit_status},
          {"duration", r.duration_seconds},
          {"cached", r.cached}};
}

std::string expand_invocation(const std::string& invocation, const std::string& input_path,
                              std::optional<Address> function_addr) {
  std::string out = invocation;
  if (out.find("{function_addr}") != std::string::npos) {
    if (!function_addr)
      invalid("this adapter needs a function");
    replace_all(out, "{function_addr}", hex_address(*function_addr));
  }
  replace_all(out, "{input_path}", shell_quote(input_path));
  return out;
}

AdapterRunner::AdapterRunner(std::vector<AdapterDescriptor> adapters, const BinaryStore& store,
                             std::size_t max_parallel, std::size_t output_cap)
    : adapters_(std::move(adapters)),
      store_(store),
      output_cap_(output_cap),
      slots_(std::make_unique<std::counting_semaphore<>>(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, max_parallel)))) {
  for (const auto& d : adapters_)
    validate(d);
}

const AdapterDescriptor* AdapterRunner::find(std::string_view name) const {
  for (const auto& d : adapters_)
    if (d.name == name)
      return &d;
  return nullptr;
}

std::size_t AdapterRunner::processes_started() const {
  std::lock_guard guard(mutex_);
  return started_;
}

AdapterResult AdapterRunner::run(std::string_view name, const std::string& artifact_id,
                                 std::optional<Address> function_addr) {
  const AdapterDescriptor* d = find(name);
  if (!d)
    throw Error(ErrorCode::AdapterNotFound, fmt::format("no adapter named '{}'", name));
  const auto key = std::make_tuple(d->name, artifact_id, function_addr);
  {
    std::lock_guard guard(mutex_);
    if (auto it = cache_.find(key); it != cache_.end()) {
      AdapterResult hit = it->second;
      hit.cached = true;
      return hit;
    }
  }
  const auto bytes = store_.bytes(artifact_id);

  SemaphoreSlot slot(*slots_);
  TempDir dir;
  const fs::path input = dir.path() / artifact_id;
  {
    const std::string_view content(reinterpret_cast<const char*>(bytes->data()), bytes->size());
    write_file_atomic(input, content);
  }
  const std::string command = expand_invocation(d->invocation, input.string(), function_addr);
  {
    std::lock_guard guard(mutex_);
    ++started_;
  }
  const auto begin = std::chrono::steady_clock::now();
  ProcessOutcome outcome = run_shell(command, d->timeout_seconds, output_cap_);
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - begin).count();

  if (outcome.timed_out)
    throw Error(ErrorCode::AdapterTimeout,
                fmt::format("adapter '{}' did not finish within {}s", d->name, d->timeout_seconds));
  if (outcome.status != 0)
    throw Error(ErrorCode::AdapterFailed, fmt::format("adapter '{}' exited with status {}", d->name, outcome.status),
                outcome.err);

  AdapterResult result;
  result.output = std::move(outcome.out);
  result.truncated = outcome.truncated;
  result.exit_status = outcome.status;
  result.duration_seconds = elapsed;
  std::lock_guard guard(mutex_);
  cache_.emplace(key, result);
  return result;
}

}  // namespace spire::nexus
