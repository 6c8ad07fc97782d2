#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "fairhpo/errors.hpp"
#include "fairhpo/evaluators.hpp"

namespace fairhpo {

namespace {

using nlohmann::json;

// One spawned trainer process handling requests sequentially over its stdio.
struct Process {
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::string buffer;

  ~Process() { close_all(); }

  void close_all() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    to_child = from_child = -1;
    if (pid > 0) {
      // the child runs in its own process group; kill the whole tree
      ::kill(-pid, SIGKILL);
      ::kill(pid, SIGKILL);
      int status = 0;
      ::waitpid(pid, &status, 0);
      pid = -1;
    }
  }

  // Waits for the child to exit and renders a diagnostic.
  std::string reap() {
    if (to_child >= 0) ::close(to_child);
    if (from_child >= 0) ::close(from_child);
    to_child = from_child = -1;
    std::string diag = "trainer process ended";
    if (pid > 0) {
      int status = 0;
      ::waitpid(pid, &status, 0);
      std::ostringstream os;
      if (WIFEXITED(status)) os << "trainer exited with status " << WEXITSTATUS(status);
      else if (WIFSIGNALED(status)) os << "trainer killed by signal " << WTERMSIG(status);
      else os << "trainer ended abnormally";
      diag = os.str();
      pid = -1;
    }
    return diag;
  }
};

std::unique_ptr<Process> spawn(const std::string& command) {
  int in_pipe[2];   // parent -> child
  int out_pipe[2];  // child -> parent
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw HarnessError("pipe() failed");
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw HarnessError("pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw HarnessError("fork() failed");
  if (pid == 0) {
    ::setpgid(0, 0);  // own process group so the whole command tree can be killed
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  auto proc = std::make_unique<Process>();
  proc->pid = pid;
  proc->to_child = in_pipe[1];
  proc->from_child = out_pipe[0];
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  return proc;
}

bool write_all(int fd, const std::string& data) {
  std::size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::write(fd, data.data() + sent, data.size() - sent);
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

enum class ReadStatus { Line, Eof, Timeout };

ReadStatus read_line(Process& proc, double timeout_seconds, std::string* line) {
  const auto deadline =
      std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_seconds);
  for (;;) {
    const std::size_t nl = proc.buffer.find('\n');
    if (nl != std::string::npos) {
      *line = proc.buffer.substr(0, nl);
      proc.buffer.erase(0, nl + 1);
      return ReadStatus::Line;
    }
    const auto remaining = std::chrono::duration<double>(deadline - std::chrono::steady_clock::now());
    if (remaining.count() <= 0.0) return ReadStatus::Timeout;
    struct pollfd pfd {};
    pfd.fd = proc.from_child;
    pfd.events = POLLIN;
    const int timeout_ms = static_cast<int>(std::min(remaining.count() * 1000.0, 1e9));
    const int rc = ::poll(&pfd, 1, std::max(timeout_ms, 1));
    if (rc == 0) return ReadStatus::Timeout;
    if (rc < 0) {
      if (errno == EINTR) continue;
      return ReadStatus::Eof;
    }
    char chunk[4096];
    const ssize_t n = ::read(proc.from_child, chunk, sizeof chunk);
    if (n <= 0) return ReadStatus::Eof;
    proc.buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

json config_to_json(const Configuration& config) {
  json flat = json::object();
  for (const auto& [name, value] : config.assignments) {
    if (const double* d = std::get_if<double>(&value)) flat[name] = *d;
    else if (const std::int64_t* i = std::get_if<std::int64_t>(&value)) flat[name] = *i;
    else flat[name] = std::get<std::string>(value);
  }
  return flat;
}

}  // namespace

struct ExternalEvaluator::Pool {
  ExternalTrainerOptions options;
  std::mutex mutex;
  std::condition_variable ready;
  std::vector<std::unique_ptr<Process>> idle;
  int live = 0;

  explicit Pool(ExternalTrainerOptions opts) : options(std::move(opts)) {
    if (options.workers < 1) throw ConfigError("external trainer worker count must be >= 1");
    if (options.command.empty()) throw ConfigError("external trainer command must not be empty");
  }

  std::unique_ptr<Process> acquire() {
    std::unique_lock lock(mutex);
    for (;;) {
      if (!idle.empty()) {
        auto proc = std::move(idle.back());
        idle.pop_back();
        return proc;
      }
      if (live < options.workers) {
        ++live;
        lock.unlock();
        try {
          return spawn(options.command);
        } catch (...) {
          lock.lock();
          --live;
          throw;
        }
      }
      ready.wait(lock);
    }
  }

  void release(std::unique_ptr<Process> proc) {
    std::lock_guard lock(mutex);
    idle.push_back(std::move(proc));
    ready.notify_one();
  }

  void discard() {
    std::lock_guard lock(mutex);
    --live;
    ready.notify_one();
  }
};

ExternalEvaluator::ExternalEvaluator(ExternalTrainerOptions options)
    : pool_(std::make_unique<Pool>(std::move(options))) {}

ExternalEvaluator::~ExternalEvaluator() = default;

EvalOutcome ExternalEvaluator::evaluate(const EvaluationRequest& request) const {
  std::unique_ptr<Process> proc;
  try {
    proc = pool_->acquire();
  } catch (const std::exception& e) {
    return EvalOutcome::failure(std::string("cannot start trainer: ") + e.what());
  }

  json req = json::object();
  req["config"] = config_to_json(request.config);
  req["budget"] = request.budget_fraction;
  req["seed"] = request.seed;
  req["phase"] = "train_eval";
  const std::string line = req.dump() + "\n";

  if (!write_all(proc->to_child, line)) {
    const std::string diag = proc->reap();
    pool_->discard();
    return EvalOutcome::failure("failed to send request: " + diag);
  }

  std::string response;
  const ReadStatus status = read_line(*proc, pool_->options.timeout_seconds, &response);
  if (status == ReadStatus::Timeout) {
    proc->close_all();
    pool_->discard();
    std::ostringstream os;
    os << "trainer timed out after " << pool_->options.timeout_seconds << " s";
    return EvalOutcome::failure(os.str());
  }
  if (status == ReadStatus::Eof) {
    const std::string diag = proc->reap();
    pool_->discard();
    return EvalOutcome::failure("trainer exited mid-request: " + diag);
  }

  json parsed;
  try {
    parsed = json::parse(response);
  } catch (const json::exception& e) {
    proc->close_all();
    pool_->discard();
    return EvalOutcome::failure(std::string("malformed trainer response: ") + e.what());
  }
  pool_->release(std::move(proc));

  if (parsed.contains("error"))
    return EvalOutcome::failure("trainer error: " + parsed["error"].get<std::string>());
  for (const char* field : {"accuracy", "fairness"}) {
    if (!parsed.contains(field) || !parsed[field].is_number())
      return EvalOutcome::failure(std::string("trainer response missing numeric field '") + field +
                                  "'");
  }
  EvaluationResult result;
  result.accuracy = parsed["accuracy"].get<double>();
  result.fairness = parsed["fairness"].get<double>();
  if (!(result.accuracy >= 0.0 && result.accuracy <= 1.0 && result.fairness >= 0.0 &&
        result.fairness <= 1.0))
    return EvalOutcome::failure("trainer metrics outside [0,1]");
  return EvalOutcome::success(result);
}

}  // namespace fairhpo
