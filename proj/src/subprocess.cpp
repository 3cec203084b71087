#include "fmd/subprocess.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>
#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include "fmd/error.hpp"

namespace fmd {

LineProcess::LineProcess(std::string command) : command_(std::move(command)) {}

LineProcess::~LineProcess() { stop(); }

void LineProcess::start() {
  if (running()) return;
  // A child that exits early must surface as a write error, not terminate the run.
  std::signal(SIGPIPE, SIG_IGN);
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0) throw TransportError(std::string("pipe: ") + std::strerror(errno));
  if (pipe(out_pipe) != 0) {
    close(in_pipe[0]);
    close(in_pipe[1]);
    throw TransportError(std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    throw TransportError(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) close(fd);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  fcntl(from_child_, F_SETFD, FD_CLOEXEC);
  pid_ = pid;
  buffer_.clear();
}

void LineProcess::stop() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    int status = 0;
    if (waitpid(pid_, &status, WNOHANG) == 0) {
      kill(pid_, SIGTERM);
      waitpid(pid_, &status, 0);
    }
  }
  pid_ = -1;
  buffer_.clear();
}

void LineProcess::write_line(const std::string& line) {
  if (!running()) start();
  std::string data = line + "\n";
  const char* p = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = write(to_child_, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      stop();
      throw TransportError(std::string("write to target: ") + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
}

std::optional<std::string> LineProcess::read_line(int timeout_ms) {
  while (true) {
    if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
      std::string line = buffer_.substr(0, pos);
      buffer_.erase(0, pos + 1);
      return line;
    }
    if (from_child_ < 0) return std::nullopt;
    pollfd pfd{from_child_, POLLIN, 0};
    const int r = poll(&pfd, 1, timeout_ms);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) return std::nullopt;
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof chunk);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return std::nullopt;
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

nlohmann::json subprocess_request(const Query& query) {
  nlohmann::json options = nlohmann::json::array();
  for (const auto& o : query.options) options.push_back({{"label", o.label}, {"text", o.text}});
  return {{"question", query.question},
          {"options", options},
          {"scene_description", query.scene_description},
          {"scene_graph", query.scene_graph},
          {"seed", query.seed}};
}

SubprocessTarget::SubprocessTarget(std::string command, int timeout_ms)
    : process_(std::move(command)), timeout_ms_(timeout_ms) {}

std::string SubprocessTarget::ask(const Query& query) {
  process_.write_line(subprocess_request(query).dump());
  auto line = process_.read_line(timeout_ms_);
  if (!line) {
    process_.stop();
    throw TransportError("target produced no answer");
  }
  try {
    const auto j = nlohmann::json::parse(*line);
    return j.at("answer").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw TransportError("malformed target response: " + std::string(e.what()));
  }
}

}  // namespace fmd
