#pragma once

#include <optional>
#include <string>
#include <sys/types.h>

#include "fmd/evaluator.hpp"

namespace fmd {

/// Child process spoken to over stdin/stdout, one line per message.
class LineProcess {
 public:
  explicit LineProcess(std::string command);
  ~LineProcess();
  LineProcess(const LineProcess&) = delete;
  LineProcess& operator=(const LineProcess&) = delete;

  void start();
  void stop();
  bool running() const { return pid_ > 0; }

  void write_line(const std::string& line);
  /// Next line without the trailing newline; nullopt on EOF or timeout.
  std::optional<std::string> read_line(int timeout_ms);

 private:
  std::string command_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

/// Request record written per sample: question, options, scene_description,
/// scene_graph, seed. The response line must carry an "answer" field.
nlohmann::json subprocess_request(const Query& query);

class SubprocessTarget : public TargetModel {
 public:
  explicit SubprocessTarget(std::string command, int timeout_ms = 60000);
  std::string ask(const Query& query) override;

 private:
  LineProcess process_;
  int timeout_ms_;
};

}  // namespace fmd
