#include "acesearcher/executor.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>
#include <unistd.h>

#include "acesearcher/common.hpp"

namespace acesearcher {

namespace {

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'')
      out += "'\\''";
    else
      out.push_back(c);
  }
  out.push_back('\'');
  return out;
}

}  // namespace

SubprocessExecutor::SubprocessExecutor(std::string command) : command_(std::move(command)) {
  if (trim(command_).empty()) throw Error(ErrorCode::invalid_argument, "executor command is empty");
}

ExecutionResult SubprocessExecutor::run(std::string_view program) const {
  std::string path = (std::filesystem::temp_directory_path() / "acesearcher-program-XXXXXX").string();
  const int fd = ::mkstemp(path.data());
  if (fd < 0) return {false, {}, "cannot create a temporary program file"};
  ::close(fd);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << program;
  }

  const std::string command = command_ + " " + shell_quote(path);
  FILE* pipe = ::popen(command.c_str(), "r");
  if (!pipe) {
    std::filesystem::remove(path);
    return {false, {}, "cannot start executor command"};
  }
  std::string output;
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof buf, pipe)) output.append(buf, got);
  const int status = ::pclose(pipe);
  std::error_code ignored;
  std::filesystem::remove(path, ignored);

  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
    return {false, {}, "executor exited with status " + std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1)};

  std::string last;
  std::size_t start = 0;
  while (start <= output.size()) {
    std::size_t end = output.find('\n', start);
    if (end == std::string::npos) end = output.size();
    auto line = trim(std::string_view(output).substr(start, end - start));
    if (!line.empty()) last = std::string(line);
    start = end + 1;
  }
  if (last.empty()) return {false, {}, "executor printed nothing"};
  return {true, last, {}};
}

}  // namespace acesearcher
