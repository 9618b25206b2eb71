#pragma once

#include <string>

#include "acesearcher/pipeline.hpp"

namespace acesearcher {

/// Runs programs through an external command: the program is written to a
/// temporary file whose path is appended to `command`. The last non-empty
/// line of standard output is taken as the value of `ans`; a non-zero exit
/// status is a failure. Sandboxing is the command's responsibility.
class SubprocessExecutor final : public ProgramExecutor {
 public:
  explicit SubprocessExecutor(std::string command);
  ExecutionResult run(std::string_view program) const override;

 private:
  std::string command_;
};

}  // namespace acesearcher
