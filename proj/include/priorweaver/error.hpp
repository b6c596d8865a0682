#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace priorweaver {

/// Domain failure carrying a machine-readable code (e.g. "unknown_variable")
/// and, for multi-step pipelines, the step that failed. what() renders as
/// "[step] message" when a step is set.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message, std::string step = {})
        : std::runtime_error(step.empty() ? message : "[" + step + "] " + message),
          code_(std::move(code)),
          message_(message),
          step_(std::move(step)) {}

    const std::string& code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }
    const std::string& step() const noexcept { return step_; }

    Error tagged(std::string step) const { return Error(code_, message_, std::move(step)); }

private:
    std::string code_;
    std::string message_;
    std::string step_;
};

}  // namespace priorweaver
