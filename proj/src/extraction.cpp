#include "acesearcher/extraction.hpp"

#include "acesearcher/common.hpp"

namespace acesearcher {

namespace {
constexpr std::string_view kOpen = "<answer>";
constexpr std::string_view kClose = "</answer>";
constexpr std::string_view kBoxed = "\\boxed{";

bool is_ident_char(char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}
}  // namespace

std::vector<TextRegion> find_answer_regions(std::string_view text) {
  std::vector<TextRegion> regions;
  std::size_t open = text.find(kOpen);
  while (open != std::string_view::npos) {
    const std::size_t content = open + kOpen.size();
    const std::size_t close = text.find(kClose, content);
    if (close == std::string_view::npos) break;
    const std::size_t reopen = text.find(kOpen, content);
    if (reopen != std::string_view::npos && reopen < close) {
      open = reopen;
      continue;
    }
    TextRegion region{content, close};
    if (!trim(region.in(text)).empty()) regions.push_back(region);
    open = text.find(kOpen, close + kClose.size());
  }
  return regions;
}

std::vector<TextRegion> find_boxed_regions(std::string_view text) {
  std::vector<TextRegion> regions;
  for (std::size_t start = text.find(kBoxed); start != std::string_view::npos;
       start = text.find(kBoxed, start + 1)) {
    const std::size_t content = start + kBoxed.size();
    int depth = 1;
    std::size_t i = content;
    for (; i < text.size(); ++i) {
      if (text[i] == '{') {
        ++depth;
      } else if (text[i] == '}') {
        if (--depth == 0) break;
      }
    }
    if (depth == 0) regions.push_back({content, i});
  }
  return regions;
}

bool assigns_answer_variable(std::string_view program) {
  std::size_t line_start = 0;
  while (line_start <= program.size()) {
    std::size_t line_end = program.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = program.size();
    std::string_view line = trim(program.substr(line_start, line_end - line_start));
    if (line.size() > 3 && line.substr(0, 3) == "ans" && !is_ident_char(line[3])) {
      std::string_view rest = trim(line.substr(3));
      if (rest.size() >= 2 && rest[0] == '=' && rest[1] != '=') return true;
      if (rest.size() == 1 && rest[0] == '=') return true;
    }
    line_start = line_end + 1;
  }
  return false;
}

std::string extract_program(std::string_view raw) {
  constexpr std::string_view fence = "```";
  std::size_t last_open = std::string_view::npos;
  std::size_t last_close = std::string_view::npos;
  for (std::size_t open = raw.find(fence); open != std::string_view::npos;) {
    std::size_t close = raw.find(fence, open + fence.size());
    if (close == std::string_view::npos) break;
    last_open = open;
    last_close = close;
    open = raw.find(fence, close + fence.size());
  }
  if (last_open == std::string_view::npos) return trim_copy(raw);
  std::string_view body = raw.substr(last_open + fence.size(), last_close - last_open - fence.size());
  // Drop the info string ("python") on the fence line.
  if (std::size_t nl = body.find('\n'); nl != std::string_view::npos) {
    std::string_view info = trim(body.substr(0, nl));
    bool is_info = !info.empty();
    for (char c : info) is_info = is_info && is_ident_char(c);
    if (is_info || info.empty()) body = body.substr(nl + 1);
  }
  return trim_copy(body);
}

std::string extract_final_answer(std::string_view raw, TaskKind task, ReasoningStyle style) {
  if (task == TaskKind::document_math) {
    if (style == ReasoningStyle::program) {
      std::string program = extract_program(raw);
      if (program.empty()) throw Error(ErrorCode::parse, "response holds no program");
      return program;
    }
    auto boxed = find_boxed_regions(raw);
    if (boxed.empty()) throw Error(ErrorCode::parse, "response holds no \\boxed{} answer");
    return trim_copy(boxed.back().in(raw));
  }
  auto regions = find_answer_regions(raw);
  if (regions.empty()) throw Error(ErrorCode::parse, "response holds no <answer> region");
  return trim_copy(regions.back().in(raw));
}

}  // namespace acesearcher
