#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "acesearcher/domain.hpp"

namespace acesearcher {

/// Half-open byte range of a region's content inside the scanned text.
struct TextRegion {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::string_view in(std::string_view text) const { return text.substr(begin, end - begin); }
};

/// Well-formed `<answer>...</answer>` regions in order of appearance. An
/// opening tag followed by another opening tag before any close is abandoned
/// in favor of the later one. Regions whose content is blank are skipped.
std::vector<TextRegion> find_answer_regions(std::string_view text);

/// `\boxed{...}` regions with balanced braces, ordered by start position.
/// Nested boxes yield both the outer and the inner region.
std::vector<TextRegion> find_boxed_regions(std::string_view text);

/// True when some line of `program` assigns to the variable `ans`.
bool assigns_answer_variable(std::string_view program);

/// Strips a fenced code block (```python ... ```) if one is present; the last
/// fenced block wins. Otherwise returns the trimmed text.
std::string extract_program(std::string_view raw);

/// qa / fact: content of the last well-formed answer region, trimmed.
/// document_math + chain: content of the last balanced `\boxed{}`.
/// document_math + program: the program text.
/// Throws Error(parse) when no region exists.
std::string extract_final_answer(std::string_view raw, TaskKind task,
                                 ReasoningStyle style = ReasoningStyle::chain);

}  // namespace acesearcher
