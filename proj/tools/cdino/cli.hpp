#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "countingdino/geometry.hpp"

namespace cdino::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `cdino` invocation. `args` excludes the program name.
/// Returns 0 on success, 1 when work failed (including per-image eval
/// failures) and 2 on usage errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Parses "x1,y1,x2,y2;x1,y1,x2,y2;...". Throws ArgumentError.
std::vector<PixelBox> parse_inline_boxes(std::string_view text);

/// Reads `[[x1, y1, x2, y2], ...]` or `{"boxes": [...]}`.
std::vector<PixelBox> read_boxes_file(const std::string& path);

}  // namespace cdino::cli
