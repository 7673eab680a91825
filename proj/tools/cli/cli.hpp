#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace usar::cli {

/// Runs one `usar` invocation. Exit codes: 0 success, 1 usage error,
/// 2 data or I/O error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// "1..5", "5,10,15" or "3".
std::vector<int> parse_int_list(const std::string& text);

}  // namespace usar::cli
