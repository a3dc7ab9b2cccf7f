#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace epq::cli {

/// Runs one command line (without the program name).  Returns the process
/// exit code; CSV and summaries go to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker count for per-image loops: EPQ_THREADS if set and positive, else
/// the hardware concurrency.
std::size_t thread_cap();

/// Inclusive ranges and single values, e.g. "1..8,12,16".
std::vector<std::size_t> parse_n_list(const std::string& text);

}  // namespace epq::cli
