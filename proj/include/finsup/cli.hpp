#pragma once

#include <string>
#include <vector>

namespace finsup::cli {

// Exit codes: 0 success, 2 configuration problems, 3 a reported finding
// (level violation or verification failure).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace finsup::cli
