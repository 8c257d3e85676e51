#pragma once

#include <string>
#include <vector>

namespace cellpp::cli {

/// Exit status: 0 success, 1 usage error, 2 data error.
int run(int argc, char** argv);
int run(const std::vector<std::string>& args);

}  // namespace cellpp::cli
