#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ifr {

/// Exit codes: 0 success, 2 validation or usage error, 3 numeric failure.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ifr
