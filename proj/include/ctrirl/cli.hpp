#pragma once

#include <iosfwd>

namespace ctrirl {

/// Entry point of the `ctrirl` command. Returns 0 on success, 1 on a usage
/// error and 2 on a runtime failure.
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace ctrirl
