// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace guimig
{

/// Command-line entry point. Exit codes: 0 success, 1 task failure, 2 usage.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace guimig
