#pragma once

#include <ostream>

namespace pmc {

/// Runs one `pmc` subcommand. Returns 0 on success, 1 on input errors (usage printed for
/// unknown flags) and 2 when the solver stalls; partial solver outputs are still written.
int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pmc
