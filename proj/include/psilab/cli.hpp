#pragma once

#include <string>
#include <vector>

namespace psilab {

/// Entry point behind the `psilab` binary; separated so tests can drive the
/// CLI in-process. Exit codes: 0 success, 2 config error, 3 infeasible/cap,
/// 4 non-convergence.
int cli_main(const std::vector<std::string>& args);

}  // namespace psilab
