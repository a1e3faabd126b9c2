#pragma once

#include <spdlog/spdlog.h>

namespace smc {

/// Diagnostics go to standard error; the SMC_LOG environment variable
/// (error, info or debug) picks the level, default info.
void init_logging();

}  // namespace smc
