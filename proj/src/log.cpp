#include "smc/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>

#include <cstdlib>
#include <string_view>

namespace smc {

void init_logging() {
  auto logger = spdlog::stderr_logger_mt("smc");
  logger->set_pattern("[%H:%M:%S.%e] [%l] %v");
  spdlog::set_default_logger(logger);

  spdlog::level::level_enum level = spdlog::level::info;
  if (const char* env = std::getenv("SMC_LOG")) {
    const std::string_view v(env);
    if (v == "error") {
      level = spdlog::level::err;
    } else if (v == "debug") {
      level = spdlog::level::debug;
    } else if (v != "info") {
      spdlog::warn("ignoring unknown SMC_LOG value '{}'", v);
    }
  }
  spdlog::set_level(level);
}

}  // namespace smc
