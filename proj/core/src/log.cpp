// SPDX-License-Identifier: Apache-2.0
#include "lesiongraph/log.hpp"

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <mutex>
#include <string>

namespace lesiongraph {

void init_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_logger_mt("lesiongraph");
    logger->set_pattern("[%H:%M:%S %^%l%$] %v");
    spdlog::set_default_logger(logger);
  });
  const char* env = std::getenv("LESIONGRAPH_LOG");
  auto level = spdlog::level::info;
  if (env != nullptr && *env != '\0') {
    level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; keep info instead so typos stay visible.
    if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::info;
  }
  spdlog::set_level(level);
}

}  // namespace lesiongraph
