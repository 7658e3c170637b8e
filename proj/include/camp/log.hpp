#pragma once

#include <spdlog/spdlog.h>

namespace camp {

// Library-wide logger; writes to standard error so CLI stdout stays clean.
spdlog::logger& logger();

}  // namespace camp
