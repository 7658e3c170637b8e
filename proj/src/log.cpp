#include "camp/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

namespace camp {

spdlog::logger& logger() {
    static std::shared_ptr<spdlog::logger> instance = [] {
        auto existing = spdlog::get("camp");
        if (existing) return existing;
        auto l = spdlog::stderr_color_mt("camp");
        l->set_pattern("[%l] %v");
        return l;
    }();
    return *instance;
}

}  // namespace camp
