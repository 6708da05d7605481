#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace rose::log {

enum class Level { error = 0, info = 1, debug = 2 };

// ROSE_LOG_LEVEL in {error, info, debug}; unrecognized values fall back to
// info. Read once.
inline Level level() {
    static const Level lv = [] {
        const char* env = std::getenv("ROSE_LOG_LEVEL");
        if (env) {
            if (std::strcmp(env, "error") == 0) return Level::error;
            if (std::strcmp(env, "debug") == 0) return Level::debug;
        }
        return Level::info;
    }();
    return lv;
}

inline void error(const std::string& msg) {
    std::fprintf(stderr, "[error] %s\n", msg.c_str());
}

inline void info(const std::string& msg) {
    if (level() >= Level::info) std::fprintf(stderr, "[info] %s\n", msg.c_str());
}

inline void debug(const std::string& msg) {
    if (level() >= Level::debug) std::fprintf(stderr, "[debug] %s\n", msg.c_str());
}

}  // namespace rose::log
