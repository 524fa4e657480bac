#include "qhealth/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>

namespace qhealth {

unsigned thread_cap() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("QHEALTH_THREADS")) {
        try {
            const long v = std::stol(env);
            if (v >= 1) return static_cast<unsigned>(std::min<long>(v, 256));
        } catch (const std::exception&) {
        }
    }
    return hw;
}

}  // namespace qhealth
