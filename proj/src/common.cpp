#include "hinmega/common.hpp"

#include <cstdlib>

namespace hinmega {

int worker_count() {
  static const int cached = [] {
    int n = static_cast<int>(std::thread::hardware_concurrency());
    if (n < 1) n = 1;
    if (const char* cap = std::getenv("HINMEGA_THREADS")) {
      char* end = nullptr;
      const long parsed = std::strtol(cap, &end, 10);
      if (end != cap && parsed >= 1 && parsed < 1024) n = std::min<long>(n, parsed);
    }
    return n;
  }();
  return cached;
}

}  // namespace hinmega
