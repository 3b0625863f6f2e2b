#include "lace/parallel.hpp"

#include <cstdlib>
#include <string>

namespace lace {

int default_threads() {
  if (const char* env = std::getenv("LACE_THREADS")) {
    try {
      int v = std::stoi(env);
      if (v > 0) return v;
    } catch (...) {
    }
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

int resolve_threads(int requested) { return requested > 0 ? requested : default_threads(); }

}  // namespace lace
