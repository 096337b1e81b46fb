#include "braggkit/parallel.hpp"

#include <cstdlib>
#include <string>

#include "braggkit/error.hpp"

namespace braggkit {

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("BRAGGKIT_THREADS"); env && *env) {
    try {
      const int v = std::stoi(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ValidationError(std::string("BRAGGKIT_THREADS must be a positive integer, got '") + env +
                          "'");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace braggkit
