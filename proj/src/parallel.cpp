#include "xxz/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "xxz/error.hpp"

namespace xxz {

unsigned default_workers() {
  if (const char* env = std::getenv("XXZ_WORKERS"); env != nullptr && *env != '\0') {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 4096) {
      throw Error(ErrorCode::ConfigError, std::string("XXZ_WORKERS must be a positive integer, got '") + env + "'");
    }
    return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  const std::size_t threads = std::min<std::size_t>(std::max(1u, workers), count);
  std::vector<std::exception_ptr> errors(count);
  if (threads == 1) {
    for (std::size_t k = 0; k < count; ++k) {
      try {
        fn(k);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    auto body = [&] {
      for (std::size_t k = next.fetch_add(1); k < count; k = next.fetch_add(1)) {
        try {
          fn(k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads - 1);
    for (std::size_t w = 1; w < threads; ++w) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace xxz
