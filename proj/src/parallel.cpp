#include "cellpp/parallel.hpp"

#include <algorithm>
#include <atomic>

namespace cellpp {

namespace {
std::atomic<unsigned> g_threads{std::max(1u, std::thread::hardware_concurrency())};
}

void set_thread_count(unsigned n) { g_threads = std::max(1u, n); }

unsigned thread_count() { return g_threads.load(); }

}  // namespace cellpp
