#include <doctest.h>

#include <atomic>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "executor.hpp"

using namespace fcirk;

TEST_CASE("every index runs exactly once") {
  for (int threads : {1, 2, 4, 7}) {
    CAPTURE(threads);
    Executor exec(threads);
    CHECK(exec.threads() == threads);
    for (std::size_t n : {0u, 1u, 3u, 100u, 1000u}) {
      std::vector<std::atomic<int>> hits(n);
      exec.parallel_for(n, [&](std::size_t i) { hits[i].fetch_add(1); });
      for (std::size_t i = 0; i < n; ++i) CHECK(hits[i].load() == 1);
    }
  }
}

TEST_CASE("a non-positive thread count picks the hardware width") {
  Executor exec(0);
  CHECK(exec.threads() >= 1);
}

TEST_CASE("lowest failing index wins regardless of schedule") {
  Executor exec(4);
  for (int trial = 0; trial < 20; ++trial) {
    try {
      exec.parallel_for(64, [](std::size_t i) {
        if (i % 10 == 7) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "7");
    }
  }
  // The pool is still usable afterwards.
  std::atomic<int> count{0};
  exec.parallel_for(10, [&](std::size_t) { ++count; });
  CHECK(count.load() == 10);
}

TEST_CASE("nested loops run serially inside workers") {
  Executor exec(3);
  std::vector<long> sums(8, 0);
  exec.parallel_for(8, [&](std::size_t i) {
    std::vector<long> inner(50, 0);
    exec.parallel_for(50, [&](std::size_t j) { inner[j] = static_cast<long>(i * j); });
    sums[i] = std::accumulate(inner.begin(), inner.end(), 0L);
  });
  for (std::size_t i = 0; i < 8; ++i) CHECK(sums[i] == static_cast<long>(i) * 1225);
}

TEST_CASE("null executor runs serially in index order") {
  std::vector<std::size_t> order;
  parallel_for(nullptr, 5, [&](std::size_t i) { order.push_back(i); });
  CHECK(order == std::vector<std::size_t>{0, 1, 2, 3, 4});
}
