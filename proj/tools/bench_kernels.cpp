// Timing comparison between the serial reference kernels and the OpenMP
// versions on training-shaped workloads.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "duality/kernels.hpp"
#include "duality/rng.hpp"

using namespace duality;

namespace {

double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

double time_loop(const std::function<void()>& fn, int iters) {
  fn();  // warmup
  const double t0 = now_s();
  for (int i = 0; i < iters; ++i) fn();
  return (now_s() - t0) / iters;
}

std::vector<double> randu(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1, 1);
  return v;
}

struct Case {
  std::string name;
  std::function<void()> serial;
  std::function<void()> openmp;
  double flops;
};

}  // namespace

int main(int argc, char** argv) {
  int iters = 20;
  if (argc > 1) iters = std::atoi(argv[1]);
  Rng rng(1234);

  // Shapes mirror the training hot path: batch 64, hidden 200, embedding 50,
  // a vocabulary-sized projection, and the label-space layers.
  struct Shape {
    int m, k, n;
  };
  const std::vector<Shape> shapes = {
      {64, 200, 200}, {64, 50, 600}, {64, 200, 2000}, {64, 79, 200}};

  std::printf("%-22s %12s %12s %9s %12s\n", "kernel", "serial_ms", "openmp_ms",
              "speedup", "gflops(omp)");
  for (const auto& s : shapes) {
    auto A = randu(static_cast<std::size_t>(s.m) * s.k, rng);
    auto Bt = randu(static_cast<std::size_t>(s.n) * s.k, rng);
    auto Bn = randu(static_cast<std::size_t>(s.k) * s.n, rng);
    std::vector<double> C(static_cast<std::size_t>(s.m) * s.n, 0.0);
    const double flops = 2.0 * s.m * s.k * s.n;

    std::vector<Case> cases;
    cases.push_back({"matmul_nt " + std::to_string(s.m) + "x" +
                         std::to_string(s.k) + "x" + std::to_string(s.n),
                     [&, A, Bt]() mutable {
                       kernels::serial::matmul_nt(A.data(), Bt.data(), C.data(),
                                                  s.m, s.k, s.n, false);
                     },
                     [&, A, Bt]() mutable {
                       kernels::par::matmul_nt(A.data(), Bt.data(), C.data(),
                                               s.m, s.k, s.n, false);
                     },
                     flops});
    cases.push_back({"matmul_nn " + std::to_string(s.m) + "x" +
                         std::to_string(s.k) + "x" + std::to_string(s.n),
                     [&, A, Bn]() mutable {
                       kernels::serial::matmul_nn(A.data(), Bn.data(), C.data(),
                                                  s.m, s.k, s.n, false);
                     },
                     [&, A, Bn]() mutable {
                       kernels::par::matmul_nn(A.data(), Bn.data(), C.data(),
                                               s.m, s.k, s.n, false);
                     },
                     flops});
    for (auto& c : cases) {
      const double ts = time_loop(c.serial, iters);
      const double tp = time_loop(c.openmp, iters);
      std::printf("%-22s %12.3f %12.3f %8.2fx %12.2f\n", c.name.c_str(),
                  ts * 1e3, tp * 1e3, ts / tp, c.flops / tp / 1e9);
    }
  }

  {
    const int rows = 64 * 30, cols = 2000;
    auto X = randu(static_cast<std::size_t>(rows) * cols, rng);
    std::vector<double> Y(X.size());
    const double t_s = time_loop(
        [&] { kernels::serial::log_softmax_rows(X.data(), Y.data(), rows, cols); },
        iters);
    const double t_p = time_loop(
        [&] { kernels::par::log_softmax_rows(X.data(), Y.data(), rows, cols); },
        iters);
    std::printf("%-22s %12.3f %12.3f %8.2fx\n", "log_softmax 1920x2000",
                t_s * 1e3, t_p * 1e3, t_s / t_p);
  }

  std::printf("\nopenmp %s, max threads %d\n",
              kernels::openmp_available() ? "enabled" : "unavailable",
              kernels::max_threads());
  return 0;
}
