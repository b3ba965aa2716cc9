// Times the serial reference against the OpenMP kernels and checks that both
// produce bitwise-identical results on the way.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "tsb/common.hpp"
#include "tsb/kernels.hpp"
#include "tsb/model.hpp"
#include "tsb/recurrent.hpp"

namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = Clock::now();
    for (int r = 0; r < reps; ++r) fn();
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count() /
           reps;
}

void report(const char* name, double serial_ms, double parallel_ms, bool identical) {
    std::printf("%-28s %10.3f ms %10.3f ms %7.2fx   %s\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms, identical ? "bitwise-equal" : "MISMATCH");
}

void bench_matmul(std::int64_t m, std::int64_t k, std::int64_t n, tsb::Rng& rng) {
    std::vector<double> a(static_cast<std::size_t>(m * k));
    std::vector<double> b(static_cast<std::size_t>(k * n));
    for (auto& v : a) v = rng.uniform(-1, 1);
    for (auto& v : b) v = rng.uniform(-1, 1);
    std::vector<double> c_serial(static_cast<std::size_t>(m * n));
    std::vector<double> c_parallel(static_cast<std::size_t>(m * n));

    const double ts = time_ms(
        [&] {
            tsb::kernels::serial::matmul(a.data(), b.data(), c_serial.data(), m, k, n,
                                         false, false, false);
        },
        3);
    const double tp = time_ms(
        [&] {
            tsb::kernels::parallel::matmul(a.data(), b.data(), c_parallel.data(), m, k,
                                           n, false, false, false);
        },
        3);
    char name[64];
    std::snprintf(name, sizeof(name), "matmul %lldx%lldx%lld",
                  static_cast<long long>(m), static_cast<long long>(k),
                  static_cast<long long>(n));
    report(name, ts, tp,
           std::memcmp(c_serial.data(), c_parallel.data(),
                       c_serial.size() * sizeof(double)) == 0);
}

void bench_softmax(std::int64_t rows, std::int64_t cols, tsb::Rng& rng) {
    std::vector<double> x(static_cast<std::size_t>(rows * cols));
    for (auto& v : x) v = rng.uniform(-5, 5);
    std::vector<double> ys(x.size()), yp(x.size());
    const double ts = time_ms(
        [&] { tsb::kernels::serial::softmax_rows(x.data(), ys.data(), rows, cols); }, 10);
    const double tp = time_ms(
        [&] { tsb::kernels::parallel::softmax_rows(x.data(), yp.data(), rows, cols); },
        10);
    char name[64];
    std::snprintf(name, sizeof(name), "softmax %lldx%lld",
                  static_cast<long long>(rows), static_cast<long long>(cols));
    report(name, ts, tp,
           std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(double)) == 0);
}

// Whole-model forward under both backends; the LSTM scan and attention mix
// large and small kernels, which is the realistic load.
void bench_encoder_layer(tsb::Rng& rng) {
    tsb::ModelConfig cfg;
    cfg.channels = 32;
    cfg.input_len = 96;
    cfg.horizon = 48;
    tsb::TsbModel model(cfg, 7);
    tsb::Tensor x = tsb::Tensor::uniform({cfg.input_len, cfg.channels}, rng, -1, 1);

    tsb::kernels::set_backend(tsb::kernels::Backend::Serial);
    std::vector<double> out_serial;
    const double ts = time_ms([&] { out_serial = model.encode(x.detach()).data(); }, 2);
    tsb::kernels::set_backend(tsb::kernels::Backend::Parallel);
    std::vector<double> out_parallel;
    const double tp = time_ms([&] { out_parallel = model.encode(x.detach()).data(); }, 2);
    report("encoder stack (N=3)", ts, tp, out_serial == out_parallel);
}

}  // namespace

int main() {
    std::printf("backend comparison (%d threads available, OpenMP %s)\n",
                tsb::kernels::max_threads(),
                tsb::kernels::openmp_enabled() ? "on" : "off");
    std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel", "speedup");

    tsb::Rng rng(42);
    bench_matmul(96, 64, 64, rng);
    bench_matmul(256, 256, 256, rng);
    bench_matmul(512, 512, 512, rng);
    bench_softmax(96, 96, rng);
    bench_softmax(4096, 128, rng);
    bench_encoder_layer(rng);

    tsb::kernels::set_backend(tsb::kernels::Backend::Parallel);
    return 0;
}
