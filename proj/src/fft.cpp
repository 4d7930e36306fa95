#include "singular_drift/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <stdexcept>
#include <tuple>
#include <vector>

namespace singular_drift::fft {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan on new
// arrays is. Plans are created once per shape and kept for the process.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int dim, int modes, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(dim, modes, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;

    std::size_t total = 1;
    std::vector<int> shape(static_cast<std::size_t>(dim), modes);
    for (int n : shape) total *= static_cast<std::size_t>(n);
    auto* scratch = fftw_alloc_complex(total);
    fftw_plan plan = fftw_plan_dft(dim, shape.data(), scratch, scratch, sign,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(scratch);
    if (plan == nullptr) throw std::runtime_error("fftw: planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<int, int, int>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache instance;
  return instance;
}

void execute(int dim, int modes, int sign, std::span<const Complex> in, std::span<Complex> out) {
  if (in.size() != out.size()) throw std::invalid_argument("fft: size mismatch");
  fftw_plan plan = cache().get(dim, modes, sign);
  // fftw_execute_dft takes a non-const input pointer but does not write to it
  // for out-of-place plans; the plan here is in-place, so copy first when the
  // buffers differ.
  if (in.data() != out.data()) std::copy(in.begin(), in.end(), out.begin());
  auto* buffer = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plan, buffer, buffer);
}

}  // namespace

void forward(int dim, int modes, std::span<const Complex> in, std::span<Complex> out) {
  execute(dim, modes, FFTW_FORWARD, in, out);
}

void backward(int dim, int modes, std::span<const Complex> in, std::span<Complex> out) {
  execute(dim, modes, FFTW_BACKWARD, in, out);
}

}  // namespace singular_drift::fft
