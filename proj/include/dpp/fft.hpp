#pragma once

#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace dpp {

// Planner calls in FFTW are not thread safe; execution on distinct plans is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// In-place backward (exponent +i) transform of a row-major n0 x n1 array;
// n1 = 1 gives a 1-d transform. Unnormalized, like FFTW.
inline void fft_backward_inplace(std::vector<std::complex<double>>& data, int n0, int n1) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    plan = n1 == 1 ? fftw_plan_dft_1d(n0, ptr, ptr, FFTW_BACKWARD, FFTW_ESTIMATE)
                   : fftw_plan_dft_2d(n0, n1, ptr, ptr, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
}

// Smallest n >= target whose only prime factors are 2, 3, 5, 7.
inline int fft_friendly_size(int target) {
  for (int n = std::max(target, 1);; ++n) {
    int m = n;
    for (int p : {2, 3, 5, 7})
      while (m % p == 0) m /= p;
    if (m == 1) return n;
  }
}

}  // namespace dpp
