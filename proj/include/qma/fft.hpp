#pragma once

#include <complex>
#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace qma::detail {

using cplx = std::complex<double>;

/// Process-wide cache of FFTW plans keyed by (dims, sign).
///
/// Plans are created with FFTW_ESTIMATE so the chosen algorithm depends
/// only on the transform shape; together with fixed summation orders in
/// the field kernels this keeps whole runs bitwise reproducible.  Plans
/// are created with FFTW_UNALIGNED and executed through the new-array
/// interface, so cached plans work on any caller buffer.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  void execute(const std::vector<int>& dims, cplx* in, cplx* out, int sign) {
    fftw_plan plan = nullptr;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      auto key = std::make_pair(dims, sign);
      auto it = plans_.find(key);
      if (it == plans_.end()) {
        plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(),
                             reinterpret_cast<fftw_complex*>(in),
                             reinterpret_cast<fftw_complex*>(out), sign,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
        plans_.emplace(key, plan);
      } else {
        plan = it->second;
      }
    }
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in),
                     reinterpret_cast<fftw_complex*>(out));
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::vector<int>, int>, fftw_plan> plans_;
};

/// Unnormalized forward DFT, in place allowed (in == out).
inline void dft_forward(const std::vector<int>& dims, cplx* in, cplx* out) {
  PlanCache::instance().execute(dims, in, out, FFTW_FORWARD);
}

/// Unnormalized inverse DFT (caller divides by the point count).
inline void dft_backward(const std::vector<int>& dims, cplx* in, cplx* out) {
  PlanCache::instance().execute(dims, in, out, FFTW_BACKWARD);
}

} // namespace qma::detail
