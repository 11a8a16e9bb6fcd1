#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "ropkit/grid.hpp"

// Thin RAII layer over FFTW's real 2-D transforms. Only plan creation and
// destruction touch FFTW's global state, so those are serialised; execution
// works on per-call buffers.

namespace ropkit::fft {

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

/// Half spectrum of a real W x H grid: H rows of (W/2 + 1) bins.
struct Spectrum {
  int width = 0;   ///< spatial width
  int height = 0;  ///< spatial height
  std::vector<std::complex<double>> bins;

  int row_bins() const noexcept { return width / 2 + 1; }
  std::complex<double>& operator()(int u, int v) noexcept { return bins[static_cast<std::size_t>(v) * row_bins() + u]; }
  const std::complex<double>& operator()(int u, int v) const noexcept {
    return bins[static_cast<std::size_t>(v) * row_bins() + u];
  }
};

class Plan {
 public:
  explicit Plan(fftw_plan p) : plan_(p) {}
  Plan(const Plan&) = delete;
  Plan& operator=(const Plan&) = delete;
  ~Plan() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan_);
  }
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

inline Spectrum forward(const Grid<double>& in) {
  Spectrum out{in.width(), in.height(), {}};
  out.bins.resize(static_cast<std::size_t>(in.height()) * out.row_bins());
  std::vector<double> buffer(in.data().begin(), in.data().end());
  fftw_plan p;
  {
    std::lock_guard lock(planner_mutex());
    p = fftw_plan_dft_r2c_2d(in.height(), in.width(), buffer.data(),
                             reinterpret_cast<fftw_complex*>(out.bins.data()), FFTW_ESTIMATE);
  }
  Plan plan(p);
  plan.execute();
  return out;
}

/// Inverse transform, normalised so that inverse(forward(g)) == g.
inline Grid<double> inverse(const Spectrum& in) {
  Grid<double> out(in.width, in.height);
  std::vector<std::complex<double>> buffer = in.bins;  // c2r destroys its input
  fftw_plan p;
  {
    std::lock_guard lock(planner_mutex());
    p = fftw_plan_dft_c2r_2d(in.height, in.width, reinterpret_cast<fftw_complex*>(buffer.data()),
                             out.data().data(), FFTW_ESTIMATE);
  }
  Plan plan(p);
  plan.execute();
  const double scale = 1.0 / (static_cast<double>(in.width) * in.height);
  for (double& v : out.data()) v *= scale;
  return out;
}

}  // namespace ropkit::fft
