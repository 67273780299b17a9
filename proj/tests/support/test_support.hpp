#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "sdgcount/autograd.hpp"
#include "sdgcount/rng.hpp"

namespace sdgcount::test {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("sdgcount_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

/// Largest relative error between the analytic gradient of `loss` w.r.t.
/// `param` and central differences with step `h`. `floor` keeps near-zero
/// entries from dominating.
inline double max_grad_rel_error(const std::function<ag::Var()>& loss, ag::Var param, double h = 1e-4,
                                 double floor = 1e-6, int max_entries = -1) {
  param.zero_grad();
  ag::Var l = loss();
  l.backward();
  const Tensor analytic = param.grad().empty() ? Tensor(param.shape()) : param.grad();
  double worst = 0.0;
  Tensor& v = param.value_mut();
  const std::int64_t n = max_entries < 0 ? v.numel() : std::min<std::int64_t>(v.numel(), max_entries);
  for (std::int64_t i = 0; i < n; ++i) {
    const double orig = v[i];
    double plus, minus;
    {
      ag::NoGradGuard g;
      v[i] = orig + h;
      plus = loss().value()[0];
      v[i] = orig - h;
      minus = loss().value()[0];
    }
    v[i] = orig;
    const double numeric = (plus - minus) / (2 * h);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace sdgcount::test
