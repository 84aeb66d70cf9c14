/*
 * Copyright 2026 The fedcs Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Orthonormal DCT-II / DCT-III on top of FFTW's REDFT10 / REDFT01.

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "fedcs/cs_codec.h"
#include "fedcs/error.h"

namespace fedcs::cs {
namespace {

// The FFTW planner is not thread-safe; execution with new arrays is. Plans
// are created once per (length, kind) under the lock and never destroyed.
class PlanCache {
 public:
  static PlanCache& Get() {
    static PlanCache* cache = new PlanCache();
    return *cache;
  }

  fftw_plan Plan(size_t len, fftw_r2r_kind kind) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(len, static_cast<int>(kind));
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    double* in = fftw_alloc_real(len);
    double* out = fftw_alloc_real(len);
    fftw_plan p = fftw_plan_r2r_1d(static_cast<int>(len), in, out, kind,
                                   FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (p == nullptr) throw NumericFailure("FFTW failed to create a DCT plan");
    plans_.emplace(key, p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<size_t, int>, fftw_plan> plans_;
};

void CheckLengths(std::span<const double> in, std::span<double> out,
                  const char* what) {
  if (in.empty()) throw InvalidArgument(std::string(what) + ": empty input");
  if (in.size() != out.size()) {
    throw InvalidArgument(std::string(what) + ": output length mismatch");
  }
}

}  // namespace

void DctForwardInto(std::span<const double> x, std::span<double> out) {
  CheckLengths(x, out, "DctForward");
  const size_t len = x.size();
  // FFTW takes a non-const input pointer.
  std::vector<double> in(x.begin(), x.end());
  fftw_execute_r2r(PlanCache::Get().Plan(len, FFTW_REDFT10), in.data(),
                   out.data());
  // REDFT10 yields 2 * sum x_j cos(pi (j + 1/2) k / L).
  const double s0 = 1.0 / (2.0 * std::sqrt(static_cast<double>(len)));
  const double sk = 1.0 / std::sqrt(2.0 * static_cast<double>(len));
  out[0] *= s0;
  for (size_t k = 1; k < len; ++k) out[k] *= sk;
}

void DctInverseInto(std::span<const double> c, std::span<double> out) {
  CheckLengths(c, out, "DctInverse");
  const size_t len = c.size();
  std::vector<double> in(c.begin(), c.end());
  in[0] /= std::sqrt(static_cast<double>(len));
  const double sk = 1.0 / std::sqrt(2.0 * static_cast<double>(len));
  for (size_t k = 1; k < len; ++k) in[k] *= sk;
  // REDFT01 yields X_0 + 2 * sum_{k>0} X_k cos(pi k (j + 1/2) / L).
  fftw_execute_r2r(PlanCache::Get().Plan(len, FFTW_REDFT01), in.data(),
                   out.data());
}

std::vector<double> DctForward(std::span<const double> x) {
  if (x.empty()) throw InvalidArgument("DctForward: empty input");
  std::vector<double> out(x.size());
  DctForwardInto(x, out);
  return out;
}

std::vector<double> DctInverse(std::span<const double> c) {
  if (c.empty()) throw InvalidArgument("DctInverse: empty input");
  std::vector<double> out(c.size());
  DctInverseInto(c, out);
  return out;
}

}  // namespace fedcs::cs
