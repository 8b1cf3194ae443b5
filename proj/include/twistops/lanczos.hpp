// Copyright 2026 The twistops Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "twistops/tensor.hpp"

namespace twistops {

/// Raised when a supposedly Hermitian operator produces a complex Rayleigh
/// quotient during Krylov iteration.
class NonHermitianError : public std::runtime_error {
 public:
  explicit NonHermitianError(const std::string& what) : std::runtime_error(what) {}
};

struct LanczosOptions {
  int krylov_dim = 48;
  int max_restarts = 200;
  /// Converged when ||H v - theta v|| <= tolerance * max(1, |theta|).
  double tolerance = 1e-13;
  double hermiticity_tolerance = 1e-8;
};

struct LanczosResult {
  double eigenvalue = 0.0;
  VectorXc eigenvector;
  double residual = 0.0;
  int matvecs = 0;
  bool converged = false;
};

using LinearOperator = std::function<void(const VectorXc& in, VectorXc& out)>;

/// Lowest eigenpair of a Hermitian operator by thick-restart-free Lanczos with
/// full reorthogonalization, restarted from the current Ritz vector.
LanczosResult lanczos_lowest(const LinearOperator& apply, VectorXc start, const LanczosOptions& options = {});

}  // namespace twistops
