// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "groklab/model.hpp"
#include "groklab/tape.hpp"

namespace groklab {

/// A deterministic scalar-valued function built from tape ops applied to a
/// single leaf.
using ScalarFn = std::function<Var(Tape&, Var)>;

/// Central-difference gradient check: compares (f(x + h e_i) - f(x - h e_i))
/// / 2h against the tape gradient, coordinate by coordinate, and returns the
/// maximum relative error max|a - n| / max(|a|, |n|, 1e-8). h must lie in
/// (0, 1e-2].
double finite_diff_check(const ScalarFn& f, const Tensor& x, double h);

/// finite_diff_check of the cross-entropy loss, run once per parameter
/// tensor; returns the worst relative error. Intended for toy model sizes.
double model_gradient_check(const ModelConfig& config, const ModelParams& params,
                            const Batch& batch, double h);

}  // namespace groklab
