// Copyright (C) 2026 dynts-lab authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dynts/toymodel.hpp"

namespace dynts::detail {

// scripted.cpp
StepOutput scripted_forward_step(const Model& model, const CacheView& cache, int token,
                                 int position);

}  // namespace dynts::detail
