/*
 * Copyright 2026 The spinrec Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>

#include "spinrec/recommender.hpp"

namespace spinrec {

class AttributionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-item attribution scores for one (user, target item) pair. Scores are
/// raw signed attributions; consumers only use the ordering they induce.
struct ExplanationMap {
  ItemId target = 0;
  Vec scores;
  // True when the explainer only assigns scores to history items.
  bool restricted_support = false;
};

}  // namespace spinrec
