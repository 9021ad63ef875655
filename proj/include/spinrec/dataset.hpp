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

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace spinrec {

using ItemId = std::uint32_t;
using UserId = std::uint32_t;

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split : std::uint8_t { kTrain = 0, kValidation = 1, kTest = 2 };

const char* to_string(Split s);

/// Sparse binary user vector: the set of items with value 1.
class UserVector {
 public:
  UserVector() = default;
  /// Sorts and validates; throws DataError on duplicates or out-of-range ids.
  UserVector(std::vector<ItemId> items, std::size_t dimension);

  static UserVector empty(std::size_t dimension) { return UserVector({}, dimension); }

  std::span<const ItemId> items() const { return items_; }
  std::size_t size() const { return items_.size(); }
  std::size_t dimension() const { return dimension_; }
  bool empty() const { return items_.empty(); }
  bool contains(ItemId item) const;

  Eigen::VectorXd dense() const;

  bool operator==(const UserVector&) const = default;

 private:
  std::vector<ItemId> items_;
  std::size_t dimension_ = 0;
};

/// Immutable CSR-style binary interaction matrix with per-user split labels.
class InteractionDataset {
 public:
  InteractionDataset() = default;
  /// rows[u] holds user u's item ids in any order; duplicates are merged.
  InteractionDataset(std::size_t num_items, std::vector<std::vector<ItemId>> rows);

  std::size_t num_users() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_interactions() const { return items_.size(); }

  std::span<const ItemId> items_of(UserId u) const;
  UserVector user_vector(UserId u) const;

  Split split_of(UserId u) const { return splits_.at(u); }
  std::span<const Split> splits() const { return splits_; }
  std::vector<UserId> users_in(Split s) const;

  // Original external ids, kept for reporting. Empty for synthetic data.
  std::span<const std::int64_t> external_user_ids() const { return external_users_; }
  std::span<const std::int64_t> external_item_ids() const { return external_items_; }

  std::span<const std::uint64_t> row_offsets() const { return offsets_; }
  std::span<const ItemId> item_indices() const { return items_; }

  InteractionDataset with_splits(std::vector<Split> splits) const;
  InteractionDataset with_external_ids(std::vector<std::int64_t> users,
                                       std::vector<std::int64_t> items) const;

  bool operator==(const InteractionDataset&) const = default;

 private:
  std::size_t num_items_ = 0;
  std::vector<std::uint64_t> offsets_;
  std::vector<ItemId> items_;
  std::vector<Split> splits_;
  std::vector<std::int64_t> external_users_;
  std::vector<std::int64_t> external_items_;
};

struct LoadOptions {
  // Ratings strictly below this value are dropped. 0 keeps every rated pair.
  double min_rating = 0.0;
};

/// Parses `UserID::MovieID::Rating::Timestamp` lines; ids are remapped to dense
/// 0-based indices in order of first appearance of the sorted external ids.
InteractionDataset load_ml1m(const std::filesystem::path& path, const LoadOptions& opts = {});

/// Parses `user<TAB>item` lines (extra columns ignored).
InteractionDataset load_tsv(const std::filesystem::path& path);

/// Binary snapshot: row offsets, item indices, split labels, external ids.
void save_snapshot(const InteractionDataset& ds, const std::filesystem::path& path);
InteractionDataset load_snapshot(const std::filesystem::path& path);

/// Deterministic shuffle-then-assign split. Counts are round(frac * users).
InteractionDataset split_users(const InteractionDataset& ds, double test_frac, double valid_frac,
                               std::uint64_t seed);

/// Draws kappa train-user histories. Sampling is without replacement while
/// kappa <= #train users and the draw order is prefix-stable: the first k
/// vectors for kappa = K equal the full result for kappa = k under one seed.
/// With include_zero, the all-zero vector is appended as one extra candidate.
std::vector<UserVector> sample_baselines(const InteractionDataset& ds, std::size_t kappa,
                                         bool include_zero, std::uint64_t seed);

struct SynthConfig {
  std::size_t num_users = 200;
  std::size_t num_items = 100;
  std::size_t num_clusters = 4;
  double within_cluster_prob = 0.6;
  double noise_prob = 0.02;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Item range [first, last) of cluster c; items are split into contiguous blocks.
std::pair<ItemId, ItemId> cluster_block(const SynthConfig& cfg, std::size_t cluster);

/// Users are assigned to clusters round-robin (user u -> u % num_clusters).
InteractionDataset generate_synthetic(const SynthConfig& cfg);

}  // namespace spinrec
