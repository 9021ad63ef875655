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

#include "spinrec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "spinrec/random.hpp"

namespace spinrec {

const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kValidation:
      return "validation";
    case Split::kTest:
      return "test";
  }
  return "?";
}

UserVector::UserVector(std::vector<ItemId> items, std::size_t dimension)
    : items_(std::move(items)), dimension_(dimension) {
  std::sort(items_.begin(), items_.end());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i] >= dimension_) {
      throw DataError("item index " + std::to_string(items_[i]) + " out of range for dimension " +
                      std::to_string(dimension_));
    }
    if (i > 0 && items_[i] == items_[i - 1]) {
      throw DataError("duplicate item index " + std::to_string(items_[i]));
    }
  }
}

bool UserVector::contains(ItemId item) const {
  return std::binary_search(items_.begin(), items_.end(), item);
}

Eigen::VectorXd UserVector::dense() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension_));
  for (ItemId i : items_) v[i] = 1.0;
  return v;
}

InteractionDataset::InteractionDataset(std::size_t num_items, std::vector<std::vector<ItemId>> rows)
    : num_items_(num_items) {
  offsets_.reserve(rows.size() + 1);
  offsets_.push_back(0);
  for (auto& row : rows) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    if (!row.empty() && row.back() >= num_items) {
      throw DataError("item index " + std::to_string(row.back()) + " out of range");
    }
    items_.insert(items_.end(), row.begin(), row.end());
    offsets_.push_back(items_.size());
  }
  splits_.assign(rows.size(), Split::kTrain);
}

std::span<const ItemId> InteractionDataset::items_of(UserId u) const {
  if (u >= num_users()) throw DataError("user index " + std::to_string(u) + " out of range");
  return {items_.data() + offsets_[u], items_.data() + offsets_[u + 1]};
}

UserVector InteractionDataset::user_vector(UserId u) const {
  auto row = items_of(u);
  return UserVector({row.begin(), row.end()}, num_items_);
}

std::vector<UserId> InteractionDataset::users_in(Split s) const {
  std::vector<UserId> out;
  for (UserId u = 0; u < splits_.size(); ++u) {
    if (splits_[u] == s) out.push_back(u);
  }
  return out;
}

InteractionDataset InteractionDataset::with_splits(std::vector<Split> splits) const {
  if (splits.size() != num_users()) throw DataError("split vector length != number of users");
  InteractionDataset out = *this;
  out.splits_ = std::move(splits);
  return out;
}

InteractionDataset InteractionDataset::with_external_ids(std::vector<std::int64_t> users,
                                                         std::vector<std::int64_t> items) const {
  if (users.size() != num_users() || items.size() != num_items_) {
    throw DataError("external id table size mismatch");
  }
  InteractionDataset out = *this;
  out.external_users_ = std::move(users);
  out.external_items_ = std::move(items);
  return out;
}

namespace {

struct RawPair {
  std::int64_t user;
  std::int64_t item;
};

template <typename T>
bool parse_number(std::string_view s, T& out) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::vector<std::string_view> split_on(std::string_view line, std::string_view sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + sep.size();
  }
}

InteractionDataset build_from_pairs(const std::vector<RawPair>& pairs) {
  if (pairs.empty()) throw DataError("no interactions");
  std::vector<std::int64_t> users, items;
  users.reserve(pairs.size());
  items.reserve(pairs.size());
  for (const auto& p : pairs) {
    users.push_back(p.user);
    items.push_back(p.item);
  }
  auto dedup = [](std::vector<std::int64_t>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  dedup(users);
  dedup(items);
  auto index_of = [](const std::vector<std::int64_t>& table, std::int64_t id) {
    return static_cast<std::uint32_t>(std::lower_bound(table.begin(), table.end(), id) - table.begin());
  };
  std::vector<std::vector<ItemId>> rows(users.size());
  for (const auto& p : pairs) rows[index_of(users, p.user)].push_back(index_of(items, p.item));
  const std::size_t num_items = items.size();
  return InteractionDataset(num_items, std::move(rows)).with_external_ids(std::move(users), std::move(items));
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

}  // namespace

InteractionDataset load_ml1m(const std::filesystem::path& path, const LoadOptions& opts) {
  auto in = open_or_throw(path);
  std::vector<RawPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_on(line, "::");
    RawPair p{};
    double rating = 0;
    std::int64_t timestamp = 0;
    if (fields.size() != 4 || !parse_number(fields[0], p.user) || !parse_number(fields[1], p.item) ||
        !parse_number(fields[2], rating) || !parse_number(fields[3], timestamp)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed line, expected UserID::MovieID::Rating::Timestamp");
    }
    if (rating >= opts.min_rating) pairs.push_back(p);
  }
  return build_from_pairs(pairs);
}

InteractionDataset load_tsv(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::vector<RawPair> pairs;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto fields = split_on(line, "\t");
    RawPair p{};
    if (fields.size() < 2 || !parse_number(fields[0], p.user) || !parse_number(fields[1], p.item)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) +
                      ": malformed line, expected user<TAB>item");
    }
    pairs.push_back(p);
  }
  return build_from_pairs(pairs);
}

namespace {

constexpr char kSnapshotMagic[8] = {'S', 'P', 'R', 'D', 'S', 'E', 'T', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void write_array(std::ostream& out, std::span<const T> v) {
  write_pod<std::uint64_t>(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated snapshot");
  return v;
}

template <typename T>
std::vector<T> read_array(std::istream& in) {
  const auto n = read_pod<std::uint64_t>(in);
  if (n > (1ULL << 40)) throw DataError("corrupt snapshot array length");
  std::vector<T> v(n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!in) throw DataError("truncated snapshot");
  return v;
}

}  // namespace

void save_snapshot(const InteractionDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kSnapshotMagic, sizeof(kSnapshotMagic));
  write_pod<std::uint64_t>(out, ds.num_items());
  write_array(out, ds.row_offsets());
  write_array(out, ds.item_indices());
  std::vector<std::uint8_t> splits;
  for (Split s : ds.splits()) splits.push_back(static_cast<std::uint8_t>(s));
  write_array<std::uint8_t>(out, splits);
  write_array(out, ds.external_user_ids());
  write_array(out, ds.external_item_ids());
  if (!out) throw DataError("write failed for " + path.string());
}

InteractionDataset load_snapshot(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  char magic[sizeof(kSnapshotMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kSnapshotMagic, sizeof(magic)) != 0) {
    throw DataError(path.string() + ": not a dataset snapshot");
  }
  const auto num_items = read_pod<std::uint64_t>(in);
  const auto offsets = read_array<std::uint64_t>(in);
  const auto items = read_array<ItemId>(in);
  const auto split_bytes = read_array<std::uint8_t>(in);
  auto ext_users = read_array<std::int64_t>(in);
  auto ext_items = read_array<std::int64_t>(in);
  if (offsets.empty() || offsets.back() != items.size() || split_bytes.size() + 1 != offsets.size()) {
    throw DataError(path.string() + ": inconsistent snapshot");
  }
  std::vector<std::vector<ItemId>> rows(offsets.size() - 1);
  for (std::size_t u = 0; u + 1 < offsets.size(); ++u) {
    if (offsets[u] > offsets[u + 1]) throw DataError(path.string() + ": inconsistent snapshot");
    rows[u].assign(items.begin() + static_cast<std::ptrdiff_t>(offsets[u]),
                   items.begin() + static_cast<std::ptrdiff_t>(offsets[u + 1]));
  }
  std::vector<Split> splits;
  for (auto b : split_bytes) {
    if (b > 2) throw DataError(path.string() + ": bad split label");
    splits.push_back(static_cast<Split>(b));
  }
  InteractionDataset ds = InteractionDataset(num_items, std::move(rows)).with_splits(std::move(splits));
  if (!ext_users.empty()) ds = ds.with_external_ids(std::move(ext_users), std::move(ext_items));
  return ds;
}

InteractionDataset split_users(const InteractionDataset& ds, double test_frac, double valid_frac,
                               std::uint64_t seed) {
  if (!(test_frac >= 0.0 && valid_frac >= 0.0 && test_frac + valid_frac < 1.0)) {
    throw DataError("split fractions must be non-negative and sum to less than 1");
  }
  const std::size_t n = ds.num_users();
  std::vector<UserId> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);

  const auto n_test = static_cast<std::size_t>(std::llround(test_frac * static_cast<double>(n)));
  const auto n_valid = std::min(n - n_test, static_cast<std::size_t>(std::llround(valid_frac * static_cast<double>(n))));
  std::vector<Split> splits(n, Split::kTrain);
  for (std::size_t i = 0; i < n_test; ++i) splits[order[i]] = Split::kTest;
  for (std::size_t i = n_test; i < n_test + n_valid; ++i) splits[order[i]] = Split::kValidation;
  return ds.with_splits(std::move(splits));
}

std::vector<UserVector> sample_baselines(const InteractionDataset& ds, std::size_t kappa,
                                         bool include_zero, std::uint64_t seed) {
  if (kappa < 1) throw DataError("kappa must be >= 1");
  std::vector<UserId> pool = ds.users_in(Split::kTrain);
  if (pool.empty()) throw DataError("no train users to sample baselines from");
  Rng rng(seed);
  std::vector<UserVector> out;
  out.reserve(kappa + (include_zero ? 1 : 0));
  // Partial Fisher-Yates: draw i only depends on draws < i, so results are prefix-stable.
  const std::size_t n = pool.size();
  for (std::size_t i = 0; i < kappa; ++i) {
    UserId chosen;
    if (i < n) {
      const std::size_t j = i + uniform_index(rng, n - i);
      std::swap(pool[i], pool[j]);
      chosen = pool[i];
    } else {
      chosen = pool[uniform_index(rng, n)];
    }
    out.push_back(ds.user_vector(chosen));
  }
  if (include_zero) out.push_back(UserVector::empty(ds.num_items()));
  return out;
}

void SynthConfig::validate() const {
  auto is_prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!is_prob(within_cluster_prob) || !is_prob(noise_prob)) {
    throw DataError("synthetic probabilities must lie in [0, 1]");
  }
  if (num_clusters < 1) throw DataError("num_clusters must be >= 1");
  if (num_items < num_clusters) throw DataError("num_items must be >= num_clusters");
  if (num_users < 1) throw DataError("num_users must be >= 1");
}

std::pair<ItemId, ItemId> cluster_block(const SynthConfig& cfg, std::size_t cluster) {
  const auto first = cluster * cfg.num_items / cfg.num_clusters;
  const auto last = (cluster + 1) * cfg.num_items / cfg.num_clusters;
  return {static_cast<ItemId>(first), static_cast<ItemId>(last)};
}

InteractionDataset generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  std::vector<std::vector<ItemId>> rows(cfg.num_users);
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    const auto [first, last] = cluster_block(cfg, u % cfg.num_clusters);
    for (ItemId i = 0; i < cfg.num_items; ++i) {
      const double p = (i >= first && i < last) ? cfg.within_cluster_prob : cfg.noise_prob;
      if (uniform01(rng) < p) rows[u].push_back(i);
    }
  }
  return InteractionDataset(cfg.num_items, std::move(rows));
}

}  // namespace spinrec
