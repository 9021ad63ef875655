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

#include "spinrec/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spinrec/random.hpp"

namespace spinrec {

void TrainConfig::validate() const {
  if (dim < 1 || latent < 1 || hidden.empty()) throw TrainingError("model dimensions must be >= 1");
  for (auto h : hidden) {
    if (h < 1) throw TrainingError("hidden widths must be >= 1");
  }
  if (!(learning_rate > 0.0)) throw TrainingError("learning_rate must be > 0");
  if (batch_size < 1) throw TrainingError("batch_size must be >= 1");
  if (weight_decay < 0.0) throw TrainingError("weight_decay must be >= 0");
  if (!(input_dropout >= 0.0 && input_dropout < 1.0)) throw TrainingError("input_dropout must lie in [0, 1)");
  if (kl_beta < 0.0) throw TrainingError("kl_beta must be >= 0");
  if (max_targets_per_user < 1) throw TrainingError("max_targets_per_user must be >= 1");
}

TrainConfig TrainConfig::defaults_for(ModelKind kind) {
  TrainConfig cfg;
  if (kind == ModelKind::kVAE) {
    cfg.hidden = {128};
    cfg.latent = 32;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 50;
  }
  return cfg;
}

namespace {

void fill_normal(Eigen::Ref<Vec> v, double stddev, Rng& rng) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = stddev * standard_normal(rng);
}

template <typename Map>
void xavier(Map m, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(m.rows() + m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = stddev * standard_normal(rng);
  }
}

class Adam {
 public:
  explicit Adam(Eigen::Index n, double lr) : m_(Vec::Zero(n)), v_(Vec::Zero(n)), lr_(lr) {}

  void step(Vec& params, const Vec& grad) {
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

 private:
  Vec m_, v_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
};

double bce(double logit, double label) {
  // log(1 + exp(-|z|)) + max(z, 0) - z * label
  return std::log1p(std::exp(-std::abs(logit))) + std::max(logit, 0.0) - logit * label;
}

/// Splits a history into model input and held-out targets.
struct InputSplit {
  std::vector<ItemId> input;
  std::vector<ItemId> targets;
};

InputSplit split_history(std::span<const ItemId> history, double dropout, std::size_t max_targets, Rng& rng) {
  InputSplit s;
  for (ItemId i : history) (uniform01(rng) < dropout ? s.targets : s.input).push_back(i);
  if (s.targets.empty() && !s.input.empty()) {
    const auto k = uniform_index(rng, s.input.size());
    s.targets.push_back(s.input[k]);
    s.input.erase(s.input.begin() + static_cast<std::ptrdiff_t>(k));
  }
  if (s.targets.size() > max_targets) {
    for (std::size_t i = 0; i < max_targets; ++i) {
      std::swap(s.targets[i], s.targets[i + uniform_index(rng, s.targets.size() - i)]);
    }
    s.targets.resize(max_targets);
  }
  return s;
}

ItemId sample_negative(std::span<const ItemId> history, std::size_t num_items, Rng& rng) {
  while (true) {
    const auto j = static_cast<ItemId>(uniform_index(rng, num_items));
    if (!std::binary_search(history.begin(), history.end(), j)) return j;
  }
}

/// Pooled embedding for a sparse input set; mirrors pool_user for binary x.
Vec pool_sparse(const ConstMatMap& w, const std::vector<ItemId>& input) {
  Vec p = Vec::Zero(w.cols());
  for (ItemId i : input) p += w.row(i).transpose();
  return p / std::max<double>(1.0, static_cast<double>(input.size()));
}

// Returns summed loss and sample count; gradients are summed into grad.
std::pair<double, std::size_t> mf_user_step(const MFModel& model, std::span<const ItemId> history,
                                            const TrainConfig& cfg, Rng& rng, Vec& grad) {
  const InputSplit s = split_history(history, cfg.input_dropout, cfg.max_targets_per_user, rng);
  const Vec p = pool_sparse(model.item_input(), s.input);
  const auto q = model.item_output();
  const auto b = model.item_bias();
  auto gq = model.item_output(grad);
  auto gb = model.item_bias(grad);
  Vec grad_p = Vec::Zero(p.size());
  double loss = 0.0;
  std::size_t count = 0;
  auto visit = [&](ItemId j, double label) {
    const double logit = q.row(j).dot(p) + b[j];
    loss += bce(logit, label);
    const double dl = sigmoid(logit) - label;
    gq.row(j) += dl * p.transpose();
    gb[j] += dl;
    grad_p += dl * q.row(j).transpose();
    ++count;
  };
  const bool can_sample = history.size() < model.num_items();
  for (ItemId t : s.targets) {
    visit(t, 1.0);
    for (std::size_t k = 0; can_sample && k < cfg.negatives; ++k) {
      visit(sample_negative(history, model.num_items(), rng), 0.0);
    }
  }
  auto gw = model.item_input(grad);
  const double n = std::max<double>(1.0, static_cast<double>(s.input.size()));
  for (ItemId i : s.input) gw.row(i) += grad_p.transpose() / n;
  return {loss, count};
}

std::pair<double, std::size_t> ncf_user_step(const NCFModel& model, std::span<const ItemId> history,
                                             const TrainConfig& cfg, Rng& rng, Vec& grad) {
  const InputSplit s = split_history(history, cfg.input_dropout, cfg.max_targets_per_user, rng);
  const Vec p = pool_sparse(model.item_input(), s.input);
  Vec grad_p = Vec::Zero(p.size());
  double loss = 0.0;
  std::size_t count = 0;
  auto visit = [&](ItemId j, double label) {
    const auto fw = model.forward(p, j);
    loss += bce(fw.logit, label);
    grad_p += model.backward(p, j, fw, sigmoid(fw.logit) - label, &grad);
    ++count;
  };
  const bool can_sample = history.size() < model.num_items();
  for (ItemId t : s.targets) {
    visit(t, 1.0);
    for (std::size_t k = 0; can_sample && k < cfg.negatives; ++k) {
      visit(sample_negative(history, model.num_items(), rng), 0.0);
    }
  }
  auto gw = ParametricModel::mat(grad, model.w_);
  const double n = std::max<double>(1.0, static_cast<double>(s.input.size()));
  for (ItemId i : s.input) gw.row(i) += grad_p.transpose() / n;
  return {loss, count};
}

double vae_user_step(const VAEModel& m, std::span<const ItemId> history, const TrainConfig& cfg, double beta,
                     Rng& rng, Vec& grad) {
  std::vector<ItemId> input;
  for (ItemId i : history) {
    if (uniform01(rng) >= cfg.input_dropout) input.push_back(i);
  }
  const double scale = VAEModel::input_scale(static_cast<double>(input.size()));
  const auto enc1 = m.mat(m.enc1_);
  Vec za = m.vec(m.enc1_b_);
  for (ItemId i : input) za += scale * enc1.row(i).transpose();
  const Vec a = za.array().tanh();
  const Vec mu = m.mat(m.mu_) * a + m.vec(m.mu_b_);
  const Vec logvar = (m.mat(m.logvar_) * a + m.vec(m.logvar_b_)).cwiseMax(-10.0).cwiseMin(10.0);
  const Vec stddev = (0.5 * logvar).array().exp();
  Vec eps(mu.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = standard_normal(rng);
  const Vec z = mu + stddev.cwiseProduct(eps);
  const Vec b = (m.mat(m.dec1_) * z + m.vec(m.dec1_b_)).array().tanh();
  const auto dec2 = m.mat(m.dec2_);
  const Vec logits = dec2 * b + m.vec(m.dec2_b_);
  const double max_logit = logits.maxCoeff();
  const Vec e = (logits.array() - max_logit).exp();
  const double log_z = max_logit + std::log(e.sum());
  const Vec probs = e / e.sum();

  double nll = 0.0;
  for (ItemId i : history) nll -= logits[i] - log_z;
  const double kl = -0.5 * (1.0 + logvar.array() - mu.array().square() - logvar.array().exp()).sum();

  Vec g_logits = static_cast<double>(history.size()) * probs;
  for (ItemId i : history) g_logits[i] -= 1.0;
  ParametricModel::mat(grad, m.dec2_) += g_logits * b.transpose();
  ParametricModel::vec(grad, m.dec2_b_) += g_logits;
  const Vec g_zb = (dec2.transpose() * g_logits).cwiseProduct((1.0 - b.array().square()).matrix());
  ParametricModel::mat(grad, m.dec1_) += g_zb * z.transpose();
  ParametricModel::vec(grad, m.dec1_b_) += g_zb;
  const Vec g_z = m.mat(m.dec1_).transpose() * g_zb;
  const Vec g_mu = g_z + beta * mu;
  const Vec g_lv = (g_z.cwiseProduct(eps).cwiseProduct(stddev) * 0.5).array() +
                   beta * 0.5 * (logvar.array().exp() - 1.0);
  ParametricModel::mat(grad, m.mu_) += g_mu * a.transpose();
  ParametricModel::vec(grad, m.mu_b_) += g_mu;
  ParametricModel::mat(grad, m.logvar_) += g_lv * a.transpose();
  ParametricModel::vec(grad, m.logvar_b_) += g_lv;
  const Vec g_za = (m.mat(m.mu_).transpose() * g_mu + m.mat(m.logvar_).transpose() * g_lv)
                       .cwiseProduct((1.0 - a.array().square()).matrix());
  ParametricModel::vec(grad, m.enc1_b_) += g_za;
  auto genc = ParametricModel::mat(grad, m.enc1_);
  for (ItemId i : input) genc.row(i) += scale * g_za.transpose();
  return nll + beta * kl;
}

}  // namespace

std::shared_ptr<ParametricModel> initialize_model(ModelKind kind, std::size_t num_items, const TrainConfig& cfg) {
  cfg.validate();
  if (num_items < 1) throw TrainingError("dataset has no items");
  Rng rng(derive_seed(cfg.seed, 0x1417));
  switch (kind) {
    case ModelKind::kMF: {
      auto m = std::make_shared<MFModel>(num_items, cfg.dim);
      fill_normal(m->mutable_params(), 0.1, rng);
      m->item_bias(m->mutable_params()).setZero();
      return m;
    }
    case ModelKind::kNCF: {
      const std::size_t h2 = cfg.hidden.size() > 1 ? cfg.hidden[1] : cfg.hidden[0];
      auto m = std::make_shared<NCFModel>(num_items, cfg.dim, cfg.hidden[0], h2);
      Vec& p = m->mutable_params();
      fill_normal(ParametricModel::vec(p, m->w_), 0.1, rng);
      fill_normal(ParametricModel::vec(p, m->q_), 0.1, rng);
      ParametricModel::vec(p, m->gmf_).setOnes();
      xavier(ParametricModel::mat(p, m->l1_), rng);
      xavier(ParametricModel::mat(p, m->l2_), rng);
      xavier(ParametricModel::mat(p, m->out_), rng);
      return m;
    }
    case ModelKind::kVAE: {
      auto m = std::make_shared<VAEModel>(num_items, cfg.hidden[0], cfg.latent);
      Vec& p = m->mutable_params();
      xavier(ParametricModel::mat(p, m->enc1_), rng);
      xavier(ParametricModel::mat(p, m->mu_), rng);
      xavier(ParametricModel::mat(p, m->logvar_), rng);
      xavier(ParametricModel::mat(p, m->dec1_), rng);
      xavier(ParametricModel::mat(p, m->dec2_), rng);
      return m;
    }
  }
  throw TrainingError("unknown model kind");
}

TrainedModel train(ModelKind kind, const InteractionDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  std::vector<UserId> users;
  for (UserId u : ds.users_in(Split::kTrain)) {
    if (!ds.items_of(u).empty()) users.push_back(u);
  }
  if (users.empty()) throw TrainingError("no train users with interactions");

  std::shared_ptr<ParametricModel> model = initialize_model(kind, ds.num_items(), cfg);
  Vec& params = model->mutable_params();
  Adam adam(params.size(), cfg.learning_rate);
  Rng rng(derive_seed(cfg.seed, 0x7a1));
  Vec grad = Vec::Zero(params.size());
  TrainReport report;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = users.size(); i > 1; --i) std::swap(users[i - 1], users[uniform_index(rng, i)]);
    double epoch_loss = 0.0;
    std::size_t epoch_count = 0;
    for (std::size_t start = 0; start < users.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(users.size(), start + cfg.batch_size);
      grad.setZero();
      double loss = 0.0;
      std::size_t count = 0;
      for (std::size_t k = start; k < end; ++k) {
        const auto history = ds.items_of(users[k]);
        switch (kind) {
          case ModelKind::kMF: {
            auto [l, c] = mf_user_step(static_cast<const MFModel&>(*model), history, cfg, rng, grad);
            loss += l;
            count += c;
            break;
          }
          case ModelKind::kNCF: {
            auto [l, c] = ncf_user_step(static_cast<const NCFModel&>(*model), history, cfg, rng, grad);
            loss += l;
            count += c;
            break;
          }
          case ModelKind::kVAE: {
            const double beta =
                cfg.kl_beta * std::min(1.0, static_cast<double>(step) / static_cast<double>(std::max<std::size_t>(1, cfg.kl_anneal_steps)));
            loss += vae_user_step(static_cast<const VAEModel&>(*model), history, cfg, beta, rng, grad);
            count += 1;
            break;
          }
        }
      }
      if (count == 0) continue;
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1));
      }
      grad /= static_cast<double>(count);
      grad += cfg.weight_decay * params;
      adam.step(params, grad);
      ++step;
      epoch_loss += loss;
      epoch_count += count;
    }
    report.epoch_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, epoch_count)));
    if (!params.allFinite()) throw TrainingError("non-finite parameters at epoch " + std::to_string(epoch + 1));
  }

  report.validation_recall_at_10 = holdout_recall(*model, ds, Split::kValidation, 10, cfg.seed);
  return {std::move(model), std::move(report)};
}

double holdout_recall(const Recommender& model, const InteractionDataset& ds, Split split, std::size_t k,
                      std::uint64_t seed) {
  double total = 0.0;
  std::size_t users = 0;
  for (UserId u : ds.users_in(split)) {
    auto row = ds.items_of(u);
    if (row.size() < 2) continue;
    std::vector<ItemId> items(row.begin(), row.end());
    Rng rng(derive_seed(seed, u));
    const std::size_t held = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(items.size()))));
    for (std::size_t i = 0; i < held; ++i) std::swap(items[i], items[i + uniform_index(rng, items.size() - i)]);
    std::vector<ItemId> heldout(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(held));
    const UserVector input({items.begin() + static_cast<std::ptrdiff_t>(held), items.end()}, ds.num_items());
    const Vec scores = model.score_all(input.dense());
    std::vector<ItemId> candidates;
    for (ItemId i = 0; i < ds.num_items(); ++i) {
      if (!input.contains(i)) candidates.push_back(i);
    }
    const std::size_t top = std::min(k, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(top), candidates.end(),
                      [&](ItemId a, ItemId b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
    std::size_t hits = 0;
    for (std::size_t i = 0; i < top; ++i) {
      if (std::find(heldout.begin(), heldout.end(), candidates[i]) != heldout.end()) ++hits;
    }
    total += static_cast<double>(hits) / static_cast<double>(std::min(k, heldout.size()));
    ++users;
  }
  return users == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(users);
}

}  // namespace spinrec
