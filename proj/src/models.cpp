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

#include "spinrec/models.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace spinrec {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

ParametricModel::Block ParametricModel::add_block(Eigen::Index rows, Eigen::Index cols) {
  Block b{next_offset_, rows, cols};
  next_offset_ += rows * cols;
  return b;
}

PooledUser pool_user(const ConstMatMap& item_input, const VecRef& x) {
  PooledUser out;
  out.mass = x.sum();
  out.normalizer = std::max(1.0, out.mass);
  out.p = item_input.transpose() * x;
  out.p /= out.normalizer;
  return out;
}

Vec pool_user_backward(const ConstMatMap& item_input, const PooledUser& pooled, const Vec& grad_p) {
  Vec gx = item_input * grad_p;
  // The normalizer only depends on x once the mass exceeds 1.
  if (pooled.mass > 1.0) gx.array() -= pooled.p.dot(grad_p);
  gx /= pooled.normalizer;
  return gx;
}

// ---------------------------------------------------------------------------
// MF

MFModel::MFModel(std::size_t num_items, std::size_t dim) : ParametricModel(num_items), dim_(dim) {
  if (dim < 1) throw ModelError("MF dimension must be >= 1");
  const auto n = static_cast<Eigen::Index>(num_items);
  const auto d = static_cast<Eigen::Index>(dim);
  w_ = add_block(n, d);
  q_ = add_block(n, d);
  b_ = add_block(n, 1);
  allocate();
}

Vec MFModel::do_score_all(const VecRef& x) const {
  const PooledUser u = pool_user(item_input(), x);
  Vec logits = item_output() * u.p + item_bias();
  return logits.unaryExpr([](double z) { return sigmoid(z); });
}

double MFModel::do_score(const VecRef& x, ItemId y) const {
  const PooledUser u = pool_user(item_input(), x);
  return sigmoid(item_output().row(y).dot(u.p) + item_bias()[y]);
}

Vec MFModel::do_grad_input(const VecRef& x, ItemId y) const {
  const PooledUser u = pool_user(item_input(), x);
  const double s = sigmoid(item_output().row(y).dot(u.p) + item_bias()[y]);
  const Vec grad_p = s * (1.0 - s) * item_output().row(y).transpose();
  return pool_user_backward(item_input(), u, grad_p);
}

// ---------------------------------------------------------------------------
// NCF

NCFModel::NCFModel(std::size_t num_items, std::size_t dim, std::size_t hidden1, std::size_t hidden2)
    : ParametricModel(num_items), dim_(dim), h1_(hidden1), h2_(hidden2) {
  if (dim < 1 || hidden1 < 1 || hidden2 < 1) throw ModelError("NCF dimensions must be >= 1");
  const auto n = static_cast<Eigen::Index>(num_items);
  const auto d = static_cast<Eigen::Index>(dim);
  const auto a = static_cast<Eigen::Index>(hidden1);
  const auto b = static_cast<Eigen::Index>(hidden2);
  w_ = add_block(n, d);
  q_ = add_block(n, d);
  gmf_ = add_block(d, 1);
  l1_ = add_block(a, 2 * d);
  b1_ = add_block(a, 1);
  l2_ = add_block(b, a);
  b2_ = add_block(b, 1);
  out_ = add_block(b, 1);
  bout_ = add_block(1, 1);
  bias_ = add_block(n, 1);
  allocate();
}

std::vector<std::uint32_t> NCFModel::dims() const {
  return {static_cast<std::uint32_t>(dim_), static_cast<std::uint32_t>(h1_), static_cast<std::uint32_t>(h2_)};
}

NCFModel::Forward NCFModel::forward(const Vec& p, ItemId y) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const auto l1 = mat(l1_);
  const Vec qy = mat(q_).row(y).transpose();
  Forward fw;
  fw.z1 = l1.leftCols(d) * p + l1.rightCols(d) * qy + vec(b1_);
  fw.a1 = fw.z1.array().tanh();
  fw.z2 = mat(l2_) * fw.a1 + vec(b2_);
  fw.a2 = fw.z2.array().tanh();
  fw.logit = vec(gmf_).dot(p.cwiseProduct(qy)) + vec(out_).dot(fw.a2) + vec(bout_)[0] + vec(bias_)[y];
  return fw;
}

Vec NCFModel::backward(const Vec& p, ItemId y, const Forward& fw, double dlogit, Vec* flat_grad) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const auto l1 = mat(l1_);
  const auto qy = mat(q_).row(y).transpose();
  const Vec dz2 = (dlogit * vec(out_)).cwiseProduct((1.0 - fw.a2.array().square()).matrix());
  const Vec dz1 = (mat(l2_).transpose() * dz2).cwiseProduct((1.0 - fw.a1.array().square()).matrix());
  if (flat_grad != nullptr) {
    Vec& g = *flat_grad;
    vec(g, gmf_) += dlogit * p.cwiseProduct(qy);
    mat(g, q_).row(y) += (dlogit * vec(gmf_).cwiseProduct(p) + l1.rightCols(d).transpose() * dz1).transpose();
    vec(g, out_) += dlogit * fw.a2;
    vec(g, bout_)[0] += dlogit;
    vec(g, bias_)[y] += dlogit;
    mat(g, l2_) += dz2 * fw.a1.transpose();
    vec(g, b2_) += dz2;
    auto gl1 = mat(g, l1_);
    gl1.leftCols(d) += dz1 * p.transpose();
    gl1.rightCols(d) += dz1 * qy.transpose();
    vec(g, b1_) += dz1;
  }
  return dlogit * vec(gmf_).cwiseProduct(qy) + l1.leftCols(d).transpose() * dz1;
}

Vec NCFModel::do_score_all(const VecRef& x) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  const PooledUser u = pool_user(mat(w_), x);
  const auto l1 = mat(l1_);
  const auto q = mat(q_);
  const Vec user_part = l1.leftCols(d) * u.p + vec(b1_);
  Eigen::MatrixXd z1 = l1.rightCols(d) * q.transpose();
  z1.colwise() += user_part;
  Eigen::MatrixXd z2 = mat(l2_) * z1.array().tanh().matrix();
  z2.colwise() += vec(b2_);
  Vec logits = z2.array().tanh().matrix().transpose() * vec(out_);
  logits.array() += vec(bout_)[0];
  logits += vec(bias_) + q * vec(gmf_).cwiseProduct(u.p);
  return logits.unaryExpr([](double z) { return sigmoid(z); });
}

double NCFModel::do_score(const VecRef& x, ItemId y) const {
  const PooledUser u = pool_user(mat(w_), x);
  return sigmoid(forward(u.p, y).logit);
}

Vec NCFModel::do_grad_input(const VecRef& x, ItemId y) const {
  const PooledUser u = pool_user(mat(w_), x);
  const Forward fw = forward(u.p, y);
  const double s = sigmoid(fw.logit);
  const Vec grad_p = backward(u.p, y, fw, s * (1.0 - s), nullptr);
  return pool_user_backward(mat(w_), u, grad_p);
}

// ---------------------------------------------------------------------------
// VAE

VAEModel::VAEModel(std::size_t num_items, std::size_t hidden, std::size_t latent)
    : ParametricModel(num_items), hidden_(hidden), latent_(latent) {
  if (hidden < 1 || latent < 1) throw ModelError("VAE dimensions must be >= 1");
  const auto n = static_cast<Eigen::Index>(num_items);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto k = static_cast<Eigen::Index>(latent);
  enc1_ = add_block(n, h);  // row per input item
  enc1_b_ = add_block(h, 1);
  mu_ = add_block(k, h);
  mu_b_ = add_block(k, 1);
  logvar_ = add_block(k, h);
  logvar_b_ = add_block(k, 1);
  dec1_ = add_block(h, k);
  dec1_b_ = add_block(h, 1);
  dec2_ = add_block(n, h);
  dec2_b_ = add_block(n, 1);
  allocate();
}

std::vector<std::uint32_t> VAEModel::dims() const {
  return {static_cast<std::uint32_t>(hidden_), static_cast<std::uint32_t>(latent_)};
}

namespace {

Vec softmax(const Vec& logits) {
  Vec e = (logits.array() - logits.maxCoeff()).exp();
  return e / e.sum();
}

}  // namespace

Vec VAEModel::do_score_all(const VecRef& x) const {
  const double scale = input_scale(x.sum());
  const Vec a = (mat(enc1_).transpose() * x * scale + vec(enc1_b_)).array().tanh();
  const Vec mu = mat(mu_) * a + vec(mu_b_);
  const Vec b = (mat(dec1_) * mu + vec(dec1_b_)).array().tanh();
  return softmax(mat(dec2_) * b + vec(dec2_b_));
}

Vec VAEModel::do_grad_input(const VecRef& x, ItemId y) const {
  const double mass = x.sum();
  const double scale = input_scale(mass);
  const Vec a = (mat(enc1_).transpose() * x * scale + vec(enc1_b_)).array().tanh();
  const Vec mu = mat(mu_) * a + vec(mu_b_);
  const Vec b = (mat(dec1_) * mu + vec(dec1_b_)).array().tanh();
  const Vec probs = softmax(mat(dec2_) * b + vec(dec2_b_));
  const auto dec2 = mat(dec2_);

  // d p_y / d logits = p_y (e_y - p)
  const Vec g_b = probs[y] * (dec2.row(y).transpose() - dec2.transpose() * probs);
  const Vec g_mu = mat(dec1_).transpose() * g_b.cwiseProduct((1.0 - b.array().square()).matrix());
  const Vec g_za = (mat(mu_).transpose() * g_mu).cwiseProduct((1.0 - a.array().square()).matrix());
  const Vec g_xn = mat(enc1_) * g_za;
  Vec gx = g_xn * scale;
  if (mass > 1.0) gx.array() -= g_xn.dot(x) / (2.0 * mass * std::sqrt(mass));
  return gx;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kModelMagic[8] = {'S', 'P', 'R', 'M', 'O', 'D', 'L', '1'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ModelError("truncated checkpoint");
  return v;
}

}  // namespace

std::shared_ptr<ParametricModel> make_model(ModelKind kind, std::size_t num_items,
                                            const std::vector<std::uint32_t>& dims) {
  auto need = [&](std::size_t n) {
    if (dims.size() != n) throw ModelError("wrong number of dimensions for " + std::string(to_string(kind)));
  };
  switch (kind) {
    case ModelKind::kMF:
      need(1);
      return std::make_shared<MFModel>(num_items, dims[0]);
    case ModelKind::kNCF:
      need(3);
      return std::make_shared<NCFModel>(num_items, dims[0], dims[1], dims[2]);
    case ModelKind::kVAE:
      need(2);
      return std::make_shared<VAEModel>(num_items, dims[0], dims[1]);
  }
  throw ModelError("unknown model kind");
}

void save_checkpoint(const ParametricModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write " + path.string());
  out.write(kModelMagic, sizeof(kModelMagic));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.kind()));
  put<std::uint64_t>(out, model.num_items());
  const auto dims = model.dims();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) put<std::uint32_t>(out, d);
  put<std::uint64_t>(out, model.parameter_count());
  for (double v : model.params()) put<float>(out, static_cast<float>(v));
  if (!out) throw ModelError("write failed for " + path.string());
}

std::shared_ptr<ParametricModel> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open " + path.string());
  char magic[sizeof(kModelMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
    throw ModelError(path.string() + ": not a model checkpoint");
  }
  const auto kind_raw = get<std::uint32_t>(in);
  if (kind_raw > 2) throw ModelError(path.string() + ": unknown model kind");
  const auto num_items = get<std::uint64_t>(in);
  const auto ndims = get<std::uint32_t>(in);
  if (ndims > 16) throw ModelError(path.string() + ": corrupt header");
  std::vector<std::uint32_t> dims(ndims);
  for (auto& d : dims) d = get<std::uint32_t>(in);
  auto model = make_model(static_cast<ModelKind>(kind_raw), num_items, dims);
  const auto count = get<std::uint64_t>(in);
  if (count != model->parameter_count()) throw ModelError(path.string() + ": parameter count mismatch");
  Vec& params = model->mutable_params();
  for (Eigen::Index i = 0; i < params.size(); ++i) params[i] = get<float>(in);
  return model;
}

}  // namespace spinrec
