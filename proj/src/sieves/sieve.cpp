#include "aest/sieves/sieve.hpp"

#include <algorithm>
#include <cmath>

#include "aest/core/errors.hpp"

namespace aest {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void monomials_rec(std::size_t dim, int remaining, std::vector<int>& cur,
                   std::vector<std::vector<int>>& out, std::size_t j) {
  if (j == dim) {
    out.push_back(cur);
    return;
  }
  for (int e = 0; e <= remaining; ++e) {
    cur[j] = e;
    monomials_rec(dim, remaining - e, cur, out, j + 1);
  }
  cur[j] = 0;
}

Eigen::MatrixXd row_matrix(Row x) {
  Eigen::MatrixXd X(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t j = 0; j < x.size(); ++j) X(0, j) = x[j];
  return X;
}

}  // namespace

SieveSpec SieveSpec::euclidean(std::string id, Eigen::VectorXd lower, Eigen::VectorXd upper) {
  SieveSpec s;
  s.kind = SieveKind::Euclidean;
  s.id = std::move(id);
  s.input_dim = 0;
  s.output_dim = static_cast<std::size_t>(lower.size());
  s.lower = std::move(lower);
  s.upper = std::move(upper);
  return s;
}

SieveSpec SieveSpec::linear(std::string id, std::size_t input_dim, BasisKind basis, int degree,
                            std::size_t output_dim) {
  SieveSpec s;
  s.kind = SieveKind::LinearBasis;
  s.id = std::move(id);
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.basis = basis;
  s.degree = degree;
  return s;
}

SieveSpec SieveSpec::network(std::string id, std::size_t input_dim, int depth, std::size_t width,
                             Activation act, std::size_t output_dim) {
  SieveSpec s;
  s.kind = SieveKind::Network;
  s.id = std::move(id);
  s.input_dim = input_dim;
  s.output_dim = output_dim;
  s.depth = depth;
  s.width = width;
  s.activation = act;
  return s;
}

std::size_t network_param_count(std::size_t input_dim, std::size_t width, int depth,
                                std::size_t output_dim) {
  if (depth <= 1) return output_dim * input_dim + output_dim;
  std::size_t n = width * input_dim + width;
  n += static_cast<std::size_t>(depth - 2) * (width * width + width);
  n += output_dim * width + output_dim;
  return n;
}

Sieve::Sieve(SieveSpec spec) : spec_(std::move(spec)) {
  if (!(spec_.weight_clip > 0.0)) throw InvalidArgument("weight clip must be positive");
  switch (spec_.kind) {
    case SieveKind::Euclidean: {
      if (spec_.lower.size() != spec_.upper.size() || spec_.lower.size() == 0) {
        throw InvalidArgument("euclidean sieve needs matching nonempty bounds");
      }
      if ((spec_.lower.array() > spec_.upper.array()).any()) {
        throw InvalidArgument("euclidean sieve lower bound exceeds upper bound");
      }
      n_params_ = static_cast<std::size_t>(spec_.lower.size());
      spec_.output_dim = n_params_;
      break;
    }
    case SieveKind::LinearBasis: {
      const std::size_t D = spec_.input_dim;
      if (D == 0 || spec_.output_dim == 0) throw InvalidArgument("linear sieve needs dimensions");
      if (spec_.degree < 0) throw InvalidArgument("basis degree must be nonnegative");
      switch (spec_.basis) {
        case BasisKind::Polynomial: {
          std::vector<int> cur(D, 0);
          monomials_rec(D, spec_.degree, cur, monomials_, 0);
          std::stable_sort(monomials_.begin(), monomials_.end(),
                           [](const std::vector<int>& a, const std::vector<int>& b) {
                             int sa = 0, sb = 0;
                             for (int e : a) sa += e;
                             for (int e : b) sb += e;
                             return sa < sb;
                           });
          n_features_ = monomials_.size();
          break;
        }
        case BasisKind::Trig:
          n_features_ = 1 + 2 * D * static_cast<std::size_t>(spec_.degree);
          break;
        case BasisKind::Indicator: {
          if (spec_.levels.size() != D) throw InvalidArgument("indicator basis needs levels per input");
          n_features_ = 1;
          for (int l : spec_.levels) {
            if (l < 1) throw InvalidArgument("indicator levels must be positive");
            n_features_ *= static_cast<std::size_t>(l);
          }
          break;
        }
        case BasisKind::PiecewisePolynomial:
          if (D != 1) throw InvalidArgument("piecewise polynomial basis is one-dimensional");
          if (!std::is_sorted(spec_.knots.begin(), spec_.knots.end())) {
            throw InvalidArgument("knots must be sorted");
          }
          n_features_ = (spec_.knots.size() + 1) * static_cast<std::size_t>(spec_.degree + 1);
          break;
      }
      n_params_ = n_features_ * spec_.output_dim;
      break;
    }
    case SieveKind::Network: {
      const std::size_t D = spec_.input_dim;
      if (spec_.depth < 1) throw InvalidArgument("network depth must be at least 1");
      if (D == 0 || spec_.output_dim == 0) throw InvalidArgument("network needs dimensions");
      if (!(spec_.output_clip > 0.0)) throw InvalidArgument("output clip must be positive");
      width_ = spec_.depth == 1 ? 0 : spec_.width;
      while (spec_.depth > 1 && width_ > 1 &&
             network_param_count(D, width_, spec_.depth, spec_.output_dim) > spec_.max_nonzero) {
        --width_;
      }
      if (network_param_count(D, width_, spec_.depth, spec_.output_dim) > spec_.max_nonzero) {
        throw InvalidArgument("parameter budget W is too small for any width");
      }
      if (spec_.depth > 1 && width_ < D) {
        throw InvalidArgument("network width " + std::to_string(width_) +
                              " is below the input dimension");
      }
      std::size_t off = 0;
      for (int l = 0; l < spec_.depth; ++l) {
        std::size_t in = l == 0 ? D : width_;
        std::size_t out = l == spec_.depth - 1 ? spec_.output_dim : width_;
        layer_in_.push_back(in);
        layer_out_.push_back(out);
        layer_offset_.push_back(off);
        off += out * in + out;
      }
      n_params_ = off;
      break;
    }
  }
}

void Sieve::project(Eigen::VectorXd& coords) const {
  if (static_cast<std::size_t>(coords.size()) != n_params_) {
    throw InvalidArgument(spec_.id + ": coordinate vector has wrong length");
  }
  if (spec_.kind == SieveKind::Euclidean) {
    coords = coords.cwiseMax(spec_.lower).cwiseMin(spec_.upper);
  } else if (std::isfinite(spec_.weight_clip)) {
    coords = coords.cwiseMax(-spec_.weight_clip).cwiseMin(spec_.weight_clip);
  }
}

Eigen::VectorXd Sieve::random_point(Rng& rng) const {
  Eigen::VectorXd x(static_cast<Eigen::Index>(n_params_));
  switch (spec_.kind) {
    case SieveKind::Euclidean:
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        double lo = spec_.lower[i], hi = spec_.upper[i];
        if (std::isfinite(lo) && std::isfinite(hi)) {
          x[i] = rng.uniform(lo, hi);
        } else {
          double c = std::isfinite(lo) ? lo + 1.0 : (std::isfinite(hi) ? hi - 1.0 : 0.0);
          x[i] = c + rng.normal();
        }
      }
      break;
    case SieveKind::LinearBasis: {
      double a = 1.0 / std::sqrt(static_cast<double>(n_features_));
      for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform(-a, a);
      break;
    }
    case SieveKind::Network:
      for (std::size_t l = 0; l < layer_in_.size(); ++l) {
        double a = 1.0 / std::sqrt(static_cast<double>(layer_in_[l]));
        std::size_t cnt = layer_out_[l] * layer_in_[l] + layer_out_[l];
        for (std::size_t k = 0; k < cnt; ++k) x[layer_offset_[l] + k] = rng.uniform(-a, a);
      }
      break;
  }
  project(x);
  return x;
}

Eigen::VectorXd Sieve::initial_point(Rng& rng) const {
  if (spec_.kind == SieveKind::Network) return random_point(rng);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params_));
  project(x);
  return x;
}

Eigen::VectorXd Sieve::features(Row x) const {
  if (spec_.kind != SieveKind::LinearBasis) throw InvalidArgument("features need a linear basis");
  if (x.size() != spec_.input_dim) throw InvalidArgument(spec_.id + ": input has wrong length");
  Eigen::VectorXd phi(static_cast<Eigen::Index>(n_features_));
  const std::size_t D = spec_.input_dim;
  switch (spec_.basis) {
    case BasisKind::Polynomial:
      for (std::size_t k = 0; k < monomials_.size(); ++k) {
        double v = 1.0;
        for (std::size_t j = 0; j < D; ++j) {
          for (int e = 0; e < monomials_[k][j]; ++e) v *= x[j];
        }
        phi[k] = v;
      }
      break;
    case BasisKind::Trig: {
      phi[0] = 1.0;
      Eigen::Index k = 1;
      for (std::size_t j = 0; j < D; ++j) {
        for (int f = 1; f <= spec_.degree; ++f) {
          phi[k++] = std::cos(2.0 * M_PI * f * x[j]);
          phi[k++] = std::sin(2.0 * M_PI * f * x[j]);
        }
      }
      break;
    }
    case BasisKind::Indicator: {
      phi.setZero();
      std::size_t cell = 0;
      for (std::size_t j = 0; j < D; ++j) {
        long level = std::lround(x[j]);
        if (level < 0 || level >= spec_.levels[j]) {
          throw InvalidArgument(spec_.id + ": indicator input out of range");
        }
        cell = cell * static_cast<std::size_t>(spec_.levels[j]) + static_cast<std::size_t>(level);
      }
      phi[static_cast<Eigen::Index>(cell)] = 1.0;
      break;
    }
    case BasisKind::PiecewisePolynomial: {
      phi.setZero();
      auto bin = static_cast<std::size_t>(
          std::upper_bound(spec_.knots.begin(), spec_.knots.end(), x[0]) - spec_.knots.begin());
      double v = 1.0;
      for (int e = 0; e <= spec_.degree; ++e, v *= x[0]) {
        phi[static_cast<Eigen::Index>(bin * (spec_.degree + 1) + e)] = v;
      }
      break;
    }
  }
  return phi;
}

Eigen::MatrixXd Sieve::features_batch(const Eigen::MatrixXd& X) const {
  Eigen::MatrixXd F(X.rows(), static_cast<Eigen::Index>(n_features_));
  Eigen::VectorXd row(X.cols());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    row = X.row(i).transpose();
    F.row(i) = features(Row(row.data(), static_cast<std::size_t>(row.size()))).transpose();
  }
  return F;
}

struct Sieve::Forward {
  std::vector<Eigen::MatrixXd> pre;   // Z_l
  std::vector<Eigen::MatrixXd> post;  // H_l, post[0] = X
  Eigen::MatrixXd out;
};

Sieve::Forward Sieve::forward(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X) const {
  Forward fw;
  fw.post.push_back(X);
  const int L = spec_.depth;
  for (int l = 0; l < L; ++l) {
    const auto in = static_cast<Eigen::Index>(layer_in_[l]);
    const auto out = static_cast<Eigen::Index>(layer_out_[l]);
    Eigen::Map<const RowMat> A(coords.data() + layer_offset_[l], out, in);
    Eigen::Map<const Eigen::VectorXd> b(coords.data() + layer_offset_[l] + out * in, out);
    Eigen::MatrixXd Z = fw.post.back() * A.transpose();
    Z.rowwise() += b.transpose();
    if (l < L - 1) {
      Eigen::MatrixXd H = spec_.activation == Activation::Relu ? Eigen::MatrixXd(Z.cwiseMax(0.0))
                                                               : Eigen::MatrixXd(Z.array().tanh());
      fw.pre.push_back(std::move(Z));
      fw.post.push_back(std::move(H));
    } else {
      fw.pre.push_back(Z);
      if (std::isfinite(spec_.output_clip)) {
        const double B = spec_.output_clip;
        fw.out = B * (Z.array() / B).tanh();
      } else {
        fw.out = std::move(Z);
      }
    }
  }
  return fw;
}

Eigen::MatrixXd Sieve::net_eval(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X) const {
  return forward(coords, X).out;
}

Eigen::VectorXd Sieve::net_grad(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& upstream, Eigen::MatrixXd* dX) const {
  Forward fw = forward(coords, X);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_params_));
  const int L = spec_.depth;
  Eigen::MatrixXd dZ = upstream;
  if (std::isfinite(spec_.output_clip)) {
    const double B = spec_.output_clip;
    dZ.array() *= 1.0 - (fw.pre.back().array() / B).tanh().square();
  }
  for (int l = L - 1; l >= 0; --l) {
    const auto in = static_cast<Eigen::Index>(layer_in_[l]);
    const auto out = static_cast<Eigen::Index>(layer_out_[l]);
    Eigen::Map<RowMat> gA(g.data() + layer_offset_[l], out, in);
    Eigen::Map<Eigen::VectorXd> gb(g.data() + layer_offset_[l] + out * in, out);
    gA = dZ.transpose() * fw.post[l];
    gb = dZ.colwise().sum().transpose();
    if (l == 0 && dX) {
      Eigen::Map<const RowMat> A(coords.data() + layer_offset_[l], out, in);
      *dX = dZ * A;
    }
    if (l > 0) {
      Eigen::Map<const RowMat> A(coords.data() + layer_offset_[l], out, in);
      Eigen::MatrixXd dH = dZ * A;
      if (spec_.activation == Activation::Relu) {
        dZ = dH.array() * (fw.pre[l - 1].array() > 0.0).cast<double>();
      } else {
        dZ = dH.array() * (1.0 - fw.post[l].array().square());
      }
    }
  }
  return g;
}

Eigen::MatrixXd Sieve::eval_batch(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X) const {
  if (static_cast<std::size_t>(coords.size()) != n_params_) {
    throw InvalidArgument(spec_.id + ": coordinate vector has wrong length");
  }
  switch (spec_.kind) {
    case SieveKind::Euclidean:
      return coords.transpose().replicate(std::max<Eigen::Index>(1, X.rows()), 1);
    case SieveKind::LinearBasis: {
      if (static_cast<std::size_t>(X.cols()) != spec_.input_dim) {
        throw InvalidArgument(spec_.id + ": input has wrong length");
      }
      Eigen::Map<const Eigen::MatrixXd> C(coords.data(), static_cast<Eigen::Index>(n_features_),
                                          static_cast<Eigen::Index>(spec_.output_dim));
      return features_batch(X) * C;
    }
    case SieveKind::Network:
      if (static_cast<std::size_t>(X.cols()) != spec_.input_dim) {
        throw InvalidArgument(spec_.id + ": input has wrong length");
      }
      return net_eval(coords, X);
  }
  return {};
}

Eigen::VectorXd Sieve::eval(const Eigen::VectorXd& coords, Row x) const {
  if (spec_.kind == SieveKind::Euclidean) return coords;
  if (spec_.kind == SieveKind::LinearBasis) {
    if (static_cast<std::size_t>(coords.size()) != n_params_) {
      throw InvalidArgument(spec_.id + ": coordinate vector has wrong length");
    }
    Eigen::Map<const Eigen::MatrixXd> C(coords.data(), static_cast<Eigen::Index>(n_features_),
                                        static_cast<Eigen::Index>(spec_.output_dim));
    return C.transpose() * features(x);
  }
  if (x.size() != spec_.input_dim) throw InvalidArgument(spec_.id + ": input has wrong length");
  return eval_batch(coords, row_matrix(x)).row(0).transpose();
}

double Sieve::eval_scalar(const Eigen::VectorXd& coords, Row x) const {
  if (spec_.kind == SieveKind::LinearBasis && spec_.output_dim == 1) {
    if (static_cast<std::size_t>(coords.size()) != n_params_) {
      throw InvalidArgument(spec_.id + ": coordinate vector has wrong length");
    }
    return coords.dot(features(x));
  }
  return eval(coords, x)[0];
}

Eigen::VectorXd Sieve::grad_coords(const Eigen::VectorXd& coords, Row x,
                                   const Eigen::VectorXd& upstream) const {
  if (static_cast<std::size_t>(upstream.size()) != spec_.output_dim) {
    throw InvalidArgument(spec_.id + ": upstream has wrong length");
  }
  switch (spec_.kind) {
    case SieveKind::Euclidean:
      return upstream;
    case SieveKind::LinearBasis: {
      Eigen::VectorXd phi = features(x);
      Eigen::VectorXd g(static_cast<Eigen::Index>(n_params_));
      const auto K = static_cast<Eigen::Index>(n_features_);
      for (Eigen::Index o = 0; o < upstream.size(); ++o) g.segment(o * K, K) = upstream[o] * phi;
      return g;
    }
    case SieveKind::Network:
      if (x.size() != spec_.input_dim) throw InvalidArgument(spec_.id + ": input has wrong length");
      return net_grad(coords, row_matrix(x), upstream.transpose());
  }
  return {};
}

Eigen::VectorXd Sieve::grad_coords_batch(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X,
                                         const Eigen::MatrixXd& upstream) const {
  switch (spec_.kind) {
    case SieveKind::Euclidean:
      return upstream.colwise().sum().transpose();
    case SieveKind::LinearBasis: {
      Eigen::MatrixXd G = features_batch(X).transpose() * upstream;  // K × out
      return Eigen::Map<const Eigen::VectorXd>(G.data(), G.size());
    }
    case SieveKind::Network:
      return net_grad(coords, X, upstream);
  }
  return {};
}

Eigen::VectorXd Sieve::feature_derivative(Row x, std::size_t j) const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_features_));
  switch (spec_.basis) {
    case BasisKind::Polynomial:
      for (std::size_t k = 0; k < monomials_.size(); ++k) {
        const int ej = monomials_[k][j];
        if (ej == 0) continue;
        double v = ej;
        for (std::size_t i = 0; i < spec_.input_dim; ++i) {
          int e = i == j ? ej - 1 : monomials_[k][i];
          for (int r = 0; r < e; ++r) v *= x[i];
        }
        d[static_cast<Eigen::Index>(k)] = v;
      }
      break;
    case BasisKind::Trig: {
      Eigen::Index k = 1 + static_cast<Eigen::Index>(j) * 2 * spec_.degree;
      for (int f = 1; f <= spec_.degree; ++f) {
        const double w = 2.0 * M_PI * f;
        d[k++] = -w * std::sin(w * x[j]);
        d[k++] = w * std::cos(w * x[j]);
      }
      break;
    }
    case BasisKind::Indicator:
      break;
    case BasisKind::PiecewisePolynomial: {
      auto bin = static_cast<std::size_t>(
          std::upper_bound(spec_.knots.begin(), spec_.knots.end(), x[0]) - spec_.knots.begin());
      double v = 1.0;
      for (int e = 1; e <= spec_.degree; ++e, v *= x[0]) {
        d[static_cast<Eigen::Index>(bin * (spec_.degree + 1) + e)] = e * v;
      }
      break;
    }
  }
  return d;
}

Eigen::MatrixXd Sieve::input_grad_batch(const Eigen::VectorXd& coords, const Eigen::MatrixXd& X,
                                        const Eigen::MatrixXd& upstream) const {
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  switch (spec_.kind) {
    case SieveKind::Euclidean:
      return G;
    case SieveKind::LinearBasis: {
      Eigen::Map<const Eigen::MatrixXd> C(coords.data(), static_cast<Eigen::Index>(n_features_),
                                          static_cast<Eigen::Index>(spec_.output_dim));
      Eigen::VectorXd row(X.cols());
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        row = X.row(i).transpose();
        Row x(row.data(), static_cast<std::size_t>(row.size()));
        Eigen::VectorXd cu = C * upstream.row(i).transpose();
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
          G(i, j) = cu.dot(feature_derivative(x, static_cast<std::size_t>(j)));
        }
      }
      return G;
    }
    case SieveKind::Network:
      net_grad(coords, X, upstream, &G);
      return G;
  }
  return G;
}

void GrowthSchedule::validate() const {
  if (!(c_width > 0.0)) throw InvalidArgument("growth schedule needs c_width > 0");
  if (!(p > 0.0) || d_star < 0.0) throw InvalidArgument("growth schedule needs p > 0, d* >= 0");
  if (r_lower < d_star / p) throw InvalidArgument("growth schedule needs r_lower >= d*/p");
}

std::size_t width_for_n(const GrowthSchedule& sched, std::size_t n) {
  const double w = sched.c_width *
                   std::pow(static_cast<double>(std::max<std::size_t>(n, 1)),
                            sched.r_lower / (sched.r_lower + 2.0));
  return static_cast<std::size_t>(std::max(1.0, std::round(w)));
}

}  // namespace aest
