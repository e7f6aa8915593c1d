#pragma once

// Shared oracles and fixtures for the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "pgdcrnn/distance.hpp"
#include "pgdcrnn/graph.hpp"
#include "pgdcrnn/model.hpp"
#include "pgdcrnn/partition.hpp"
#include "pgdcrnn/sparse.hpp"
#include "pgdcrnn/tape.hpp"
#include "pgdcrnn/tensor.hpp"

namespace testing_support {

using namespace pgdcrnn;

inline Tensor random_tensor(Shape shape, std::mt19937_64 &rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double &x : t.storage()) x = u(rng);
  return t;
}

/// Random directed weighted adjacency with weights in (0, 1].
inline SparseMatrix random_adjacency(std::size_t n, double density, std::mt19937_64 &rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && u(rng) < density) t.push_back({i, j, 0.05 + 0.95 * u(rng)});
    }
  }
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

/// Dense row-major matrix product.
inline std::vector<double> dense_matmul(const std::vector<double> &a, const std::vector<double> &b,
                                        std::size_t n, std::size_t k, std::size_t m) {
  std::vector<double> out(n * m, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      for (std::size_t j = 0; j < m; ++j) out[i * m + j] += a[i * k + p] * b[p * m + j];
    }
  }
  return out;
}

inline std::vector<double> dense_of(const SparseMatrix &s) {
  const Tensor d = s.to_dense();
  return std::vector<double>(d.values().begin(), d.values().end());
}

/// Dense D^-1 W with zero rows left as zero.
inline std::vector<double> dense_row_normalize(std::vector<double> w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += w[i * n + j];
    if (s != 0.0) {
      for (std::size_t j = 0; j < n; ++j) w[i * n + j] /= s;
    }
  }
  return w;
}

inline std::vector<double> dense_transpose(const std::vector<double> &w, std::size_t r, std::size_t c) {
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = w[i * c + j];
  }
  return out;
}

struct GradCheck {
  std::size_t checked = 0;
  std::size_t failures = 0;
  double worst_rel = 0.0;
  std::string worst;
};

/// Central finite differences (step h) against tape gradients for every
/// element of every input. `build` records a scalar loss from the inputs.
inline GradCheck check_gradients(const std::function<Var(Tape &, const std::vector<Var> &)> &build,
                                 std::vector<Tensor> inputs, double h = 1e-5, double rel_tol = 1e-4,
                                 double abs_floor = 1e-7) {
  auto eval = [&](const std::vector<Tensor> &in) {
    Tape t;
    std::vector<Var> vars;
    for (const auto &x : in) vars.push_back(t.variable(x));
    return t.value(build(t, vars))[0];
  };
  Tape tape;
  std::vector<Var> vars;
  for (const auto &x : inputs) vars.push_back(tape.variable(x));
  const Var loss = build(tape, vars);
  tape.backward(loss);
  GradCheck r;
  for (std::size_t a = 0; a < inputs.size(); ++a) {
    const Tensor g = tape.grad(vars[a]);
    for (std::size_t i = 0; i < inputs[a].size(); ++i) {
      const double saved = inputs[a][i];
      inputs[a][i] = saved + h;
      const double up = eval(inputs);
      inputs[a][i] = saved - h;
      const double down = eval(inputs);
      inputs[a][i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double diff = std::abs(numeric - g[i]);
      const double scale = std::max(std::abs(numeric), std::abs(g[i]));
      const double rel = scale > 0.0 ? diff / scale : 0.0;
      ++r.checked;
      if (diff > abs_floor && rel > rel_tol) {
        ++r.failures;
        if (rel > r.worst_rel) {
          r.worst_rel = rel;
          r.worst = "input " + std::to_string(a) + "[" + std::to_string(i) + "] analytic " +
                    std::to_string(g[i]) + " numeric " + std::to_string(numeric);
        }
      }
    }
  }
  return r;
}

/// Dense brute-force diffusion convolution: materializes every transition
/// power and sums S^d Z W_block + b in (direction, d) block order.
inline std::vector<double> dense_diffusion_conv(const SparseMatrix &adjacency, FilterType filter,
                                                const Tensor &z, const Tensor &w, const Tensor &b,
                                                std::size_t k_steps) {
  const std::size_t n = adjacency.rows(), c = z.cols(), out = w.cols();
  const std::vector<double> a = dense_of(adjacency);
  std::vector<std::vector<double>> mats{dense_row_normalize(a, n)};
  if (filter == FilterType::kDualRandomWalk) mats.push_back(dense_row_normalize(dense_transpose(a, n, n), n));
  std::vector<double> result(n * out, 0.0);
  std::size_t block = 0;
  for (const auto &s : mats) {
    std::vector<double> power(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) power[i * n + i] = 1.0;
    for (std::size_t d = 0; d < k_steps; ++d, ++block) {
      const auto term = dense_matmul(power, std::vector<double>(z.data(), z.data() + z.size()), n, n, c);
      const std::vector<double> wb(w.data() + block * c * out, w.data() + (block + 1) * c * out);
      const auto contrib = dense_matmul(term, wb, n, c, out);
      for (std::size_t i = 0; i < result.size(); ++i) result[i] += contrib[i];
      power = dense_matmul(power, s, n, n, n);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < out; ++j) result[i * out + j] += b[j];
  }
  return result;
}

/// Seq2seq MAE loss for a fixed batch; the sampling coins are re-drawn from
/// the same seed on every evaluation so the loss is a deterministic function
/// of the parameters.
struct Seq2SeqProblem {
  Seq2SeqConfig config;
  DiffusionSupports supports;
  std::vector<Tensor> inputs, targets;
  std::size_t batch = 1;
  double sampling_prob = 0.5;
  std::uint64_t coin_seed = 99;

  double loss(const ParameterSet &params, std::vector<Tensor> *grads = nullptr) const {
    Tape tape;
    const BoundParameters bound = bind_parameters(tape, params, config, true);
    std::vector<Var> in, tg;
    for (const auto &x : inputs) in.push_back(tape.constant(x));
    for (const auto &y : targets) tg.push_back(tape.constant(y));
    std::mt19937_64 rng(coin_seed);
    const auto pred = forward(tape, supports, in, tg, bound, config, batch, sampling_prob, rng);
    const Var l = loss_mae(tape, pred, tg);
    if (grads) {
      tape.backward(l);
      grads->clear();
      for (const Var v : bound.vars) grads->push_back(tape.grad(v));
    }
    return tape.value(l)[0];
  }
};

inline Seq2SeqProblem random_problem(const Seq2SeqConfig &config, const SparseMatrix &adjacency,
                                     std::size_t batch, std::mt19937_64 &rng) {
  Seq2SeqProblem p;
  p.config = config;
  p.supports = build_supports(adjacency, config.filter, config.reverse);
  p.batch = batch;
  const std::size_t rows = adjacency.rows() * batch;
  for (std::size_t t = 0; t < config.look_back; ++t) p.inputs.push_back(random_tensor({rows, config.input_dim}, rng));
  for (std::size_t t = 0; t < config.horizon; ++t) p.targets.push_back(random_tensor({rows, config.output_dim}, rng));
  return p;
}

/// Central differences on every parameter element against tape gradients.
inline GradCheck check_seq2seq_gradients(const Seq2SeqProblem &problem, ParameterSet params,
                                         double h = 1e-5, double rel_tol = 1e-4,
                                         double abs_floor = 1e-7) {
  std::vector<Tensor> grads;
  problem.loss(params, &grads);
  GradCheck r;
  for (std::size_t a = 0; a < params.size(); ++a) {
    Tensor &value = params[a].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = problem.loss(params);
      value[i] = saved - h;
      const double down = problem.loss(params);
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = grads[a][i];
      const double diff = std::abs(numeric - analytic);
      const double scale = std::max(std::abs(numeric), std::abs(analytic));
      ++r.checked;
      if (diff > abs_floor && diff / scale > rel_tol) {
        ++r.failures;
        if (diff / scale > r.worst_rel) {
          r.worst_rel = diff / scale;
          r.worst = params[a].name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) +
                    " numeric " + std::to_string(numeric);
        }
      }
    }
  }
  return r;
}

/// Minimum cut over all bipartitions whose larger side is within `max_part`.
inline double brute_force_min_bisection(const SparseMatrix &sym, std::size_t max_part) {
  const std::size_t n = sym.rows();
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> part(n);
  for (std::uint64_t mask = 1; mask + 1 < (std::uint64_t{1} << n); ++mask) {
    if (mask & 1) continue;  // node 0 always in part 0: each split once
    std::size_t ones = 0;
    for (std::size_t i = 0; i < n; ++i) {
      part[i] = (mask >> i) & 1;
      ones += part[i];
    }
    if (ones > max_part || n - ones > max_part) continue;
    best = std::min(best, edge_cut(sym, part));
  }
  return best;
}

/// Two clusters with dense heavy intra edges and a few light inter edges.
/// Nodes alternate between clusters so index order hides the structure.
inline SparseMatrix planted_two_cluster(std::size_t n, std::mt19937_64 &rng,
                                        std::vector<std::size_t> *truth = nullptr) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::size_t> cl(n);
  for (std::size_t i = 0; i < n; ++i) cl[i] = i % 2;
  std::vector<Triplet> t;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      if (cl[i] == cl[j]) {
        if (u(rng) < 0.7) t.push_back({i, j, 1.0 + u(rng)});
      } else if (u(rng) < 0.15) {
        t.push_back({i, j, 0.02 + 0.08 * u(rng)});
      }
    }
  }
  // Chain each cluster so it is connected.
  for (std::size_t i = 0; i + 2 < n; ++i) t.push_back({i, i + 2, 1.0});
  if (truth) *truth = cl;
  return SparseMatrix::from_triplets(n, n, std::move(t));
}

/// Self-removing temporary directory.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("pgdcrnn_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;
  std::string file(const std::string &name) const { return (path_ / name).string(); }
  const std::filesystem::path &path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Points along a meridian, `miles` apart from the first, for distance tests.
inline std::vector<SensorMeta> meta_along_meridian(const std::vector<double> &miles) {
  std::vector<SensorMeta> out;
  for (std::size_t i = 0; i < miles.size(); ++i) {
    SensorMeta m;
    m.sensor_id = "N" + std::to_string(100 + i);
    m.latitude = 34.0 + miles[i] / 69.0934;  // 2*pi*3958.8/360 miles per degree
    m.longitude = -118.0;
    m.district = "D7";
    m.sensor_type = "loop";
    m.lane_type = "mainline";
    out.push_back(m);
  }
  return out;
}

}  // namespace testing_support
