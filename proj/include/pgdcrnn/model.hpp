#pragma once

// Diffusion-convolutional GRU encoder-decoder.
//
// Batched activations use node-major rows: row (node * batch + b) holds the
// features of batch element b at that node, so a [N*B x C] activation is
// also a [N x B*C] matrix and one spmm diffuses the whole batch.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pgdcrnn/graph.hpp"
#include "pgdcrnn/sparse.hpp"
#include "pgdcrnn/tape.hpp"

namespace pgdcrnn {

enum class FilterType { kRandomWalk, kDualRandomWalk };

/// How the reverse transition matrix is formed.
enum class ReverseTransition {
  kTranspose,  // D_I^-1 A^T: a random walk on the reversed edges
  kLiteral,    // D_I^-1 A: rows of A scaled by in-degree
};

const char *to_string(FilterType f);
FilterType filter_type_from_string(const std::string &s);
const char *to_string(ReverseTransition r);
ReverseTransition reverse_transition_from_string(const std::string &s);

struct DiffusionSupports {
  SparseMatrix forward;  // D_O^-1 A
  SparseMatrix forward_t;
  SparseMatrix reverse;
  SparseMatrix reverse_t;
  FilterType filter = FilterType::kRandomWalk;

  std::size_t n_nodes() const noexcept { return forward.rows(); }
  /// Directions used by the filter: 1 for random walk, 2 for dual.
  std::size_t n_directions() const noexcept {
    return filter == FilterType::kRandomWalk ? 1 : 2;
  }
  const SparseMatrix &matrix(std::size_t dir) const { return dir == 0 ? forward : reverse; }
  const SparseMatrix &matrix_t(std::size_t dir) const { return dir == 0 ? forward_t : reverse_t; }
};

DiffusionSupports build_supports(const SparseMatrix &adjacency, FilterType filter,
                                 ReverseTransition reverse = ReverseTransition::kTranspose);
DiffusionSupports build_supports(const SensorGraph &graph, FilterType filter,
                                 ReverseTransition reverse = ReverseTransition::kTranspose);

struct Seq2SeqConfig {
  std::size_t input_dim = 1;   // P
  std::size_t output_dim = 1;  // Q
  std::size_t look_back = 12;  // T'
  std::size_t horizon = 12;    // T
  std::size_t layers = 2;
  std::size_t units = 16;
  std::size_t diffusion_steps = 2;  // K; terms d = 0 .. K-1
  FilterType filter = FilterType::kRandomWalk;
  ReverseTransition reverse = ReverseTransition::kTranspose;

  void validate() const;
  friend bool operator==(const Seq2SeqConfig &, const Seq2SeqConfig &) = default;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// Ordered, named parameter blocks.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  std::size_t size() const noexcept { return entries_.size(); }
  const NamedTensor &operator[](std::size_t i) const { return entries_[i]; }
  NamedTensor &operator[](std::size_t i) { return entries_[i]; }
  /// Index of `name`; throws if absent.
  std::size_t find(const std::string &name) const;
  const Tensor &get(const std::string &name) const { return entries_[find(name)].value; }
  Tensor &get(const std::string &name) { return entries_[find(name)].value; }
  std::vector<Tensor> values() const;
  void set_values(std::vector<Tensor> values);
  std::size_t element_count() const;

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  friend bool operator==(const ParameterSet &a, const ParameterSet &b);

 private:
  std::vector<NamedTensor> entries_;
};

/// Name of the filter block for a gate ('r', 'u', 'c') in a stack
/// ("enc"/"dec") at diffusion step d and direction dir (0 = O, 1 = I).
std::string filter_block_name(const std::string &stack, std::size_t layer, char gate,
                              std::size_t d, std::size_t dir);
std::string bias_name(const std::string &stack, std::size_t layer, char gate);

/// Builds every parameter block for `config`: filter blocks uniform in
/// [-r, r] with r = sqrt(6 / (fan_in + fan_out)), reset/update biases 1,
/// candidate and projection biases 0.
ParameterSet init_parameters(const Seq2SeqConfig &config, std::uint64_t seed);

/// Parameters recorded on a tape, with filter blocks pre-stacked per gate.
struct BoundParameters {
  struct Gate {
    Var filter;  // [(n_dir * K * (in + units)) x units]
    Var bias;
  };
  struct Layer {
    Gate r, u, c;
    std::size_t input_dim = 0;
  };
  std::vector<Var> vars;  // one per ParameterSet entry, same order
  std::vector<Layer> encoder;
  std::vector<Layer> decoder;
  Var proj_w;
  Var proj_b;
};

BoundParameters bind_parameters(Tape &tape, const ParameterSet &params,
                                const Seq2SeqConfig &config, bool trainable = true);

/// Diffusion terms of Z: for each direction, S^d Z for d = 0 .. K-1 (d = 0
/// is Z itself), concatenated column-wise in (direction, d) order.
Var diffusion_terms(Tape &tape, const DiffusionSupports &supports, Var z,
                    std::size_t diffusion_steps);

/// sum_d [S_fwd^d Z W_{d,O} + S_rev^d Z W_{d,I}] + b with the blocks stacked
/// in diffusion_terms order.
Var diffusion_conv(Tape &tape, const DiffusionSupports &supports, Var z, Var stacked_filter,
                   Var bias, std::size_t diffusion_steps);

/// One DCGRU step. Throws a numerical error on non-finite output.
Var dcgru_cell(Tape &tape, const DiffusionSupports &supports, Var x, Var h_prev,
               const BoundParameters::Layer &layer, std::size_t diffusion_steps);

/// Runs the encoder over `inputs` (length T', each [N*B x P]). Returns the
/// final hidden state of every layer.
std::vector<Var> encode(Tape &tape, const DiffusionSupports &supports,
                        const std::vector<Var> &inputs, const BoundParameters &params,
                        const Seq2SeqConfig &config, std::size_t batch);

/// Autoregressive decoder. Starts from a zero GO frame; before each later
/// step one draw from `rng` decides (with probability sampling_prob) whether
/// the next input is the ground-truth frame or the previous prediction.
/// `targets` may be empty only when sampling_prob == 0.
std::vector<Var> decode(Tape &tape, const DiffusionSupports &supports,
                        std::vector<Var> states, const std::vector<Var> &targets,
                        const BoundParameters &params, const Seq2SeqConfig &config,
                        std::size_t batch, double sampling_prob, std::mt19937_64 &rng,
                        std::vector<bool> *used_truth = nullptr);

/// Encoder then decoder; returns T prediction frames [N*B x Q].
std::vector<Var> forward(Tape &tape, const DiffusionSupports &supports,
                         const std::vector<Var> &inputs, const std::vector<Var> &targets,
                         const BoundParameters &params, const Seq2SeqConfig &config,
                         std::size_t batch, double sampling_prob, std::mt19937_64 &rng);

/// Mean absolute error over every element of every frame.
Var loss_mae(Tape &tape, const std::vector<Var> &pred, const std::vector<Var> &target);
/// Sum over output features of the per-feature mean absolute error.
Var loss_multi(Tape &tape, const std::vector<Var> &pred, const std::vector<Var> &target);

double loss_mae(const Tensor &pred, const Tensor &target);
/// Last dimension is the feature axis.
double loss_multi(const Tensor &pred, const Tensor &target);

/// Scheduled-sampling probability tau / (tau + exp(i / tau)).
double sampling_probability(std::uint64_t iteration, double tau);

}  // namespace pgdcrnn
