#include "pgdcrnn/model.hpp"

#include <cmath>

#include "pgdcrnn/error.hpp"

namespace pgdcrnn {

const char *to_string(FilterType f) {
  return f == FilterType::kRandomWalk ? "random_walk" : "dual_random_walk";
}

FilterType filter_type_from_string(const std::string &s) {
  if (s == "random_walk") return FilterType::kRandomWalk;
  if (s == "dual_random_walk") return FilterType::kDualRandomWalk;
  throw_config("filter_type must be 'random_walk' or 'dual_random_walk', got '" + s + "'");
}

const char *to_string(ReverseTransition r) {
  return r == ReverseTransition::kTranspose ? "transpose" : "literal";
}

ReverseTransition reverse_transition_from_string(const std::string &s) {
  if (s == "transpose") return ReverseTransition::kTranspose;
  if (s == "literal") return ReverseTransition::kLiteral;
  throw_config("reverse_transition must be 'transpose' or 'literal', got '" + s + "'");
}

DiffusionSupports build_supports(const SparseMatrix &adjacency, FilterType filter,
                                 ReverseTransition reverse) {
  if (adjacency.rows() == 0 || adjacency.rows() != adjacency.cols()) {
    throw_config("build_supports: adjacency must be square and nonempty");
  }
  DiffusionSupports s;
  s.filter = filter;
  s.forward = adjacency.row_normalized();
  s.forward_t = s.forward.transpose();
  if (reverse == ReverseTransition::kTranspose) {
    s.reverse = adjacency.transpose().row_normalized();
  } else {
    // Row i of A divided by the in-degree of node i.
    const SparseMatrix at = adjacency.transpose();
    std::vector<double> in_degree(adjacency.rows(), 0.0);
    for (const auto &t : at.triplets()) in_degree[t.row] += t.value;
    std::vector<Triplet> scaled;
    for (const auto &t : adjacency.triplets()) {
      if (in_degree[t.row] > 0.0) scaled.push_back({t.row, t.col, t.value / in_degree[t.row]});
    }
    s.reverse = SparseMatrix::from_triplets(adjacency.rows(), adjacency.cols(), std::move(scaled));
  }
  s.reverse_t = s.reverse.transpose();
  return s;
}

DiffusionSupports build_supports(const SensorGraph &graph, FilterType filter,
                                 ReverseTransition reverse) {
  return build_supports(graph.adjacency, filter, reverse);
}

void Seq2SeqConfig::validate() const {
  if (look_back < 1 || horizon < 1) throw_config("look_back and horizon must be >= 1");
  if (input_dim < 1 || input_dim > 2 || output_dim < 1 || output_dim > 2) {
    throw_config("input_dim and output_dim must be 1 or 2");
  }
  if (layers < 1 || units < 1 || diffusion_steps < 1) {
    throw_config("layers, units and diffusion_steps must be >= 1");
  }
}

void ParameterSet::add(std::string name, Tensor value) {
  for (const auto &e : entries_) {
    if (e.name == name) throw_config("duplicate parameter '" + name + "'");
  }
  entries_.push_back({std::move(name), std::move(value)});
}

std::size_t ParameterSet::find(const std::string &name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw_config("unknown parameter '" + name + "'");
}

std::vector<Tensor> ParameterSet::values() const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto &e : entries_) out.push_back(e.value);
  return out;
}

void ParameterSet::set_values(std::vector<Tensor> values) {
  if (values.size() != entries_.size()) throw_config("parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].shape() != entries_[i].value.shape()) {
      throw_config("shape mismatch for parameter '" + entries_[i].name + "'");
    }
    entries_[i].value = std::move(values[i]);
  }
}

std::size_t ParameterSet::element_count() const {
  std::size_t n = 0;
  for (const auto &e : entries_) n += e.value.size();
  return n;
}

bool operator==(const ParameterSet &a, const ParameterSet &b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].name != b[i].name || !(a[i].value == b[i].value)) return false;
  }
  return true;
}

std::string filter_block_name(const std::string &stack, std::size_t layer, char gate,
                              std::size_t d, std::size_t dir) {
  return stack + ".l" + std::to_string(layer) + "." + gate + ".W.d" + std::to_string(d) +
         (dir == 0 ? ".O" : ".I");
}

std::string bias_name(const std::string &stack, std::size_t layer, char gate) {
  return stack + ".l" + std::to_string(layer) + "." + gate + ".b";
}

namespace {

constexpr char kGates[] = {'r', 'u', 'c'};

std::size_t n_directions(FilterType f) { return f == FilterType::kRandomWalk ? 1 : 2; }

std::size_t layer_input_dim(const Seq2SeqConfig &c, bool decoder, std::size_t layer) {
  if (layer > 0) return c.units;
  return decoder ? c.output_dim : c.input_dim;
}

}  // namespace

ParameterSet init_parameters(const Seq2SeqConfig &config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto uniform_block = [&](std::size_t rows, std::size_t cols) {
    const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-r, r);
    Tensor t({rows, cols});
    for (double &v : t.values()) v = dist(rng);
    return t;
  };
  ParameterSet p;
  const std::size_t dirs = n_directions(config.filter);
  for (const char *stack : {"enc", "dec"}) {
    const bool decoder = std::string(stack) == "dec";
    for (std::size_t l = 0; l < config.layers; ++l) {
      const std::size_t in = layer_input_dim(config, decoder, l) + config.units;
      for (char g : kGates) {
        for (std::size_t dir = 0; dir < dirs; ++dir) {
          for (std::size_t d = 0; d < config.diffusion_steps; ++d) {
            p.add(filter_block_name(stack, l, g, d, dir), uniform_block(in, config.units));
          }
        }
        p.add(bias_name(stack, l, g), Tensor({config.units}, g == 'c' ? 0.0 : 1.0));
      }
    }
  }
  p.add("proj.W", uniform_block(config.units, config.output_dim));
  p.add("proj.b", Tensor({config.output_dim}, 0.0));
  return p;
}

BoundParameters bind_parameters(Tape &tape, const ParameterSet &params,
                                const Seq2SeqConfig &config, bool trainable) {
  BoundParameters b;
  for (const auto &e : params) {
    b.vars.push_back(trainable ? tape.variable(e.value) : tape.constant(e.value));
  }
  const std::size_t dirs = n_directions(config.filter);
  for (const char *stack : {"enc", "dec"}) {
    const bool decoder = std::string(stack) == "dec";
    auto &layers = decoder ? b.decoder : b.encoder;
    for (std::size_t l = 0; l < config.layers; ++l) {
      BoundParameters::Layer layer;
      layer.input_dim = layer_input_dim(config, decoder, l);
      for (char g : kGates) {
        std::vector<Var> blocks;
        for (std::size_t dir = 0; dir < dirs; ++dir) {
          for (std::size_t d = 0; d < config.diffusion_steps; ++d) {
            blocks.push_back(b.vars[params.find(filter_block_name(stack, l, g, d, dir))]);
          }
        }
        BoundParameters::Gate gate{blocks.size() == 1 ? blocks[0] : ops::concat_rows(tape, blocks),
                                   b.vars[params.find(bias_name(stack, l, g))]};
        (g == 'r' ? layer.r : g == 'u' ? layer.u : layer.c) = gate;
      }
      layers.push_back(layer);
    }
  }
  b.proj_w = b.vars[params.find("proj.W")];
  b.proj_b = b.vars[params.find("proj.b")];
  return b;
}

Var diffusion_terms(Tape &tape, const DiffusionSupports &supports, Var z,
                    std::size_t diffusion_steps) {
  std::vector<Var> terms;
  for (std::size_t dir = 0; dir < supports.n_directions(); ++dir) {
    Var x = z;
    terms.push_back(x);
    for (std::size_t d = 1; d < diffusion_steps; ++d) {
      x = ops::spmm(tape, supports.matrix(dir), supports.matrix_t(dir), x);
      terms.push_back(x);
    }
  }
  return terms.size() == 1 ? terms[0] : ops::concat_cols(tape, terms);
}

Var diffusion_conv(Tape &tape, const DiffusionSupports &supports, Var z, Var stacked_filter,
                   Var bias, std::size_t diffusion_steps) {
  const Var terms = diffusion_terms(tape, supports, z, diffusion_steps);
  return ops::add_bias(tape, ops::matmul(tape, terms, stacked_filter), bias);
}

Var dcgru_cell(Tape &tape, const DiffusionSupports &supports, Var x, Var h_prev,
               const BoundParameters::Layer &layer, std::size_t diffusion_steps) {
  // Reset and update gates see the same input, so they share diffusion terms.
  const Var xh = ops::concat_cols(tape, {x, h_prev});
  const Var xh_terms = diffusion_terms(tape, supports, xh, diffusion_steps);
  const Var r = ops::sigmoid(
      tape, ops::add_bias(tape, ops::matmul(tape, xh_terms, layer.r.filter), layer.r.bias));
  const Var u = ops::sigmoid(
      tape, ops::add_bias(tape, ops::matmul(tape, xh_terms, layer.u.filter), layer.u.bias));
  const Var xrh = ops::concat_cols(tape, {x, ops::hadamard(tape, r, h_prev)});
  const Var c = ops::tanh(tape, diffusion_conv(tape, supports, xrh, layer.c.filter,
                                               layer.c.bias, diffusion_steps));
  const Var h = ops::add(tape, ops::hadamard(tape, u, h_prev),
                         ops::hadamard(tape, ops::one_minus(tape, u), c));
  if (!tape.value(h).all_finite()) throw_numerical("numerical divergence");
  return h;
}

namespace {

std::vector<Var> step_stack(Tape &tape, const DiffusionSupports &supports, Var input,
                            std::vector<Var> &states,
                            const std::vector<BoundParameters::Layer> &layers,
                            std::size_t diffusion_steps) {
  Var x = input;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    states[l] = dcgru_cell(tape, supports, x, states[l], layers[l], diffusion_steps);
    x = states[l];
  }
  return states;
}

}  // namespace

std::vector<Var> encode(Tape &tape, const DiffusionSupports &supports,
                        const std::vector<Var> &inputs, const BoundParameters &params,
                        const Seq2SeqConfig &config, std::size_t batch) {
  if (inputs.size() != config.look_back) {
    throw_config("encode: expected " + std::to_string(config.look_back) + " input frames, got " +
                 std::to_string(inputs.size()));
  }
  const std::size_t rows = supports.n_nodes() * batch;
  std::vector<Var> states;
  for (std::size_t l = 0; l < config.layers; ++l) {
    states.push_back(tape.constant(Tensor({rows, config.units})));
  }
  for (Var x : inputs) {
    const Tensor &xv = tape.value(x);
    if (xv.rows() != rows || xv.cols() != config.input_dim) {
      throw_config("encode: input frame shape " + shape_string(xv.shape()) + " does not match");
    }
    step_stack(tape, supports, x, states, params.encoder, config.diffusion_steps);
  }
  return states;
}

std::vector<Var> decode(Tape &tape, const DiffusionSupports &supports,
                        std::vector<Var> states, const std::vector<Var> &targets,
                        const BoundParameters &params, const Seq2SeqConfig &config,
                        std::size_t batch, double sampling_prob, std::mt19937_64 &rng,
                        std::vector<bool> *used_truth) {
  if (sampling_prob > 0.0 && targets.size() != config.horizon) {
    throw_config("decode: targets required when sampling probability > 0");
  }
  const std::size_t rows = supports.n_nodes() * batch;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Var input = tape.constant(Tensor({rows, config.output_dim}));
  std::vector<Var> predictions;
  for (std::size_t t = 0; t < config.horizon; ++t) {
    step_stack(tape, supports, input, states, params.decoder, config.diffusion_steps);
    const Var out =
        ops::add_bias(tape, ops::matmul(tape, states.back(), params.proj_w), params.proj_b);
    predictions.push_back(out);
    if (t + 1 == config.horizon) break;
    const bool truth = coin(rng) < sampling_prob;
    if (used_truth) used_truth->push_back(truth);
    input = truth ? targets[t] : out;
  }
  return predictions;
}

std::vector<Var> forward(Tape &tape, const DiffusionSupports &supports,
                         const std::vector<Var> &inputs, const std::vector<Var> &targets,
                         const BoundParameters &params, const Seq2SeqConfig &config,
                         std::size_t batch, double sampling_prob, std::mt19937_64 &rng) {
  auto states = encode(tape, supports, inputs, params, config, batch);
  return decode(tape, supports, std::move(states), targets, params, config, batch,
                sampling_prob, rng);
}

Var loss_mae(Tape &tape, const std::vector<Var> &pred, const std::vector<Var> &target) {
  if (pred.size() != target.size() || pred.empty()) throw_config("loss_mae: frame count mismatch");
  const Var p = pred.size() == 1 ? pred[0] : ops::concat_rows(tape, pred);
  const Var t = target.size() == 1 ? target[0] : ops::concat_rows(tape, target);
  return ops::mean_abs_error(tape, p, t);
}

Var loss_multi(Tape &tape, const std::vector<Var> &pred, const std::vector<Var> &target) {
  if (pred.size() != target.size() || pred.empty()) {
    throw_config("loss_multi: frame count mismatch");
  }
  const Var p = pred.size() == 1 ? pred[0] : ops::concat_rows(tape, pred);
  const Var t = target.size() == 1 ? target[0] : ops::concat_rows(tape, target);
  const std::size_t q = tape.value(p).cols();
  if (q == 1) return ops::mean_abs_error(tape, p, t);
  Var total;
  for (std::size_t f = 0; f < q; ++f) {
    const Var mae = ops::mean_abs_error(tape, ops::slice_cols(tape, p, f, f + 1),
                                        ops::slice_cols(tape, t, f, f + 1));
    total = f == 0 ? mae : ops::add(tape, total, mae);
  }
  return total;
}

double loss_mae(const Tensor &pred, const Tensor &target) {
  if (pred.shape() != target.shape() || pred.empty()) throw_config("loss_mae: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred[i] - target[i]);
  return sum / static_cast<double>(pred.size());
}

double loss_multi(const Tensor &pred, const Tensor &target) {
  if (pred.shape() != target.shape() || pred.empty()) throw_config("loss_multi: shape mismatch");
  const std::size_t q = pred.shape().back();
  const std::size_t rows = pred.size() / q;
  double total = 0.0;
  for (std::size_t f = 0; f < q; ++f) {
    double sum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) sum += std::abs(pred[r * q + f] - target[r * q + f]);
    total += sum / static_cast<double>(rows);
  }
  return total;
}

double sampling_probability(std::uint64_t iteration, double tau) {
  if (!(tau > 0.0)) throw_config("sampling tau must be positive");
  return tau / (tau + std::exp(static_cast<double>(iteration) / tau));
}

}  // namespace pgdcrnn
