#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "anae/checkpoint.hpp"
#include "anae/graph.hpp"
#include "anae/graph_ops.hpp"
#include "anae/optim.hpp"
#include "anae/rng.hpp"
#include "anae/tape.hpp"

namespace anae {

enum class Aggregation { attention, gcn };
enum class DecoderKind { graph, mlp, structure };
enum class HeadCombine { concat, average };
enum class Activation { elu, identity };

NLOHMANN_JSON_SERIALIZE_ENUM(Aggregation, {{Aggregation::attention, "attention"}, {Aggregation::gcn, "gcn"}})
NLOHMANN_JSON_SERIALIZE_ENUM(DecoderKind, {{DecoderKind::graph, "graph"},
                                           {DecoderKind::mlp, "mlp"},
                                           {DecoderKind::structure, "structure"}})

/// Hyperparameters. Defaults are the published setup: encoder 128 (8 heads,
/// concat) -> 64 (1 head, average); decoder mirrors it back to the attribute
/// width; dropout 0.5, λ = 5e-4, Adam lr 0.001, LeakyReLU slope 0.2.
struct ModelConfig {
  std::vector<int> encoder_dims{128, 64};
  std::vector<int> encoder_heads{8, 1};
  std::vector<int> decoder_heads{8, 1};
  double dropout = 0.5;
  double lambda = 5e-4;
  double lr = 0.001;
  double leaky_slope = 0.2;
  Aggregation aggregation = Aggregation::attention;
  DecoderKind decoder = DecoderKind::graph;
  int epochs = 200;
  int patience = 30;
  std::uint64_t seed = 0;
  bool minibatch = false;
  int fanout = 10;
  int batch_size = 256;
  bool normalize_features = false;

  // Mirror of the encoder widths ending at the attribute width d.
  std::vector<int> decoder_dims(Index num_features) const {
    std::vector<int> dims(encoder_dims.rbegin() + 1, encoder_dims.rend());
    dims.push_back(static_cast<int>(num_features));
    return dims;
  }

  void validate() const {
    if (encoder_dims.empty() || encoder_dims.size() != encoder_heads.size())
      throw std::invalid_argument("encoder dims and heads must be non-empty and of equal length");
    if (decoder_heads.size() != encoder_dims.size())
      throw std::invalid_argument("decoder must have as many layers as the encoder");
    for (std::size_t l = 0; l < encoder_dims.size(); ++l) {
      if (encoder_dims[l] < 1 || encoder_heads[l] < 1) throw std::invalid_argument("dims and heads must be >= 1");
      if (l + 1 < encoder_dims.size() && encoder_dims[l] % encoder_heads[l] != 0)
        throw std::invalid_argument("hidden width " + std::to_string(encoder_dims[l]) + " not divisible by " +
                                    std::to_string(encoder_heads[l]) + " heads");
    }
    for (std::size_t l = 0; l + 1 < decoder_heads.size(); ++l) {
      const int width = encoder_dims[encoder_dims.size() - 2 - l];
      if (decoder_heads[l] < 1 || width % decoder_heads[l] != 0)
        throw std::invalid_argument("decoder hidden width " + std::to_string(width) + " not divisible by heads");
    }
    if (decoder_heads.back() < 1) throw std::invalid_argument("heads must be >= 1");
    if (!(dropout >= 0 && dropout < 1)) throw std::invalid_argument("dropout must be in [0, 1)");
    if (lambda < 0 || lr <= 0) throw std::invalid_argument("lambda must be >= 0 and lr > 0");
    if (epochs < 1 || patience < 1) throw std::invalid_argument("epochs and patience must be >= 1");
    if (minibatch && (fanout < 1 || batch_size < 1)) throw std::invalid_argument("fanout and batch size must be >= 1");
    if (minibatch && decoder == DecoderKind::structure)
      throw std::invalid_argument("minibatch training supports the graph and mlp decoders only");
  }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"encoder_dims", c.encoder_dims}, {"encoder_heads", c.encoder_heads}, {"decoder_heads", c.decoder_heads},
       {"dropout", c.dropout},           {"lambda", c.lambda},               {"lr", c.lr},
       {"leaky_slope", c.leaky_slope},   {"aggregation", c.aggregation},     {"decoder", c.decoder},
       {"epochs", c.epochs},             {"patience", c.patience},           {"seed", c.seed},
       {"minibatch", c.minibatch},       {"fanout", c.fanout},               {"batch_size", c.batch_size},
       {"normalize_features", c.normalize_features}};
}

// Missing keys keep their defaults.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  auto opt = [&](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  opt("encoder_dims", c.encoder_dims);
  opt("encoder_heads", c.encoder_heads);
  opt("decoder_heads", c.decoder_heads);
  opt("dropout", c.dropout);
  opt("lambda", c.lambda);
  opt("lr", c.lr);
  opt("leaky_slope", c.leaky_slope);
  opt("aggregation", c.aggregation);
  opt("decoder", c.decoder);
  opt("epochs", c.epochs);
  opt("patience", c.patience);
  opt("seed", c.seed);
  opt("minibatch", c.minibatch);
  opt("fanout", c.fanout);
  opt("batch_size", c.batch_size);
  opt("normalize_features", c.normalize_features);
}

/// One attention (or fully connected) layer. `weight` stacks the K per-head
/// transforms row-wise; `attn` holds one [target ‖ neighbor] vector per head.
struct LayerParams {
  Parameter weight;
  Parameter attn;  // empty for gcn aggregation and dense layers
  int heads = 1;
  HeadCombine combine = HeadCombine::concat;
  Activation activation = Activation::elu;

  bool has_attention() const { return attn.value.size() > 0; }
  Index head_width() const { return weight.value.rows() / heads; }
};

/// Per-edge coefficients aligned with a graph's CSR entries; column k is head k.
struct AttentionCoefficients {
  Matrix values;
};

struct ForwardOptions {
  Aggregation aggregation = Aggregation::attention;
  double dropout = 0.0;
  double leaky_slope = 0.2;
  bool training = false;
};

/// Differentiable α for every block edge and head: LeakyReLU of the two-part
/// attention score, softmax-normalized over each target's neighborhood.
inline Var attention_coeffs(Var wh, Var attn, const Block& blk, int heads, double slope) {
  Var dst = head_scores(slice_rows(wh, static_cast<Index>(blk.num_dst)), attn, heads, false);
  Var src = head_scores(wh, attn, heads, true);
  return segment_softmax(leaky_relu(edge_logits(dst, src, blk), slope), blk.row_offsets);
}

/// out_i = σ(Σ_{j∈N(i)} α_ij W h_j) per head, heads concatenated or averaged.
/// Dropout hits the layer input and the coefficients.
inline Var attn_layer_forward(Var h, const Block& blk, LayerParams& layer, const ForwardOptions& opt, Rng& rng) {
  Tape& t = h.tape();
  if (h.cols() != layer.weight.value.cols())
    throw DimensionError("layer input has " + std::to_string(h.cols()) + " columns, weight expects " +
                         std::to_string(layer.weight.value.cols()));
  if (static_cast<std::size_t>(h.rows()) != blk.num_src) throw DimensionError("layer input rows do not match block");
  Var x = dropout(h, opt.dropout, opt.training, rng);
  Var wh = matmul_nt(x, t.parameter(layer.weight));
  Var alpha;
  if (opt.aggregation == Aggregation::attention) {
    if (!layer.has_attention()) throw std::logic_error("attention aggregation on a layer without attention weights");
    alpha = attention_coeffs(wh, t.parameter(layer.attn), blk, layer.heads, opt.leaky_slope);
  } else {
    alpha = t.constant(gcn_coefficients(blk, layer.heads));
  }
  alpha = dropout(alpha, opt.dropout, opt.training, rng);
  Var out = aggregate(alpha, wh, blk);
  if (layer.combine == HeadCombine::average) out = head_mean(out, layer.heads);
  return layer.activation == Activation::elu ? elu(out) : out;
}

inline Var dense_layer_forward(Var h, LayerParams& layer, const ForwardOptions& opt, Rng& rng) {
  Tape& t = h.tape();
  Var out = matmul_nt(dropout(h, opt.dropout, opt.training, rng), t.parameter(layer.weight));
  return layer.activation == Activation::elu ? elu(out) : out;
}

/// The attributed-network auto-encoder: stacked attention encoder producing Z,
/// and one of three decoders (mirrored attention layers, two dense layers, or
/// the inner-product structure decoder of the GAE baseline).
class AnaeModel {
 public:
  AnaeModel(ModelConfig config, Index num_features) : config_(std::move(config)), num_features_(num_features) {
    config_.validate();
    Rng rng(mix_seed(config_.seed, 100));
    const bool attention = config_.aggregation == Aggregation::attention;
    Index in = num_features;
    const std::size_t depth = config_.encoder_dims.size();
    for (std::size_t l = 0; l < depth; ++l) {
      const bool last = l + 1 == depth;
      encoder_.push_back(make_layer("encoder." + std::to_string(l), in, config_.encoder_dims[l],
                                    config_.encoder_heads[l], last ? HeadCombine::average : HeadCombine::concat,
                                    last ? Activation::identity : Activation::elu, attention, rng));
      in = config_.encoder_dims[l];
    }
    if (config_.decoder == DecoderKind::structure) return;
    const auto dims = config_.decoder_dims(num_features);
    for (std::size_t l = 0; l < dims.size(); ++l) {
      const bool last = l + 1 == dims.size();
      if (config_.decoder == DecoderKind::graph) {
        decoder_.push_back(make_layer("decoder." + std::to_string(l), in, dims[l], config_.decoder_heads[l],
                                      last ? HeadCombine::average : HeadCombine::concat,
                                      last ? Activation::identity : Activation::elu, attention, rng));
      } else {
        decoder_.push_back(make_layer("decoder." + std::to_string(l), in, dims[l], 1, HeadCombine::concat,
                                      last ? Activation::identity : Activation::elu, false, rng));
      }
      in = dims[l];
    }
  }

  const ModelConfig& config() const { return config_; }
  Index num_features() const { return num_features_; }
  Index embedding_dim() const { return config_.encoder_dims.back(); }
  std::size_t num_encoder_layers() const { return encoder_.size(); }
  std::size_t num_decoder_layers() const { return decoder_.size(); }
  LayerParams& encoder_layer(std::size_t l) { return encoder_.at(l); }
  LayerParams& decoder_layer(std::size_t l) { return decoder_.at(l); }

  // Blocks needed by the decoder (0 for mlp/structure).
  std::size_t decoder_graph_layers() const { return config_.decoder == DecoderKind::graph ? decoder_.size() : 0; }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for (auto* layers : {&encoder_, &decoder_})
      for (auto& layer : *layers) {
        out.push_back(&layer.weight);
        if (layer.has_attention()) out.push_back(&layer.attn);
      }
    return out;
  }

  void zero_grad() {
    for (Parameter* p : parameters()) p->zero_grad();
  }

  std::vector<NamedMatrix> state() {
    std::vector<NamedMatrix> out;
    for (Parameter* p : parameters()) out.push_back({p->name, p->value});
    return out;
  }

  void load_state(const std::vector<NamedMatrix>& state) {
    auto params = parameters();
    if (state.size() != params.size())
      throw DimensionError("checkpoint has " + std::to_string(state.size()) + " tensors, model expects " +
                           std::to_string(params.size()));
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (state[k].name != params[k]->name || state[k].value.rows() != params[k]->value.rows() ||
          state[k].value.cols() != params[k]->value.cols())
        throw DimensionError("checkpoint tensor '" + state[k].name + "' does not match '" + params[k]->name + "'");
      params[k]->value = state[k].value;
    }
  }

  ForwardOptions forward_options(bool training) const {
    return {config_.aggregation, config_.dropout, config_.leaky_slope, training};
  }

  /// `blocks` has one entry per encoder layer, outermost first.
  Var encode(Var x, std::span<const Block> blocks, bool training, Rng& rng) {
    if (blocks.size() != encoder_.size()) throw std::invalid_argument("encode: one block per encoder layer required");
    const auto opt = forward_options(training);
    Var h = x;
    for (std::size_t l = 0; l < encoder_.size(); ++l) h = attn_layer_forward(h, blocks[l], encoder_[l], opt, rng);
    return h;
  }

  /// Graph decoder consumes one block per layer; the mlp decoder ignores blocks.
  Var decode(Var z, std::span<const Block> blocks, bool training, Rng& rng) {
    const auto opt = forward_options(training);
    Var h = z;
    switch (config_.decoder) {
      case DecoderKind::graph:
        if (blocks.size() != decoder_.size()) throw std::invalid_argument("decode: one block per decoder layer required");
        for (std::size_t l = 0; l < decoder_.size(); ++l) h = attn_layer_forward(h, blocks[l], decoder_[l], opt, rng);
        return h;
      case DecoderKind::mlp:
        for (auto& layer : decoder_) h = dense_layer_forward(h, layer, opt, rng);
        return h;
      case DecoderKind::structure:
        break;
    }
    throw std::logic_error("the structure decoder scores node pairs; use decode_structure");
  }

  /// Eval-mode embeddings Z over a self-looped graph.
  Matrix embed(const SparseGraph& g, const Matrix& x) {
    Tape tape;
    Rng rng(0);
    std::vector<Block> blocks(encoder_.size(), full_block(g));
    return encode(tape.constant(x), blocks, false, rng).value();
  }

  /// Eval-mode reconstruction X′.
  Matrix reconstruct(const SparseGraph& g, const Matrix& x) {
    Tape tape;
    Rng rng(0);
    std::vector<Block> blocks(encoder_.size(), full_block(g));
    Var z = encode(tape.constant(x), blocks, false, rng);
    std::vector<Block> dblocks(decoder_graph_layers(), full_block(g));
    return decode(z, dblocks, false, rng).value();
  }

  /// α of one encoder/decoder layer given that layer's input h (eval mode).
  AttentionCoefficients attention_coefficients(const SparseGraph& g, const Matrix& h, const LayerParams& layer) const {
    Tape tape;
    Block blk = full_block(g);
    if (config_.aggregation == Aggregation::gcn || !layer.has_attention()) return {gcn_coefficients(blk, layer.heads)};
    Var wh = matmul_nt(tape.constant(h), tape.constant(layer.weight.value));
    return {attention_coeffs(wh, tape.constant(layer.attn.value), blk, layer.heads, config_.leaky_slope).value()};
  }

 private:
  static LayerParams make_layer(const std::string& name, Index in, int dim, int heads, HeadCombine combine,
                                Activation act, bool attention, Rng& rng) {
    LayerParams layer;
    layer.heads = heads;
    layer.combine = combine;
    layer.activation = act;
    const Index per_head = combine == HeadCombine::concat ? dim / heads : dim;
    const Index rows = per_head * heads;
    Matrix w(rows, in);
    for (int k = 0; k < heads; ++k) w.middleRows(k * per_head, per_head) = glorot_init(per_head, in, rng);
    layer.weight = Parameter(name + ".weight", std::move(w));
    if (attention) {
      Matrix a(heads, 2 * per_head);
      for (int k = 0; k < heads; ++k) a.row(k) = glorot_init(2 * per_head, 1, rng).transpose();
      layer.attn = Parameter(name + ".attention", std::move(a));
    }
    return layer;
  }

  ModelConfig config_;
  Index num_features_;
  std::vector<LayerParams> encoder_;
  std::vector<LayerParams> decoder_;
};

/// L_c = ‖X − X′‖²_F, summed without averaging.
inline Var reconstruction_loss(Var reconstructed, const Matrix& target) { return squared_error(reconstructed, target); }

inline double reconstruction_loss(const Matrix& x, const Matrix& reconstructed) {
  if (x.rows() != reconstructed.rows() || x.cols() != reconstructed.cols())
    throw DimensionError("reconstruction_loss: shapes differ");
  return (x - reconstructed).squaredNorm();
}

/// Structure decoder: logits Z_i·Z_j for each pair (p_ij = sigmoid of these).
inline Var decode_structure(Var z, const std::vector<Edge>& pairs) { return pair_dots(z, pairs); }

inline double edge_probability(const Matrix& z, std::size_t i, std::size_t j) {
  return 1.0 / (1.0 + std::exp(-z.row(static_cast<Index>(i)).dot(z.row(static_cast<Index>(j)))));
}

/// Full-graph objective L_c + λΣ‖W‖² on a self-looped graph. When `rows` is
/// non-empty only those nodes' reconstructions enter L_c.
inline Var reconstruction_objective(Tape& tape, AnaeModel& model, const SparseGraph& g, const Matrix& x,
                                    bool training, Rng& rng, const std::vector<std::size_t>& rows = {}) {
  std::vector<Block> eblocks(model.num_encoder_layers(), full_block(g));
  std::vector<Block> dblocks(model.decoder_graph_layers(), full_block(g));
  Var z = model.encode(tape.constant(x), eblocks, training, rng);
  Var xr = model.decode(z, dblocks, training, rng);
  Var loss;
  if (rows.empty()) {
    loss = reconstruction_loss(xr, x);
  } else {
    Matrix target(static_cast<Index>(rows.size()), x.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) target.row(static_cast<Index>(r)) = x.row(static_cast<Index>(rows[r]));
    loss = reconstruction_loss(gather_rows(xr, rows), target);
  }
  auto params = model.parameters();
  return add(loss, l2_penalty(tape, params, model.config().lambda));
}

/// Structure-decoder objective: mean BCE over positive pairs plus mean BCE
/// over negative pairs (balanced classes), plus the L2 term.
inline Var structure_objective(Tape& tape, AnaeModel& model, const SparseGraph& g, const Matrix& x,
                               const std::vector<Edge>& positives, const std::vector<Edge>& negatives,
                               bool training, Rng& rng) {
  if (positives.empty() || negatives.empty()) throw std::invalid_argument("structure objective needs both pair kinds");
  std::vector<Block> eblocks(model.num_encoder_layers(), full_block(g));
  Var z = model.encode(tape.constant(x), eblocks, training, rng);
  std::vector<Edge> pairs = positives;
  pairs.insert(pairs.end(), negatives.begin(), negatives.end());
  std::vector<double> labels(pairs.size(), 0.0), weights(pairs.size());
  for (std::size_t p = 0; p < positives.size(); ++p) {
    labels[p] = 1.0;
    weights[p] = 1.0 / static_cast<double>(positives.size());
  }
  for (std::size_t p = positives.size(); p < pairs.size(); ++p) weights[p] = 1.0 / static_cast<double>(negatives.size());
  Var loss = weighted_bce_with_logits(decode_structure(z, pairs), std::move(labels), std::move(weights));
  auto params = model.parameters();
  return add(loss, l2_penalty(tape, params, model.config().lambda));
}

}  // namespace anae
