#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "anae/metrics.hpp"
#include "anae/model.hpp"
#include "anae/optim.hpp"
#include "anae/sampler.hpp"
#include "anae/split.hpp"

namespace anae {

struct EpochRecord {
  int epoch = 0;
  double loss = 0;
  double val_auc = std::numeric_limits<double>::quiet_NaN();  // NaN without a split
};

struct TrainResult {
  Matrix embedding;  // eval mode, from the selected parameters
  std::vector<EpochRecord> log;
  int best_epoch = 0;
  double best_val_auc = std::numeric_limits<double>::quiet_NaN();
  bool stopped_early = false;
};

inline void write_training_log(std::ostream& out, const std::vector<EpochRecord>& log) {
  out << "epoch,loss,val_auc\n";
  out.precision(17);
  for (const auto& r : log) {
    out << r.epoch << ',' << r.loss << ',';
    if (!std::isnan(r.val_auc)) out << r.val_auc;
    out << '\n';
  }
}

/// Validation AUC of inner-product scores from eval-mode embeddings.
inline double validation_auc(AnaeModel& model, const SparseGraph& g, const Matrix& x, const EdgeSplit& split) {
  Matrix z = model.embed(g, x);
  return auc(link_scores(z, split.val_pos, split.val_neg));
}

/// Minibatch objective: Σ_{i∈batch} ‖X_i − X′_i‖² + λΣ‖W‖² on a sampled
/// computation graph. `sampler` draws neighbors; `noise` drives dropout.
inline Var minibatch_objective(Tape& tape, AnaeModel& model, const SparseGraph& g, const Matrix& x,
                               std::span<const std::size_t> batch, int fanout, bool training, Rng& sampler,
                               Rng& noise) {
  const std::size_t enc_layers = model.num_encoder_layers();
  const std::size_t dec_layers = model.decoder_graph_layers();
  SampledBatch sb = sample_blocks(g, batch, static_cast<int>(enc_layers + dec_layers), fanout, sampler);
  const auto& inputs = sb.input_nodes();
  Matrix x_in(static_cast<Index>(inputs.size()), x.cols());
  for (std::size_t r = 0; r < inputs.size(); ++r) x_in.row(static_cast<Index>(r)) = x.row(static_cast<Index>(inputs[r]));
  std::span<const Block> blocks(sb.blocks);
  Var z = model.encode(tape.constant(std::move(x_in)), blocks.subspan(0, enc_layers), training, noise);
  Var xr = model.decode(z, blocks.subspan(enc_layers), training, noise);
  Matrix target(static_cast<Index>(batch.size()), x.cols());
  for (std::size_t r = 0; r < batch.size(); ++r) target.row(static_cast<Index>(r)) = x.row(static_cast<Index>(batch[r]));
  auto params = model.parameters();
  return add(reconstruction_loss(xr, target), l2_penalty(tape, params, model.config().lambda));
}

namespace detail {

// Shared epoch loop: one optimization pass per epoch via `run_epoch`, then
// optional validation with best-checkpoint tracking and early stopping.
inline TrainResult run_epochs(AnaeModel& model, const SparseGraph& g, const Matrix& x, const EdgeSplit* split,
                              const std::function<double(int)>& run_epoch) {
  const ModelConfig& cfg = model.config();
  const bool validate = split != nullptr && !split->val_pos.empty() && !split->val_neg.empty();
  TrainResult result;
  std::vector<NamedMatrix> best_state;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    double loss = 0;
    try {
      loss = run_epoch(epoch);
    } catch (const NumericalError& e) {
      std::ostringstream msg;
      msg << "non-finite values at epoch " << epoch << " (lr " << cfg.lr << "): " << e.what();
      throw NumericalError(msg.str());
    }
    if (!std::isfinite(loss)) {
      std::ostringstream msg;
      msg << "non-finite loss at epoch " << epoch << " (lr " << cfg.lr << ")";
      throw NumericalError(msg.str());
    }
    EpochRecord rec{epoch, loss, std::numeric_limits<double>::quiet_NaN()};
    if (validate) {
      rec.val_auc = validation_auc(model, g, x, *split);
      if (std::isnan(result.best_val_auc) || rec.val_auc > result.best_val_auc) {
        result.best_val_auc = rec.val_auc;
        result.best_epoch = epoch;
        best_state = model.state();
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        result.log.push_back(rec);
        result.stopped_early = true;
        break;
      }
    } else {
      result.best_epoch = epoch;
    }
    result.log.push_back(rec);
  }
  if (!best_state.empty()) model.load_state(best_state);
  result.embedding = model.embed(g, x);
  return result;
}

}  // namespace detail

/// Full-batch Adam on a self-looped training graph. With a split, validation
/// AUC picks the best epoch and drives early stopping; without one the final
/// parameters are kept.
inline TrainResult train(AnaeModel& model, const SparseGraph& g_train, const Matrix& x,
                         const EdgeSplit* split = nullptr) {
  const ModelConfig& cfg = model.config();
  if (!g_train.has_self_loops()) throw std::invalid_argument("train: graph must carry self-loops");
  if (x.rows() != static_cast<Index>(g_train.num_nodes) || x.cols() != model.num_features())
    throw DimensionError("train: attribute matrix does not match graph/model");
  Adam adam({cfg.lr});
  Rng noise(mix_seed(cfg.seed, 200));
  auto params = model.parameters();
  const std::vector<Edge> positives = g_train.undirected_edges();

  return detail::run_epochs(model, g_train, x, split, [&](int epoch) {
    Tape tape;
    model.zero_grad();
    Var loss;
    if (cfg.decoder == DecoderKind::structure) {
      auto negatives = sample_negative_edges(g_train, positives.size(), mix_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
      loss = structure_objective(tape, model, g_train, x, positives, negatives, true, noise);
    } else {
      loss = reconstruction_objective(tape, model, g_train, x, true, noise);
    }
    const double value = loss.value()(0, 0);
    tape.backward(loss);
    adam.step(params);
    return value;
  });
}

/// Sampled-neighborhood training: each epoch visits all nodes in shuffled
/// batches of `batch_size`, one Adam step per batch. The logged loss is the
/// sum of batch objectives.
inline TrainResult train_minibatch(AnaeModel& model, const SparseGraph& g_train, const Matrix& x,
                                   const EdgeSplit* split = nullptr) {
  const ModelConfig& cfg = model.config();
  if (cfg.batch_size < 1) throw std::invalid_argument("train_minibatch: batch size must be >= 1");
  if (cfg.fanout < 1) throw std::invalid_argument("train_minibatch: fanout must be >= 1");
  if (cfg.decoder == DecoderKind::structure) throw std::invalid_argument("train_minibatch: structure decoder unsupported");
  if (!g_train.has_self_loops()) throw std::invalid_argument("train_minibatch: graph must carry self-loops");
  Adam adam({cfg.lr});
  Rng noise(mix_seed(cfg.seed, 200));
  Rng sampler(mix_seed(cfg.seed, 300));
  auto params = model.parameters();
  std::vector<std::size_t> order(g_train.num_nodes);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  return detail::run_epochs(model, g_train, x, split, [&](int) {
    sampler.shuffle(order);
    double total = 0;
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::span<const std::size_t> batch(order.data() + start, std::min(bs, order.size() - start));
      Tape tape;
      model.zero_grad();
      Var loss = minibatch_objective(tape, model, g_train, x, batch, cfg.fanout, true, sampler, noise);
      total += loss.value()(0, 0);
      tape.backward(loss);
      adam.step(params);
    }
    return total;
  });
}

/// Dispatches on `config().minibatch`.
inline TrainResult fit(AnaeModel& model, const SparseGraph& g_train, const Matrix& x, const EdgeSplit* split = nullptr) {
  return model.config().minibatch ? train_minibatch(model, g_train, x, split) : train(model, g_train, x, split);
}

}  // namespace anae
