#pragma once

// Single-sample Adam training with linear learning-rate decay, JSON-lines
// logging and periodic checkpoints.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <functional>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sguie/checkpoint.hpp"
#include "sguie/dataset.hpp"
#include "sguie/errors.hpp"
#include "sguie/model.hpp"
#include "sguie/optim.hpp"

namespace sguie {

/// Non-finite loss during training.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  int epochs = 100;
  double lr0 = 1e-4;
  std::uint64_t seed = 0;
  double lambda_aux = 0.0;
  int checkpoint_every = 0;  // epochs between snapshots; 0 keeps only the final one
  HyperConfig hyper;
  bool zero_tail = true;     // start from E = I
  bool augment = true;
  std::size_t image_size = 256;
  AdamConfig adam;

  void validate() const {
    if (epochs < 0) throw UsageError("TrainConfig: epochs must be >= 0");
    if (!(lr0 > 0)) throw UsageError("TrainConfig: lr0 must be positive");
    if (lambda_aux < 0) throw UsageError("TrainConfig: lambda_aux must be >= 0");
    if (checkpoint_every < 0) throw UsageError("TrainConfig: checkpoint_every must be >= 0");
    hyper.validate();
  }

  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
      c.epochs = j.value("epochs", c.epochs);
      c.lr0 = j.value("lr", c.lr0);
      c.seed = j.value("seed", c.seed);
      c.lambda_aux = j.value("lambda_aux", c.lambda_aux);
      c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
      c.zero_tail = j.value("zero_tail", c.zero_tail);
      c.augment = j.value("augment", c.augment);
      c.image_size = j.value("image_size", c.image_size);
      if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        c.hyper.base_channels = h.value("base_channels", c.hyper.base_channels);
        c.hyper.reduction = h.value("reduction", c.hyper.reduction);
        c.hyper.rg_count = h.value("rg_count", c.hyper.rg_count);
        c.hyper.fab_per_rg = h.value("fab_per_rg", c.hyper.fab_per_rg);
        c.hyper.unet_depth = h.value("unet_depth", c.hyper.unet_depth);
        c.hyper.srm_stem_channels = h.value("srm_stem_channels", c.hyper.srm_stem_channels);
        c.hyper.unet_channels = h.value("unet_channels", c.hyper.unet_channels);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("train config: ") + e.what());
    }
    return c;
  }
};

struct IterationRecord {
  std::size_t iteration = 0;
  int epoch = 0;
  std::string sample;
  double loss = 0.0;
  double lr = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<IterationRecord> iterations;
  std::vector<EpochRecord> epochs;
};

/// Owns the model and performs one optimization step per sample.
template <typename T>
class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg) : cfg_(cfg), params_(SguieParams<T>::make(cfg.hyper)) {
    cfg_.validate();
    InitOptions init;
    init.seed = cfg.seed;
    init.zero_tail = cfg.zero_tail;
    initialize(params_, init);
  }

  Trainer(const TrainConfig& cfg, SguieParams<T> params) : cfg_(cfg), params_(std::move(params)) {
    cfg_.validate();
    if (!(params_.config == cfg_.hyper)) throw UsageError("Trainer: model hyperconfig differs from the training config");
  }

  SguieParams<T>& params() { return params_; }
  const TrainConfig& config() const { return cfg_; }
  std::size_t steps() const { return steps_; }

  /// Forward, loss, backward, Adam update at `lr`. Returns the loss before the
  /// update. Throws DivergenceError (parameters untouched) on a non-finite loss.
  double step(const Tensor<T>& raw, std::span<const SemanticRegion> regions, const Tensor<T>& reference, double lr,
              const std::string& sample_id = "") {
    for (auto* p : params_.parameters()) {
      if (!p->value.has_grad()) continue;
      for (T g : p->value.grad()) {
        if (g != T(0)) throw UsageError("Trainer::step: gradient buffers not zero at iteration start");
      }
    }
    Tape<T> tape;
    const auto fwd = sguie_forward(tape, raw, regions, params_, Mode::Train);
    const Tensor<T> loss = training_loss(tape, fwd, reference, cfg_.lambda_aux);
    const double value = static_cast<double>(loss.item());
    tape.backward(loss);
    if (!std::isfinite(value)) {
      double max_grad = 0.0;
      for (auto* p : params_.parameters()) {
        for (T g : p->value.grad()) max_grad = std::max(max_grad, std::abs(static_cast<double>(g)));
      }
      params_.zero_grad();
      std::ostringstream os;
      os << "non-finite loss at iteration " << steps_ << " (sample '" << sample_id << "', max |grad| " << max_grad
         << ")";
      throw DivergenceError(os.str());
    }
    AdamConfig adam = cfg_.adam;
    adam.lr = lr;
    const auto ps = params_.parameters();
    adam_step<T>(std::span<Parameter<T>* const>(ps.data(), ps.size()), adam);
    params_.zero_grad();
    ++steps_;
    return value;
  }

  double step(const SamplePair<T>& s, double lr) {
    if (!s.reference.defined()) throw UsageError("Trainer::step: sample '" + s.id + "' has no reference");
    return step(s.raw, std::span<const SemanticRegion>(s.regions), s.reference, lr, s.id);
  }

 private:
  TrainConfig cfg_;
  SguieParams<T> params_;
  std::size_t steps_ = 0;
};

struct TrainOutputs {
  std::filesystem::path out_dir;
  std::string final_name = "final.sguie";
  std::string log_name = "train_log.jsonl";
};

/// Runs the full schedule over the train split. Writes the JSON-lines log,
/// epoch snapshots (epoch_NNN.sguie) and the final checkpoint into out_dir.
template <typename T>
TrainLog train(Trainer<T>& trainer, const DatasetManifest& manifest, const TrainOutputs& out,
               const std::function<void(const IterationRecord&)>& on_iteration = {},
               const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  const TrainConfig& cfg = trainer.config();
  const auto entries = manifest.split(Split::Train);
  if (entries.empty() && cfg.epochs > 0) throw UsageError("train: the manifest has no usable train entries");
  std::filesystem::create_directories(out.out_dir);
  std::ofstream log(out.out_dir / out.log_name, std::ios::trunc);
  if (!log) throw FormatError("cannot write " + (out.out_dir / out.log_name).string());

  TrainLog result;
  std::mt19937_64 order_rng(cfg.seed);
  std::vector<std::size_t> order(entries.size());
  std::size_t iteration = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const double lr = lr_schedule(epoch, cfg.epochs, cfg.lr0);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), order_rng);
    double sum = 0.0;
    for (std::size_t k : order) {
      LoadOptions lo;
      lo.target = cfg.image_size;
      lo.augment = cfg.augment;
      lo.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (iteration + 1));
      const auto sample = load_sample<T>(*entries[k], lo);
      IterationRecord rec{iteration, epoch, sample.id, trainer.step(sample, lr), lr};
      sum += rec.loss;
      log << nlohmann::json{{"type", "iteration"}, {"iteration", rec.iteration}, {"epoch", rec.epoch},
                            {"sample", rec.sample},  {"loss", rec.loss},           {"lr", rec.lr}}
                 .dump()
          << '\n';
      if (on_iteration) on_iteration(rec);
      result.iterations.push_back(std::move(rec));
      ++iteration;
    }
    EpochRecord er{epoch, sum / static_cast<double>(entries.size()), lr,
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    // Wall time stays out of the log so identical runs write identical bytes.
    log << nlohmann::json{{"type", "epoch"}, {"epoch", er.epoch}, {"mean_loss", er.mean_loss}, {"lr", er.lr}}.dump()
        << std::endl;
    if (on_epoch) on_epoch(er);
    result.epochs.push_back(er);
    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
      std::ostringstream name;
      name << "epoch_" << std::setw(3) << std::setfill('0') << epoch + 1 << ".sguie";
      save_checkpoint(out.out_dir / name.str(), trainer.params());
    }
  }
  save_checkpoint(out.out_dir / out.final_name, trainer.params());
  return result;
}

}  // namespace sguie
