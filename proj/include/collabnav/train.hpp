#pragma once

#include <collabnav/expert.hpp>
#include <collabnav/giwt.hpp>
#include <collabnav/sample.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

namespace collabnav::train {

struct TrainConfig {
  double lr = 1e-3;
  int batch = 32;
  int epochs = 30;
  std::uint64_t seed = 1;     // model init and shuffling
  bool mirror = true;         // reflect each training sample with probability 1/2 per epoch
  bool cosine = true;         // per-epoch cosine decay of lr towards 0

  void validate() const;
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
};

struct TrainResult {
  std::vector<EpochStats> curve;
  int best_epoch = 0;
  double best_val_acc = 0.0;
};

using Progress = std::function<void(const EpochStats&)>;

/// Minimizes mean cross-entropy over `split.train` with Adam, evaluating on
/// `split.val` after every epoch; the model ends at its best-val weights.
/// Throws EmptyDataset, NonFiniteValue.
TrainResult train_model(giwt::DirectionModel<float>& model, std::span<const ExpertSample> samples,
                        const expert::Split& split, const TrainConfig& cfg, const Progress& progress = {});

/// Argmax accuracy (inference mode) over the listed samples; 0 when empty.
double dataset_accuracy(giwt::DirectionModel<float>& model, std::span<const ExpertSample> samples,
                        std::span<const std::uint32_t> indices, int batch = 64);

/// epoch,train_loss,train_acc,val_acc
void write_curve_csv(const std::filesystem::path& path, const TrainResult& result);

/// index,label,h0..h{F'-1}: fused features of each listed sample.
void export_embeddings(const std::filesystem::path& path, giwt::DirectionModel<float>& model,
                       std::span<const ExpertSample> samples, std::span<const std::uint32_t> indices);

}  // namespace collabnav::train
