#include <collabnav/error.hpp>
#include <collabnav/nn/optim.hpp>
#include <collabnav/rng.hpp>
#include <collabnav/train.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

namespace collabnav::train {

using nn::Mode;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw Error("train.lr must be positive");
  if (batch < 1) throw Error("train.batch must be at least 1");
  if (epochs < 1) throw Error("train.epochs must be at least 1");
}

double dataset_accuracy(giwt::DirectionModel<float>& model, std::span<const ExpertSample> samples,
                        std::span<const std::uint32_t> indices, int batch) {
  if (indices.empty()) return 0.0;
  std::size_t correct = 0;
  std::vector<const ExpertSample*> ptrs;
  for (std::size_t start = 0; start < indices.size(); start += static_cast<std::size_t>(batch)) {
    ptrs.clear();
    const std::size_t end = std::min(indices.size(), start + static_cast<std::size_t>(batch));
    for (std::size_t k = start; k < end; ++k) ptrs.push_back(&samples[indices[k]]);
    const auto logits = model.forward(ptrs, Mode::Infer);
    for (std::size_t b = 0; b < ptrs.size(); ++b) {
      const int pred = logits[2 * b + 1] > logits[2 * b] ? 1 : 0;
      correct += pred == ptrs[b]->label;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(indices.size());
}

TrainResult train_model(giwt::DirectionModel<float>& model, std::span<const ExpertSample> samples,
                        const expert::Split& split, const TrainConfig& cfg, const Progress& progress) {
  cfg.validate();
  if (split.train.empty()) throw EmptyDataset("train: empty training split");
  const int map_size = model.dims().map_size;
  auto& ps = model.params();
  nn::Adam<float> adam({cfg.lr});

  TrainResult result;
  result.best_val_acc = -1.0;
  std::map<std::string, nn::Tensor<float>> best;

  std::vector<std::uint32_t> order(split.train.begin(), split.train.end());
  std::vector<ExpertSample> mirrored;
  std::vector<const ExpertSample*> batch;
  std::vector<int> labels;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.cosine) adam.set_lr(cfg.lr * 0.5 * (1.0 + std::cos(kPi * (epoch - 1) / cfg.epochs)));
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next() % i]);
    std::vector<char> flip(order.size(), 0);
    if (cfg.mirror)
      for (auto& f : flip) f = static_cast<char>(rng.next() & 1);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch));
      batch.clear();
      labels.clear();
      mirrored.clear();
      mirrored.reserve(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const ExpertSample& s = samples[order[k]];
        if (flip[k]) {
          mirrored.push_back(mirror(s, map_size));
          batch.push_back(&mirrored.back());
        } else {
          batch.push_back(&s);
        }
        labels.push_back(batch.back()->label);
      }
      ps.zero_grad();
      const auto r = nn::softmax_cross_entropy(model.forward(batch, Mode::Train), labels);
      model.backward(r.dlogits);
      adam.step(ps);
      loss_sum += r.loss * static_cast<double>(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) correct += (r.probs[2 * b + 1] > r.probs[2 * b] ? 1 : 0) == labels[b];
    }

    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / static_cast<double>(order.size());
    st.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    st.val_acc = split.val.empty() ? st.train_acc : dataset_accuracy(model, samples, split.val);
    result.curve.push_back(st);
    if (progress) progress(st);
    if (st.val_acc > result.best_val_acc) {
      result.best_val_acc = st.val_acc;
      result.best_epoch = epoch;
      best.clear();
      for (const auto& [name, p] : ps.entries()) best.emplace(name, p.value);
    }
  }
  for (auto& [name, p] : ps.entries()) p.value = best.at(name);
  return result;
}

void write_curve_csv(const std::filesystem::path& path, const TrainResult& result) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "epoch,train_loss,train_acc,val_acc\n";
  char buf[128];
  for (const auto& e : result.curve) {
    std::snprintf(buf, sizeof buf, "%d,%.6f,%.6f,%.6f\n", e.epoch, e.train_loss, e.train_acc, e.val_acc);
    os << buf;
  }
  if (!os) throw IoError("write failed for " + path.string());
}

void export_embeddings(const std::filesystem::path& path, giwt::DirectionModel<float>& model,
                       std::span<const ExpertSample> samples, std::span<const std::uint32_t> indices) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  bool header = false;
  char buf[32];
  for (auto i : indices) {
    const ExpertSample* one[] = {&samples[i]};
    model.forward(one, Mode::Infer);
    const auto& h = model.last_embedding();
    if (!header) {
      os << "index,label";
      for (std::size_t k = 0; k < h.size(); ++k) os << ",h" << k;
      os << "\n";
      header = true;
    }
    os << i << "," << static_cast<int>(samples[i].label);
    for (std::size_t k = 0; k < h.size(); ++k) {
      std::snprintf(buf, sizeof buf, ",%.6f", static_cast<double>(h[k]));
      os << buf;
    }
    os << "\n";
  }
  if (!os) throw IoError("write failed for " + path.string());
}

}  // namespace collabnav::train
