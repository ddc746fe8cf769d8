#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "gdar/model.hpp"

namespace gdar {

// ---------------------------------------------------------------------------
// Batch samplers
// ---------------------------------------------------------------------------

// Groups windows by anchor week; articles are shuffled and chunked within a
// group and the group order is shuffled per epoch. Every batch covers a
// single anchor.
std::vector<std::vector<Window>> synchronized_batches(const WindowSet& windows, int batch_size,
                                                      std::uint64_t seed);

// Uniform shuffle of all windows, chunked.
std::vector<std::vector<Window>> random_batches(const WindowSet& windows, int batch_size,
                                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Optimizers: pluggable by name so Ranger-style variants can be registered
// without touching the trainer.
// ---------------------------------------------------------------------------

class Optimizer {
public:
    virtual ~Optimizer() = default;
    virtual void step(std::vector<double>& params, const std::vector<double>& grads) = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const std::string& name, double learning_rate);
void register_optimizer(const std::string& name,
                        std::function<std::unique_ptr<Optimizer>(double)> factory);

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

enum class BatchMode { random, synchronized };

struct TrainConfig {
    int max_epochs = 50;
    int patience = 5;  // epochs without validation improvement
    double learning_rate = 5e-3;
    int batch_size = 64;
    BatchMode batch_mode = BatchMode::random;
    std::string optimizer = "adam";
    double grad_clip = 10.0;  // global norm; <= 0 disables
    std::uint64_t seed = 1;
    double w_under = 1.0;
    double w_over = 1.0;
    int max_neighbors = 10;  // per-epoch neighborhood sampling cap
    int threads = 0;         // > 0 pins the OpenMP thread count
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0;
    double val_loss = 0;
};

// Early stopping on the monitored validation loss: stop once `patience`
// consecutive epochs pass without strict improvement.
class EarlyStopper {
public:
    explicit EarlyStopper(int patience) : patience_(patience) {}

    // Records one epoch; returns true when training should stop.
    bool observe(double loss) {
        ++epoch_;
        if (loss < best_loss_) {
            best_loss_ = loss;
            best_epoch_ = epoch_;
            since_improve_ = 0;
            return false;
        }
        return ++since_improve_ >= patience_;
    }

    bool improved() const { return since_improve_ == 0 && epoch_ > 0; }
    int best_epoch() const { return best_epoch_; }

private:
    int patience_;
    int epoch_ = 0;
    int best_epoch_ = 0;
    int since_improve_ = 0;
    double best_loss_ = std::numeric_limits<double>::infinity();
};

struct Checkpoint {
    ModelConfig model_config;
    ModelParams params;
    std::string schema_hash;
    std::string config_snapshot;  // canonical JSON of the producing run config
    std::vector<EpochStats> history;
    int best_epoch = 0;
    double train_minutes = 0;
};

// End-to-end training over the panel's train range with per-epoch validation
// and early stopping; returns the best-validation checkpoint. Deterministic
// per seed with threads == 1. A monitor, when given, is armed with each
// batch's anchor limits and counts leakage violations.
Checkpoint train(const PanelDataset& panel, const SplitRanges& ranges,
                 const SimilarityGraph* graph, ModelConfig model_config,
                 const TrainConfig& train_config, const std::string& config_snapshot,
                 AccessMonitor* monitor = nullptr);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

void write_history(const std::filesystem::path& path, const std::vector<EpochStats>& history,
                   const std::map<std::string, std::string>& meta);

}  // namespace gdar
