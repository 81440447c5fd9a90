#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lossforge/data.hpp"
#include "lossforge/losses.hpp"

namespace lossforge {

// Dense feed-forward classifier with rectifier hidden activations and a
// softmax output head. Weights are row-major (in x out).
struct ClassifierModel {
    struct Layer {
        int in = 0;
        int out = 0;
        std::vector<double> W;
        std::vector<double> b;
    };

    int input_dim = 0;
    int class_count = 0;
    std::vector<Layer> layers;

    // hidden may be empty (direct linear->softmax model)
    ClassifierModel(int input_dim, const std::vector<int>& hidden, int class_count,
                    uint64_t init_seed);
    ClassifierModel() = default;

    // probabilities for `rows` stacked inputs; probs is rows x class_count
    void forward(const double* X, int rows, double* probs) const;

    size_t parameter_count() const;
    std::vector<double> flatten_parameters() const;
    void set_parameters(const std::vector<double>& flat);
};

struct TrainConfig {
    int epochs = 100;
    int batch_size = 32;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_opt = 1e-7;
    double plateau_factor = 0.2;
    int plateau_patience = 5;
    double lr_min = 1e-4;
    uint64_t seed = 0;
};

struct TrainReport {
    std::vector<double> train_loss;  // per epoch
    std::vector<double> val_error;   // per epoch
    double final_val_error = 1.0;
    double final_test_error = 1.0;
    double wall_seconds = 0.0;
    bool diverged = false;
};

// Mini-batch Adam with reduce-on-plateau keyed on validation error. The loss
// gradient w.r.t. logits is obtained by chaining d loss / d y_pred through
// the softmax Jacobian. Divergence (any non-finite loss value or gradient)
// halts training; the report then carries worst-case errors of 1.0.
TrainReport train(ClassifierModel& model, const Dataset& ds, const DatasetSplit& split,
                  const LossFn& loss, const TrainConfig& config);

// Misclassification rate under the argmax decision; throws on an empty
// index set or shape mismatch.
double evaluate_error(const ClassifierModel& model, const Dataset& ds,
                      const std::vector<int>& indices);

// J^T g where J is the softmax Jacobian at y_pred: dz_j = y_j (g_j - g.y).
std::vector<double> softmax_backward(const std::vector<double>& dloss_dypred,
                                     const std::vector<double>& y_pred);

// Flat binary weight record: magic "LFW1", little-endian u32 shape header,
// f64 arrays.
void save_weights(const ClassifierModel& model, const std::string& path);
ClassifierModel load_weights(const std::string& path);

} // namespace lossforge
