#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace lossforge {

// Immutable after load; shared read-only across training workers.
struct Dataset {
    std::string name;
    int dims = 0;
    int class_count = 0;
    std::vector<double> features;  // samples x dims, row-major
    std::vector<int> labels;       // in [0, class_count)

    int samples() const { return dims == 0 ? 0 : static_cast<int>(labels.size()); }
    const double* row(int i) const { return features.data() + static_cast<long>(i) * dims; }
};

struct DatasetSplit {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
    uint64_t seed = 0;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Gaussian clusters around distinct random unit directions scaled by
// `spread`; unit within-class variance. Deterministic per seed.
Dataset synth_blobs(int class_count, int samples_per_class, int dims, double spread,
                    uint64_t seed);
// The cluster directions synth_blobs uses (before scaling by spread).
std::vector<std::vector<double>> blob_centers(int class_count, int dims, uint64_t seed);

struct DelimitedSchema {
    char delimiter = ',';
    bool has_header = false;
    int label_column = -1;  // -1 means last column
    bool normalize = false; // scale features to [0,1] by per-column min/max
    int take = 0;           // keep first k samples when > 0
};

Dataset load_delimited(const std::string& path, const DelimitedSchema& schema);

// IDX image/label pair (the Fashion-MNIST container format); pixel features
// scaled to [0,1]. `take` keeps the first k samples when > 0.
Dataset load_idx(const std::string& images_path, const std::string& labels_path, int take = 0);

struct SplitFractions {
    double train = 0.7;
    double val = 0.15;
    double test = 0.15;
};

// Stratified by class, deterministic per seed. Errors when a class is too
// small to land in every partition.
DatasetSplit split(const Dataset& ds, const SplitFractions& fractions, uint64_t seed);

} // namespace lossforge
