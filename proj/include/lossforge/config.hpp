#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "lossforge/data.hpp"
#include "lossforge/fitness.hpp"
#include "lossforge/gp.hpp"
#include "lossforge/nn.hpp"

namespace lossforge {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetEntry {
    std::string name;
    std::string kind;  // blobs | csv | idx

    // blobs
    int classes = 3;
    int samples_per_class = 200;
    int dims = 2;
    double spread = 3.0;

    // csv
    std::string path;
    std::string delimiter = ",";
    bool has_header = false;
    int label_column = -1;
    bool normalize = false;

    // idx
    std::string images;
    std::string labels;

    int take = 0;
};

// One declarative document per run; schema-validated, unknown keys rejected.
struct RunConfig {
    uint64_t seed = 0;
    std::string output_dir = "out";
    GpConfig gp;
    TrainConfig trainer;
    std::vector<int> hidden = {64, 32};
    ExperimentMode mode = ExperimentMode::SingleRun;
    int runs_per_dataset = 1;
    SplitFractions fractions;
    std::vector<DatasetEntry> datasets;
};

// Throws ConfigError with the offending field path in the message.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);

Dataset materialize(const DatasetEntry& entry, uint64_t seed);
std::vector<Dataset> materialize_all(const RunConfig& config);

} // namespace lossforge
