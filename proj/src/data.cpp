#include "lossforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "lossforge/rng.hpp"

namespace lossforge {

std::vector<std::vector<double>> blob_centers(int class_count, int dims, uint64_t seed) {
    Rng rng(derive_seed(seed, 0x6c6f62));
    std::vector<std::vector<double>> centers;
    centers.reserve(class_count);
    for (int c = 0; c < class_count; ++c) {
        std::vector<double> v(dims);
        for (int attempt = 0; attempt < 16; ++attempt) {
            double norm2 = 0.0;
            for (int d = 0; d < dims; ++d) {
                v[d] = rng.normal();
                norm2 += v[d] * v[d];
            }
            if (norm2 < 1e-12) continue;
            double inv = 1.0 / std::sqrt(norm2);
            for (double& x : v) x *= inv;
            bool dup = std::any_of(centers.begin(), centers.end(),
                                   [&](const auto& u) { return u == v; });
            if (dup && attempt == 15) {
                for (double& x : v) x = -x;  // 1-D draws collide half the time
                dup = std::any_of(centers.begin(), centers.end(),
                                  [&](const auto& u) { return u == v; });
            }
            if (!dup) break;
        }
        centers.push_back(v);
    }
    return centers;
}

Dataset synth_blobs(int class_count, int samples_per_class, int dims, double spread,
                    uint64_t seed) {
    if (class_count < 2) throw DataError("synth_blobs: need at least 2 classes");
    if (samples_per_class < 2) throw DataError("synth_blobs: need at least 2 samples per class");
    if (dims < 1) throw DataError("synth_blobs: dims must be positive");

    auto centers = blob_centers(class_count, dims, seed);
    Rng rng(derive_seed(seed, 0x73616d70));

    Dataset ds;
    ds.name = "blobs";
    ds.dims = dims;
    ds.class_count = class_count;
    ds.features.reserve(static_cast<size_t>(class_count) * samples_per_class * dims);
    ds.labels.reserve(static_cast<size_t>(class_count) * samples_per_class);
    for (int c = 0; c < class_count; ++c) {
        for (int s = 0; s < samples_per_class; ++s) {
            for (int d = 0; d < dims; ++d)
                ds.features.push_back(spread * centers[c][d] + rng.normal());
            ds.labels.push_back(c);
        }
    }
    return ds;
}

namespace {

uint32_t read_be_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw DataError(path + ": truncated header");
    return (uint32_t(b[0]) << 24) | (uint32_t(b[1]) << 16) | (uint32_t(b[2]) << 8) | uint32_t(b[3]);
}

} // namespace

Dataset load_delimited(const std::string& path, const DelimitedSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError(path + ": cannot open");

    Dataset ds;
    ds.name = path;
    std::string line;
    int line_no = 0;
    int cols = -1;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;

    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && schema.has_header) continue;
        if (line.empty()) continue;
        std::vector<double> vals;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, schema.delimiter)) {
            try {
                size_t used = 0;
                double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                vals.push_back(v);
            } catch (const std::exception&) {
                throw DataError(path + ":" + std::to_string(line_no) + ": bad cell '" + cell + "'");
            }
        }
        if (cols == -1) {
            cols = static_cast<int>(vals.size());
            if (cols < 2)
                throw DataError(path + ":" + std::to_string(line_no) +
                                ": need at least one feature and a label column");
        } else if (static_cast<int>(vals.size()) != cols) {
            throw DataError(path + ":" + std::to_string(line_no) + ": ragged row (" +
                            std::to_string(vals.size()) + " cells, expected " +
                            std::to_string(cols) + ")");
        }
        int label_col = schema.label_column < 0 ? cols - 1 : schema.label_column;
        if (label_col >= cols)
            throw DataError(path + ": label column " + std::to_string(label_col) +
                            " out of range");
        double lv = vals[label_col];
        if (lv != std::floor(lv) || lv < 0)
            throw DataError(path + ":" + std::to_string(line_no) +
                            ": label must be a non-negative integer");
        std::vector<double> feat;
        feat.reserve(cols - 1);
        for (int cidx = 0; cidx < cols; ++cidx) {
            if (cidx == label_col) continue;
            if (!std::isfinite(vals[cidx]))
                throw DataError(path + ":" + std::to_string(line_no) + ": non-finite feature");
            feat.push_back(vals[cidx]);
        }
        rows.push_back(std::move(feat));
        labels.push_back(static_cast<int>(lv));
        if (schema.take > 0 && static_cast<int>(rows.size()) >= schema.take) break;
    }
    if (rows.empty()) throw DataError(path + ": no data rows");

    ds.dims = static_cast<int>(rows[0].size());
    ds.class_count = *std::max_element(labels.begin(), labels.end()) + 1;
    if (schema.normalize) {
        std::vector<double> lo(ds.dims, std::numeric_limits<double>::infinity());
        std::vector<double> hi(ds.dims, -std::numeric_limits<double>::infinity());
        for (const auto& r : rows)
            for (int d = 0; d < ds.dims; ++d) {
                lo[d] = std::min(lo[d], r[d]);
                hi[d] = std::max(hi[d], r[d]);
            }
        for (auto& r : rows)
            for (int d = 0; d < ds.dims; ++d)
                r[d] = hi[d] > lo[d] ? (r[d] - lo[d]) / (hi[d] - lo[d]) : 0.0;
    }
    ds.features.reserve(rows.size() * ds.dims);
    for (const auto& r : rows) ds.features.insert(ds.features.end(), r.begin(), r.end());
    ds.labels = std::move(labels);
    return ds;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path, int take) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw DataError(images_path + ": cannot open");
    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw DataError(labels_path + ": cannot open");

    uint32_t img_magic = read_be_u32(img, images_path);
    if (img_magic != 0x00000803) {
        std::ostringstream os;
        os << images_path << ": bad IDX image magic 0x" << std::hex << img_magic
           << " (expected 0x803)";
        throw DataError(os.str());
    }
    uint32_t count = read_be_u32(img, images_path);
    uint32_t rows = read_be_u32(img, images_path);
    uint32_t cols = read_be_u32(img, images_path);

    uint32_t lab_magic = read_be_u32(lab, labels_path);
    if (lab_magic != 0x00000801) {
        std::ostringstream os;
        os << labels_path << ": bad IDX label magic 0x" << std::hex << lab_magic
           << " (expected 0x801)";
        throw DataError(os.str());
    }
    uint32_t lab_count = read_be_u32(lab, labels_path);
    if (lab_count != count)
        throw DataError(labels_path + ": label count " + std::to_string(lab_count) +
                        " does not match image count " + std::to_string(count));

    uint32_t keep = take > 0 ? std::min<uint32_t>(count, static_cast<uint32_t>(take)) : count;
    size_t pixels = static_cast<size_t>(rows) * cols;

    Dataset ds;
    ds.name = images_path;
    ds.dims = static_cast<int>(pixels);
    ds.features.resize(keep * pixels);
    ds.labels.resize(keep);

    std::vector<unsigned char> buf(pixels);
    for (uint32_t i = 0; i < keep; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels)))
            throw DataError(images_path + ": truncated at image " + std::to_string(i));
        for (size_t p = 0; p < pixels; ++p)
            ds.features[i * pixels + p] = buf[p] / 255.0;
        unsigned char l = 0;
        if (!lab.read(reinterpret_cast<char*>(&l), 1))
            throw DataError(labels_path + ": truncated at label " + std::to_string(i));
        ds.labels[i] = l;
    }
    ds.class_count = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
    return ds;
}

DatasetSplit split(const Dataset& ds, const SplitFractions& f, uint64_t seed) {
    if (!(f.train > 0 && f.val > 0 && f.test > 0))
        throw DataError("split: fractions must be positive");
    if (std::fabs(f.train + f.val + f.test - 1.0) > 1e-9)
        throw DataError("split: fractions must sum to 1");

    std::vector<std::vector<int>> by_class(ds.class_count);
    for (int i = 0; i < ds.samples(); ++i) by_class[ds.labels[i]].push_back(i);

    Rng rng(derive_seed(seed, 0x73706c69));
    DatasetSplit out;
    out.seed = seed;
    for (int c = 0; c < ds.class_count; ++c) {
        auto& idx = by_class[c];
        if (static_cast<int>(idx.size()) < 3)
            throw DataError("split: class " + std::to_string(c) +
                            " has fewer than 3 samples and cannot reach every partition");
        for (size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.index(i)]);

        const double n = static_cast<double>(idx.size());
        double targets[3] = {f.train * n, f.val * n, f.test * n};
        int counts[3];
        double fracs[3];
        int used = 0;
        for (int k = 0; k < 3; ++k) {
            counts[k] = static_cast<int>(std::floor(targets[k]));
            fracs[k] = targets[k] - counts[k];
            used += counts[k];
        }
        for (int left = static_cast<int>(idx.size()) - used; left > 0; --left) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (fracs[k] > fracs[best]) best = k;
            ++counts[best];
            fracs[best] = -1.0;
        }
        // every partition sees every class
        for (int k = 0; k < 3; ++k) {
            while (counts[k] == 0) {
                int donor = 0;
                for (int j = 1; j < 3; ++j)
                    if (counts[j] > counts[donor]) donor = j;
                --counts[donor];
                ++counts[k];
            }
        }
        int at = 0;
        for (int i = 0; i < counts[0]; ++i) out.train.push_back(idx[at++]);
        for (int i = 0; i < counts[1]; ++i) out.val.push_back(idx[at++]);
        for (int i = 0; i < counts[2]; ++i) out.test.push_back(idx[at++]);
    }
    return out;
}

} // namespace lossforge
