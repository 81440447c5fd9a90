#include "lossforge/nn.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "lossforge/kernels.hpp"
#include "lossforge/rng.hpp"

namespace lossforge {

ClassifierModel::ClassifierModel(int input, const std::vector<int>& hidden, int classes,
                                 uint64_t init_seed)
    : input_dim(input), class_count(classes) {
    if (input < 1 || classes < 2) throw std::invalid_argument("ClassifierModel: bad shape");
    Rng rng(derive_seed(init_seed, 0x696e6974));
    int prev = input;
    std::vector<int> widths = hidden;
    widths.push_back(classes);
    for (int w : widths) {
        if (w < 1) throw std::invalid_argument("ClassifierModel: bad layer width");
        Layer l;
        l.in = prev;
        l.out = w;
        l.W.resize(static_cast<size_t>(prev) * w);
        l.b.assign(w, 0.0);
        double bound = std::sqrt(6.0 / prev);
        for (double& x : l.W) x = rng.uniform(-bound, bound);
        layers.push_back(std::move(l));
        prev = w;
    }
}

void ClassifierModel::forward(const double* X, int rows, double* probs) const {
    const auto& k = kernels::active();
    std::vector<double> cur(X, X + static_cast<size_t>(rows) * input_dim);
    std::vector<double> next;
    for (size_t li = 0; li < layers.size(); ++li) {
        const Layer& l = layers[li];
        next.assign(static_cast<size_t>(rows) * l.out, 0.0);
        k.gemm_nn(rows, l.out, l.in, cur.data(), l.W.data(), next.data());
        k.add_bias(rows, l.out, l.b.data(), next.data());
        if (li + 1 < layers.size()) {
            k.relu(rows * l.out, next.data(), next.data());
            cur.swap(next);
        } else {
            k.softmax_rows(rows, l.out, next.data(), probs);
        }
    }
#ifndef NDEBUG
    for (int r = 0; r < rows; ++r) {
        double s = 0.0;
        for (int c = 0; c < class_count; ++c) s += probs[static_cast<long>(r) * class_count + c];
        assert(std::fabs(s - 1.0) < 1e-6 && "softmax row must normalize");
    }
#endif
}

size_t ClassifierModel::parameter_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += l.W.size() + l.b.size();
    return n;
}

std::vector<double> ClassifierModel::flatten_parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers) {
        flat.insert(flat.end(), l.W.begin(), l.W.end());
        flat.insert(flat.end(), l.b.begin(), l.b.end());
    }
    return flat;
}

void ClassifierModel::set_parameters(const std::vector<double>& flat) {
    if (flat.size() != parameter_count())
        throw std::invalid_argument("set_parameters: size mismatch");
    size_t at = 0;
    for (auto& l : layers) {
        std::copy_n(flat.begin() + at, l.W.size(), l.W.begin());
        at += l.W.size();
        std::copy_n(flat.begin() + at, l.b.size(), l.b.begin());
        at += l.b.size();
    }
}

std::vector<double> softmax_backward(const std::vector<double>& g,
                                     const std::vector<double>& y) {
    const size_t n = y.size();
    double gy = 0.0;
    for (size_t i = 0; i < n; ++i) gy += g[i] * y[i];
    std::vector<double> dz(n);
    for (size_t i = 0; i < n; ++i) dz[i] = y[i] * (g[i] - gy);
    return dz;
}

double evaluate_error(const ClassifierModel& model, const Dataset& ds,
                      const std::vector<int>& indices) {
    if (indices.empty()) throw std::invalid_argument("evaluate_error: empty partition");
    if (model.input_dim != ds.dims || model.class_count != ds.class_count)
        throw std::invalid_argument("evaluate_error: model/dataset shape mismatch");

    const int N = model.class_count;
    int wrong = 0;
    std::vector<double> probs;
    constexpr int kChunk = 256;
    std::vector<double> X;
    for (size_t at = 0; at < indices.size(); at += kChunk) {
        int rows = static_cast<int>(std::min<size_t>(kChunk, indices.size() - at));
        X.resize(static_cast<size_t>(rows) * ds.dims);
        for (int r = 0; r < rows; ++r)
            std::copy_n(ds.row(indices[at + r]), ds.dims, X.begin() + static_cast<long>(r) * ds.dims);
        probs.resize(static_cast<size_t>(rows) * N);
        model.forward(X.data(), rows, probs.data());
        for (int r = 0; r < rows; ++r) {
            const double* row = probs.data() + static_cast<long>(r) * N;
            int arg = 0;
            for (int c = 1; c < N; ++c)
                if (row[c] > row[arg]) arg = c;
            if (arg != ds.labels[indices[at + r]]) ++wrong;
        }
    }
    return static_cast<double>(wrong) / static_cast<double>(indices.size());
}

namespace {

struct AdamState {
    std::vector<double> mW, vW, mb, vb;
};

} // namespace

TrainReport train(ClassifierModel& model, const Dataset& ds, const DatasetSplit& split,
                  const LossFn& loss, const TrainConfig& config) {
    if (model.input_dim != ds.dims)
        throw std::invalid_argument("train: model input width does not match dataset dims");
    if (model.class_count != ds.class_count)
        throw std::invalid_argument("train: model output width does not match class count");
    if (split.train.empty() || split.val.empty() || split.test.empty())
        throw std::invalid_argument("train: split has an empty partition");

    const auto& k = kernels::active();
    const auto t0 = std::chrono::steady_clock::now();
    const int N = model.class_count;
    const size_t L = model.layers.size();

    std::vector<AdamState> opt(L);
    for (size_t l = 0; l < L; ++l) {
        opt[l].mW.assign(model.layers[l].W.size(), 0.0);
        opt[l].vW.assign(model.layers[l].W.size(), 0.0);
        opt[l].mb.assign(model.layers[l].b.size(), 0.0);
        opt[l].vb.assign(model.layers[l].b.size(), 0.0);
    }

    TrainReport report;
    Rng shuffle_rng(derive_seed(config.seed, 0x74726e));
    std::vector<int> order = split.train;
    double lr = config.lr;
    long adam_t = 0;
    double best_val = std::numeric_limits<double>::infinity();
    int stall = 0;

    // per-batch buffers
    std::vector<std::vector<double>> acts(L + 1), zs(L), das(L);
    std::vector<double> probs, X, g_point(N), y_row(N), onehot(N);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.index(i)]);

        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const int B = static_cast<int>(
                std::min<size_t>(config.batch_size, order.size() - start));

            X.resize(static_cast<size_t>(B) * ds.dims);
            for (int r = 0; r < B; ++r)
                std::copy_n(ds.row(order[start + r]), ds.dims,
                            X.begin() + static_cast<long>(r) * ds.dims);

            // forward, caching pre-activations
            acts[0] = X;
            for (size_t l = 0; l < L; ++l) {
                const auto& lay = model.layers[l];
                zs[l].assign(static_cast<size_t>(B) * lay.out, 0.0);
                k.gemm_nn(B, lay.out, lay.in, acts[l].data(), lay.W.data(), zs[l].data());
                k.add_bias(B, lay.out, lay.b.data(), zs[l].data());
                if (l + 1 < L) {
                    acts[l + 1].resize(zs[l].size());
                    k.relu(static_cast<int>(zs[l].size()), zs[l].data(), acts[l + 1].data());
                }
            }
            probs.resize(static_cast<size_t>(B) * N);
            k.softmax_rows(B, N, zs[L - 1].data(), probs.data());

            // per-sample loss value and gradient through the softmax head
            std::vector<double> dZ(static_cast<size_t>(B) * N);
            bool bad = false;
            for (int r = 0; r < B && !bad; ++r) {
                std::copy_n(probs.data() + static_cast<long>(r) * N, N, y_row.begin());
                std::fill(onehot.begin(), onehot.end(), 0.0);
                onehot[ds.labels[order[start + r]]] = 1.0;
                try {
                    EvalPoint pt(y_row, onehot);
                    double v = loss.value(pt);
                    std::vector<double> g = loss.grad(pt);
                    if (!std::isfinite(v)) { bad = true; break; }
                    loss_sum += v;
                    std::vector<double> dz = softmax_backward(g, y_row);
                    for (int c = 0; c < N; ++c) {
                        if (!std::isfinite(dz[c])) { bad = true; break; }
                        dZ[static_cast<long>(r) * N + c] = dz[c] / B;
                    }
                } catch (const EvalError&) {
                    bad = true;
                }
            }
            if (bad) {
                report.diverged = true;
                report.final_val_error = 1.0;
                report.final_test_error = 1.0;
                auto t1 = std::chrono::steady_clock::now();
                report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
                return report;
            }

            // backward
            ++adam_t;
            double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(adam_t));
            double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(adam_t));
            std::vector<double> dcur = std::move(dZ);
            for (size_t li = L; li-- > 0;) {
                auto& lay = model.layers[li];
                std::vector<double> dW(lay.W.size(), 0.0);
                std::vector<double> db(lay.b.size(), 0.0);
                k.gemm_tn(lay.in, lay.out, B, acts[li].data(), dcur.data(), dW.data());
                k.colsum(B, lay.out, dcur.data(), db.data());
                if (li > 0) {
                    das[li - 1].assign(static_cast<size_t>(B) * lay.in, 0.0);
                    k.gemm_nt(B, lay.in, lay.out, dcur.data(), lay.W.data(), das[li - 1].data());
                    dcur.resize(das[li - 1].size());
                    k.relu_grad(static_cast<int>(dcur.size()), zs[li - 1].data(),
                                das[li - 1].data(), dcur.data());
                }
                k.adam_step(static_cast<int>(lay.W.size()), lay.W.data(), dW.data(),
                            opt[li].mW.data(), opt[li].vW.data(), lr, config.beta1,
                            config.beta2, config.eps_opt, bc1, bc2);
                k.adam_step(static_cast<int>(lay.b.size()), lay.b.data(), db.data(),
                            opt[li].mb.data(), opt[li].vb.data(), lr, config.beta1,
                            config.beta2, config.eps_opt, bc1, bc2);
            }
        }

        report.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        double val_err = evaluate_error(model, ds, split.val);
        report.val_error.push_back(val_err);

        // reduce-on-plateau keyed on validation error
        if (val_err < best_val) {
            best_val = val_err;
            stall = 0;
        } else if (++stall >= config.plateau_patience) {
            lr = std::max(lr * config.plateau_factor, config.lr_min);
            stall = 0;
        }
    }

    report.final_val_error = report.val_error.empty() ? evaluate_error(model, ds, split.val)
                                                      : report.val_error.back();
    report.final_test_error = evaluate_error(model, ds, split.test);
    auto t1 = std::chrono::steady_clock::now();
    report.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    return report;
}

void save_weights(const ClassifierModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out.write("LFW1", 4);
    auto write_u32 = [&](uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
        out.write(reinterpret_cast<char*>(b), 4);
    };
    write_u32(static_cast<uint32_t>(model.layers.size()));
    write_u32(static_cast<uint32_t>(model.input_dim));
    write_u32(static_cast<uint32_t>(model.class_count));
    for (const auto& l : model.layers) {
        write_u32(static_cast<uint32_t>(l.in));
        write_u32(static_cast<uint32_t>(l.out));
        out.write(reinterpret_cast<const char*>(l.W.data()),
                  static_cast<std::streamsize>(l.W.size() * sizeof(double)));
        out.write(reinterpret_cast<const char*>(l.b.data()),
                  static_cast<std::streamsize>(l.b.size() * sizeof(double)));
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

ClassifierModel load_weights(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "LFW1", 4) != 0)
        throw std::runtime_error(path + ": bad weight-file magic");
    auto read_u32 = [&]() {
        unsigned char b[4];
        if (!in.read(reinterpret_cast<char*>(b), 4))
            throw std::runtime_error(path + ": truncated");
        return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
               (uint32_t(b[3]) << 24);
    };
    ClassifierModel model;
    uint32_t nlayers = read_u32();
    model.input_dim = static_cast<int>(read_u32());
    model.class_count = static_cast<int>(read_u32());
    for (uint32_t i = 0; i < nlayers; ++i) {
        ClassifierModel::Layer l;
        l.in = static_cast<int>(read_u32());
        l.out = static_cast<int>(read_u32());
        l.W.resize(static_cast<size_t>(l.in) * l.out);
        l.b.resize(l.out);
        if (!in.read(reinterpret_cast<char*>(l.W.data()),
                     static_cast<std::streamsize>(l.W.size() * sizeof(double))) ||
            !in.read(reinterpret_cast<char*>(l.b.data()),
                     static_cast<std::streamsize>(l.b.size() * sizeof(double))))
            throw std::runtime_error(path + ": truncated weight data");
        model.layers.push_back(std::move(l));
    }
    return model;
}

} // namespace lossforge
