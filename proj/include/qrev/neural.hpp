// Copyright 2026 The qrev Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/**
 * @file
 * A small dense-network engine: dense / batch-norm / dropout layers, MSE
 * loss, Adam, and the encoder-decoder used for parameter recovery.
 *
 * Batches are row-major in the sense of "one sample per row" (Eigen matrices
 * of shape N x features). Parameter counting follows the Keras convention,
 * where a batch-norm layer owns four vectors (two trainable, two running).
 */
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "qrev/circuit.hpp"
#include "qrev/error.hpp"

namespace qrev::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class LayerKind { dense, batchnorm, dropout };
enum class Activation { relu, none };
enum class Mode { train, infer };

struct LayerSpec {
    LayerKind kind = LayerKind::dense;
    std::size_t width = 1;
    Activation activation = Activation::none;
    double rate = 0.0;

    static LayerSpec dense(std::size_t width, Activation a) {
        return {LayerKind::dense, width, a, 0.0};
    }
    static LayerSpec batchnorm(std::size_t width) {
        return {LayerKind::batchnorm, width, Activation::none, 0.0};
    }
    static LayerSpec dropout(std::size_t width, double rate) {
        return {LayerKind::dropout, width, Activation::none, rate};
    }

    bool operator==(const LayerSpec &) const = default;
};

inline constexpr double kBatchNormEpsilon = 1e-3;
inline constexpr double kBatchNormMomentum = 0.99;

struct Layer {
    LayerSpec spec;
    std::size_t in = 0;
    // dense
    Matrix w;
    RowVector b;
    // batchnorm
    RowVector gamma, beta, running_mean, running_var;
};

namespace detail {

inline bool same(const Matrix &a, const Matrix &b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.array() == b.array()).all();
}

inline bool same(const RowVector &a, const RowVector &b) {
    return a.size() == b.size() && (a.array() == b.array()).all();
}

}  // namespace detail

/// Per-layer gradients, shaped like the trainable arrays.
struct Gradients {
    std::vector<Matrix> dw;
    std::vector<RowVector> db, dgamma, dbeta;
};

class Mlp {
  public:
    Mlp() = default;

    Mlp(std::size_t input_dim, std::vector<LayerSpec> specs, std::uint64_t seed) : input_dim_(input_dim), rng_(seed) {
        if (input_dim == 0 || specs.empty()) {
            throw DimensionError("network needs a positive input width and at least one layer");
        }
        std::size_t width = input_dim;
        for (const LayerSpec &s : specs) {
            if (s.width == 0) {
                throw DimensionError("layer width must be positive");
            }
            if (s.kind != LayerKind::dense && s.width != width) {
                throw DimensionError("batchnorm/dropout width must equal the previous width");
            }
            if (s.kind == LayerKind::dropout && !(s.rate >= 0.0 && s.rate < 1.0)) {
                throw ConfigError("dropout rate must be in [0, 1)");
            }
            Layer l;
            l.spec = s;
            l.in = width;
            if (s.kind == LayerKind::dense) {
                // He-uniform for relu, Glorot-uniform for the linear head.
                double limit = s.activation == Activation::relu
                                   ? std::sqrt(6.0 / static_cast<double>(width))
                                   : std::sqrt(6.0 / static_cast<double>(width + s.width));
                std::uniform_real_distribution<double> u(-limit, limit);
                l.w.resize(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(s.width));
                for (Eigen::Index i = 0; i < l.w.rows(); ++i) {
                    for (Eigen::Index j = 0; j < l.w.cols(); ++j) {
                        l.w(i, j) = u(rng_);
                    }
                }
                l.b = RowVector::Zero(static_cast<Eigen::Index>(s.width));
            } else if (s.kind == LayerKind::batchnorm) {
                auto n = static_cast<Eigen::Index>(s.width);
                l.gamma = RowVector::Ones(n);
                l.beta = RowVector::Zero(n);
                l.running_mean = RowVector::Zero(n);
                l.running_var = RowVector::Ones(n);
            }
            width = s.width;
            layers_.push_back(std::move(l));
        }
    }

    std::size_t input_dim() const {
        return input_dim_;
    }
    std::size_t output_dim() const {
        return layers_.back().spec.width;
    }
    const std::vector<Layer> &layers() const {
        return layers_;
    }
    std::vector<Layer> &mutable_layers() {
        return layers_;
    }

    /// Keras-style counts: dense in*out+out, batchnorm 4*width, dropout 0.
    std::vector<std::size_t> param_counts() const {
        std::vector<std::size_t> out;
        for (const Layer &l : layers_) {
            switch (l.spec.kind) {
                case LayerKind::dense: out.push_back(l.in * l.spec.width + l.spec.width); break;
                case LayerKind::batchnorm: out.push_back(4 * l.spec.width); break;
                case LayerKind::dropout: out.push_back(0); break;
            }
        }
        return out;
    }

    std::size_t param_count() const {
        auto c = param_counts();
        return std::accumulate(c.begin(), c.end(), std::size_t{0});
    }

    /// Reseeds the dropout mask stream.
    void seed(std::uint64_t s) {
        rng_.seed(s);
    }

    struct Cache {
        std::vector<Matrix> inputs;  // input to each layer
        std::vector<Matrix> pre;     // dense pre-activation
        std::vector<Matrix> mask;    // dropout scale
        std::vector<Matrix> xhat;    // batchnorm normalized input
        std::vector<RowVector> inv_std;
    };

    /// Train mode samples dropout masks and normalizes with batch statistics;
    /// running statistics are updated only when update_running is set.
    Matrix forward(const Matrix &x, Mode mode, Cache *cache = nullptr, bool update_running = true) {
        check_input(x);
        if (cache) {
            *cache = Cache{};
            cache->inputs.resize(layers_.size());
            cache->pre.resize(layers_.size());
            cache->mask.resize(layers_.size());
            cache->xhat.resize(layers_.size());
            cache->inv_std.resize(layers_.size());
        }
        Matrix h = x;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            Layer &l = layers_[i];
            if (cache) {
                cache->inputs[i] = h;
            }
            switch (l.spec.kind) {
                case LayerKind::dense: {
                    Matrix z = h * l.w;
                    z.rowwise() += l.b;
                    if (cache) {
                        cache->pre[i] = z;
                    }
                    h = l.spec.activation == Activation::relu ? Matrix(z.cwiseMax(0.0)) : z;
                    break;
                }
                case LayerKind::batchnorm: {
                    if (mode == Mode::infer) {
                        RowVector inv = (l.running_var.array() + kBatchNormEpsilon).rsqrt().matrix();
                        h = ((h.rowwise() - l.running_mean).array().rowwise() * inv.array()).matrix();
                    } else {
                        RowVector mean = h.colwise().mean();
                        Matrix centred = h.rowwise() - mean;
                        RowVector var = centred.array().square().colwise().mean().matrix();
                        RowVector inv = (var.array() + kBatchNormEpsilon).rsqrt().matrix();
                        h = (centred.array().rowwise() * inv.array()).matrix();
                        if (cache) {
                            cache->xhat[i] = h;
                            cache->inv_std[i] = inv;
                        }
                        if (update_running) {
                            l.running_mean = kBatchNormMomentum * l.running_mean + (1 - kBatchNormMomentum) * mean;
                            l.running_var = kBatchNormMomentum * l.running_var + (1 - kBatchNormMomentum) * var;
                        }
                    }
                    h = (h.array().rowwise() * l.gamma.array()).matrix();
                    h.rowwise() += l.beta;
                    break;
                }
                case LayerKind::dropout: {
                    if (mode == Mode::train && l.spec.rate > 0.0) {
                        // keep with probability 1 - rate: compare 53 random bits
                        const double scale = 1.0 / (1.0 - l.spec.rate);
                        const auto threshold = static_cast<std::uint64_t>((1.0 - l.spec.rate) * 0x1p53);
                        Matrix m(h.rows(), h.cols());
                        double *data = m.data();
                        for (Eigen::Index i = 0; i < m.size(); ++i) {
                            data[i] = (rng_() >> 11) < threshold ? scale : 0.0;
                        }
                        h = h.cwiseProduct(m);
                        if (cache) {
                            cache->mask[i] = std::move(m);
                        }
                    }
                    break;
                }
            }
        }
        return h;
    }

    /// Infer mode reads running statistics and never touches the dropout
    /// stream, so it leaves the network unchanged.
    Matrix predict(const Matrix &x) const {
        return const_cast<Mlp *>(this)->forward(x, Mode::infer);
    }

    /// Backpropagates dL/d(output) through a train-mode cache.
    Gradients backward(const Cache &cache, Matrix grad) const {
        const std::size_t n = layers_.size();
        Gradients g;
        g.dw.resize(n);
        g.db.resize(n);
        g.dgamma.resize(n);
        g.dbeta.resize(n);
        for (std::size_t i = n; i-- > 0;) {
            const Layer &l = layers_[i];
            switch (l.spec.kind) {
                case LayerKind::dense: {
                    if (l.spec.activation == Activation::relu) {
                        grad = grad.cwiseProduct((cache.pre[i].array() > 0.0).cast<double>().matrix());
                    }
                    g.dw[i] = cache.inputs[i].transpose() * grad;
                    g.db[i] = grad.colwise().sum();
                    grad = grad * l.w.transpose();
                    break;
                }
                case LayerKind::batchnorm: {
                    const Matrix &xhat = cache.xhat[i];
                    const auto rows = static_cast<double>(grad.rows());
                    g.dgamma[i] = grad.cwiseProduct(xhat).colwise().sum();
                    g.dbeta[i] = grad.colwise().sum();
                    Matrix dxhat = (grad.array().rowwise() * l.gamma.array()).matrix();
                    RowVector sum_dxhat = dxhat.colwise().sum();
                    RowVector sum_dxhat_xhat = dxhat.cwiseProduct(xhat).colwise().sum();
                    Matrix t = rows * dxhat;
                    t.rowwise() -= sum_dxhat;
                    t -= (xhat.array().rowwise() * sum_dxhat_xhat.array()).matrix();
                    grad = (t.array().rowwise() * (cache.inv_std[i].array() / rows)).matrix();
                    break;
                }
                case LayerKind::dropout: {
                    if (cache.mask[i].size() != 0) {
                        grad = grad.cwiseProduct(cache.mask[i]);
                    }
                    break;
                }
            }
        }
        return g;
    }

    bool operator==(const Mlp &o) const {
        if (input_dim_ != o.input_dim_ || layers_.size() != o.layers_.size()) {
            return false;
        }
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const Layer &a = layers_[i], &b = o.layers_[i];
            if (!(a.spec == b.spec) || a.in != b.in || !detail::same(a.w, b.w) || !detail::same(a.b, b.b) ||
                !detail::same(a.gamma, b.gamma) || !detail::same(a.beta, b.beta) ||
                !detail::same(a.running_mean, b.running_mean) || !detail::same(a.running_var, b.running_var)) {
                return false;
            }
        }
        return true;
    }

  private:
    void check_input(const Matrix &x) const {
        if (static_cast<std::size_t>(x.cols()) != input_dim_) {
            throw DimensionError("network expects " + std::to_string(input_dim_) + " features, got " +
                                 std::to_string(x.cols()));
        }
    }

    std::size_t input_dim_ = 0;
    std::vector<Layer> layers_;
    std::mt19937_64 rng_;
};

/// Encoder 256-128-64-32-16 and mirrored decoder; batch norm and 30% dropout
/// follow the first two dense layers of each half. Output is linear.
inline std::vector<LayerSpec> autoencoder_layers(std::size_t out_dim) {
    using L = LayerSpec;
    const Activation relu = Activation::relu;
    return {
        // encoder
        L::dense(256, relu), L::batchnorm(256), L::dropout(256, 0.3),  //
        L::dense(128, relu), L::batchnorm(128), L::dropout(128, 0.3),  //
        L::dense(64, relu), L::dense(32, relu), L::dense(16, relu),    //
        // decoder
        L::dense(32, relu), L::batchnorm(32), L::dropout(32, 0.3),  //
        L::dense(64, relu), L::batchnorm(64), L::dropout(64, 0.3),  //
        L::dense(128, relu), L::dense(256, relu), L::dense(out_dim, Activation::none),
    };
}

/// Index of the first decoder layer in autoencoder_layers.
inline constexpr std::size_t kDecoderStart = 9;

inline Mlp build_autoencoder(std::size_t in_dim, std::size_t out_dim, std::uint64_t seed = 0) {
    if (in_dim == 0 || out_dim == 0) {
        throw DimensionError("autoencoder dimensions must be positive");
    }
    return Mlp(in_dim, autoencoder_layers(out_dim), seed);
}

inline Mlp build_autoencoder(std::size_t k) {
    return build_autoencoder(k, k);
}

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 1024;
    double validation_fraction = 0.2;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-7;
    std::uint64_t seed = 0;
};

struct TrainTrace {
    std::vector<double> train_loss;
    std::vector<double> val_loss;
    std::vector<double> val_mae;
};

inline double mse(const Matrix &pred, const Matrix &y) {
    return (pred - y).array().square().mean();
}

inline double mae(const Matrix &pred, const Matrix &y) {
    return (pred - y).array().abs().mean();
}

namespace detail {

inline Matrix gather_rows(const Matrix &m, const std::vector<std::size_t> &idx, std::size_t begin, std::size_t end) {
    Matrix out(static_cast<Eigen::Index>(end - begin), m.cols());
    for (std::size_t i = begin; i < end; ++i) {
        out.row(static_cast<Eigen::Index>(i - begin)) = m.row(static_cast<Eigen::Index>(idx[i]));
    }
    return out;
}

/// Keras-style Adam over every trainable array of a network.
class Adam {
  public:
    Adam(const Mlp &m, const TrainConfig &cfg) : cfg_(cfg) {
        for (const Layer &l : m.layers()) {
            mw_.push_back(Matrix::Zero(l.w.rows(), l.w.cols()));
            vw_.push_back(mw_.back());
            mb_.push_back(RowVector::Zero(l.b.size()));
            vb_.push_back(mb_.back());
            mg_.push_back(RowVector::Zero(l.gamma.size()));
            vg_.push_back(mg_.back());
            mbeta_.push_back(RowVector::Zero(l.beta.size()));
            vbeta_.push_back(mbeta_.back());
        }
    }

    void step(Mlp &m, const Gradients &g) {
        ++t_;
        const double lr_t = cfg_.lr * std::sqrt(1 - std::pow(cfg_.beta2, static_cast<double>(t_))) /
                            (1 - std::pow(cfg_.beta1, static_cast<double>(t_)));
        auto &layers = m.mutable_layers();
        for (std::size_t i = 0; i < layers.size(); ++i) {
            Layer &l = layers[i];
            if (l.spec.kind == LayerKind::dense) {
                update(l.w, g.dw[i], mw_[i], vw_[i], lr_t);
                update(l.b, g.db[i], mb_[i], vb_[i], lr_t);
            } else if (l.spec.kind == LayerKind::batchnorm) {
                update(l.gamma, g.dgamma[i], mg_[i], vg_[i], lr_t);
                update(l.beta, g.dbeta[i], mbeta_[i], vbeta_[i], lr_t);
            }
        }
    }

  private:
    template <typename M>
    void update(M &param, const M &grad, M &m, M &v, double lr_t) {
        m = cfg_.beta1 * m + (1 - cfg_.beta1) * grad;
        v = cfg_.beta2 * v + (1 - cfg_.beta2) * grad.cwiseProduct(grad);
        param.array() -= lr_t * m.array() / (v.array().sqrt() + cfg_.epsilon);
    }

    TrainConfig cfg_;
    std::size_t t_ = 0;
    std::vector<Matrix> mw_, vw_;
    std::vector<RowVector> mb_, vb_, mg_, vg_, mbeta_, vbeta_;
};

}  // namespace detail

struct DataSplit {
    std::vector<std::size_t> train, validation;
};

/// Seeded shuffle; the first floor(n (1 - f)) indices train, the rest validate.
inline DataSplit split_indices(std::size_t n, double validation_fraction, std::uint64_t seed) {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must be in (0, 1)");
    }
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_train =
        static_cast<std::size_t>(std::floor(static_cast<double>(n) * (1.0 - validation_fraction) + 1e-9));
    DataSplit s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return s;
}

/// Mini-batch Adam on MSE. Deterministic for a given cfg.seed.
inline TrainTrace train(Mlp &m, const Matrix &x, const Matrix &y, const TrainConfig &cfg) {
    if (x.rows() == 0) {
        throw ConfigError("training set is empty");
    }
    if (x.rows() != y.rows()) {
        throw DimensionError("X and Y row counts differ");
    }
    if (static_cast<std::size_t>(y.cols()) != m.output_dim()) {
        throw DimensionError("target width does not match the network output");
    }
    if (cfg.batch_size == 0) {
        throw ConfigError("batch_size must be positive");
    }
    DataSplit split = split_indices(static_cast<std::size_t>(x.rows()), cfg.validation_fraction, cfg.seed);
    if (split.train.empty() || split.validation.empty()) {
        throw ConfigError("dataset too small for the validation split");
    }
    Matrix xv = detail::gather_rows(x, split.validation, 0, split.validation.size());
    Matrix yv = detail::gather_rows(y, split.validation, 0, split.validation.size());

    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    m.seed(cfg.seed + 1);
    detail::Adam adam(m, cfg);
    TrainTrace trace;
    std::vector<std::size_t> order = split.train;
    Mlp::Cache cache;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
            std::size_t end = std::min(order.size(), begin + cfg.batch_size);
            Matrix xb = detail::gather_rows(x, order, begin, end);
            Matrix yb = detail::gather_rows(y, order, begin, end);
            Matrix pred = m.forward(xb, Mode::train, &cache);
            Matrix diff = pred - yb;
            double loss = diff.array().square().mean();
            if (!std::isfinite(loss)) {
                throw TrainingDiverged(epoch + 1, "non-finite training loss");
            }
            loss_sum += loss * static_cast<double>(end - begin);
            Matrix grad = diff * (2.0 / static_cast<double>(diff.size()));
            adam.step(m, m.backward(cache, grad));
        }
        Matrix pv = m.predict(xv);
        double vl = mse(pv, yv);
        if (!std::isfinite(vl)) {
            throw TrainingDiverged(epoch + 1, "non-finite validation loss");
        }
        trace.train_loss.push_back(loss_sum / static_cast<double>(order.size()));
        trace.val_loss.push_back(vl);
        trace.val_mae.push_back(mae(pv, yv));
    }
    return trace;
}

/// Largest relative error between backprop and central differences of the
/// MSE loss over every trainable scalar. Batch norm uses batch statistics.
inline double grad_check(const Mlp &model, const Matrix &x, const Matrix &y, double eps = 1e-5) {
    for (const Layer &l : model.layers()) {
        if (l.spec.kind == LayerKind::dropout && l.spec.rate > 0.0) {
            throw ConfigError("grad_check requires dropout to be disabled");
        }
    }
    Mlp m = model;
    auto loss = [&](Mlp &net) { return mse(net.forward(x, Mode::train, nullptr, false), y); };
    Mlp::Cache cache;
    Matrix pred = m.forward(x, Mode::train, &cache, false);
    Gradients g = m.backward(cache, (pred - y) * (2.0 / static_cast<double>(y.size())));

    double worst = 0.0;
    auto compare = [&](double analytic, double &param) {
        const double saved = param;
        param = saved + eps;
        double up = loss(m);
        param = saved - eps;
        double down = loss(m);
        param = saved;
        double numeric = (up - down) / (2 * eps);
        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    };
    auto &layers = m.mutable_layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
        Layer &l = layers[i];
        if (l.spec.kind == LayerKind::dense) {
            for (Eigen::Index r = 0; r < l.w.rows(); ++r)
                for (Eigen::Index c = 0; c < l.w.cols(); ++c) compare(g.dw[i](r, c), l.w(r, c));
            for (Eigen::Index c = 0; c < l.b.size(); ++c) compare(g.db[i](c), l.b(c));
        } else if (l.spec.kind == LayerKind::batchnorm) {
            for (Eigen::Index c = 0; c < l.gamma.size(); ++c) compare(g.dgamma[i](c), l.gamma(c));
            for (Eigen::Index c = 0; c < l.beta.size(); ++c) compare(g.dbeta[i](c), l.beta(c));
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints.
//
//   mlp v1 input=3
//   layer dense 256 relu 0
//   ...
//   array 0 w 3 256
//   <one line per row, 17 significant digits>
// ---------------------------------------------------------------------------

namespace detail {

inline std::string kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::dense: return "dense";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::dropout: return "dropout";
    }
    return "?";
}

inline void write_array(std::ostringstream &out, std::size_t layer, const char *name, const Matrix &m) {
    out << "array " << layer << " " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            out << (c ? " " : "") << format_double(m(r, c));
        }
        out << "\n";
    }
}

}  // namespace detail

inline std::string save(const Mlp &m) {
    std::ostringstream out;
    out << "mlp v1 input=" << m.input_dim() << "\n";
    for (const Layer &l : m.layers()) {
        out << "layer " << detail::kind_name(l.spec.kind) << " " << l.spec.width << " "
            << (l.spec.activation == Activation::relu ? "relu" : "none") << " " << format_double(l.spec.rate) << "\n";
    }
    for (std::size_t i = 0; i < m.layers().size(); ++i) {
        const Layer &l = m.layers()[i];
        if (l.spec.kind == LayerKind::dense) {
            detail::write_array(out, i, "w", l.w);
            detail::write_array(out, i, "b", l.b);
        } else if (l.spec.kind == LayerKind::batchnorm) {
            detail::write_array(out, i, "gamma", l.gamma);
            detail::write_array(out, i, "beta", l.beta);
            detail::write_array(out, i, "mean", l.running_mean);
            detail::write_array(out, i, "var", l.running_var);
        }
    }
    return out.str();
}

inline Mlp load(const std::string &text) {
    std::istringstream in(text);
    auto fail = [](const std::string &what) -> FormatError { return FormatError("checkpoint: " + what); };
    std::string magic, version, input;
    if (!(in >> magic >> version >> input) || magic != "mlp" || version != "v1" || input.rfind("input=", 0) != 0) {
        throw fail("bad header");
    }
    std::size_t input_dim = 0;
    try {
        input_dim = std::stoul(input.substr(6));
    } catch (const std::logic_error &) {
        throw fail("bad input width");
    }
    std::vector<LayerSpec> specs;
    std::string word;
    while (in >> word && word == "layer") {
        std::string kind, act;
        double rate = 0;
        LayerSpec s;
        if (!(in >> kind >> s.width >> act >> rate)) {
            throw fail("bad layer line");
        }
        s.kind = kind == "dense" ? LayerKind::dense : kind == "batchnorm" ? LayerKind::batchnorm : LayerKind::dropout;
        if (kind != "dense" && kind != "batchnorm" && kind != "dropout") {
            throw fail("unknown layer kind " + kind);
        }
        s.activation = act == "relu" ? Activation::relu : Activation::none;
        s.rate = rate;
        specs.push_back(s);
    }
    Mlp m(input_dim, specs, 0);
    auto &layers = m.mutable_layers();
    while (word == "array") {
        std::size_t idx = 0;
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        if (!(in >> idx >> name >> rows >> cols) || idx >= layers.size()) {
            throw fail("bad array header");
        }
        Matrix a(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            for (Eigen::Index c = 0; c < cols; ++c) {
                std::string tok;
                if (!(in >> tok)) {
                    throw fail("truncated array");
                }
                try {
                    a(r, c) = std::stod(tok);
                } catch (const std::logic_error &) {
                    throw fail("bad number " + tok);
                }
            }
        }
        Layer &l = layers[idx];
        auto as_row = [&](RowVector &dst) {
            if (rows != 1 || cols != dst.size()) {
                throw fail("shape mismatch for " + name);
            }
            dst = a.row(0);
        };
        if (name == "w") {
            if (rows != l.w.rows() || cols != l.w.cols()) {
                throw fail("shape mismatch for w");
            }
            l.w = a;
        } else if (name == "b") {
            as_row(l.b);
        } else if (name == "gamma") {
            as_row(l.gamma);
        } else if (name == "beta") {
            as_row(l.beta);
        } else if (name == "mean") {
            as_row(l.running_mean);
        } else if (name == "var") {
            as_row(l.running_var);
        } else {
            throw fail("unknown array " + name);
        }
        if (!(in >> word)) {
            break;
        }
    }
    return m;
}

}  // namespace qrev::nn
