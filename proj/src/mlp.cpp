#include "dac/mlp.hpp"

#include <cmath>
#include <fstream>

#include "dac/binio.hpp"
#include "dac/errors.hpp"
#include "dac/kernels.hpp"
#include "dac/rng.hpp"

namespace dac {

namespace {
constexpr char kCkptMagic[8] = {'D', 'A', 'C', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kCkptVersion = 1;
}  // namespace

std::size_t MlpModel::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        n += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
    }
    return n;
}

MlpModel mlp_new(std::vector<std::size_t> layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2) throw ConfigError("need at least input and output layers");
    for (std::size_t d : layer_dims) {
        if (d == 0) throw ConfigError("layer width must be positive");
    }
    MlpModel m;
    m.layer_dims = std::move(layer_dims);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < m.layer_dims.size(); ++l) {
        const std::size_t fan_in = m.layer_dims[l];
        const std::size_t fan_out = m.layer_dims[l + 1];
        const double std_dev = std::sqrt(2.0 / static_cast<double>(fan_in));
        Matrix w(fan_in, fan_out);
        for (std::size_t i = 0; i < fan_in; ++i) {
            for (std::size_t j = 0; j < fan_out; ++j) w(i, j) = rng.normal() * std_dev;
        }
        m.weights.push_back(std::move(w));
        m.biases.emplace_back(fan_out, 0.0);
    }
    return m;
}

namespace {
void check_batch(const MlpModel& m, const Matrix& batch) {
    if (batch.cols() != m.input_dim()) {
        throw InvalidInputError("batch feature width does not match the model input dimension");
    }
}
}  // namespace

Matrix forward(const MlpModel& m, const Matrix& batch) {
    check_batch(m, batch);
    Matrix x = batch;
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        Matrix z = kernels::matmul(x, m.weights[l]);
        kernels::add_bias_rows(z, m.biases[l]);
        if (l + 1 < m.n_layers()) kernels::relu_inplace(z);
        x = std::move(z);
    }
    return x;
}

Matrix forward_traced(const MlpModel& m, const Matrix& batch, ForwardTrace& trace) {
    check_batch(m, batch);
    trace.pre.clear();
    trace.act.clear();
    trace.act.push_back(batch);
    Matrix x = batch;
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        Matrix z = kernels::matmul(x, m.weights[l]);
        kernels::add_bias_rows(z, m.biases[l]);
        if (l + 1 < m.n_layers()) {
            trace.pre.push_back(z);
            kernels::relu_inplace(z);
            trace.act.push_back(z);
            x = std::move(z);
        } else {
            x = std::move(z);
        }
    }
    return x;
}

Gradients backward(const MlpModel& m, const ForwardTrace& trace, const Matrix& logit_grad) {
    const std::size_t layers = m.n_layers();
    if (trace.act.size() != layers || trace.pre.size() + 1 != layers) {
        throw InvalidInputError("forward trace does not match the model");
    }
    if (logit_grad.cols() != m.output_dim() || logit_grad.rows() != trace.act[0].rows()) {
        throw InvalidInputError("logit gradient shape does not match the model/batch");
    }
    Gradients g;
    g.dw.resize(layers);
    g.db.resize(layers);
    Matrix delta = logit_grad;
    for (std::size_t l = layers; l-- > 0;) {
        g.dw[l] = kernels::matmul_at_b(trace.act[l], delta);
        g.db[l] = kernels::column_sums(delta);
        if (l > 0) {
            Matrix dx = kernels::matmul_a_bt(delta, m.weights[l]);
            kernels::relu_backward_inplace(trace.pre[l - 1], dx);
            delta = std::move(dx);
        }
    }
    return g;
}

Gradients backward(const MlpModel& m, const Matrix& batch, const Matrix& logit_grad) {
    ForwardTrace trace;
    forward_traced(m, batch, trace);
    return backward(m, trace, logit_grad);
}

OptimizerState optimizer_new(const MlpModel& m, double momentum, double weight_decay,
                             bool nesterov) {
    if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
        throw ConfigError("weight decay must be finite and non-negative");
    }
    OptimizerState opt;
    opt.momentum = momentum;
    opt.weight_decay = weight_decay;
    opt.nesterov = nesterov;
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        opt.vel_w.emplace_back(m.weights[l].rows(), m.weights[l].cols());
        opt.vel_b.emplace_back(m.biases[l].size(), 0.0);
    }
    return opt;
}

namespace {

void sgd_update(double* w, double* v, const double* g, std::size_t n, double lr, double momentum,
                double weight_decay, bool nesterov) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(g[i])) throw NumericError("non-finite gradient");
        const double adjusted = g[i] + weight_decay * w[i];
        v[i] = momentum * v[i] + adjusted;
        w[i] -= lr * (nesterov ? adjusted + momentum * v[i] : v[i]);
        if (!std::isfinite(w[i])) throw NumericError("parameter left the finite range");
    }
}

}  // namespace

void sgd_step(MlpModel& m, OptimizerState& opt, const Gradients& g, double lr) {
    if (g.dw.size() != m.n_layers() || g.db.size() != m.n_layers() ||
        opt.vel_w.size() != m.n_layers()) {
        throw InvalidInputError("gradient/optimizer layer count does not match the model");
    }
    if (!std::isfinite(lr) || lr < 0.0) throw InvalidInputError("learning rate must be >= 0");
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
        if (g.dw[l].rows() != m.weights[l].rows() || g.dw[l].cols() != m.weights[l].cols() ||
            g.db[l].size() != m.biases[l].size()) {
            throw InvalidInputError("gradient shape does not match the model");
        }
        sgd_update(m.weights[l].data(), opt.vel_w[l].data(), g.dw[l].data(), m.weights[l].size(),
                   lr, opt.momentum, opt.weight_decay, opt.nesterov);
        sgd_update(m.biases[l].data(), opt.vel_b[l].data(), g.db[l].data(), m.biases[l].size(), lr,
                   opt.momentum, opt.weight_decay, opt.nesterov);
    }
}

double lr_at(const LrSchedule& s, int epoch) {
    if (epoch < 0) throw InvalidInputError("epoch must be non-negative");
    if (!(s.initial_lr > 0.0) || !std::isfinite(s.initial_lr)) {
        throw ConfigError("initial learning rate must be positive");
    }
    double lr = s.initial_lr;
    for (int a : s.anneal_epochs) {
        if (a <= epoch) lr *= s.anneal_factor;
    }
    return lr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
    binio::Writer w(out);
    w.bytes(kCkptMagic, sizeof(kCkptMagic));
    w.u32(kCkptVersion);
    const MlpModel& m = ckpt.model;
    w.u32(static_cast<std::uint32_t>(m.n_layers()));
    for (std::size_t d : m.layer_dims) w.u64(d);
    for (const Matrix& wt : m.weights) {
        for (double x : wt.values()) w.f64(x);
    }
    for (const auto& b : m.biases) {
        for (double x : b) w.f64(x);
    }
    w.f64(ckpt.opt.momentum);
    w.f64(ckpt.opt.weight_decay);
    w.u8(ckpt.opt.nesterov ? 1 : 0);
    for (const Matrix& vw : ckpt.opt.vel_w) {
        for (double x : vw.values()) w.f64(x);
    }
    for (const auto& vb : ckpt.opt.vel_b) {
        for (double x : vb) w.f64(x);
    }
    w.i32(ckpt.epoch);
    out.flush();
    if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    binio::Reader r(in);
    char magic[8];
    r.bytes(magic, sizeof(magic));
    if (!std::equal(magic, magic + 8, kCkptMagic)) {
        throw ParseError("not a checkpoint file (bad magic)", 0);
    }
    const std::uint32_t version = r.u32();
    if (version != kCkptVersion) {
        throw VersionError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint32_t layers = r.u32();
    if (layers == 0 || layers > 64) throw ParseError("implausible layer count", r.offset() - 4);
    Checkpoint ckpt;
    MlpModel& m = ckpt.model;
    m.layer_dims.resize(layers + 1);
    for (auto& d : m.layer_dims) {
        d = static_cast<std::size_t>(r.u64());
        if (d == 0 || d > (1u << 24)) throw ParseError("implausible layer width", r.offset() - 8);
    }
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix wt(m.layer_dims[l], m.layer_dims[l + 1]);
        for (double& x : wt.values()) x = r.f64();
        m.weights.push_back(std::move(wt));
    }
    for (std::size_t l = 0; l < layers; ++l) {
        std::vector<double> b(m.layer_dims[l + 1]);
        for (double& x : b) x = r.f64();
        m.biases.push_back(std::move(b));
    }
    ckpt.opt.momentum = r.f64();
    ckpt.opt.weight_decay = r.f64();
    ckpt.opt.nesterov = r.u8() != 0;
    for (std::size_t l = 0; l < layers; ++l) {
        Matrix vw(m.layer_dims[l], m.layer_dims[l + 1]);
        for (double& x : vw.values()) x = r.f64();
        ckpt.opt.vel_w.push_back(std::move(vw));
    }
    for (std::size_t l = 0; l < layers; ++l) {
        std::vector<double> vb(m.layer_dims[l + 1]);
        for (double& x : vb) x = r.f64();
        ckpt.opt.vel_b.push_back(std::move(vb));
    }
    ckpt.epoch = r.i32();
    r.expect_eof();
    return ckpt;
}

}  // namespace dac
