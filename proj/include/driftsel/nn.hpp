#ifndef DRIFTSEL_NN_HPP
#define DRIFTSEL_NN_HPP

// Minimal reverse-mode differentiation over batched 1-D tensors, and the
// fully-convolutional classifier built on it.
//
// Activations are stored channel-major, [channels][batch][length], so that
// per-channel operations (batch normalization, convolution rows) run over
// one contiguous block of batch * length values.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "driftsel/error.hpp"
#include "driftsel/random.hpp"

namespace driftsel::nn {

struct Shape {
    std::size_t channels = 0;
    std::size_t batch = 0;
    std::size_t length = 0;

    std::size_t size() const { return channels * batch * length; }
    bool operator==(const Shape&) const = default;
};

template <typename T>
struct Node {
    Shape shape;
    std::vector<T> value;
    std::vector<T> grad; // empty when the tape is not recording
};

template <typename T>
struct Parameter {
    std::string name;
    std::vector<T> value;
    std::vector<T> grad;

    void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Records tensor operations during a forward pass and replays their
/// adjoints in reverse order.
template <typename T>
class Tape {
  public:
    using Id = std::size_t;

    explicit Tape(bool recording = true) : recording_(recording) {}

    bool recording() const { return recording_; }

    Id push(Shape shape) {
        Node<T>& n = nodes_.emplace_back();
        n.shape = shape;
        n.value.assign(shape.size(), T(0));
        if (recording_) {
            n.grad.assign(shape.size(), T(0));
        }
        return nodes_.size() - 1;
    }

    Id leaf(Shape shape, std::span<const T> values) {
        const Id id = push(shape);
        std::copy(values.begin(), values.end(), nodes_[id].value.begin());
        return id;
    }

    Node<T>& operator[](Id id) { return nodes_[id]; }
    const Node<T>& operator[](Id id) const { return nodes_[id]; }

    void on_backward(std::function<void()> op) {
        if (recording_) {
            ops_.push_back(std::move(op));
        }
    }

    /// Seeds d(root)/d(root) = 1 for a scalar root and runs every recorded
    /// adjoint, newest first.
    void backward(Id root) {
        if (!recording_) {
            throw Error("backward() on a tape that is not recording");
        }
        auto& r = nodes_[root];
        std::fill(r.grad.begin(), r.grad.end(), T(1));
        for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
            (*it)();
        }
    }

  private:
    bool recording_;
    std::deque<Node<T>> nodes_;
    std::vector<std::function<void()>> ops_;
};

// ---------------------------------------------------------------------------
// Operations

/// Inner product with eight independent partial sums, which the compiler can
/// keep in vector lanes without reassociating a single accumulator.
template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc[8] = {};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        for (std::size_t l = 0; l < 8; ++l) {
            acc[l] += a[i + l] * b[i + l];
        }
    }
    T tail = T(0);
    for (; i < n; ++i) {
        tail += a[i] * b[i];
    }
    return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

/// Same-padded 1-D convolution without bias. Weights are [out][in][kernel].
template <typename T>
typename Tape<T>::Id conv1d(Tape<T>& tape, typename Tape<T>::Id x_id, Parameter<T>& weight, std::size_t out_channels,
                            std::size_t kernel) {
    const Shape in = tape[x_id].shape;
    const std::size_t cin = in.channels;
    const std::size_t n = in.batch * in.length;
    const std::size_t rows = cin * kernel;
    const auto pad = static_cast<std::ptrdiff_t>(kernel / 2);
    const auto len = static_cast<std::ptrdiff_t>(in.length);

    // im2col: col[(ci, k)][b, t] = x[ci][b][t + k - pad], zero outside.
    auto col = std::make_shared<std::vector<T>>(rows * n, T(0));
    {
        const auto& x = tape[x_id].value;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t k = 0; k < kernel; ++k) {
                T* dst = col->data() + (ci * kernel + k) * n;
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
                const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(len, len - shift);
                for (std::size_t b = 0; b < in.batch; ++b) {
                    const T* src = x.data() + (ci * in.batch + b) * in.length;
                    T* row = dst + b * in.length;
                    for (std::ptrdiff_t t = t0; t < t1; ++t) {
                        row[t] = src[t + shift];
                    }
                }
            }
        }
    }

    const auto y_id = tape.push({out_channels, in.batch, in.length});
    {
        auto& y = tape[y_id].value;
        const T* w = weight.value.data();
        std::size_t co = 0;
        // four output rows per pass share each load of a col row
        for (; co + 4 <= out_channels; co += 4) {
            T* o0 = y.data() + co * n;
            T* o1 = o0 + n;
            T* o2 = o1 + n;
            T* o3 = o2 + n;
            for (std::size_t j = 0; j < rows; ++j) {
                const T w0 = w[co * rows + j];
                const T w1 = w[(co + 1) * rows + j];
                const T w2 = w[(co + 2) * rows + j];
                const T w3 = w[(co + 3) * rows + j];
                const T* c = col->data() + j * n;
                for (std::size_t i = 0; i < n; ++i) {
                    const T ci = c[i];
                    o0[i] += w0 * ci;
                    o1[i] += w1 * ci;
                    o2[i] += w2 * ci;
                    o3[i] += w3 * ci;
                }
            }
        }
        for (; co < out_channels; ++co) {
            T* out = y.data() + co * n;
            for (std::size_t j = 0; j < rows; ++j) {
                const T wj = w[co * rows + j];
                const T* c = col->data() + j * n;
                for (std::size_t i = 0; i < n; ++i) {
                    out[i] += wj * c[i];
                }
            }
        }
    }

    tape.on_backward([&tape, x_id, y_id, &weight, col, out_channels, kernel, cin, n, rows, pad, len, in] {
        const auto& dy = tape[y_id].grad;
        // dW[co][j] = <dy[co], col[j]>
        for (std::size_t co = 0; co < out_channels; ++co) {
            const T* g = dy.data() + co * n;
            for (std::size_t j = 0; j < rows; ++j) {
                weight.grad[co * rows + j] += dot(g, col->data() + j * n, n);
            }
        }
        // dcol[j] = sum_co W[co][j] dy[co], then scatter back (col2im).
        std::vector<T> dcol(rows * n, T(0));
        const T* w = weight.value.data();
        std::size_t co = 0;
        for (; co + 4 <= out_channels; co += 4) {
            const T* g0 = dy.data() + co * n;
            const T* g1 = g0 + n;
            const T* g2 = g1 + n;
            const T* g3 = g2 + n;
            for (std::size_t j = 0; j < rows; ++j) {
                const T w0 = w[co * rows + j];
                const T w1 = w[(co + 1) * rows + j];
                const T w2 = w[(co + 2) * rows + j];
                const T w3 = w[(co + 3) * rows + j];
                T* d = dcol.data() + j * n;
                for (std::size_t i = 0; i < n; ++i) {
                    d[i] += w0 * g0[i] + w1 * g1[i] + w2 * g2[i] + w3 * g3[i];
                }
            }
        }
        for (; co < out_channels; ++co) {
            const T* g = dy.data() + co * n;
            for (std::size_t j = 0; j < rows; ++j) {
                const T wj = w[co * rows + j];
                T* d = dcol.data() + j * n;
                for (std::size_t i = 0; i < n; ++i) {
                    d[i] += wj * g[i];
                }
            }
        }
        auto& dx = tape[x_id].grad;
        for (std::size_t ci = 0; ci < cin; ++ci) {
            for (std::size_t k = 0; k < kernel; ++k) {
                const T* src = dcol.data() + (ci * kernel + k) * n;
                const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) - pad;
                const std::ptrdiff_t t0 = std::max<std::ptrdiff_t>(0, -shift);
                const std::ptrdiff_t t1 = std::min<std::ptrdiff_t>(len, len - shift);
                for (std::size_t b = 0; b < in.batch; ++b) {
                    T* row = dx.data() + (ci * in.batch + b) * in.length;
                    const T* s = src + b * in.length;
                    for (std::ptrdiff_t t = t0; t < t1; ++t) {
                        row[t + shift] += s[t];
                    }
                }
            }
        }
    });
    return y_id;
}

/// Per-channel normalization state: learned scale/shift plus running
/// statistics used at inference.
template <typename T>
struct BatchNorm {
    Parameter<T> gamma;
    Parameter<T> beta;
    std::vector<T> running_mean;
    std::vector<T> running_var;
    T momentum = T(0.1);
    T eps = T(1e-5);
};

/// Training mode normalizes with the batch statistics over (batch, length)
/// and updates the running statistics; inference mode uses the running ones.
template <typename T>
typename Tape<T>::Id batch_norm(Tape<T>& tape, typename Tape<T>::Id x_id, BatchNorm<T>& bn, bool training) {
    const Shape s = tape[x_id].shape;
    const std::size_t n = s.batch * s.length;
    const auto y_id = tape.push(s);
    auto xhat = std::make_shared<std::vector<T>>(s.size());
    auto inv_std = std::make_shared<std::vector<T>>(s.channels);
    {
        const auto& x = tape[x_id].value;
        auto& y = tape[y_id].value;
        for (std::size_t c = 0; c < s.channels; ++c) {
            const T* xc = x.data() + c * n;
            T mean;
            T var;
            if (training) {
                T acc = T(0);
                for (std::size_t i = 0; i < n; ++i) {
                    acc += xc[i];
                }
                mean = acc / static_cast<T>(n);
                T sq = T(0);
                for (std::size_t i = 0; i < n; ++i) {
                    sq += (xc[i] - mean) * (xc[i] - mean);
                }
                var = sq / static_cast<T>(n);
                bn.running_mean[c] = (T(1) - bn.momentum) * bn.running_mean[c] + bn.momentum * mean;
                bn.running_var[c] = (T(1) - bn.momentum) * bn.running_var[c] + bn.momentum * var;
            } else {
                mean = bn.running_mean[c];
                var = bn.running_var[c];
            }
            const T is = T(1) / std::sqrt(var + bn.eps);
            (*inv_std)[c] = is;
            const T g = bn.gamma.value[c];
            const T b = bn.beta.value[c];
            T* xh = xhat->data() + c * n;
            T* yc = y.data() + c * n;
            for (std::size_t i = 0; i < n; ++i) {
                xh[i] = (xc[i] - mean) * is;
                yc[i] = g * xh[i] + b;
            }
        }
    }
    tape.on_backward([&tape, x_id, y_id, &bn, xhat, inv_std, s, n, training] {
        const auto& dy = tape[y_id].grad;
        auto& dx = tape[x_id].grad;
        for (std::size_t c = 0; c < s.channels; ++c) {
            const T* g = dy.data() + c * n;
            const T* xh = xhat->data() + c * n;
            T sum_dy = T(0);
            T sum_dy_xh = T(0);
            for (std::size_t i = 0; i < n; ++i) {
                sum_dy += g[i];
                sum_dy_xh += g[i] * xh[i];
            }
            bn.beta.grad[c] += sum_dy;
            bn.gamma.grad[c] += sum_dy_xh;
            const T gamma = bn.gamma.value[c];
            const T is = (*inv_std)[c];
            T* d = dx.data() + c * n;
            if (training) {
                const T inv_n = T(1) / static_cast<T>(n);
                for (std::size_t i = 0; i < n; ++i) {
                    d[i] += gamma * is * (g[i] - inv_n * sum_dy - xh[i] * inv_n * sum_dy_xh);
                }
            } else {
                for (std::size_t i = 0; i < n; ++i) {
                    d[i] += gamma * is * g[i];
                }
            }
        }
    });
    return y_id;
}

template <typename T>
typename Tape<T>::Id relu(Tape<T>& tape, typename Tape<T>::Id x_id) {
    const Shape s = tape[x_id].shape;
    const auto y_id = tape.push(s);
    {
        const auto& x = tape[x_id].value;
        auto& y = tape[y_id].value;
        for (std::size_t i = 0; i < x.size(); ++i) {
            y[i] = x[i] > T(0) ? x[i] : T(0);
        }
    }
    tape.on_backward([&tape, x_id, y_id] {
        const auto& x = tape[x_id].value;
        const auto& dy = tape[y_id].grad;
        auto& dx = tape[x_id].grad;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] > T(0)) {
                dx[i] += dy[i];
            }
        }
    });
    return y_id;
}

/// Mean over the length axis: [C][B][L] -> [C][B][1].
template <typename T>
typename Tape<T>::Id global_average_pool(Tape<T>& tape, typename Tape<T>::Id x_id) {
    const Shape s = tape[x_id].shape;
    const auto y_id = tape.push({s.channels, s.batch, 1});
    const T inv_len = T(1) / static_cast<T>(s.length);
    {
        const auto& x = tape[x_id].value;
        auto& y = tape[y_id].value;
        for (std::size_t cb = 0; cb < s.channels * s.batch; ++cb) {
            T acc = T(0);
            for (std::size_t t = 0; t < s.length; ++t) {
                acc += x[cb * s.length + t];
            }
            y[cb] = acc * inv_len;
        }
    }
    tape.on_backward([&tape, x_id, y_id, s, inv_len] {
        const auto& dy = tape[y_id].grad;
        auto& dx = tape[x_id].grad;
        for (std::size_t cb = 0; cb < s.channels * s.batch; ++cb) {
            const T g = dy[cb] * inv_len;
            for (std::size_t t = 0; t < s.length; ++t) {
                dx[cb * s.length + t] += g;
            }
        }
    });
    return y_id;
}

/// Fully connected layer on [C][B][1] features; weights are [out][in].
template <typename T>
typename Tape<T>::Id dense(Tape<T>& tape, typename Tape<T>::Id x_id, Parameter<T>& weight, Parameter<T>& bias,
                           std::size_t out_features) {
    const Shape s = tape[x_id].shape;
    const std::size_t in_features = s.channels * s.length;
    const std::size_t batch = s.batch;
    const auto y_id = tape.push({out_features, batch, 1});
    {
        const auto& x = tape[x_id].value;
        auto& y = tape[y_id].value;
        for (std::size_t o = 0; o < out_features; ++o) {
            for (std::size_t b = 0; b < batch; ++b) {
                T acc = bias.value[o];
                for (std::size_t i = 0; i < in_features; ++i) {
                    acc += weight.value[o * in_features + i] * x[i * batch + b];
                }
                y[o * batch + b] = acc;
            }
        }
    }
    tape.on_backward([&tape, x_id, y_id, &weight, &bias, in_features, out_features, batch] {
        const auto& x = tape[x_id].value;
        const auto& dy = tape[y_id].grad;
        auto& dx = tape[x_id].grad;
        for (std::size_t o = 0; o < out_features; ++o) {
            for (std::size_t b = 0; b < batch; ++b) {
                const T g = dy[o * batch + b];
                bias.grad[o] += g;
                for (std::size_t i = 0; i < in_features; ++i) {
                    weight.grad[o * in_features + i] += g * x[i * batch + b];
                    dx[i * batch + b] += g * weight.value[o * in_features + i];
                }
            }
        }
    });
    return y_id;
}

/// Class probabilities of logits [K][B][1], returned as [B][K].
template <typename T>
std::vector<T> softmax(const Node<T>& logits) {
    const std::size_t k = logits.shape.channels;
    const std::size_t batch = logits.shape.batch;
    std::vector<T> p(batch * k);
    for (std::size_t b = 0; b < batch; ++b) {
        T mx = logits.value[b];
        for (std::size_t c = 1; c < k; ++c) {
            mx = std::max(mx, logits.value[c * batch + b]);
        }
        T z = T(0);
        for (std::size_t c = 0; c < k; ++c) {
            p[b * k + c] = std::exp(logits.value[c * batch + b] - mx);
            z += p[b * k + c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            p[b * k + c] /= z;
        }
    }
    return p;
}

/// Mean cross-entropy of softmax(logits) against integer labels; a scalar node.
template <typename T>
typename Tape<T>::Id softmax_cross_entropy(Tape<T>& tape, typename Tape<T>::Id logits_id,
                                           std::span<const int> labels) {
    const Shape s = tape[logits_id].shape;
    const std::size_t k = s.channels;
    const std::size_t batch = s.batch;
    auto probs = std::make_shared<std::vector<T>>(softmax(tape[logits_id]));
    const auto loss_id = tape.push({1, 1, 1});
    T loss = T(0);
    for (std::size_t b = 0; b < batch; ++b) {
        loss -= std::log(std::max((*probs)[b * k + static_cast<std::size_t>(labels[b])], std::numeric_limits<T>::min()));
    }
    tape[loss_id].value[0] = loss / static_cast<T>(batch);
    std::vector<int> lab(labels.begin(), labels.end());
    tape.on_backward([&tape, logits_id, loss_id, probs, lab = std::move(lab), k, batch] {
        const T g = tape[loss_id].grad[0] / static_cast<T>(batch);
        auto& dz = tape[logits_id].grad;
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t c = 0; c < k; ++c) {
                const T target = static_cast<std::size_t>(lab[b]) == c ? T(1) : T(0);
                dz[c * batch + b] += g * ((*probs)[b * k + c] - target);
            }
        }
    });
    return loss_id;
}

// ---------------------------------------------------------------------------
// Classifier

struct ConvBlockSpec {
    std::size_t channels = 0;
    std::size_t kernel = 0;
    bool operator==(const ConvBlockSpec&) const = default;
};

struct Architecture {
    std::vector<ConvBlockSpec> blocks{{32, 7}, {64, 5}, {32, 3}};
    std::size_t input_length = 25;
    std::size_t classes = 2;
    bool operator==(const Architecture&) const = default;
};

/// Conv -> batch norm -> ReLU blocks, global average pooling, dense head.
template <typename T>
class Network {
  public:
    Network() = default;

    Network(Architecture arch, std::uint64_t init_seed) : arch_(std::move(arch)) {
        if (arch_.blocks.empty() || arch_.input_length < 1 || arch_.classes < 2) {
            throw ParameterError("invalid network architecture");
        }
        Rng rng = make_rng(init_seed, 0);
        std::size_t cin = 1;
        for (std::size_t i = 0; i < arch_.blocks.size(); ++i) {
            const auto& spec = arch_.blocks[i];
            Parameter<T> w;
            w.name = "conv" + std::to_string(i) + ".weight";
            const std::size_t fan_in = cin * spec.kernel;
            w.value.resize(spec.channels * fan_in);
            const double sd = std::sqrt(2.0 / static_cast<double>(fan_in)); // He initialization
            for (auto& v : w.value) {
                v = static_cast<T>(sd * standard_normal(rng));
            }
            w.grad.assign(w.value.size(), T(0));
            conv_.push_back(std::move(w));

            BatchNorm<T> bn;
            bn.gamma = {"bn" + std::to_string(i) + ".gamma", std::vector<T>(spec.channels, T(1)),
                        std::vector<T>(spec.channels, T(0))};
            bn.beta = {"bn" + std::to_string(i) + ".beta", std::vector<T>(spec.channels, T(0)),
                       std::vector<T>(spec.channels, T(0))};
            bn.running_mean.assign(spec.channels, T(0));
            bn.running_var.assign(spec.channels, T(1));
            bn_.push_back(std::move(bn));
            cin = spec.channels;
        }
        head_w_.name = "head.weight";
        head_w_.value.resize(arch_.classes * cin);
        const double limit = std::sqrt(6.0 / static_cast<double>(cin + arch_.classes));
        for (auto& v : head_w_.value) {
            v = static_cast<T>(uniform(rng, -limit, limit));
        }
        head_w_.grad.assign(head_w_.value.size(), T(0));
        head_b_ = {"head.bias", std::vector<T>(arch_.classes, T(0)), std::vector<T>(arch_.classes, T(0))};
    }

    const Architecture& architecture() const { return arch_; }

    /// Learned parameters in a fixed order.
    std::vector<Parameter<T>*> parameters() {
        std::vector<Parameter<T>*> out;
        for (std::size_t i = 0; i < conv_.size(); ++i) {
            out.push_back(&conv_[i]);
            out.push_back(&bn_[i].gamma);
            out.push_back(&bn_[i].beta);
        }
        out.push_back(&head_w_);
        out.push_back(&head_b_);
        return out;
    }

    std::vector<BatchNorm<T>>& norms() { return bn_; }
    const std::vector<BatchNorm<T>>& norms() const { return bn_; }

    void zero_grad() {
        for (auto* p : parameters()) {
            p->zero_grad();
        }
    }

    /// Logits [classes][batch][1] for `batch` series of input_length values,
    /// laid out series after series.
    typename Tape<T>::Id forward(Tape<T>& tape, std::span<const T> inputs, std::size_t batch, bool training) {
        if (inputs.size() != batch * arch_.input_length) {
            throw ParameterError("input size does not match batch * input_length");
        }
        auto x = tape.leaf({1, batch, arch_.input_length}, inputs);
        for (std::size_t i = 0; i < conv_.size(); ++i) {
            x = conv1d(tape, x, conv_[i], arch_.blocks[i].channels, arch_.blocks[i].kernel);
            x = batch_norm(tape, x, bn_[i], training);
            x = relu(tape, x);
        }
        x = global_average_pool(tape, x);
        return dense(tape, x, head_w_, head_b_, arch_.classes);
    }

    /// Class probabilities [batch][classes] in inference mode.
    std::vector<T> predict(std::span<const T> inputs, std::size_t batch) {
        Tape<T> tape(false);
        const auto logits = forward(tape, inputs, batch, false);
        return softmax(tape[logits]);
    }

    static double standard_normal(Rng& rng) {
        // Box-Muller on the library's own uniform stream
        const double u1 = 1.0 - uniform01(rng);
        const double u2 = uniform01(rng);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

  private:
    Architecture arch_;
    std::vector<Parameter<T>> conv_;
    std::vector<BatchNorm<T>> bn_;
    Parameter<T> head_w_;
    Parameter<T> head_b_;
};

/// Adam update over a fixed parameter list.
template <typename T>
class Adam {
  public:
    Adam(std::vector<Parameter<T>*> params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8)
        : params_(std::move(params)), lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->value.size(), 0.0);
            v_.emplace_back(p->value.size(), 0.0);
        }
    }

    void step() {
        ++t_;
        const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = static_cast<double>(p.grad[i]);
                m_[k][i] = b1_ * m_[k][i] + (1.0 - b1_) * g;
                v_[k][i] = b2_ * v_[k][i] + (1.0 - b2_) * g * g;
                const double step = lr_ * (m_[k][i] / c1) / (std::sqrt(v_[k][i] / c2) + eps_);
                p.value[i] = static_cast<T>(static_cast<double>(p.value[i]) - step);
            }
        }
    }

  private:
    std::vector<Parameter<T>*> params_;
    double lr_;
    double b1_;
    double b2_;
    double eps_;
    std::int64_t t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

} // namespace driftsel::nn

#endif
