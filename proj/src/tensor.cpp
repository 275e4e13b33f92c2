#include "cardioforge/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace cardioforge::tensor {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

Tensor make_node(std::vector<std::size_t> shape, std::vector<Tensor> parents) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.assign(shape_size(n->shape), 0.0);
    n->parents = std::move(parents);
    return n;
}

void require_2d(const Tensor& t, const char* who) {
    if (t->shape.size() != 2) {
        throw ShapeError(std::string(who) + ": expected a 2-D tensor");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (a->shape != b->shape) {
        throw ShapeError(std::string(who) + ": shape mismatch");
    }
}

// Elementwise unary op with derivative expressed in terms of (x, y).
template <typename Fwd, typename Bwd>
Tensor unary_op(const Tensor& x, Fwd fwd, Bwd bwd) {
    Tensor out = make_node(x->shape, {x});
    for (std::size_t i = 0; i < x->size(); ++i) out->value[i] = fwd(x->value[i]);
    Node* xn = x.get();
    Node* on = out.get();
    out->backprop = [xn, on, bwd]() {
        for (std::size_t i = 0; i < on->size(); ++i) {
            xn->grad[i] += on->grad[i] * bwd(xn->value[i], on->value[i]);
        }
    };
    return out;
}

}  // namespace

std::size_t Node::rows() const {
    if (shape.size() != 2) throw ShapeError("Node::rows: tensor is not 2-D");
    return shape[0];
}

std::size_t Node::cols() const {
    if (shape.size() != 2) throw ShapeError("Node::cols: tensor is not 2-D");
    return shape[1];
}

std::size_t shape_size(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

Tensor constant(std::vector<std::size_t> shape, std::vector<double> data) {
    if (shape_size(shape) != data.size()) {
        throw ShapeError("constant: data size does not match shape");
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    return n;
}

Tensor zeros(std::vector<std::size_t> shape) {
    auto n = std::make_shared<Node>();
    n->value.assign(shape_size(shape), 0.0);
    n->shape = std::move(shape);
    return n;
}

Tensor scalar(double v) { return constant({1}, {v}); }

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    Tensor out = make_node(a->shape, {a, b});
    for (std::size_t i = 0; i < a->size(); ++i) {
        out->value[i] = a->value[i] + b->value[i];
    }
    Node* an = a.get();
    Node* bn = b.get();
    Node* on = out.get();
    out->backprop = [an, bn, on]() {
        for (std::size_t i = 0; i < on->size(); ++i) {
            an->grad[i] += on->grad[i];
            bn->grad[i] += on->grad[i];
        }
    };
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    Tensor out = make_node(a->shape, {a, b});
    for (std::size_t i = 0; i < a->size(); ++i) {
        out->value[i] = a->value[i] - b->value[i];
    }
    Node* an = a.get();
    Node* bn = b.get();
    Node* on = out.get();
    out->backprop = [an, bn, on]() {
        for (std::size_t i = 0; i < on->size(); ++i) {
            an->grad[i] += on->grad[i];
            bn->grad[i] -= on->grad[i];
        }
    };
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    Tensor out = make_node(a->shape, {a, b});
    for (std::size_t i = 0; i < a->size(); ++i) {
        out->value[i] = a->value[i] * b->value[i];
    }
    Node* an = a.get();
    Node* bn = b.get();
    Node* on = out.get();
    out->backprop = [an, bn, on]() {
        for (std::size_t i = 0; i < on->size(); ++i) {
            an->grad[i] += on->grad[i] * bn->value[i];
            bn->grad[i] += on->grad[i] * an->value[i];
        }
    };
    return out;
}

Tensor scale(const Tensor& a, double s) {
    return unary_op(
        a, [s](double v) { return v * s; },
        [s](double, double) { return s; });
}

Tensor relu(const Tensor& x) {
    return unary_op(
        x, [](double v) { return v > 0.0 ? v : 0.0; },
        [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& x) {
    return unary_op(
        x,
        [](double v) { return 0.5 * v * (1.0 + std::erf(v * kInvSqrt2)); },
        [](double v, double) {
            double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            return cdf + v * pdf;
        });
}

Tensor tanh_act(const Tensor& x) {
    return unary_op(
        x, [](double v) { return std::tanh(v); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& x) {
    return unary_op(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
    if (shape_size(shape) != x->size()) {
        throw ShapeError("reshape: element count mismatch");
    }
    Tensor out = make_node(std::move(shape), {x});
    out->value = x->value;
    Node* xn = x.get();
    Node* on = out.get();
    out->backprop = [xn, on]() {
        for (std::size_t i = 0; i < on->size(); ++i) xn->grad[i] += on->grad[i];
    };
    return out;
}

Tensor transpose(const Tensor& x) {
    require_2d(x, "transpose");
    std::size_t r = x->rows();
    std::size_t c = x->cols();
    Tensor out = make_node({c, r}, {x});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out->value[j * r + i] = x->value[i * c + j];
        }
    }
    Node* xn = x.get();
    Node* on = out.get();
    out->backprop = [xn, on, r, c]() {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                xn->grad[i * c + j] += on->grad[j * r + i];
            }
        }
    };
    return out;
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
    require_2d(x, "slice_cols");
    if (c0 >= c1 || c1 > x->cols()) {
        throw ArgumentError("slice_cols: invalid column range");
    }
    std::size_t r = x->rows();
    std::size_t c = x->cols();
    std::size_t w = c1 - c0;
    Tensor out = make_node({r, w}, {x});
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < w; ++j) {
            out->value[i * w + j] = x->value[i * c + c0 + j];
        }
    }
    Node* xn = x.get();
    Node* on = out.get();
    out->backprop = [xn, on, r, c, c0, w]() {
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                xn->grad[i * c + c0 + j] += on->grad[i * w + j];
            }
        }
    };
    return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
    std::size_t r = 0;
    std::size_t total = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        require_2d(parts[p], "concat_cols");
        if (p == 0) {
            r = parts[p]->rows();
        } else if (parts[p]->rows() != r) {
            throw ShapeError("concat_cols: row count mismatch");
        }
        total += parts[p]->cols();
    }
    Tensor out = make_node({r, total}, parts);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::size_t w = p->cols();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                out->value[i * total + off + j] = p->value[i * w + j];
            }
        }
        off += w;
    }
    Node* on = out.get();
    std::vector<Node*> raw;
    raw.reserve(parts.size());
    for (const Tensor& p : parts) raw.push_back(p.get());
    out->backprop = [on, raw, r, total]() {
        std::size_t off = 0;
        for (Node* p : raw) {
            std::size_t w = p->cols();
            for (std::size_t i = 0; i < r; ++i) {
                for (std::size_t j = 0; j < w; ++j) {
                    p->grad[i * w + j] += on->grad[i * total + off + j];
                }
            }
            off += w;
        }
    };
    return out;
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ArgumentError("concat_rows: no inputs");
    std::size_t c = 0;
    std::size_t total = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        require_2d(parts[p], "concat_rows");
        if (p == 0) {
            c = parts[p]->cols();
        } else if (parts[p]->cols() != c) {
            throw ShapeError("concat_rows: column count mismatch");
        }
        total += parts[p]->rows();
    }
    Tensor out = make_node({total, c}, parts);
    std::size_t off = 0;
    for (const Tensor& p : parts) {
        std::copy(p->value.begin(), p->value.end(), out->value.begin() + off);
        off += p->size();
    }
    Node* on = out.get();
    std::vector<Node*> raw;
    raw.reserve(parts.size());
    for (const Tensor& p : parts) raw.push_back(p.get());
    out->backprop = [on, raw]() {
        std::size_t off = 0;
        for (Node* p : raw) {
            for (std::size_t i = 0; i < p->size(); ++i) p->grad[i] += on->grad[off + i];
            off += p->size();
        }
    };
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d(a, "matmul");
    require_2d(b, "matmul");
    std::size_t m = a->rows();
    std::size_t k = a->cols();
    std::size_t n = b->cols();
    if (b->rows() != k) throw ShapeError("matmul: inner dimension mismatch");
    Tensor out = make_node({m, n}, {a, b});
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            double av = a->value[i * k + p];
            if (av == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                out->value[i * n + j] += av * b->value[p * n + j];
            }
        }
    }
    Node* an = a.get();
    Node* bn = b.get();
    Node* on = out.get();
    out->backprop = [an, bn, on, m, k, n]() {
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                double g = on->grad[i * n + j];
                if (g == 0.0) continue;
                for (std::size_t p = 0; p < k; ++p) {
                    an->grad[i * k + p] += g * bn->value[p * n + j];
                    bn->grad[p * n + j] += g * an->value[i * k + p];
                }
            }
        }
    };
    return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    require_2d(x, "linear");
    require_2d(w, "linear");
    std::size_t n = x->rows();
    std::size_t din = x->cols();
    std::size_t dout = w->rows();
    if (w->cols() != din) throw ShapeError("linear: weight/input dimension mismatch");
    if (b && b->size() != dout) throw ShapeError("linear: bias dimension mismatch");

    std::vector<Tensor> parents = {x, w};
    if (b) parents.push_back(b);
    Tensor out = make_node({n, dout}, std::move(parents));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t o = 0; o < dout; ++o) {
            double acc = b ? b->value[o] : 0.0;
            const double* xr = &x->value[i * din];
            const double* wr = &w->value[o * din];
            for (std::size_t j = 0; j < din; ++j) acc += xr[j] * wr[j];
            out->value[i * dout + o] = acc;
        }
    }
    Node* xn = x.get();
    Node* wn = w.get();
    Node* bn = b ? b.get() : nullptr;
    Node* on = out.get();
    out->backprop = [xn, wn, bn, on, n, din, dout]() {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t o = 0; o < dout; ++o) {
                double g = on->grad[i * dout + o];
                if (g == 0.0) continue;
                if (bn) bn->grad[o] += g;
                double* xg = &xn->grad[i * din];
                double* wg = &wn->grad[o * din];
                const double* xr = &xn->value[i * din];
                const double* wr = &wn->value[o * din];
                for (std::size_t j = 0; j < din; ++j) {
                    xg[j] += g * wr[j];
                    wg[j] += g * xr[j];
                }
            }
        }
    };
    return out;
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::size_t stride, std::size_t dilation) {
    require_2d(x, "conv1d");
    if (w->shape.size() != 3) throw ShapeError("conv1d: weight must be 3-D");
    if (stride == 0 || dilation == 0) throw ArgumentError("conv1d: stride and dilation must be positive");
    std::size_t cin = x->rows();
    std::size_t len = x->cols();
    std::size_t cout = w->shape[0];
    std::size_t k = w->shape[2];
    if (w->shape[1] != cin) throw ShapeError("conv1d: channel mismatch");
    if (b && b->size() != cout) throw ShapeError("conv1d: bias dimension mismatch");
    std::size_t span = (k - 1) * dilation + 1;
    if (len < span) throw ShapeError("conv1d: input shorter than receptive span");
    std::size_t lout = (len - span) / stride + 1;

    std::vector<Tensor> parents = {x, w};
    if (b) parents.push_back(b);
    Tensor out = make_node({cout, lout}, std::move(parents));
    for (std::size_t o = 0; o < cout; ++o) {
        for (std::size_t t = 0; t < lout; ++t) {
            double acc = b ? b->value[o] : 0.0;
            std::size_t base = t * stride;
            for (std::size_t i = 0; i < cin; ++i) {
                const double* xr = &x->value[i * len + base];
                const double* wr = &w->value[(o * cin + i) * k];
                for (std::size_t kk = 0; kk < k; ++kk) {
                    acc += wr[kk] * xr[kk * dilation];
                }
            }
            out->value[o * lout + t] = acc;
        }
    }
    Node* xn = x.get();
    Node* wn = w.get();
    Node* bn = b ? b.get() : nullptr;
    Node* on = out.get();
    out->backprop = [xn, wn, bn, on, cin, len, cout, k, stride, dilation, lout]() {
        for (std::size_t o = 0; o < cout; ++o) {
            for (std::size_t t = 0; t < lout; ++t) {
                double g = on->grad[o * lout + t];
                if (g == 0.0) continue;
                if (bn) bn->grad[o] += g;
                std::size_t base = t * stride;
                for (std::size_t i = 0; i < cin; ++i) {
                    double* xg = &xn->grad[i * len + base];
                    const double* xr = &xn->value[i * len + base];
                    double* wg = &wn->grad[(o * cin + i) * k];
                    const double* wr = &wn->value[(o * cin + i) * k];
                    for (std::size_t kk = 0; kk < k; ++kk) {
                        xg[kk * dilation] += g * wr[kk];
                        wg[kk] += g * xr[kk * dilation];
                    }
                }
            }
        }
    };
    return out;
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
    require_2d(x, "add_channel_bias");
    std::size_t c = x->rows();
    std::size_t len = x->cols();
    if (bias->size() != c) throw ShapeError("add_channel_bias: bias dimension mismatch");
    Tensor out = make_node({c, len}, {x, bias});
    for (std::size_t i = 0; i < c; ++i) {
        for (std::size_t t = 0; t < len; ++t) {
            out->value[i * len + t] = x->value[i * len + t] + bias->value[i];
        }
    }
    Node* xn = x.get();
    Node* bn = bias.get();
    Node* on = out.get();
    out->backprop = [xn, bn, on, c, len]() {
        for (std::size_t i = 0; i < c; ++i) {
            for (std::size_t t = 0; t < len; ++t) {
                double g = on->grad[i * len + t];
                xn->grad[i * len + t] += g;
                bn->grad[i] += g;
            }
        }
    };
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    require_2d(x, "layer_norm");
    std::size_t n = x->rows();
    std::size_t d = x->cols();
    if (gain->size() != d || bias->size() != d) {
        throw ShapeError("layer_norm: gain/bias dimension mismatch");
    }
    Tensor out = make_node({n, d}, {x, gain, bias});
    // Cache normalized rows and inverse stddevs for the backward pass.
    auto xhat = std::make_shared<std::vector<double>>(n * d);
    auto inv_sigma = std::make_shared<std::vector<double>>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = &x->value[i * d];
        double mean = 0.0;
        for (std::size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double dv = xr[j] - mean;
            var += dv * dv;
        }
        var /= static_cast<double>(d);
        double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[i] = is;
        for (std::size_t j = 0; j < d; ++j) {
            double h = (xr[j] - mean) * is;
            (*xhat)[i * d + j] = h;
            out->value[i * d + j] = gain->value[j] * h + bias->value[j];
        }
    }
    Node* xn = x.get();
    Node* gn = gain.get();
    Node* bn = bias.get();
    Node* on = out.get();
    out->backprop = [xn, gn, bn, on, xhat, inv_sigma, n, d]() {
        for (std::size_t i = 0; i < n; ++i) {
            const double* hg = &on->grad[i * d];
            const double* h = &(*xhat)[i * d];
            double sum_dh = 0.0;
            double sum_dh_h = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                double dh = hg[j] * gn->value[j];
                sum_dh += dh;
                sum_dh_h += dh * h[j];
                gn->grad[j] += hg[j] * h[j];
                bn->grad[j] += hg[j];
            }
            double inv_d = 1.0 / static_cast<double>(d);
            double is = (*inv_sigma)[i];
            for (std::size_t j = 0; j < d; ++j) {
                double dh = hg[j] * gn->value[j];
                xn->grad[i * d + j] +=
                    is * (dh - inv_d * sum_dh - h[j] * inv_d * sum_dh_h);
            }
        }
    };
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    require_2d(x, "softmax_rows");
    std::size_t n = x->rows();
    std::size_t d = x->cols();
    Tensor out = make_node({n, d}, {x});
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = &x->value[i * d];
        double mx = xr[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            double e = std::exp(xr[j] - mx);
            out->value[i * d + j] = e;
            sum += e;
        }
        for (std::size_t j = 0; j < d; ++j) out->value[i * d + j] /= sum;
    }
    Node* xn = x.get();
    Node* on = out.get();
    out->backprop = [xn, on, n, d]() {
        for (std::size_t i = 0; i < n; ++i) {
            const double* y = &on->value[i * d];
            const double* gy = &on->grad[i * d];
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += gy[j] * y[j];
            for (std::size_t j = 0; j < d; ++j) {
                xn->grad[i * d + j] += y[j] * (gy[j] - dot);
            }
        }
    };
    return out;
}

Tensor mean_rows(const Tensor& x) {
    require_2d(x, "mean_rows");
    std::size_t n = x->rows();
    std::size_t d = x->cols();
    Tensor out = make_node({1, d}, {x});
    double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out->value[j] += x->value[i * d + j] * inv_n;
        }
    }
    Node* xn = x.get();
    Node* on = out.get();
    out->backprop = [xn, on, n, d, inv_n]() {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                xn->grad[i * d + j] += on->grad[j] * inv_n;
            }
        }
    };
    return out;
}

Tensor mean_all(const Tensor& x) {
    if (x->size() == 0) throw ArgumentError("mean_all: empty tensor");
    Tensor out = make_node({1}, {x});
    double inv_n = 1.0 / static_cast<double>(x->size());
    double acc = 0.0;
    for (double v : x->value) acc += v;
    out->value[0] = acc * inv_n;
    Node* xn = x.get();
    Node* on = out.get();
    out->backprop = [xn, on, inv_n]() {
        for (std::size_t i = 0; i < xn->size(); ++i) {
            xn->grad[i] += on->grad[0] * inv_n;
        }
    };
    return out;
}

Tensor l1_loss(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "l1_loss");
    if (a->size() == 0) throw ArgumentError("l1_loss: empty tensor");
    Tensor out = make_node({1}, {a, b});
    double inv_n = 1.0 / static_cast<double>(a->size());
    double acc = 0.0;
    for (std::size_t i = 0; i < a->size(); ++i) {
        acc += std::abs(a->value[i] - b->value[i]);
    }
    out->value[0] = acc * inv_n;
    Node* an = a.get();
    Node* bn = b.get();
    Node* on = out.get();
    out->backprop = [an, bn, on, inv_n]() {
        double g = on->grad[0] * inv_n;
        for (std::size_t i = 0; i < an->size(); ++i) {
            double diff = an->value[i] - bn->value[i];
            double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            an->grad[i] += g * s;
            bn->grad[i] -= g * s;
        }
    };
    return out;
}

Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                     const std::vector<double>& class_weights) {
    require_2d(logits, "cross_entropy");
    std::size_t n = logits->rows();
    std::size_t c = logits->cols();
    if (labels.size() != n) throw ShapeError("cross_entropy: label count mismatch");
    if (class_weights.size() != c) {
        throw ShapeError("cross_entropy: class weight count mismatch");
    }
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= c) {
            throw ArgumentError("cross_entropy: label out of range");
        }
    }

    Tensor out = make_node({1}, {logits});
    auto probs = std::make_shared<std::vector<double>>(n * c);
    double weight_sum = 0.0;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* xr = &logits->value[i * c];
        double mx = xr[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, xr[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < c; ++j) sum += std::exp(xr[j] - mx);
        double log_z = mx + std::log(sum);
        for (std::size_t j = 0; j < c; ++j) {
            (*probs)[i * c + j] = std::exp(xr[j] - log_z);
        }
        double w = class_weights[static_cast<std::size_t>(labels[i])];
        weight_sum += w;
        loss += w * (log_z - xr[labels[i]]);
    }
    if (weight_sum <= 0.0) throw ArgumentError("cross_entropy: class weights sum to zero");
    out->value[0] = loss / weight_sum;

    Node* xn = logits.get();
    Node* on = out.get();
    out->backprop = [xn, on, probs, labels, class_weights, weight_sum, n, c]() {
        double g = on->grad[0] / weight_sum;
        for (std::size_t i = 0; i < n; ++i) {
            double w = class_weights[static_cast<std::size_t>(labels[i])];
            for (std::size_t j = 0; j < c; ++j) {
                double target = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
                xn->grad[i * c + j] += g * w * ((*probs)[i * c + j] - target);
            }
        }
    };
    return out;
}

void backward(const Tensor& root) {
    if (!root) throw ArgumentError("backward: null tensor");
    if (root->size() != 1) throw ArgumentError("backward: root must be a scalar");

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    struct Frame {
        Node* node;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({root.get(), 0});
    seen.insert(root.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.node->parents.size()) {
            Node* p = f.node->parents[f.next_parent++].get();
            if (seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
    }
    root->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop();
    }
}

std::vector<double> values(const Tensor& t) {
    if (!t) throw ArgumentError("values: null tensor");
    return t->value;
}

Tensor ParamStore::insert(const std::string& name, Tensor t) {
    if (map_.count(name)) throw ArgumentError("ParamStore: duplicate parameter " + name);
    t->name = name;
    t->trainable = true;
    t->grad.assign(t->value.size(), 0.0);
    order_.push_back(name);
    map_.emplace(name, t);
    return t;
}

Tensor ParamStore::add_uniform(const std::string& name, std::vector<std::size_t> shape,
                               std::size_t fan_in, Rng& rng) {
    if (fan_in == 0) throw ArgumentError("ParamStore: fan_in must be positive");
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> data(shape_size(shape));
    for (double& v : data) v = rng.uniform(-bound, bound);
    return insert(name, constant(std::move(shape), std::move(data)));
}

Tensor ParamStore::add_zeros(const std::string& name, std::vector<std::size_t> shape) {
    return insert(name, zeros(std::move(shape)));
}

Tensor ParamStore::add_value(const std::string& name, std::vector<std::size_t> shape,
                             std::vector<double> data) {
    return insert(name, constant(std::move(shape), std::move(data)));
}

Tensor ParamStore::get(const std::string& name) const {
    auto it = map_.find(name);
    if (it == map_.end()) throw ArgumentError("ParamStore: unknown parameter " + name);
    return it->second;
}

std::size_t ParamStore::total_size() const {
    std::size_t n = 0;
    for (const auto& kv : map_) n += kv.second->size();
    return n;
}

void ParamStore::zero_grad() {
    for (const auto& name : order_) {
        Tensor t = map_.at(name);
        std::fill(t->grad.begin(), t->grad.end(), 0.0);
    }
}

std::map<std::string, std::vector<double>> snapshot(const ParamStore& store) {
    std::map<std::string, std::vector<double>> snap;
    for (const auto& name : store.names()) snap[name] = store.get(name)->value;
    return snap;
}

void restore(ParamStore& store, const std::map<std::string, std::vector<double>>& snap) {
    for (const auto& [name, data] : snap) {
        Tensor t = store.get(name);
        if (t->size() != data.size()) {
            throw ShapeError("restore: size mismatch for " + name);
        }
        t->value = data;
    }
}

const Tensor& Checkpoint::find(const std::string& name) const {
    for (const auto& [n, t] : params) {
        if (n == name) return t;
    }
    throw ArgumentError("Checkpoint: no parameter named " + name);
}

namespace {

constexpr char kMagic[4] = {'C', 'F', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
    }
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    }
    return static_cast<T>(v);
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const nlohmann::json& meta,
                     const ParamStore& store) {
    nlohmann::json header;
    header["meta"] = meta;
    header["params"] = nlohmann::json::array();
    for (const auto& name : store.names()) {
        header["params"].push_back({{"name", name}, {"shape", store.get(name)->shape}});
    }
    std::string header_str = header.dump();

    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_checkpoint: cannot open " + path.string());
    os.write(kMagic, 4);
    write_le<std::uint32_t>(os, kVersion);
    write_le<std::uint64_t>(os, header_str.size());
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto& name : store.names()) {
        for (double v : store.get(name)->value) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, sizeof(bits));
            write_le<std::uint64_t>(os, bits);
        }
    }
    if (!os) throw IoError("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_checkpoint: cannot open " + path.string());
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("load_checkpoint: bad magic in " + path.string());
    }
    std::uint32_t version = read_le<std::uint32_t>(is);
    if (version != kVersion) {
        throw FormatError("load_checkpoint: unsupported version " + std::to_string(version));
    }
    std::uint64_t header_len = read_le<std::uint64_t>(is);
    std::string header_str(header_len, '\0');
    is.read(header_str.data(), static_cast<std::streamsize>(header_len));
    if (!is) throw FormatError("load_checkpoint: truncated header in " + path.string());

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_checkpoint: bad header: ") + e.what());
    }

    Checkpoint ck;
    ck.meta = header.value("meta", nlohmann::json::object());
    for (const auto& p : header.at("params")) {
        std::string name = p.at("name").get<std::string>();
        std::vector<std::size_t> shape = p.at("shape").get<std::vector<std::size_t>>();
        std::vector<double> data(shape_size(shape));
        for (double& v : data) {
            std::uint64_t bits = read_le<std::uint64_t>(is);
            std::memcpy(&v, &bits, sizeof(v));
        }
        if (!is) throw FormatError("load_checkpoint: truncated payload in " + path.string());
        ck.params.emplace_back(std::move(name), constant(std::move(shape), std::move(data)));
    }
    return ck;
}

void load_into(ParamStore& store, const Checkpoint& ck) {
    for (const auto& [name, t] : ck.params) {
        if (!store.has(name)) {
            throw ArgumentError("load_into: store has no parameter " + name);
        }
        Tensor dst = store.get(name);
        if (dst->shape != t->shape) {
            throw ShapeError("load_into: shape mismatch for " + name);
        }
        dst->value = t->value;
    }
}

}  // namespace cardioforge::tensor
