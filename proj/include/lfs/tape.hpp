#pragma once

#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>
#include <vector>

#include "lfs/array.hpp"
#include "lfs/common.hpp"
#include "lfs/gemm.hpp"

namespace lfs::numgrad {

// Named parameter arrays with gradient slots aligned one-to-one. After a
// backward pass every parameter that participated in the loss holds its exact
// gradient; non-participating parameters keep exact zeros.
class ParamStore {
public:
    int add(const std::string& name, Array value) {
        require(index_.find(name) == index_.end(), "duplicate parameter name '", name, "'");
        const int id = static_cast<int>(names_.size());
        index_[name] = id;
        names_.push_back(name);
        grads_.push_back(Array::zeros(value.shape));
        values_.push_back(std::move(value));
        return id;
    }

    bool has(const std::string& name) const { return index_.find(name) != index_.end(); }

    int id(const std::string& name) const {
        auto it = index_.find(name);
        require(it != index_.end(), "unknown parameter '", name, "'");
        return it->second;
    }

    Array& value(const std::string& name) { return values_[static_cast<size_t>(id(name))]; }
    const Array& value(const std::string& name) const { return values_[static_cast<size_t>(id(name))]; }
    Array& value(int i) { return values_[static_cast<size_t>(i)]; }
    const Array& value(int i) const { return values_[static_cast<size_t>(i)]; }

    Array& grad(const std::string& name) { return grads_[static_cast<size_t>(id(name))]; }
    const Array& grad(const std::string& name) const { return grads_[static_cast<size_t>(id(name))]; }
    Array& grad(int i) { return grads_[static_cast<size_t>(i)]; }

    const std::vector<std::string>& names() const { return names_; }
    int count() const { return static_cast<int>(names_.size()); }

    void zero_grads() {
        for (auto& g : grads_) std::fill(g.data.begin(), g.data.end(), 0.0);
    }

    double grad_norm() const {
        double s = 0.0;
        for (const auto& g : grads_)
            for (double v : g.data) s += v * v;
        return std::sqrt(s);
    }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, int> index_;
    std::vector<Array> values_;
    std::vector<Array> grads_;
};

enum class Op {
    Leaf,
    Add,
    Sub,
    Mul,
    Scale,
    AddScalar,
    Exp,
    Log,
    Tanh,
    Relu,
    Clamp,
    MatMul,
    MatMulNT,
    AddBias,
    Conv2d,
    Reshape,
    Sum,
    RowSum,
    L2Norm,
    Softmax,
    Dot,
    Minimum,
    ConcatCols,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::Leaf: return "leaf";
        case Op::Add: return "add";
        case Op::Sub: return "sub";
        case Op::Mul: return "mul";
        case Op::Scale: return "scale";
        case Op::AddScalar: return "add_scalar";
        case Op::Exp: return "exp";
        case Op::Log: return "log";
        case Op::Tanh: return "tanh";
        case Op::Relu: return "relu";
        case Op::Clamp: return "clamp";
        case Op::MatMul: return "matmul";
        case Op::MatMulNT: return "matmul_nt";
        case Op::AddBias: return "add_bias";
        case Op::Conv2d: return "conv2d";
        case Op::Reshape: return "reshape";
        case Op::Sum: return "sum";
        case Op::RowSum: return "row_sum";
        case Op::L2Norm: return "l2_normalize";
        case Op::Softmax: return "softmax";
        case Op::Dot: return "dot";
        case Op::Minimum: return "minimum";
        case Op::ConcatCols: return "concat_cols";
    }
    return "?";
}

struct Var {
    int id = -1;
};

// One recorded forward pass. Ops append nodes; backward() runs the reverse
// sweep and accumulates parameter gradients into the bound ParamStore.
// A tape with grads disabled records values only (target-branch evaluation).
class Tape {
public:
    explicit Tape(ParamStore* store = nullptr, bool grad_enabled = true, bool checked = false)
        : store_(store), grad_enabled_(grad_enabled), checked_(checked) {}

    bool grad_enabled() const { return grad_enabled_; }
    bool checked() const { return checked_; }
    int log_clamp_count() const { return log_clamps_; }

    const Array& val(Var v) const { return nodes_[static_cast<size_t>(v.id)].val; }
    double scalar(Var v) const {
        const Array& a = val(v);
        require(a.size() == 1, "expected scalar, got shape ", shape_str(a.shape));
        return a.data[0];
    }

    // trainable leaf bound to a store parameter
    Var param(const std::string& name) {
        require(store_ != nullptr, "tape has no parameter store");
        const int pid = store_->id(name);
        Node n;
        n.op = Op::Leaf;
        n.val = store_->value(pid);
        n.needs_grad = grad_enabled_;
        n.param = pid;
        return push(std::move(n));
    }

    // store parameter used as a constant (target branches); never receives gradient
    Var frozen(const std::string& name) {
        require(store_ != nullptr, "tape has no parameter store");
        Node n;
        n.op = Op::Leaf;
        n.val = store_->value(name);
        n.needs_grad = false;
        return push(std::move(n));
    }

    Var input(Array v) {
        Node n;
        n.op = Op::Leaf;
        n.val = std::move(v);
        n.needs_grad = false;
        return push(std::move(n));
    }

    Var add(Var a, Var b) { return binary_same_shape(Op::Add, a, b, [](double x, double y) { return x + y; }); }
    Var sub(Var a, Var b) { return binary_same_shape(Op::Sub, a, b, [](double x, double y) { return x - y; }); }
    Var mul(Var a, Var b) { return binary_same_shape(Op::Mul, a, b, [](double x, double y) { return x * y; }); }

    Var scale(Var a, double c) {
        Node n = unary_node(Op::Scale, a);
        n.s0 = c;
        for (auto& v : n.val.data) v *= c;
        return push(std::move(n));
    }

    Var add_scalar(Var a, double c) {
        Node n = unary_node(Op::AddScalar, a);
        n.s0 = c;
        for (auto& v : n.val.data) v += c;
        return push(std::move(n));
    }

    Var neg(Var a) { return scale(a, -1.0); }

    Var exp_(Var a) {
        Node n = unary_node(Op::Exp, a);
        for (auto& v : n.val.data) v = std::exp(v);
        return push(std::move(n));
    }

    // log with a floor: inputs below `floor` are clamped before the log and
    // contribute zero gradient; each clamp is counted as a diagnostic.
    Var log_(Var a, double floor = 1e-12) {
        Node n = unary_node(Op::Log, a);
        n.s0 = floor;
        for (auto& v : n.val.data) {
            if (v < floor) {
                ++log_clamps_;
                v = floor;
            }
            v = std::log(v);
        }
        return push(std::move(n));
    }

    Var tanh_(Var a) {
        Node n = unary_node(Op::Tanh, a);
        for (auto& v : n.val.data) v = std::tanh(v);
        return push(std::move(n));
    }

    Var relu(Var a) {
        Node n = unary_node(Op::Relu, a);
        for (auto& v : n.val.data) v = v > 0.0 ? v : 0.0;
        return push(std::move(n));
    }

    Var clamp(Var a, double lo, double hi) {
        require(lo <= hi, "clamp bounds inverted: ", lo, " > ", hi);
        Node n = unary_node(Op::Clamp, a);
        n.s0 = lo;
        n.s1 = hi;
        for (auto& v : n.val.data) v = v < lo ? lo : (v > hi ? hi : v);
        return push(std::move(n));
    }

    Var matmul(Var a, Var b) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        const Array& B = nodes_[static_cast<size_t>(b.id)].val;
        require(A.rank() == 2 && B.rank() == 2, "matmul needs 2-D operands, got ", shape_str(A.shape), " and ",
                shape_str(B.shape));
        require(A.dim(1) == B.dim(0), "matmul inner-dimension mismatch between ", shape_str(A.shape), " and ",
                shape_str(B.shape));
        const int m = A.dim(0), k = A.dim(1), nn = B.dim(1);
        Node n;
        n.op = Op::MatMul;
        n.a = a.id;
        n.b = b.id;
        n.needs_grad = needs(a) || needs(b);
        n.val = Array::zeros({m, nn});
        gemm_nn(A.data.data(), B.data.data(), n.val.data.data(), m, k, nn);
        return push(std::move(n));
    }

    // a [m x d] times b^T where b is [n x d]
    Var matmul_nt(Var a, Var b) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        const Array& B = nodes_[static_cast<size_t>(b.id)].val;
        require(A.rank() == 2 && B.rank() == 2, "matmul_nt needs 2-D operands, got ", shape_str(A.shape), " and ",
                shape_str(B.shape));
        require(A.dim(1) == B.dim(1), "matmul_nt inner-dimension mismatch between ", shape_str(A.shape), " and ",
                shape_str(B.shape));
        const int m = A.dim(0), k = A.dim(1), nn = B.dim(0);
        Node n;
        n.op = Op::MatMulNT;
        n.a = a.id;
        n.b = b.id;
        n.needs_grad = needs(a) || needs(b);
        n.val = Array::zeros({m, nn});
        gemm_nt(A.data.data(), B.data.data(), n.val.data.data(), m, k, nn);
        return push(std::move(n));
    }

    // rows of a [m x n] plus bias [n]
    Var add_bias(Var a, Var bias) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        const Array& B = nodes_[static_cast<size_t>(bias.id)].val;
        require(A.rank() == 2 && B.rank() == 1 && A.dim(1) == B.dim(0), "add_bias mismatch between ",
                shape_str(A.shape), " and ", shape_str(B.shape));
        Node n;
        n.op = Op::AddBias;
        n.a = a.id;
        n.b = bias.id;
        n.needs_grad = needs(a) || needs(bias);
        n.val = A;
        const int m = A.dim(0), nn = A.dim(1);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < nn; ++j) n.val.data[static_cast<size_t>(i) * nn + j] += B.data[static_cast<size_t>(j)];
        return push(std::move(n));
    }

    Var affine(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

    // x [N,C,H,W], w [O,C,kh,kw], bias [O]; zero padding, uniform stride
    Var conv2d(Var x, Var w, Var bias, int stride, int pad) {
        const Array& X = nodes_[static_cast<size_t>(x.id)].val;
        const Array& W = nodes_[static_cast<size_t>(w.id)].val;
        const Array& B = nodes_[static_cast<size_t>(bias.id)].val;
        require(X.rank() == 4 && W.rank() == 4, "conv2d needs 4-D input/weight, got ", shape_str(X.shape), " and ",
                shape_str(W.shape));
        require(stride >= 1 && pad >= 0, "conv2d stride must be >=1 and pad >=0");
        require(X.dim(1) == W.dim(1), "conv2d channel mismatch between input ", shape_str(X.shape), " and weight ",
                shape_str(W.shape));
        require(B.rank() == 1 && B.dim(0) == W.dim(0), "conv2d bias shape ", shape_str(B.shape),
                " does not match out-channels of ", shape_str(W.shape));
        const int N = X.dim(0), C = X.dim(1), H = X.dim(2), Wd = X.dim(3);
        const int O = W.dim(0), kh = W.dim(2), kw = W.dim(3);
        const int oh = (H + 2 * pad - kh) / stride + 1;
        const int ow = (Wd + 2 * pad - kw) / stride + 1;
        require(oh >= 1 && ow >= 1, "conv2d output empty: input ", shape_str(X.shape), " kernel ", shape_str(W.shape),
                " stride ", stride, " pad ", pad);

        Node n;
        n.op = Op::Conv2d;
        n.a = x.id;
        n.b = w.id;
        n.c = bias.id;
        n.needs_grad = needs(x) || needs(w) || needs(bias);
        n.i0 = stride;
        n.i1 = pad;
        n.val = Array::zeros({N, O, oh, ow});

        // batched column matrix [ck x N*ohw] (sample s owns columns s*ohw..),
        // one GEMM per layer, bias fused into the scatter
        const int ck = C * kh * kw;
        const int64_t ohw = static_cast<int64_t>(oh) * ow;
        std::vector<double> col(static_cast<size_t>(ck) * N * ohw);
        for (int s = 0; s < N; ++s)
            im2col_strided(X.data.data() + static_cast<int64_t>(s) * C * H * Wd, C, H, Wd, kh, kw, stride, pad, oh,
                           ow, col.data() + static_cast<int64_t>(s) * ohw, static_cast<int64_t>(N) * ohw);
        std::vector<double> out(static_cast<size_t>(O) * N * ohw);
        gemm_nn(W.data.data(), col.data(), out.data(), O, ck, static_cast<int>(N * ohw));
        for (int s = 0; s < N; ++s) {
            double* dst = n.val.data.data() + static_cast<int64_t>(s) * O * ohw;
            for (int o = 0; o < O; ++o) {
                const double bv = B.data[static_cast<size_t>(o)];
                const double* src = out.data() + static_cast<int64_t>(o) * N * ohw + static_cast<int64_t>(s) * ohw;
                double* d = dst + static_cast<int64_t>(o) * ohw;
                for (int64_t p = 0; p < ohw; ++p) d[p] = src[p] + bv;
            }
        }
        return push(std::move(n));
    }

    Var reshape(Var a, std::vector<int> shape) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        require(Array::size_of(shape) == A.size(), "reshape from ", shape_str(A.shape), " to ", shape_str(shape),
                " changes element count");
        Node n;
        n.op = Op::Reshape;
        n.a = a.id;
        n.needs_grad = needs(a);
        n.val = Array(std::move(shape), A.data);
        return push(std::move(n));
    }

    Var sum(Var a) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        double s = 0.0;
        for (double v : A.data) s += v;
        Node n;
        n.op = Op::Sum;
        n.a = a.id;
        n.needs_grad = needs(a);
        n.val = Array::scalar(s);
        return push(std::move(n));
    }

    Var mean(Var a) {
        const int64_t cnt = nodes_[static_cast<size_t>(a.id)].val.size();
        return scale(sum(a), 1.0 / static_cast<double>(cnt));
    }

    // [m x n] -> [m]
    Var row_sum(Var a) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        require(A.rank() == 2, "row_sum needs a 2-D operand, got ", shape_str(A.shape));
        const int m = A.dim(0), nn = A.dim(1);
        Node n;
        n.op = Op::RowSum;
        n.a = a.id;
        n.needs_grad = needs(a);
        n.val = Array::zeros({m});
        for (int i = 0; i < m; ++i) {
            double s = 0.0;
            const double* r = A.data.data() + static_cast<int64_t>(i) * nn;
            for (int j = 0; j < nn; ++j) s += r[j];
            n.val.data[static_cast<size_t>(i)] = s;
        }
        return push(std::move(n));
    }

    // unit Euclidean norm along the last axis (1-D vector or rows of a 2-D array)
    Var l2_normalize(Var a) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        require(A.rank() == 1 || A.rank() == 2, "l2_normalize supports 1-D or 2-D, got ", shape_str(A.shape));
        const int rows = A.rank() == 2 ? A.dim(0) : 1;
        const int d = A.rank() == 2 ? A.dim(1) : A.dim(0);
        Node n;
        n.op = Op::L2Norm;
        n.a = a.id;
        n.needs_grad = needs(a);
        n.val = A;
        n.aux.resize(static_cast<size_t>(rows));
        for (int i = 0; i < rows; ++i) {
            double* r = n.val.data.data() + static_cast<int64_t>(i) * d;
            double s = 0.0;
            for (int j = 0; j < d; ++j) s += r[j] * r[j];
            const double norm = std::sqrt(s);
            require(norm > 0.0, "l2_normalize: zero vector along axis (row ", i, ")");
            n.aux[static_cast<size_t>(i)] = norm;
            for (int j = 0; j < d; ++j) r[j] /= norm;
        }
        return push(std::move(n));
    }

    // temperature softmax along the last axis, computed with max-subtraction
    Var softmax(Var a, double tau) {
        require(tau > 0.0, "softmax temperature must be positive, got ", tau);
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        require(A.rank() == 1 || A.rank() == 2, "softmax supports 1-D or 2-D, got ", shape_str(A.shape));
        const int rows = A.rank() == 2 ? A.dim(0) : 1;
        const int d = A.rank() == 2 ? A.dim(1) : A.dim(0);
        Node n;
        n.op = Op::Softmax;
        n.a = a.id;
        n.needs_grad = needs(a);
        n.s0 = tau;
        n.val = A;
        for (int i = 0; i < rows; ++i) {
            double* r = n.val.data.data() + static_cast<int64_t>(i) * d;
            double mx = r[0];
            for (int j = 1; j < d; ++j) mx = std::max(mx, r[j]);
            double z = 0.0;
            for (int j = 0; j < d; ++j) {
                r[j] = std::exp((r[j] - mx) / tau);
                z += r[j];
            }
            for (int j = 0; j < d; ++j) r[j] /= z;
        }
        return push(std::move(n));
    }

    Var dot(Var a, Var b) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        const Array& B = nodes_[static_cast<size_t>(b.id)].val;
        require(A.rank() == 1 && B.rank() == 1 && A.dim(0) == B.dim(0), "dot needs equal-length vectors, got ",
                shape_str(A.shape), " and ", shape_str(B.shape));
        double s = 0.0;
        for (int64_t i = 0; i < A.size(); ++i) s += A.data[static_cast<size_t>(i)] * B.data[static_cast<size_t>(i)];
        Node n;
        n.op = Op::Dot;
        n.a = a.id;
        n.b = b.id;
        n.needs_grad = needs(a) || needs(b);
        n.val = Array::scalar(s);
        return push(std::move(n));
    }

    // elementwise min; ties route gradient to the first operand
    Var minimum(Var a, Var b) {
        return binary_same_shape(Op::Minimum, a, b, [](double x, double y) { return x <= y ? x : y; });
    }

    Var concat_cols(Var a, Var b) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        const Array& B = nodes_[static_cast<size_t>(b.id)].val;
        require(A.rank() == 2 && B.rank() == 2 && A.dim(0) == B.dim(0), "concat_cols needs matching row counts, got ",
                shape_str(A.shape), " and ", shape_str(B.shape));
        const int m = A.dim(0), p = A.dim(1), q = B.dim(1);
        Node n;
        n.op = Op::ConcatCols;
        n.a = a.id;
        n.b = b.id;
        n.needs_grad = needs(a) || needs(b);
        n.val = Array::zeros({m, p + q});
        for (int i = 0; i < m; ++i) {
            std::memcpy(n.val.data.data() + static_cast<int64_t>(i) * (p + q),
                        A.data.data() + static_cast<int64_t>(i) * p, sizeof(double) * static_cast<size_t>(p));
            std::memcpy(n.val.data.data() + static_cast<int64_t>(i) * (p + q) + p,
                        B.data.data() + static_cast<int64_t>(i) * q, sizeof(double) * static_cast<size_t>(q));
        }
        return push(std::move(n));
    }

    // Reverse sweep from a scalar loss. Returns the loss value and accumulates
    // gradients of all participating parameters into the store.
    double backward(Var loss) {
        require(grad_enabled_, "backward on a grad-disabled tape");
        Node& ln = nodes_[static_cast<size_t>(loss.id)];
        require(ln.val.size() == 1, "loss must be scalar, got shape ", shape_str(ln.val.shape));
        for (auto& n : nodes_) n.adj.data.clear();
        ensure_adj(loss.id);
        nodes_[static_cast<size_t>(loss.id)].adj.data[0] = 1.0;

        for (int id = loss.id; id >= 0; --id) {
            Node& n = nodes_[static_cast<size_t>(id)];
            if (!n.needs_grad || n.adj.data.empty()) continue;
            backprop_node(n);
            if (n.op == Op::Leaf && n.param >= 0) {
                Array& g = store_->grad(n.param);
                for (int64_t i = 0; i < n.val.size(); ++i) g.data[static_cast<size_t>(i)] += n.adj.data[static_cast<size_t>(i)];
            }
        }
        return ln.val.data[0];
    }

private:
    struct Node {
        Op op = Op::Leaf;
        int a = -1, b = -1, c = -1;
        bool needs_grad = false;
        int param = -1;
        double s0 = 0.0, s1 = 0.0;
        int i0 = 0, i1 = 0;
        Array val;
        Array adj;
        std::vector<double> aux;  // op-specific cache (row norms)
    };

    bool needs(Var v) const { return nodes_[static_cast<size_t>(v.id)].needs_grad; }

    Node unary_node(Op op, Var a) {
        Node n;
        n.op = op;
        n.a = a.id;
        n.needs_grad = needs(a);
        n.val = nodes_[static_cast<size_t>(a.id)].val;
        return n;
    }

    template <typename F>
    Var binary_same_shape(Op op, Var a, Var b, F f) {
        const Array& A = nodes_[static_cast<size_t>(a.id)].val;
        const Array& B = nodes_[static_cast<size_t>(b.id)].val;
        require(A.same_shape(B), op_name(op), ": shape mismatch between ", shape_str(A.shape), " and ",
                shape_str(B.shape));
        Node n;
        n.op = op;
        n.a = a.id;
        n.b = b.id;
        n.needs_grad = needs(a) || needs(b);
        n.val = A;
        for (int64_t i = 0; i < A.size(); ++i)
            n.val.data[static_cast<size_t>(i)] = f(A.data[static_cast<size_t>(i)], B.data[static_cast<size_t>(i)]);
        return push(std::move(n));
    }

    Var push(Node n) {
        if (checked_ && !n.val.all_finite())
            fail("non-finite intermediate in operation '", op_name(n.op), "' with shape ", shape_str(n.val.shape));
        if (!grad_enabled_) n.needs_grad = false;
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void ensure_adj(int id) {
        Node& n = nodes_[static_cast<size_t>(id)];
        if (n.adj.data.empty()) n.adj = Array::zeros(n.val.shape);
    }

    Array* adj_of(int id) {
        if (id < 0) return nullptr;
        Node& n = nodes_[static_cast<size_t>(id)];
        if (!n.needs_grad) return nullptr;
        ensure_adj(id);
        return &n.adj;
    }

    // column rows of length oh*ow written at `row_stride`, so all samples of a
    // batch share one [ck x N*ohw] matrix
    static void im2col_strided(const double* x, int C, int H, int W, int kh, int kw, int stride, int pad, int oh,
                               int ow, double* col, int64_t row_stride) {
        int row = 0;
        for (int c = 0; c < C; ++c) {
            const double* xc = x + static_cast<int64_t>(c) * H * W;
            for (int di = 0; di < kh; ++di) {
                for (int dj = 0; dj < kw; ++dj, ++row) {
                    double* out = col + static_cast<int64_t>(row) * row_stride;
                    for (int i = 0; i < oh; ++i) {
                        const int si = i * stride + di - pad;
                        for (int j = 0; j < ow; ++j) {
                            const int sj = j * stride + dj - pad;
                            out[static_cast<int64_t>(i) * ow + j] =
                                (si >= 0 && si < H && sj >= 0 && sj < W) ? xc[static_cast<int64_t>(si) * W + sj] : 0.0;
                        }
                    }
                }
            }
        }
    }

    static void col2im_add_strided(const double* col, int C, int H, int W, int kh, int kw, int stride, int pad,
                                   int oh, int ow, int64_t row_stride, double* x) {
        int row = 0;
        for (int c = 0; c < C; ++c) {
            double* xc = x + static_cast<int64_t>(c) * H * W;
            for (int di = 0; di < kh; ++di) {
                for (int dj = 0; dj < kw; ++dj, ++row) {
                    const double* in = col + static_cast<int64_t>(row) * row_stride;
                    for (int i = 0; i < oh; ++i) {
                        const int si = i * stride + di - pad;
                        if (si < 0 || si >= H) continue;
                        for (int j = 0; j < ow; ++j) {
                            const int sj = j * stride + dj - pad;
                            if (sj >= 0 && sj < W)
                                xc[static_cast<int64_t>(si) * W + sj] += in[static_cast<int64_t>(i) * ow + j];
                        }
                    }
                }
            }
        }
    }

    void backprop_node(Node& n) {
        const Array& g = n.adj;
        switch (n.op) {
            case Op::Leaf:
                break;
            case Op::Add: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                if (Array* gb = adj_of(n.b))
                    for (int64_t i = 0; i < g.size(); ++i) gb->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                break;
            }
            case Op::Sub: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                if (Array* gb = adj_of(n.b))
                    for (int64_t i = 0; i < g.size(); ++i) gb->data[static_cast<size_t>(i)] -= g.data[static_cast<size_t>(i)];
                break;
            }
            case Op::Mul: {
                const Array& A = nodes_[static_cast<size_t>(n.a)].val;
                const Array& B = nodes_[static_cast<size_t>(n.b)].val;
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i)
                        ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)] * B.data[static_cast<size_t>(i)];
                if (Array* gb = adj_of(n.b))
                    for (int64_t i = 0; i < g.size(); ++i)
                        gb->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)] * A.data[static_cast<size_t>(i)];
                break;
            }
            case Op::Scale: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i) ga->data[static_cast<size_t>(i)] += n.s0 * g.data[static_cast<size_t>(i)];
                break;
            }
            case Op::AddScalar: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                break;
            }
            case Op::Exp: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i)
                        ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)] * n.val.data[static_cast<size_t>(i)];
                break;
            }
            case Op::Log: {
                if (Array* ga = adj_of(n.a)) {
                    const Array& X = nodes_[static_cast<size_t>(n.a)].val;
                    for (int64_t i = 0; i < g.size(); ++i) {
                        const double x = X.data[static_cast<size_t>(i)];
                        if (x >= n.s0) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)] / x;
                    }
                }
                break;
            }
            case Op::Tanh: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i) {
                        const double y = n.val.data[static_cast<size_t>(i)];
                        ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)] * (1.0 - y * y);
                    }
                break;
            }
            case Op::Relu: {
                if (Array* ga = adj_of(n.a)) {
                    const Array& X = nodes_[static_cast<size_t>(n.a)].val;
                    for (int64_t i = 0; i < g.size(); ++i)
                        if (X.data[static_cast<size_t>(i)] > 0.0) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                }
                break;
            }
            case Op::Clamp: {
                if (Array* ga = adj_of(n.a)) {
                    const Array& X = nodes_[static_cast<size_t>(n.a)].val;
                    for (int64_t i = 0; i < g.size(); ++i) {
                        const double x = X.data[static_cast<size_t>(i)];
                        if (x > n.s0 && x < n.s1) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                    }
                }
                break;
            }
            case Op::MatMul: {
                const Array& A = nodes_[static_cast<size_t>(n.a)].val;
                const Array& B = nodes_[static_cast<size_t>(n.b)].val;
                const int m = A.dim(0), k = A.dim(1), nn = B.dim(1);
                if (Array* ga = adj_of(n.a)) gemm_nt(g.data.data(), B.data.data(), ga->data.data(), m, nn, k, true);
                if (Array* gb = adj_of(n.b)) gemm_tn(A.data.data(), g.data.data(), gb->data.data(), k, m, nn, true);
                break;
            }
            case Op::MatMulNT: {
                // y = a b^T with a [m x d], b [n x d]: da += g b, db += g^T a
                const Array& A = nodes_[static_cast<size_t>(n.a)].val;
                const Array& B = nodes_[static_cast<size_t>(n.b)].val;
                const int m = A.dim(0), d = A.dim(1), nn = B.dim(0);
                if (Array* ga = adj_of(n.a)) gemm_nn(g.data.data(), B.data.data(), ga->data.data(), m, nn, d, true);
                if (Array* gb = adj_of(n.b)) gemm_tn(g.data.data(), A.data.data(), gb->data.data(), nn, m, d, true);
                break;
            }
            case Op::AddBias: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                if (Array* gb = adj_of(n.b)) {
                    const int m = n.val.dim(0), nn = n.val.dim(1);
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < nn; ++j)
                            gb->data[static_cast<size_t>(j)] += g.data[static_cast<size_t>(i) * nn + j];
                }
                break;
            }
            case Op::Conv2d:
                backprop_conv(n);
                break;
            case Op::Reshape: {
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < g.size(); ++i) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                break;
            }
            case Op::Sum: {
                if (Array* ga = adj_of(n.a)) {
                    const double gv = g.data[0];
                    for (auto& v : ga->data) v += gv;
                }
                break;
            }
            case Op::RowSum: {
                if (Array* ga = adj_of(n.a)) {
                    const int m = ga->shape[0], nn = ga->shape[1];
                    for (int i = 0; i < m; ++i) {
                        const double gv = g.data[static_cast<size_t>(i)];
                        double* r = ga->data.data() + static_cast<int64_t>(i) * nn;
                        for (int j = 0; j < nn; ++j) r[j] += gv;
                    }
                }
                break;
            }
            case Op::L2Norm: {
                if (Array* ga = adj_of(n.a)) {
                    const int rows = n.val.rank() == 2 ? n.val.dim(0) : 1;
                    const int d = n.val.rank() == 2 ? n.val.dim(1) : n.val.dim(0);
                    for (int i = 0; i < rows; ++i) {
                        const double* y = n.val.data.data() + static_cast<int64_t>(i) * d;
                        const double* gr = g.data.data() + static_cast<int64_t>(i) * d;
                        double* gar = ga->data.data() + static_cast<int64_t>(i) * d;
                        const double norm = n.aux[static_cast<size_t>(i)];
                        double gy = 0.0;
                        for (int j = 0; j < d; ++j) gy += gr[j] * y[j];
                        for (int j = 0; j < d; ++j) gar[j] += (gr[j] - y[j] * gy) / norm;
                    }
                }
                break;
            }
            case Op::Softmax: {
                if (Array* ga = adj_of(n.a)) {
                    const int rows = n.val.rank() == 2 ? n.val.dim(0) : 1;
                    const int d = n.val.rank() == 2 ? n.val.dim(1) : n.val.dim(0);
                    for (int i = 0; i < rows; ++i) {
                        const double* y = n.val.data.data() + static_cast<int64_t>(i) * d;
                        const double* gr = g.data.data() + static_cast<int64_t>(i) * d;
                        double* gar = ga->data.data() + static_cast<int64_t>(i) * d;
                        double gy = 0.0;
                        for (int j = 0; j < d; ++j) gy += gr[j] * y[j];
                        for (int j = 0; j < d; ++j) gar[j] += y[j] * (gr[j] - gy) / n.s0;
                    }
                }
                break;
            }
            case Op::Dot: {
                const Array& A = nodes_[static_cast<size_t>(n.a)].val;
                const Array& B = nodes_[static_cast<size_t>(n.b)].val;
                const double gv = g.data[0];
                if (Array* ga = adj_of(n.a))
                    for (int64_t i = 0; i < A.size(); ++i) ga->data[static_cast<size_t>(i)] += gv * B.data[static_cast<size_t>(i)];
                if (Array* gb = adj_of(n.b))
                    for (int64_t i = 0; i < B.size(); ++i) gb->data[static_cast<size_t>(i)] += gv * A.data[static_cast<size_t>(i)];
                break;
            }
            case Op::Minimum: {
                const Array& A = nodes_[static_cast<size_t>(n.a)].val;
                const Array& B = nodes_[static_cast<size_t>(n.b)].val;
                Array* ga = adj_of(n.a);
                Array* gb = adj_of(n.b);
                for (int64_t i = 0; i < g.size(); ++i) {
                    if (A.data[static_cast<size_t>(i)] <= B.data[static_cast<size_t>(i)]) {
                        if (ga) ga->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                    } else if (gb) {
                        gb->data[static_cast<size_t>(i)] += g.data[static_cast<size_t>(i)];
                    }
                }
                break;
            }
            case Op::ConcatCols: {
                const int m = n.val.dim(0);
                const int p = nodes_[static_cast<size_t>(n.a)].val.dim(1);
                const int q = nodes_[static_cast<size_t>(n.b)].val.dim(1);
                if (Array* ga = adj_of(n.a))
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < p; ++j)
                            ga->data[static_cast<size_t>(i) * p + j] += g.data[static_cast<size_t>(i) * (p + q) + j];
                if (Array* gb = adj_of(n.b))
                    for (int i = 0; i < m; ++i)
                        for (int j = 0; j < q; ++j)
                            gb->data[static_cast<size_t>(i) * q + j] += g.data[static_cast<size_t>(i) * (p + q) + p + j];
                break;
            }
        }
    }

    void backprop_conv(Node& n) {
        const Array& X = nodes_[static_cast<size_t>(n.a)].val;
        const Array& W = nodes_[static_cast<size_t>(n.b)].val;
        const int N = X.dim(0), C = X.dim(1), H = X.dim(2), Wd = X.dim(3);
        const int O = W.dim(0), kh = W.dim(2), kw = W.dim(3);
        const int stride = n.i0, pad = n.i1;
        const int oh = n.val.dim(2), ow = n.val.dim(3);
        const int ck = C * kh * kw;

        Array* gx = adj_of(n.a);
        Array* gw = adj_of(n.b);
        Array* gb = adj_of(n.c);
        const Array& g = n.adj;

        if (gb) {
            for (int s = 0; s < N; ++s)
                for (int o = 0; o < O; ++o) {
                    const double* gp = g.data.data() + (static_cast<int64_t>(s) * O + o) * oh * ow;
                    double acc = 0.0;
                    for (int p = 0; p < oh * ow; ++p) acc += gp[p];
                    gb->data[static_cast<size_t>(o)] += acc;
                }
        }
        if (gx || gw) {
            const int64_t ohw = static_cast<int64_t>(oh) * ow;
            // adjoints gathered as [O x N*ohw], matching the forward layout
            std::vector<double> g_all(static_cast<size_t>(O) * N * ohw);
            for (int s = 0; s < N; ++s)
                for (int o = 0; o < O; ++o)
                    std::memcpy(g_all.data() + static_cast<int64_t>(o) * N * ohw + static_cast<int64_t>(s) * ohw,
                                g.data.data() + (static_cast<int64_t>(s) * O + o) * ohw,
                                sizeof(double) * static_cast<size_t>(ohw));
            if (gw) {
                std::vector<double> col(static_cast<size_t>(ck) * N * ohw);
                for (int s = 0; s < N; ++s)
                    im2col_strided(X.data.data() + static_cast<int64_t>(s) * C * H * Wd, C, H, Wd, kh, kw, stride,
                                   pad, oh, ow, col.data() + static_cast<int64_t>(s) * ohw,
                                   static_cast<int64_t>(N) * ohw);
                // dW[o, r] += sum_p g_all[o, p] col[r, p]
                gemm_nt(g_all.data(), col.data(), gw->data.data(), O, static_cast<int>(N * ohw), ck, true);
            }
            if (gx) {
                // dcol [ck x N*ohw] = W^T g_all, then scatter-add per sample
                std::vector<double> dcol(static_cast<size_t>(ck) * N * ohw);
                gemm_tn(W.data.data(), g_all.data(), dcol.data(), ck, O, static_cast<int>(N * ohw), false);
                for (int s = 0; s < N; ++s)
                    col2im_add_strided(dcol.data() + static_cast<int64_t>(s) * ohw, C, H, Wd, kh, kw, stride, pad, oh,
                                       ow, static_cast<int64_t>(N) * ohw,
                                       gx->data.data() + static_cast<int64_t>(s) * C * H * Wd);
            }
        }
    }

    ParamStore* store_;
    bool grad_enabled_;
    bool checked_;
    int log_clamps_ = 0;
    std::vector<Node> nodes_;
};

}  // namespace lfs::numgrad
