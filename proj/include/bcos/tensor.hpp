#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bcos/common.hpp"

namespace bcos {

template <typename T>
class Tape;

/// Dense N-dimensional array of floating point values. Storage is contiguous
/// row-major and shared between copies; a tensor optionally carries a handle
/// into a Tape so that operations on it are recorded for reverse-mode
/// differentiation. Tensors not bound to a tape never receive gradient.
template <typename T>
class Tensor {
public:
    Tensor() : Tensor(Shape{1}) {}

    explicit Tensor(Shape shape, T fill = T(0))
        : shape_(std::move(shape)),
          data_(std::make_shared<std::vector<T>>(checked_numel(shape_), fill)) {}

    Tensor(Shape shape, std::vector<T> values) : shape_(std::move(shape)) {
        if (checked_numel(shape_) != values.size()) {
            throw ShapeError("value count " + std::to_string(values.size()) +
                             " does not match shape " + shape_str(shape_));
        }
        data_ = std::make_shared<std::vector<T>>(std::move(values));
    }

    static Tensor zeros(Shape s) { return Tensor(std::move(s), T(0)); }
    static Tensor ones(Shape s) { return Tensor(std::move(s), T(1)); }
    static Tensor full(Shape s, T v) { return Tensor(std::move(s), v); }
    static Tensor scalar(T v) { return Tensor(Shape{1}, std::vector<T>{v}); }

    static Tensor uniform(Shape s, Rng& rng, T lo, T hi) {
        Tensor t(std::move(s));
        for (T& v : *t.data_) v = static_cast<T>(rng.uniform(lo, hi));
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t numel() const { return data_->size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }

    std::vector<T>& values() { return *data_; }
    const std::vector<T>& values() const { return *data_; }
    const std::shared_ptr<std::vector<T>>& storage() const { return data_; }

    T& operator[](std::size_t i) { return (*data_)[i]; }
    const T& operator[](std::size_t i) const { return (*data_)[i]; }

    /// Multi-index element access (bounds-unchecked beyond debug builds).
    T& at(std::initializer_list<std::size_t> idx) { return (*data_)[flat(idx)]; }
    const T& at(std::initializer_list<std::size_t> idx) const { return (*data_)[flat(idx)]; }

    std::size_t flat(std::initializer_list<std::size_t> idx) const {
        std::size_t off = 0;
        std::size_t d = 0;
        for (std::size_t i : idx) {
            off = off * shape_[d] + i;
            ++d;
        }
        return off;
    }

    bool on_tape() const { return tape_ != nullptr; }
    Tape<T>* tape() const { return tape_; }
    int node() const { return node_; }

    /// Same storage, no tape binding: gradient never flows through the result.
    Tensor detached() const {
        Tensor t = *this;
        t.tape_ = nullptr;
        t.node_ = -1;
        return t;
    }

    /// Deep copy with fresh storage (always detached).
    Tensor clone() const { return Tensor(shape_, *data_); }

private:
    static std::size_t checked_numel(const Shape& s) {
        if (s.empty()) throw ShapeError("tensor rank must be at least 1");
        for (std::size_t d : s) {
            if (d == 0) throw ShapeError("zero-sized dimension in shape " + shape_str(s));
        }
        return shape_numel(s);
    }

    Shape shape_;
    std::shared_ptr<std::vector<T>> data_;
    Tape<T>* tape_ = nullptr;
    int node_ = -1;

    friend class Tape<T>;
};

/// Records the forward execution order of primitive operations and replays it
/// in reverse to accumulate vector-Jacobian products. A tape and the tensors
/// bound to it belong to a single logical thread.
template <typename T>
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }

    /// Register a leaf whose gradient should be accumulated.
    Tensor<T> watch(const Tensor<T>& t, std::string name = "leaf") {
        int id = add_node(std::move(name), {}, t.numel(), t.storage(), nullptr);
        return adopt(t, id);
    }

    int add_node(std::string op, std::vector<int> parents, std::size_t size,
                 std::shared_ptr<std::vector<T>> value,
                 std::function<void(const T*, Tape&)> backward) {
        nodes_.push_back(Node{std::move(op), std::move(parents), size,
                              std::move(value), std::move(backward)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    Tensor<T> adopt(Tensor<T> t, int node) {
        t.tape_ = this;
        t.node_ = node;
        return t;
    }

    /// Reverse sweep from a scalar root with seed 1.
    void backward(const Tensor<T>& root) {
        if (root.numel() != 1) {
            throw ValueError("backward root must be a scalar, got shape " +
                             shape_str(root.shape()));
        }
        backward(root, std::vector<T>{T(1)});
    }

    void backward(const Tensor<T>& root, std::vector<T> seed) {
        if (root.tape_ != this || root.node_ < 0) {
            throw ValueError("backward root is not bound to this tape");
        }
        if (seed.size() != root.numel()) {
            throw ShapeError("backward seed size mismatch");
        }
        grads_.assign(nodes_.size(), {});
        grads_[static_cast<std::size_t>(root.node_)] = std::move(seed);
        for (int i = root.node_; i >= 0; --i) {
            Node& n = nodes_[static_cast<std::size_t>(i)];
            if (!n.backward || grads_[static_cast<std::size_t>(i)].empty()) continue;
            n.backward(grads_[static_cast<std::size_t>(i)].data(), *this);
        }
    }

    /// Gradient of the last backward pass w.r.t. a bound tensor (zeros if the
    /// tensor was never reached).
    Tensor<T> gradient(const Tensor<T>& t) const {
        if (t.tape_ != this || t.node_ < 0) {
            throw ValueError("tensor is not bound to this tape");
        }
        const auto& g = grads_[static_cast<std::size_t>(t.node_)];
        if (g.empty()) return Tensor<T>::zeros(t.shape());
        return Tensor<T>(t.shape(), g);
    }

    /// Lazily allocated zero-initialized accumulator for a node.
    T* accum(int id) {
        auto& g = grads_[static_cast<std::size_t>(id)];
        if (g.empty()) g.assign(nodes_[static_cast<std::size_t>(id)].size, T(0));
        return g.data();
    }

    /// Earliest recorded value containing a non-finite entry, for diagnostics.
    std::optional<std::string> first_non_finite() const {
        for (const Node& n : nodes_) {
            if (!n.value) continue;
            for (std::size_t i = 0; i < n.value->size(); ++i) {
                if (!std::isfinite((*n.value)[i])) {
                    return n.op + "[" + std::to_string(i) + "]";
                }
            }
        }
        return std::nullopt;
    }

    void clear() {
        nodes_.clear();
        grads_.clear();
    }

private:
    struct Node {
        std::string op;
        std::vector<int> parents;
        std::size_t size;
        std::shared_ptr<std::vector<T>> value;
        std::function<void(const T*, Tape&)> backward;
    };

    std::vector<Node> nodes_;
    std::vector<std::vector<T>> grads_;
};

template <typename T>
Tensor<T> detach(const Tensor<T>& t) {
    return t.detached();
}

// ---------------------------------------------------------------------------
// Broadcasting
// ---------------------------------------------------------------------------

/// Right-aligned broadcast: dimensions must match or be 1 (missing leading
/// dimensions count as 1).
inline Shape broadcast_shape(const Shape& a, const Shape& b) {
    const std::size_t r = std::max(a.size(), b.size());
    Shape out(r);
    for (std::size_t i = 0; i < r; ++i) {
        const std::size_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const std::size_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ShapeError("cannot broadcast shapes " + shape_str(a) + " and " +
                             shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

/// Element strides of `shape` aligned into `out` rank, zero on broadcast dims.
inline std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
    std::vector<std::size_t> strides(out.size(), 0);
    std::size_t acc = 1;
    for (std::size_t i = shape.size(); i-- > 0;) {
        const std::size_t o = i + (out.size() - shape.size());
        strides[o] = (shape[i] == 1 && out[o] != 1) ? 0 : acc;
        acc *= shape[i];
    }
    return strides;
}

namespace detail {

/// Visit all positions of `out`, tracking operand offsets incrementally.
template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, F&& f) {
    const std::size_t n = shape_numel(out);
    const std::size_t r = out.size();
    std::vector<std::size_t> idx(r, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t io = 0; io < n; ++io) {
        f(io, ia, ib);
        for (std::size_t d = r; d-- > 0;) {
            ++idx[d];
            ia += sa[d];
            ib += sb[d];
            if (idx[d] < out[d]) break;
            idx[d] = 0;
            ia -= sa[d] * out[d];
            ib -= sb[d] * out[d];
        }
    }
}

template <typename T>
Tape<T>* result_tape(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.on_tape() && b.on_tape() && a.tape() != b.tape()) {
        throw ValueError("operands are bound to different tapes");
    }
    return a.on_tape() ? a.tape() : b.tape();
}

/// Shared implementation for broadcasting binary primitives. `dfda`/`dfdb`
/// evaluate the partial derivative at one element: (a, b, out) -> d out/d a.
template <typename T, class Fwd, class DA, class DB>
Tensor<T> binary_elementwise(const char* name, const Tensor<T>& a, const Tensor<T>& b,
                             Fwd fwd, DA dfda, DB dfdb) {
    const Shape os = broadcast_shape(a.shape(), b.shape());
    Tensor<T> out(os);
    const bool same = a.shape() == b.shape();
    const auto sa = broadcast_strides(a.shape(), os);
    const auto sb = broadcast_strides(b.shape(), os);
    const std::vector<T>& av = a.values();
    const std::vector<T>& bv = b.values();
    std::vector<T>& ov = out.values();
    if (same) {
        for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i], bv[i]);
    } else {
        for_each_broadcast(os, sa, sb, [&](std::size_t io, std::size_t ia, std::size_t ib) {
            ov[io] = fwd(av[ia], bv[ib]);
        });
    }

    Tape<T>* tp = result_tape(a, b);
    if (!tp) return out;
    const int pa = a.on_tape() ? a.node() : -1;
    const int pb = b.on_tape() ? b.node() : -1;
    auto ap = a.storage();
    auto bp = b.storage();
    auto op = out.storage();
    auto backward = [=](const T* g, Tape<T>& t) {
        T* ga = pa >= 0 ? t.accum(pa) : nullptr;
        T* gb = pb >= 0 ? t.accum(pb) : nullptr;
        const std::vector<T>& A = *ap;
        const std::vector<T>& B = *bp;
        const std::vector<T>& O = *op;
        if (same) {
            for (std::size_t i = 0; i < O.size(); ++i) {
                if (ga) ga[i] += g[i] * dfda(A[i], B[i], O[i]);
                if (gb) gb[i] += g[i] * dfdb(A[i], B[i], O[i]);
            }
        } else {
            for_each_broadcast(os, sa, sb,
                               [&](std::size_t io, std::size_t ia, std::size_t ib) {
                                   if (ga) ga[ia] += g[io] * dfda(A[ia], B[ib], O[io]);
                                   if (gb) gb[ib] += g[io] * dfdb(A[ia], B[ib], O[io]);
                               });
        }
    };
    int id = tp->add_node(name, {pa, pb}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

template <typename T, class Fwd, class Df>
Tensor<T> unary_elementwise(const char* name, const Tensor<T>& a, Fwd fwd, Df dfdu) {
    Tensor<T> out(a.shape());
    const std::vector<T>& av = a.values();
    std::vector<T>& ov = out.values();
    for (std::size_t i = 0; i < av.size(); ++i) ov[i] = fwd(av[i]);
    if (!a.on_tape()) return out;
    Tape<T>* tp = a.tape();
    const int pa = a.node();
    auto ap = a.storage();
    auto op = out.storage();
    auto backward = [=](const T* g, Tape<T>& t) {
        T* ga = t.accum(pa);
        const std::vector<T>& A = *ap;
        const std::vector<T>& O = *op;
        for (std::size_t i = 0; i < A.size(); ++i) ga[i] += g[i] * dfdu(A[i], O[i]);
    };
    int id = tp->add_node(name, {pa}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise primitives
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        "add", a, b, [](T x, T y) { return x + y; },
        [](T, T, T) { return T(1); }, [](T, T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        "sub", a, b, [](T x, T y) { return x - y; },
        [](T, T, T) { return T(1); }, [](T, T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        "mul", a, b, [](T x, T y) { return x * y; },
        [](T, T y, T) { return y; }, [](T x, T, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        "div", a, b, [](T x, T y) { return x / y; },
        [](T, T y, T) { return T(1) / y; },
        [](T x, T y, T) { return -x / (y * y); });
}

/// Elementwise maximum; ties route gradient to the first operand.
template <typename T>
Tensor<T> max_pair(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_elementwise(
        "max_pair", a, b, [](T x, T y) { return x >= y ? x : y; },
        [](T x, T y, T) { return x >= y ? T(1) : T(0); },
        [](T x, T y, T) { return x >= y ? T(0) : T(1); });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, T s) { return add(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> sub(const Tensor<T>& a, T s) { return sub(a, Tensor<T>::scalar(s)); }
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) { return mul(a, Tensor<T>::scalar(s)); }

/// x^p with constant exponent.
template <typename T>
Tensor<T> pow_const(const Tensor<T>& a, T p) {
    return detail::unary_elementwise(
        "pow", a, [p](T x) { return std::pow(x, p); },
        [p](T x, T) { return p * std::pow(x, p - T(1)); });
}

/// Subgradient 0 at the origin.
template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    return detail::unary_elementwise(
        "abs", a, [](T x) { return std::fabs(x); },
        [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

/// Zero gradient everywhere.
template <typename T>
Tensor<T> sign(const Tensor<T>& a) {
    return detail::unary_elementwise(
        "sign", a, [](T x) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); },
        [](T, T) { return T(0); });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
    return detail::unary_elementwise(
        "sqrt", a, [](T x) { return std::sqrt(x); },
        [](T, T o) { return T(1) / (T(2) * o); });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return detail::unary_elementwise(
        "sigmoid", a,
        [](T x) {
            if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
            const T e = std::exp(x);
            return e / (T(1) + e);
        },
        [](T, T o) { return o * (T(1) - o); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return detail::unary_elementwise(
        "relu", a, [](T x) { return x > T(0) ? x : T(0); },
        [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

// ---------------------------------------------------------------------------
// Shape primitives
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape s) {
    if (shape_numel(s) != a.numel()) {
        throw ShapeError("cannot reshape " + shape_str(a.shape()) + " to " + shape_str(s));
    }
    Tensor<T> out(std::move(s), a.values());
    if (!a.on_tape()) return out;
    Tape<T>* tp = a.tape();
    const int pa = a.node();
    const std::size_t n = a.numel();
    auto backward = [pa, n](const T* g, Tape<T>& t) {
        T* ga = t.accum(pa);
        for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
    };
    int id = tp->add_node("reshape", {pa}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

/// Extract one element as a scalar tensor.
template <typename T>
Tensor<T> pick(const Tensor<T>& a, std::size_t flat_index) {
    if (flat_index >= a.numel()) {
        throw ValueError("pick index " + std::to_string(flat_index) +
                         " out of range for shape " + shape_str(a.shape()));
    }
    Tensor<T> out = Tensor<T>::scalar(a[flat_index]);
    if (!a.on_tape()) return out;
    Tape<T>* tp = a.tape();
    const int pa = a.node();
    auto backward = [pa, flat_index](const T* g, Tape<T>& t) {
        t.accum(pa)[flat_index] += g[0];
    };
    int id = tp->add_node("pick", {pa}, 1, out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

/// 2-D transpose.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
    if (a.rank() != 2) {
        throw ShapeError("transpose expects a rank-2 tensor, got " + shape_str(a.shape()));
    }
    const std::size_t m = a.dim(0), n = a.dim(1);
    Tensor<T> out(Shape{n, m});
    const std::vector<T>& av = a.values();
    std::vector<T>& ov = out.values();
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ov[j * m + i] = av[i * n + j];
    if (!a.on_tape()) return out;
    Tape<T>* tp = a.tape();
    const int pa = a.node();
    auto backward = [pa, m, n](const T* g, Tape<T>& t) {
        T* ga = t.accum(pa);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < m; ++i) ga[i * n + j] += g[j * m + i];
    };
    int id = tp->add_node("transpose", {pa}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

enum class Reduce { Sum, Max, Mean };

/// Reduce one axis. Max routes gradient to the first maximal element.
template <typename T>
Tensor<T> reduce(const Tensor<T>& a, std::size_t axis, Reduce kind, bool keepdim = false) {
    if (axis >= a.rank()) {
        throw ShapeError("reduce axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(a.shape()));
    }
    const Shape& s = a.shape();
    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t mid = s[axis];

    Shape os;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i == axis) {
            if (keepdim) os.push_back(1);
        } else {
            os.push_back(s[i]);
        }
    }
    if (os.empty()) os.push_back(1);

    Tensor<T> out(os);
    const std::vector<T>& av = a.values();
    std::vector<T>& ov = out.values();
    auto arg = std::make_shared<std::vector<std::size_t>>();
    if (kind == Reduce::Max) arg->resize(outer * inner);

    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < inner; ++i) {
            const std::size_t base = o * mid * inner + i;
            if (kind == Reduce::Max) {
                T best = av[base];
                std::size_t bm = 0;
                for (std::size_t m2 = 1; m2 < mid; ++m2) {
                    const T v = av[base + m2 * inner];
                    if (v > best) {
                        best = v;
                        bm = m2;
                    }
                }
                ov[o * inner + i] = best;
                (*arg)[o * inner + i] = bm;
            } else {
                T acc = T(0);
                for (std::size_t m2 = 0; m2 < mid; ++m2) acc += av[base + m2 * inner];
                ov[o * inner + i] = kind == Reduce::Mean ? acc / static_cast<T>(mid) : acc;
            }
        }
    }

    if (!a.on_tape()) return out;
    Tape<T>* tp = a.tape();
    const int pa = a.node();
    auto backward = [pa, outer, inner, mid, kind, arg](const T* g, Tape<T>& t) {
        T* ga = t.accum(pa);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < inner; ++i) {
                const T go = g[o * inner + i];
                const std::size_t base = o * mid * inner + i;
                switch (kind) {
                    case Reduce::Sum:
                        for (std::size_t m2 = 0; m2 < mid; ++m2) ga[base + m2 * inner] += go;
                        break;
                    case Reduce::Mean:
                        for (std::size_t m2 = 0; m2 < mid; ++m2)
                            ga[base + m2 * inner] += go / static_cast<T>(mid);
                        break;
                    case Reduce::Max:
                        ga[base + (*arg)[o * inner + i] * inner] += go;
                        break;
                }
            }
        }
    };
    int id = tp->add_node("reduce", {pa}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
    return reduce(reshape(a, Shape{a.numel()}), 0, Reduce::Sum);
}

/// Maximum over consecutive groups of `m` along `axis`; gradient goes to the
/// selected unit, ties to the lowest index.
template <typename T>
Tensor<T> maxout(const Tensor<T>& a, std::size_t m, std::size_t axis) {
    if (m == 0) throw ValueError("maxout group size must be >= 1");
    if (axis >= a.rank()) {
        throw ShapeError("maxout axis " + std::to_string(axis) + " invalid for shape " +
                         shape_str(a.shape()));
    }
    const Shape& s = a.shape();
    if (s[axis] % m != 0) {
        throw ShapeError("maxout group size " + std::to_string(m) +
                         " does not divide dimension " + std::to_string(s[axis]) +
                         " of shape " + shape_str(s));
    }
    if (m == 1) return a;

    std::size_t outer = 1, inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
    const std::size_t groups = s[axis] / m;

    Shape os = s;
    os[axis] = groups;
    Tensor<T> out(os);
    const std::vector<T>& av = a.values();
    std::vector<T>& ov = out.values();
    auto arg = std::make_shared<std::vector<std::size_t>>(outer * groups * inner);

    for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t gidx = 0; gidx < groups; ++gidx) {
            for (std::size_t i = 0; i < inner; ++i) {
                const std::size_t base = ((o * groups + gidx) * m) * inner + i;
                T best = av[base];
                std::size_t bu = 0;
                for (std::size_t u = 1; u < m; ++u) {
                    const T v = av[base + u * inner];
                    if (v > best) {
                        best = v;
                        bu = u;
                    }
                }
                const std::size_t oi = (o * groups + gidx) * inner + i;
                ov[oi] = best;
                (*arg)[oi] = bu;
            }
        }
    }

    if (!a.on_tape()) return out;
    Tape<T>* tp = a.tape();
    const int pa = a.node();
    auto backward = [pa, outer, groups, inner, m, arg](const T* g, Tape<T>& t) {
        T* ga = t.accum(pa);
        for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t gidx = 0; gidx < groups; ++gidx) {
                for (std::size_t i = 0; i < inner; ++i) {
                    const std::size_t oi = (o * groups + gidx) * inner + i;
                    const std::size_t base = ((o * groups + gidx) * m) * inner + i;
                    ga[base + (*arg)[oi] * inner] += g[oi];
                }
            }
        }
    };
    int id = tp->add_node("maxout", {pa}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw ShapeError("matmul dimension mismatch: " + shape_str(a.shape()) + " x " +
                         shape_str(b.shape()));
    }
    const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor<T> out(Shape{m, n});
    const T* A = a.values().data();
    const T* B = b.values().data();
    T* O = out.values().data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const T aik = A[i * k + kk];
            const T* brow = B + kk * n;
            T* orow = O + i * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }

    Tape<T>* tp = detail::result_tape(a, b);
    if (!tp) return out;
    const int pa = a.on_tape() ? a.node() : -1;
    const int pb = b.on_tape() ? b.node() : -1;
    auto ap = a.storage();
    auto bp = b.storage();
    auto backward = [=](const T* g, Tape<T>& t) {
        if (pa >= 0) {
            T* ga = t.accum(pa);
            const T* B2 = bp->data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) {
                    const T gij = g[i * n + j];
                    const T* brow = B2 + j;
                    for (std::size_t kk = 0; kk < k; ++kk)
                        ga[i * k + kk] += gij * brow[kk * n];
                }
        }
        if (pb >= 0) {
            T* gb = t.accum(pb);
            const T* A2 = ap->data();
            for (std::size_t kk = 0; kk < k; ++kk)
                for (std::size_t i = 0; i < m; ++i) {
                    const T aik = A2[i * k + kk];
                    const T* grow = g + i * n;
                    for (std::size_t j = 0; j < n; ++j) gb[kk * n + j] += aik * grow[j];
                }
        }
    };
    int id = tp->add_node("matmul", {pa, pb}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

// ---------------------------------------------------------------------------
// Spatial primitives (NCHW layout, square kernels, zero padding)
// ---------------------------------------------------------------------------

namespace detail {

struct ConvGeometry {
    std::size_t batch, in_ch, h, w;
    std::size_t k, stride, pad;
    std::size_t hp, wp;    // padded input extents
    std::size_t oh, ow;    // output extents

    static ConvGeometry make(const Shape& x, std::size_t k, std::size_t stride,
                             std::size_t pad, const char* op) {
        if (x.size() != 4) {
            throw ShapeError(std::string(op) + " expects input shape [N, C, H, W], got " +
                             shape_str(x));
        }
        if (stride == 0) throw ValueError(std::string(op) + " stride must be >= 1");
        ConvGeometry g;
        g.batch = x[0];
        g.in_ch = x[1];
        g.h = x[2];
        g.w = x[3];
        g.k = k;
        g.stride = stride;
        g.pad = pad;
        g.hp = g.h + 2 * pad;
        g.wp = g.w + 2 * pad;
        if (k == 0 || k > g.hp || k > g.wp) {
            throw ShapeError(std::string(op) + ": kernel size " + std::to_string(k) +
                             " exceeds padded input " + std::to_string(g.hp) + "x" +
                             std::to_string(g.wp));
        }
        g.oh = (g.hp - k) / stride + 1;
        g.ow = (g.wp - k) / stride + 1;
        return g;
    }
};

/// Copy into a zero-padded buffer [N, C, H+2p, W+2p].
template <typename T>
std::shared_ptr<std::vector<T>> pad_input(const std::vector<T>& x, const ConvGeometry& g) {
    auto out = std::make_shared<std::vector<T>>(g.batch * g.in_ch * g.hp * g.wp, T(0));
    T* dst = out->data();
    const T* src = x.data();
    for (std::size_t nc = 0; nc < g.batch * g.in_ch; ++nc) {
        for (std::size_t r = 0; r < g.h; ++r) {
            std::copy_n(src + (nc * g.h + r) * g.w, g.w,
                        dst + (nc * g.hp + r + g.pad) * g.wp + g.pad);
        }
    }
    return out;
}

/// Accumulate the interior of a padded gradient buffer back onto the input.
template <typename T>
void unpad_accumulate(const std::vector<T>& gpad, const ConvGeometry& g, T* gx) {
    for (std::size_t nc = 0; nc < g.batch * g.in_ch; ++nc) {
        for (std::size_t r = 0; r < g.h; ++r) {
            const T* src = gpad.data() + (nc * g.hp + r + g.pad) * g.wp + g.pad;
            T* dst = gx + (nc * g.h + r) * g.w;
            for (std::size_t c = 0; c < g.w; ++c) dst[c] += src[c];
        }
    }
}

}  // namespace detail

/// 2-D cross-correlation of x [N, C, H, W] with kernel [O, C, k, k].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, std::size_t stride,
                 std::size_t pad) {
    if (kernel.rank() != 4 || kernel.dim(2) != kernel.dim(3)) {
        throw ShapeError("conv2d kernel must be [O, C, k, k], got " +
                         shape_str(kernel.shape()));
    }
    const auto g = detail::ConvGeometry::make(x.shape(), kernel.dim(2), stride, pad, "conv2d");
    if (kernel.dim(1) != g.in_ch) {
        throw ShapeError("conv2d channel mismatch: input " + shape_str(x.shape()) +
                         " vs kernel " + shape_str(kernel.shape()));
    }
    const std::size_t oc = kernel.dim(0);
    auto xpad = detail::pad_input(x.values(), g);

    Tensor<T> out(Shape{g.batch, oc, g.oh, g.ow});
    const T* K = kernel.values().data();
    const T* P = xpad->data();
    T* O = out.values().data();
    const std::size_t k = g.k;
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t o = 0; o < oc; ++o) {
            T* plane = O + (n * oc + o) * g.oh * g.ow;
            for (std::size_t c = 0; c < g.in_ch; ++c) {
                const T* pin = P + (n * g.in_ch + c) * g.hp * g.wp;
                const T* kker = K + (o * g.in_ch + c) * k * k;
                for (std::size_t kh = 0; kh < k; ++kh) {
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        const T wgt = kker[kh * k + kw];
                        if (wgt == T(0)) continue;
                        for (std::size_t oh2 = 0; oh2 < g.oh; ++oh2) {
                            const T* src = pin + (oh2 * g.stride + kh) * g.wp + kw;
                            T* dst = plane + oh2 * g.ow;
                            if (g.stride == 1) {
                                for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                                    dst[ow2] += wgt * src[ow2];
                            } else {
                                for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                                    dst[ow2] += wgt * src[ow2 * g.stride];
                            }
                        }
                    }
                }
            }
        }
    }

    Tape<T>* tp = detail::result_tape(x, kernel);
    if (!tp) return out;
    const int px = x.on_tape() ? x.node() : -1;
    const int pk = kernel.on_tape() ? kernel.node() : -1;
    auto kp = px >= 0 ? kernel.storage() : nullptr;
    auto xp = pk >= 0 ? xpad : nullptr;  // padded copy only kept if kernel needs gradient
    auto backward = [=](const T* grad, Tape<T>& t) {
        if (px >= 0) {
            std::vector<T> gpad(g.batch * g.in_ch * g.hp * g.wp, T(0));
            const T* K2 = kp->data();
            for (std::size_t n = 0; n < g.batch; ++n) {
                for (std::size_t o = 0; o < oc; ++o) {
                    const T* gplane = grad + (n * oc + o) * g.oh * g.ow;
                    for (std::size_t c = 0; c < g.in_ch; ++c) {
                        T* gin = gpad.data() + (n * g.in_ch + c) * g.hp * g.wp;
                        const T* kker = K2 + (o * g.in_ch + c) * k * k;
                        for (std::size_t kh = 0; kh < k; ++kh) {
                            for (std::size_t kw = 0; kw < k; ++kw) {
                                const T wgt = kker[kh * k + kw];
                                if (wgt == T(0)) continue;
                                for (std::size_t oh2 = 0; oh2 < g.oh; ++oh2) {
                                    T* dst = gin + (oh2 * g.stride + kh) * g.wp + kw;
                                    const T* gs = gplane + oh2 * g.ow;
                                    if (g.stride == 1) {
                                        for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                                            dst[ow2] += wgt * gs[ow2];
                                    } else {
                                        for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                                            dst[ow2 * g.stride] += wgt * gs[ow2];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            detail::unpad_accumulate(gpad, g, t.accum(px));
        }
        if (pk >= 0) {
            T* gk = t.accum(pk);
            const T* P2 = xp->data();
            for (std::size_t o = 0; o < oc; ++o) {
                for (std::size_t c = 0; c < g.in_ch; ++c) {
                    for (std::size_t kh = 0; kh < k; ++kh) {
                        for (std::size_t kw = 0; kw < k; ++kw) {
                            T acc = T(0);
                            for (std::size_t n = 0; n < g.batch; ++n) {
                                const T* pin = P2 + (n * g.in_ch + c) * g.hp * g.wp;
                                const T* gplane = grad + (n * oc + o) * g.oh * g.ow;
                                for (std::size_t oh2 = 0; oh2 < g.oh; ++oh2) {
                                    const T* src = pin + (oh2 * g.stride + kh) * g.wp + kw;
                                    const T* gs = gplane + oh2 * g.ow;
                                    if (g.stride == 1) {
                                        for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                                            acc += src[ow2] * gs[ow2];
                                    } else {
                                        for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                                            acc += src[ow2 * g.stride] * gs[ow2];
                                    }
                                }
                            }
                            gk[((o * g.in_ch + c) * k + kh) * k + kw] += acc;
                        }
                    }
                }
            }
        }
    };
    int id = tp->add_node("conv2d", {px, pk}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

/// Sliding-window sum per channel; same geometry rules as conv2d.
template <typename T>
Tensor<T> sumpool2d(const Tensor<T>& x, std::size_t k, std::size_t stride, std::size_t pad) {
    const auto g = detail::ConvGeometry::make(x.shape(), k, stride, pad, "sumpool2d");
    auto xpad = detail::pad_input(x.values(), g);
    Tensor<T> out(Shape{g.batch, g.in_ch, g.oh, g.ow});
    const T* P = xpad->data();
    T* O = out.values().data();
    for (std::size_t nc = 0; nc < g.batch * g.in_ch; ++nc) {
        const T* pin = P + nc * g.hp * g.wp;
        T* plane = O + nc * g.oh * g.ow;
        for (std::size_t kh = 0; kh < k; ++kh) {
            for (std::size_t kw = 0; kw < k; ++kw) {
                for (std::size_t oh2 = 0; oh2 < g.oh; ++oh2) {
                    const T* src = pin + (oh2 * g.stride + kh) * g.wp + kw;
                    T* dst = plane + oh2 * g.ow;
                    for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                        dst[ow2] += src[ow2 * g.stride];
                }
            }
        }
    }

    if (!x.on_tape()) return out;
    Tape<T>* tp = x.tape();
    const int px = x.node();
    auto backward = [=](const T* grad, Tape<T>& t) {
        std::vector<T> gpad(g.batch * g.in_ch * g.hp * g.wp, T(0));
        for (std::size_t nc = 0; nc < g.batch * g.in_ch; ++nc) {
            T* gin = gpad.data() + nc * g.hp * g.wp;
            const T* gplane = grad + nc * g.oh * g.ow;
            for (std::size_t kh = 0; kh < k; ++kh) {
                for (std::size_t kw = 0; kw < k; ++kw) {
                    for (std::size_t oh2 = 0; oh2 < g.oh; ++oh2) {
                        T* dst = gin + (oh2 * g.stride + kh) * g.wp + kw;
                        const T* gs = gplane + oh2 * g.ow;
                        for (std::size_t ow2 = 0; ow2 < g.ow; ++ow2)
                            dst[ow2 * g.stride] += gs[ow2];
                    }
                }
            }
        }
        detail::unpad_accumulate(gpad, g, t.accum(px));
    };
    int id = tp->add_node("sumpool2d", {px}, out.numel(), out.storage(), std::move(backward));
    return tp->adopt(out, id);
}

}  // namespace bcos
