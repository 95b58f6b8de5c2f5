#include "rgpd/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rgpd {

namespace {

// Messages are only built when the check fails.
#define RGPD_REQUIRE(ok, msg)                        \
    do {                                             \
        if (!(ok)) throw ::rgpd::DimensionError(msg); \
    } while (0)

void require_matrix(const Tensor& t, const char* op) {
    RGPD_REQUIRE(t.rank() == 2, std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    RGPD_REQUIRE(a.shape() == b.shape(),
            std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

Node& input(const Node& out, std::size_t i) { return *out.record.inputs[i]; }

template <class F, class DF>
Tensor unary(std::string_view kind, const Tensor& a, F f, DF df) {
    std::vector<double> y(a.numel());
    auto x = a.values();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(x[i]);
    return make_op_result(kind, a.shape(), std::move(y), {a}, [df](const Node& out) {
        Node& in = input(out, 0);
        auto& g = in.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * df(in.values[i], out.values[i]);
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    RGPD_REQUIRE(b.rows() == k, "matmul: inner dimensions disagree, " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
    std::vector<double> c(m * n, 0.0);
    auto av = a.values();
    auto bv = b.values();
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = c.data() + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double aip = av[i * k + p];
            if (aip == 0.0) continue;
            const double* brow = bv.data() + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    return make_op_result("matmul", {m, n}, std::move(c), {a, b}, [m, k, n](const Node& out) {
        Node& A = input(out, 0);
        Node& B = input(out, 1);
        const double* gc = out.grad.data();
        if (A.requires_grad) {
            // dA = dC * B^T, accumulated row-wise against a transposed copy of B.
            auto& ga = A.ensure_grad();
            std::vector<double> bt(n * k);
            for (std::size_t p = 0; p < k; ++p)
                for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = B.values[p * n + j];
            for (std::size_t i = 0; i < m; ++i) {
                double* arow = ga.data() + i * k;
                for (std::size_t j = 0; j < n; ++j) {
                    const double g = gc[i * n + j];
                    if (g == 0.0) continue;
                    const double* brow = bt.data() + j * k;
                    for (std::size_t p = 0; p < k; ++p) arow[p] += g * brow[p];
                }
            }
        }
        if (B.requires_grad) {
            // dB = A^T * dC
            auto& gb = B.ensure_grad();
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t p = 0; p < k; ++p) {
                    const double aip = A.values[i * k + p];
                    if (aip == 0.0) continue;
                    for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * gc[i * n + j];
                }
            }
        }
    });
}

Tensor block_matmul(const Tensor& a, const Tensor& x) {
    require_matrix(a, "block_matmul");
    require_matrix(x, "block_matmul");
    const std::size_t m = a.rows(), k = a.cols(), f = x.cols();
    RGPD_REQUIRE(k > 0 && x.rows() % k == 0,
                 "block_matmul: " + shape_str(x.shape()) + " is not a stack of " + std::to_string(k) + "-row blocks");
    const std::size_t blocks = x.rows() / k;
    std::vector<double> y(blocks * m * f, 0.0);
    auto av = a.values();
    auto xv = x.values();
    for (std::size_t b = 0; b < blocks; ++b) {
        const double* xb = xv.data() + b * k * f;
        double* yb = y.data() + b * m * f;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = av[i * k + p];
                if (aip == 0.0) continue;
                for (std::size_t j = 0; j < f; ++j) yb[i * f + j] += aip * xb[p * f + j];
            }
        }
    }
    return make_op_result("block_matmul", {blocks * m, f}, std::move(y), {a, x}, [m, k, f, blocks](const Node& out) {
        Node& A = input(out, 0);
        Node& X = input(out, 1);
        for (std::size_t b = 0; b < blocks; ++b) {
            const double* gy = out.grad.data() + b * m * f;
            const double* xb = X.values.data() + b * k * f;
            if (A.requires_grad) {
                auto& ga = A.ensure_grad();
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < f; ++j) s += gy[i * f + j] * xb[p * f + j];
                        ga[i * k + p] += s;
                    }
            }
            if (X.requires_grad) {
                double* gx = X.ensure_grad().data() + b * k * f;
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t p = 0; p < k; ++p) {
                        const double aip = A.values[i * k + p];
                        if (aip == 0.0) continue;
                        for (std::size_t j = 0; j < f; ++j) gx[p * f + j] += aip * gy[i * f + j];
                    }
            }
        }
    });
}

Tensor transpose(const Tensor& a) {
    require_matrix(a, "transpose");
    const std::size_t r = a.rows(), c = a.cols();
    std::vector<double> y(r * c);
    auto x = a.values();
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[j * r + i] = x[i * c + j];
    return make_op_result("transpose", {c, r}, std::move(y), {a}, [r, c](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += out.grad[j * r + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] + b[i];
    return make_op_result("add", a.shape(), std::move(y), {a, b}, [](const Node& out) {
        for (std::size_t s = 0; s < 2; ++s) {
            Node& in = input(out, s);
            if (!in.requires_grad) continue;
            auto& g = in.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] - b[i];
    return make_op_result("sub", a.shape(), std::move(y), {a, b}, [](const Node& out) {
        Node& A = input(out, 0);
        Node& B = input(out, 1);
        if (A.requires_grad) {
            auto& g = A.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
        }
        if (B.requires_grad) {
            auto& g = B.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= out.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> y(a.numel());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a[i] * b[i];
    return make_op_result("mul", a.shape(), std::move(y), {a, b}, [](const Node& out) {
        Node& A = input(out, 0);
        Node& B = input(out, 1);
        if (A.requires_grad) {
            auto& g = A.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * B.values[i];
        }
        if (B.requires_grad) {
            auto& g = B.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i] * A.values[i];
        }
    });
}

Tensor scale(const Tensor& a, double s) {
    return unary("scale", a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Tensor add_scalar(const Tensor& a, double s) {
    return unary("add_scalar", a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    require_matrix(a, "add_row");
    const std::size_t r = a.rows(), c = a.cols();
    RGPD_REQUIRE(row.numel() == c, "add_row: row of shape " + shape_str(row.shape()) + " against " + shape_str(a.shape()));
    std::vector<double> y(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = a[i * c + j] + row[j];
    return make_op_result("add_row", a.shape(), std::move(y), {a, row}, [r, c](const Node& out) {
        Node& A = input(out, 0);
        Node& R = input(out, 1);
        if (A.requires_grad) {
            auto& g = A.ensure_grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
        }
        if (R.requires_grad) {
            auto& g = R.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += out.grad[i * c + j];
        }
    });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
    require_matrix(a, "mul_row");
    const std::size_t r = a.rows(), c = a.cols();
    RGPD_REQUIRE(row.numel() == c, "mul_row: row of shape " + shape_str(row.shape()) + " against " + shape_str(a.shape()));
    std::vector<double> y(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = a[i * c + j] * row[j];
    return make_op_result("mul_row", a.shape(), std::move(y), {a, row}, [r, c](const Node& out) {
        Node& A = input(out, 0);
        Node& R = input(out, 1);
        if (A.requires_grad) {
            auto& g = A.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += out.grad[i * c + j] * R.values[j];
        }
        if (R.requires_grad) {
            auto& g = R.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[j] += out.grad[i * c + j] * A.values[i * c + j];
        }
    });
}

Tensor mul_col(const Tensor& a, const Tensor& col) {
    require_matrix(a, "mul_col");
    const std::size_t r = a.rows(), c = a.cols();
    RGPD_REQUIRE(col.numel() == r, "mul_col: column of shape " + shape_str(col.shape()) + " against " + shape_str(a.shape()));
    std::vector<double> y(r * c);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] = a[i * c + j] * col[i];
    return make_op_result("mul_col", a.shape(), std::move(y), {a, col}, [r, c](const Node& out) {
        Node& A = input(out, 0);
        Node& C = input(out, 1);
        if (A.requires_grad) {
            auto& g = A.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i * c + j] += out.grad[i * c + j] * C.values[i];
        }
        if (C.requires_grad) {
            auto& g = C.ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < c; ++j) g[i] += out.grad[i * c + j] * A.values[i * c + j];
        }
    });
}

Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_op_result("sum", {1}, {s}, {a}, [](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        for (auto& gi : g) gi += out.grad[0];
    });
}

Tensor mean(const Tensor& a) {
    const double n = static_cast<double>(a.numel());
    double s = 0.0;
    for (double v : a.values()) s += v;
    return make_op_result("mean", {1}, {s / n}, {a}, [n](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        for (auto& gi : g) gi += out.grad[0] / n;
    });
}

Tensor mean_rows(const Tensor& a) {
    require_matrix(a, "mean_rows");
    const std::size_t r = a.rows(), c = a.cols();
    RGPD_REQUIRE(r > 0, "mean_rows: empty matrix");
    std::vector<double> y(c, 0.0);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) y[j] += a[i * c + j];
    for (auto& v : y) v /= static_cast<double>(r);
    return make_op_result("mean_rows", {1, c}, std::move(y), {a}, [r, c](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        const double inv = 1.0 / static_cast<double>(r);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += out.grad[j] * inv;
    });
}

Tensor mean_cols(const Tensor& a) {
    require_matrix(a, "mean_cols");
    const std::size_t r = a.rows(), c = a.cols();
    RGPD_REQUIRE(c > 0, "mean_cols: empty matrix");
    std::vector<double> y(r, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) y[i] += a[i * c + j];
        y[i] /= static_cast<double>(c);
    }
    return make_op_result("mean_cols", {r, 1}, std::move(y), {a}, [r, c](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        const double inv = 1.0 / static_cast<double>(c);
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) g[i * c + j] += out.grad[i] * inv;
    });
}

Tensor square(const Tensor& a) {
    return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor relu(const Tensor& a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor elu(const Tensor& a, double alpha) {
    return unary("elu", a, [alpha](double x) { return x > 0.0 ? x : alpha * std::expm1(x); },
                 [alpha](double x, double y) { return x > 0.0 ? 1.0 : y + alpha; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
    return unary("leaky_relu", a, [slope](double x) { return x > 0.0 ? x : slope * x; },
                 [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Tensor sigmoid(const Tensor& a) {
    return unary(
        "sigmoid", a,
        [](double x) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
    for (double v : a.values()) {
        if (!(v > 0.0)) throw NumericalError("log of non-positive value");
    }
    return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor softplus(const Tensor& a) {
    return unary(
        "softplus", a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
        [](double x, double) {
            if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
                 [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    RGPD_REQUIRE(x.rank() == 1 || x.rank() == 2, "softmax: rank must be 1 or 2, got " + shape_str(x.shape()));
    RGPD_REQUIRE(axis < x.rank(), "softmax: axis " + std::to_string(axis) + " invalid for " + shape_str(x.shape()));
    const std::size_t r = x.rank() == 1 ? 1 : x.dim(0);
    const std::size_t c = x.rank() == 1 ? x.dim(0) : x.dim(1);
    const bool along_rows = x.rank() == 1 || axis == 1;
    // Lines are rows (along_rows) or columns; stride walks within a line.
    const std::size_t lines = along_rows ? r : c;
    const std::size_t len = along_rows ? c : r;
    const std::size_t stride = along_rows ? 1 : c;
    const std::size_t line_step = along_rows ? c : 1;

    std::vector<double> y(x.numel());
    for (std::size_t l = 0; l < lines; ++l) {
        const std::size_t base = l * line_step;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < len; ++i) mx = std::max(mx, x[base + i * stride]);
        double z = 0.0;
        for (std::size_t i = 0; i < len; ++i) {
            const double e = std::exp(x[base + i * stride] - mx);
            y[base + i * stride] = e;
            z += e;
        }
        for (std::size_t i = 0; i < len; ++i) y[base + i * stride] /= z;
    }
    return make_op_result("softmax", x.shape(), std::move(y), {x},
                          [lines, len, stride, line_step](const Node& out) {
                              auto& g = input(out, 0).ensure_grad();
                              for (std::size_t l = 0; l < lines; ++l) {
                                  const std::size_t base = l * line_step;
                                  double dot = 0.0;
                                  for (std::size_t i = 0; i < len; ++i) {
                                      const std::size_t k = base + i * stride;
                                      dot += out.grad[k] * out.values[k];
                                  }
                                  for (std::size_t i = 0; i < len; ++i) {
                                      const std::size_t k = base + i * stride;
                                      g[k] += out.values[k] * (out.grad[k] - dot);
                                  }
                              }
                          });
}

Tensor masked_softmax_rows(const Tensor& x, std::span<const double> mask) {
    require_matrix(x, "masked_softmax_rows");
    RGPD_REQUIRE(mask.size() == x.numel(), "masked_softmax_rows: mask size disagrees with " + shape_str(x.shape()));
    const std::size_t r = x.rows(), c = x.cols();
    std::vector<double> y(r * c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < c; ++j)
            if (mask[i * c + j] != 0.0) {
                const double v = x[i * c + j];
                if (!std::isfinite(v)) throw NumericalError("masked_softmax_rows: non-finite score in row " + std::to_string(i));
                mx = std::max(mx, v);
                any = true;
            }
        if (!any) throw DimensionError("masked_softmax_rows: row " + std::to_string(i) + " is fully masked");
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            if (mask[i * c + j] == 0.0) continue;
            const double e = std::exp(x[i * c + j] - mx);
            y[i * c + j] = e;
            z += e;
        }
        for (std::size_t j = 0; j < c; ++j) y[i * c + j] /= z;
    }
    // Masked outputs are exactly 0 and so contribute nothing to the backward rule.
    return make_op_result("masked_softmax_rows", x.shape(), std::move(y), {x}, [r, c](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) dot += out.grad[i * c + j] * out.values[i * c + j];
            for (std::size_t j = 0; j < c; ++j) {
                const std::size_t k = i * c + j;
                g[k] += out.values[k] * (out.grad[k] - dot);
            }
        }
    });
}

Tensor outer_add(const Tensor& u, const Tensor& v) {
    const std::size_t n = u.numel(), m = v.numel();
    std::vector<double> y(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) y[i * m + j] = u[i] + v[j];
    return make_op_result("outer_add", {n, m}, std::move(y), {u, v}, [n, m](const Node& out) {
        Node& U = input(out, 0);
        Node& V = input(out, 1);
        if (U.requires_grad) {
            auto& g = U.ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) g[i] += out.grad[i * m + j];
        }
        if (V.requires_grad) {
            auto& g = V.ensure_grad();
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) g[j] += out.grad[i * m + j];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    RGPD_REQUIRE(!parts.empty(), "concat_cols: no inputs");
    const std::size_t r = parts.front().rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        RGPD_REQUIRE(p.rows() == r, "concat_cols: row count mismatch " + shape_str(parts.front().shape()) + " vs " +
                                   shape_str(p.shape()));
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<double> y(r * total);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto w = widths[k];
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) y[i * total + offset + j] = parts[k][i * w + j];
        offset += w;
    }
    return make_op_result("concat_cols", {r, total}, std::move(y), parts, [r, total, widths](const Node& out) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < widths.size(); ++k) {
            Node& in = input(out, k);
            const auto w = widths[k];
            if (in.requires_grad) {
                auto& g = in.ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < w; ++j) g[i * w + j] += out.grad[i * total + offset + j];
            }
            offset += w;
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    RGPD_REQUIRE(!parts.empty(), "concat_rows: no inputs");
    const std::size_t c = parts.front().cols();
    std::vector<std::size_t> sizes;
    std::size_t rows = 0;
    std::vector<double> y;
    for (const auto& p : parts) {
        RGPD_REQUIRE(p.cols() == c, "concat_rows: column count mismatch " + shape_str(parts.front().shape()) + " vs " +
                                   shape_str(p.shape()));
        rows += p.rows();
        sizes.push_back(p.numel());
        y.insert(y.end(), p.values().begin(), p.values().end());
    }
    return make_op_result("concat_rows", {rows, c}, std::move(y), parts, [sizes](const Node& out) {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < sizes.size(); ++k) {
            Node& in = input(out, k);
            if (in.requires_grad) {
                auto& g = in.ensure_grad();
                for (std::size_t i = 0; i < sizes[k]; ++i) g[i] += out.grad[offset + i];
            }
            offset += sizes[k];
        }
    });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end) {
    require_matrix(a, "slice_cols");
    const std::size_t r = a.rows(), c = a.cols();
    RGPD_REQUIRE(begin < end && end <= c, "slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                         ") invalid for " + shape_str(a.shape()));
    const std::size_t w = end - begin;
    std::vector<double> y(r * w);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) y[i * w + j] = a[i * c + begin + j];
    return make_op_result("slice_cols", {r, w}, std::move(y), {a}, [r, c, w, begin](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) g[i * c + begin + j] += out.grad[i * w + j];
    });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end) {
    require_matrix(a, "slice_rows");
    const std::size_t r = a.rows(), c = a.cols();
    RGPD_REQUIRE(begin < end && end <= r, "slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                                         ") invalid for " + shape_str(a.shape()));
    std::vector<double> y(a.values().begin() + begin * c, a.values().begin() + end * c);
    return make_op_result("slice_rows", {end - begin, c}, std::move(y), {a}, [begin, c](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i) g[begin * c + i] += out.grad[i];
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    RGPD_REQUIRE(shape_numel(shape) == a.numel(), "reshape: " + shape_str(a.shape()) + " to " + shape_str(shape));
    std::vector<double> y(a.values().begin(), a.values().end());
    return make_op_result("reshape", std::move(shape), std::move(y), {a}, [](const Node& out) {
        auto& g = input(out, 0).ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += out.grad[i];
    });
}

Tensor dilated_depthwise_conv1d(const Tensor& x, const Tensor& kernel, std::size_t dilation, Padding padding) {
    require_matrix(x, "dilated_depthwise_conv1d");
    require_matrix(kernel, "dilated_depthwise_conv1d");
    if (dilation < 1) throw std::invalid_argument("dilated_depthwise_conv1d: dilation must be >= 1");
    const std::size_t channels = x.rows(), len = x.cols(), k = kernel.cols();
    RGPD_REQUIRE(kernel.rows() == channels, "dilated_depthwise_conv1d: kernel " + shape_str(kernel.shape()) +
                                           " does not match input " + shape_str(x.shape()));
    if (padding == Padding::same && k % 2 == 0) {
        throw std::invalid_argument("depthwise convolution with same padding needs an odd kernel size, got " +
                                    std::to_string(k));
    }
    const long pad = padding == Padding::same ? static_cast<long>(dilation * (k - 1) / 2) : 0L;
    const long d = static_cast<long>(dilation);
    const long n = static_cast<long>(len);

    std::vector<double> y(channels * len, 0.0);
    for (std::size_t ch = 0; ch < channels; ++ch) {
        for (long i = 0; i < n; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < k; ++j) {
                const long src = i - d * static_cast<long>(j) + pad;
                if (src < 0 || src >= n) continue;
                acc += kernel[ch * k + j] * x[ch * len + static_cast<std::size_t>(src)];
            }
            y[ch * len + static_cast<std::size_t>(i)] = acc;
        }
    }
    return make_op_result(
        "dilated_depthwise_conv1d", x.shape(), std::move(y), {x, kernel}, [channels, len, k, d, pad, n](const Node& out) {
            Node& X = input(out, 0);
            Node& K = input(out, 1);
            for (std::size_t ch = 0; ch < channels; ++ch) {
                for (long i = 0; i < n; ++i) {
                    const double go = out.grad[ch * len + static_cast<std::size_t>(i)];
                    if (go == 0.0) continue;
                    for (std::size_t j = 0; j < k; ++j) {
                        const long src = i - d * static_cast<long>(j) + pad;
                        if (src < 0 || src >= n) continue;
                        const std::size_t xs = ch * len + static_cast<std::size_t>(src);
                        if (X.requires_grad) X.ensure_grad()[xs] += go * K.values[ch * k + j];
                        if (K.requires_grad) K.ensure_grad()[ch * k + j] += go * X.values[xs];
                    }
                }
            }
        });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel) {
    return dilated_depthwise_conv1d(x, kernel, 1, Padding::same);
}

Tensor pointwise_conv(const Tensor& x, const Tensor& kernel) {
    require_matrix(x, "pointwise_conv");
    require_matrix(kernel, "pointwise_conv");
    RGPD_REQUIRE(kernel.rows() == x.rows(), "pointwise_conv: kernel " + shape_str(kernel.shape()) + " expects " +
                                           std::to_string(kernel.rows()) + " channels, input is " +
                                           shape_str(x.shape()));
    return matmul(transpose(kernel), x);
}

}  // namespace rgpd
