#include "protoflow/kernels.hpp"

#include <cmath>
#include <cstring>

#include "protoflow/threading.hpp"

namespace protoflow::kern {

namespace {
inline bool par() { return protoflow::threads() > 1; }
}

void matmul(int64_t m, int64_t k, int64_t n, const double* a, const double* b,
            double* c, bool acc) {
    // row-major axpy form: ascending-k accumulation per output element, the
    // inner j loop vectorizes over contiguous rows of b and c
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < m; ++i) {
        double* ci = c + i * n;
        if (!acc) {
            for (int64_t j = 0; j < n; ++j) ci[j] = 0.0;
        }
        const double* ai = a + i * k;
        for (int64_t p = 0; p < k; ++p) {
            const double av = ai[p];
            const double* bp = b + p * n;
            for (int64_t j = 0; j < n; ++j) ci[j] += av * bp[j];
        }
    }
}

void transpose(int64_t rows, int64_t cols, const double* src, double* dst) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

void add(int64_t n, const double* a, const double* b, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub(int64_t n, const double* a, const double* b, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul(int64_t n, const double* a, const double* b, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(int64_t n, const double* a, double c, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] * c;
}

void exp_(int64_t n, const double* a, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] = std::exp(a[i]);
}

void leaky_relu(int64_t n, const double* a, double slope, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] >= 0.0 ? a[i] : slope * a[i];
}

void elu(int64_t n, const double* a, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] = a[i] >= 0.0 ? a[i] : std::expm1(a[i]);
}

void mul_acc(int64_t n, const double* a, const double* b, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] += a[i] * b[i];
}

void axpy(int64_t n, double c, const double* a, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < n; ++i) out[i] += c * a[i];
}

void softmax_rows(int64_t rows, int64_t cols, const double* a, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < rows; ++i) {
        const double* ai = a + i * cols;
        double* oi = out + i * cols;
        double mx = ai[0];
        for (int64_t j = 1; j < cols; ++j) mx = ai[j] > mx ? ai[j] : mx;
        double sum = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
            oi[j] = std::exp(ai[j] - mx);
            sum += oi[j];
        }
        const double inv = 1.0 / sum;
        for (int64_t j = 0; j < cols; ++j) oi[j] *= inv;
    }
}

std::vector<int64_t> segment_offsets(const std::vector<int64_t>& sorted_seg,
                                     int64_t num_segments) {
    std::vector<int64_t> offsets(static_cast<std::size_t>(num_segments) + 1, 0);
    for (int64_t s : sorted_seg) ++offsets[static_cast<std::size_t>(s) + 1];
    for (int64_t s = 0; s < num_segments; ++s)
        offsets[static_cast<std::size_t>(s) + 1] += offsets[static_cast<std::size_t>(s)];
    return offsets;
}

void segment_sum(int64_t d, const double* x, const std::vector<int64_t>& offsets,
                 double* out, bool acc) {
    const int64_t S = static_cast<int64_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (par())
    for (int64_t s = 0; s < S; ++s) {
        double* os = out + s * d;
        if (!acc)
            for (int64_t j = 0; j < d; ++j) os[j] = 0.0;
        for (int64_t r = offsets[s]; r < offsets[s + 1]; ++r) {
            const double* xr = x + r * d;
            for (int64_t j = 0; j < d; ++j) os[j] += xr[j];
        }
    }
}

void segment_mean(int64_t d, const double* x, const std::vector<int64_t>& offsets,
                  double* out) {
    const int64_t S = static_cast<int64_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (par())
    for (int64_t s = 0; s < S; ++s) {
        double* os = out + s * d;
        for (int64_t j = 0; j < d; ++j) os[j] = 0.0;
        for (int64_t r = offsets[s]; r < offsets[s + 1]; ++r) {
            const double* xr = x + r * d;
            for (int64_t j = 0; j < d; ++j) os[j] += xr[j];
        }
        const double inv = 1.0 / static_cast<double>(offsets[s + 1] - offsets[s]);
        for (int64_t j = 0; j < d; ++j) os[j] *= inv;
    }
}

void segment_softmax(const double* scores, const std::vector<int64_t>& offsets,
                     double* out) {
    const int64_t S = static_cast<int64_t>(offsets.size()) - 1;
#pragma omp parallel for schedule(static) if (par())
    for (int64_t s = 0; s < S; ++s) {
        const int64_t lo = offsets[s], hi = offsets[s + 1];
        if (lo == hi) continue;
        double mx = scores[lo];
        for (int64_t r = lo + 1; r < hi; ++r) mx = scores[r] > mx ? scores[r] : mx;
        double sum = 0.0;
        for (int64_t r = lo; r < hi; ++r) {
            out[r] = std::exp(scores[r] - mx);
            sum += out[r];
        }
        const double inv = 1.0 / sum;
        for (int64_t r = lo; r < hi; ++r) out[r] *= inv;
    }
}

void gather_rows(int64_t d, const double* x, const std::vector<int64_t>& idx,
                 double* out) {
    const int64_t r = static_cast<int64_t>(idx.size());
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < r; ++i)
        std::memcpy(out + i * d, x + idx[static_cast<std::size_t>(i)] * d,
                    static_cast<std::size_t>(d) * sizeof(double));
}

void scatter_rows_acc(int64_t d, const double* g, const std::vector<int64_t>& idx,
                      double* out) {
    // indices may repeat; kept serial so accumulation order is fixed
    const int64_t r = static_cast<int64_t>(idx.size());
    for (int64_t i = 0; i < r; ++i) {
        double* oi = out + idx[static_cast<std::size_t>(i)] * d;
        const double* gi = g + i * d;
        for (int64_t j = 0; j < d; ++j) oi[j] += gi[j];
    }
}

void scale_rows(int64_t rows, int64_t d, const double* x, const double* s,
                double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < rows; ++i) {
        const double si = s[i];
        for (int64_t j = 0; j < d; ++j) out[i * d + j] = x[i * d + j] * si;
    }
}

void pairwise_dist(int64_t b, int64_t p, int64_t d, const double* z,
                   const double* proto, double* out) {
#pragma omp parallel for schedule(static) if (par())
    for (int64_t i = 0; i < b; ++i) {
        const double* zi = z + i * d;
        for (int64_t j = 0; j < p; ++j) {
            const double* pj = proto + j * d;
            double acc = 0.0;
            for (int64_t t = 0; t < d; ++t) {
                const double diff = zi[t] - pj[t];
                acc += diff * diff;
            }
            out[i * p + j] = std::sqrt(acc);
        }
    }
}

namespace ref {

void matmul(int64_t m, int64_t k, int64_t n, const double* a, const double* b,
            double* c, bool acc) {
    for (int64_t i = 0; i < m; ++i)
        for (int64_t j = 0; j < n; ++j) {
            double s = acc ? c[i * n + j] : 0.0;
            for (int64_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
            c[i * n + j] = s;
        }
}

void transpose(int64_t rows, int64_t cols, const double* src, double* dst) {
    for (int64_t i = 0; i < rows; ++i)
        for (int64_t j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

void softmax_rows(int64_t rows, int64_t cols, const double* a, double* out) {
    for (int64_t i = 0; i < rows; ++i) {
        const double* ai = a + i * cols;
        double* oi = out + i * cols;
        double mx = ai[0];
        for (int64_t j = 1; j < cols; ++j) mx = ai[j] > mx ? ai[j] : mx;
        double sum = 0.0;
        for (int64_t j = 0; j < cols; ++j) {
            oi[j] = std::exp(ai[j] - mx);
            sum += oi[j];
        }
        for (int64_t j = 0; j < cols; ++j) oi[j] /= sum;
    }
}

void segment_sum(int64_t d, const double* x, const std::vector<int64_t>& offsets,
                 double* out, bool acc) {
    const int64_t S = static_cast<int64_t>(offsets.size()) - 1;
    for (int64_t s = 0; s < S; ++s) {
        double* os = out + s * d;
        if (!acc)
            for (int64_t j = 0; j < d; ++j) os[j] = 0.0;
        for (int64_t r = offsets[s]; r < offsets[s + 1]; ++r)
            for (int64_t j = 0; j < d; ++j) os[j] += x[r * d + j];
    }
}

void pairwise_dist(int64_t b, int64_t p, int64_t d, const double* z,
                   const double* proto, double* out) {
    for (int64_t i = 0; i < b; ++i)
        for (int64_t j = 0; j < p; ++j) {
            double acc = 0.0;
            for (int64_t t = 0; t < d; ++t) {
                const double diff = z[i * d + t] - proto[j * d + t];
                acc += diff * diff;
            }
            out[i * p + j] = std::sqrt(acc);
        }
}

}  // namespace ref

}  // namespace protoflow::kern
