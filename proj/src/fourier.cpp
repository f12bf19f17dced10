#include "kam/fourier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

namespace kam {

int norm_inf(const Index& k) {
    int m = 0;
    for (int v : k) m = std::max(m, std::abs(v));
    return m;
}

int norm_l1(const Index& k) {
    int m = 0;
    for (int v : k) m += std::abs(v);
    return m;
}

double dot(const Index& k, const RealVec& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) s += k[i] * w[i];
    return s;
}

Index sub(const Index& a, const Index& b) {
    Index r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

Index add(const Index& a, const Index& b) {
    Index r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

Index neg(const Index& a) {
    Index r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
    return r;
}

FourierSeries::FourierSeries(int d, int cutoff, int rows, int cols)
    : d_(d), cutoff_(cutoff), rows_(rows), cols_(cols) {
    if (d < 1) throw std::invalid_argument("FourierSeries: dimension must be >= 1");
    if (cutoff < 0) throw std::invalid_argument("FourierSeries: cutoff must be >= 0");
    if (rows < 1 || cols < 1) throw std::invalid_argument("FourierSeries: bad shape");
    modes_ = 1;
    for (int i = 0; i < d; ++i) modes_ *= static_cast<std::size_t>(2 * cutoff + 1);
    data_.assign(modes_ * static_cast<std::size_t>(rows * cols), cplx(0.0, 0.0));
}

Index FourierSeries::mode(std::size_t flat) const {
    Index k(d_);
    const std::size_t w = static_cast<std::size_t>(2 * cutoff_ + 1);
    for (int i = d_ - 1; i >= 0; --i) {
        k[i] = static_cast<int>(flat % w) - cutoff_;
        flat /= w;
    }
    return k;
}

std::optional<std::size_t> FourierSeries::flat(const Index& k) const {
    if (static_cast<int>(k.size()) != d_) throw std::invalid_argument("FourierSeries: index dimension mismatch");
    std::size_t f = 0;
    const std::size_t w = static_cast<std::size_t>(2 * cutoff_ + 1);
    for (int i = 0; i < d_; ++i) {
        if (std::abs(k[i]) > cutoff_) return std::nullopt;
        f = f * w + static_cast<std::size_t>(k[i] + cutoff_);
    }
    return f;
}

cplx& FourierSeries::at(const Index& k, int r, int c) {
    auto f = flat(k);
    if (!f) throw std::out_of_range("FourierSeries::at: mode outside cutoff");
    return raw(*f, r, c);
}

cplx FourierSeries::get(const Index& k, int r, int c) const {
    auto f = flat(k);
    if (!f) return cplx(0.0, 0.0);
    return raw(*f, r, c);
}

FourierSeries FourierSeries::entry(int r, int c) const {
    FourierSeries s(d_, cutoff_, 1, 1);
    for (std::size_t f = 0; f < modes_; ++f) s.raw(f) = raw(f, r, c);
    return s;
}

void FourierSeries::set_entry(int r, int c, const FourierSeries& s) {
    if (s.dim() != d_ || s.entries() != 1) throw std::invalid_argument("set_entry: shape mismatch");
    for (std::size_t f = 0; f < modes_; ++f) raw(f, r, c) = cplx(0.0, 0.0);
    for (std::size_t f = 0; f < s.num_modes(); ++f) {
        if (s.raw(f) == cplx(0.0, 0.0)) continue;
        auto g = flat(s.mode(f));
        if (g) raw(*g, r, c) = s.raw(f);
    }
}

FourierSeries FourierSeries::with_cutoff(int N) const {
    FourierSeries out(d_, N, rows_, cols_);
    if (N == cutoff_) return *this;
    const int e = entries();
    if (N > cutoff_) {
        for (std::size_t f = 0; f < modes_; ++f) {
            std::size_t g = *out.flat(mode(f));
            for (int q = 0; q < e; ++q) out.data_[g * e + q] = data_[f * e + q];
        }
    } else {
        for (std::size_t g = 0; g < out.modes_; ++g) {
            std::size_t f = *flat(out.mode(g));
            for (int q = 0; q < e; ++q) out.data_[g * e + q] = data_[f * e + q];
        }
    }
    return out;
}

bool FourierSeries::is_zero() const {
    return std::all_of(data_.begin(), data_.end(), [](const cplx& v) { return v == cplx(0.0, 0.0); });
}

double FourierSeries::max_abs() const {
    double m = 0.0;
    for (const auto& v : data_) m = std::max(m, std::abs(v));
    return m;
}

cplx FourierSeries::evaluate(const RealVec& x, int r, int c) const {
    cplx s(0.0, 0.0);
    for (std::size_t f = 0; f < modes_; ++f) {
        const cplx& v = raw(f, r, c);
        if (v == cplx(0.0, 0.0)) continue;
        s += v * std::polar(1.0, dot(mode(f), x));
    }
    return s;
}

namespace {
void check_same_shape(const FourierSeries& a, const FourierSeries& b) {
    if (a.dim() != b.dim() || a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument("FourierSeries: shape mismatch");
}
}  // namespace

FourierSeries& FourierSeries::operator+=(const FourierSeries& o) {
    check_same_shape(*this, o);
    if (o.cutoff_ > cutoff_) *this = with_cutoff(o.cutoff_);
    const int e = entries();
    if (o.cutoff_ == cutoff_) {
        for (std::size_t q = 0; q < data_.size(); ++q) data_[q] += o.data_[q];
        return *this;
    }
    for (std::size_t f = 0; f < o.modes_; ++f) {
        std::size_t g = *flat(o.mode(f));
        for (int q = 0; q < e; ++q) data_[g * e + q] += o.data_[f * e + q];
    }
    return *this;
}

FourierSeries& FourierSeries::operator-=(const FourierSeries& o) {
    FourierSeries t = o;
    t *= cplx(-1.0, 0.0);
    return *this += t;
}

FourierSeries& FourierSeries::operator*=(cplx a) {
    for (auto& v : data_) v *= a;
    return *this;
}

FourierSeries operator+(FourierSeries a, const FourierSeries& b) { return a += b; }
FourierSeries operator-(FourierSeries a, const FourierSeries& b) { return a -= b; }
FourierSeries operator*(cplx a, FourierSeries f) { return f *= a; }

FourierSeries constant_series(int d, cplx value) {
    FourierSeries f(d, 0);
    f.raw(0) = value;
    return f;
}

FourierSeries mode_series(int d, const Index& k, cplx a) {
    FourierSeries f(d, norm_inf(k));
    f.at(k) = a;
    return f;
}

FourierSeries truncate(const FourierSeries& f, int N) {
    if (N < 0) throw std::invalid_argument("truncate: N must be >= 0");
    if (N >= f.cutoff()) return f;
    return f.with_cutoff(N);
}

FourierSeries tail(const FourierSeries& f, int N) {
    FourierSeries t = f;
    const int e = f.entries();
    for (std::size_t q = 0; q < f.num_modes(); ++q) {
        if (norm_inf(f.mode(q)) <= N)
            for (int r = 0; r < e; ++r) t.data()[q * e + r] = cplx(0.0, 0.0);
    }
    return t;
}

double strip_norm(const FourierSeries& f, double s) {
    if (s < 0) throw std::invalid_argument("strip_norm: s must be >= 0");
    std::vector<double> acc(f.entries(), 0.0);
    for (std::size_t q = 0; q < f.num_modes(); ++q) {
        const double w = std::exp(s * norm_l1(f.mode(q)));
        for (int r = 0; r < f.entries(); ++r) acc[r] += std::abs(f.data()[q * f.entries() + r]) * w;
    }
    return acc.empty() ? 0.0 : *std::max_element(acc.begin(), acc.end());
}

FourierSeries product(const FourierSeries& f, const FourierSeries& g, int cap, double* dropped, double s_drop) {
    if (f.dim() != g.dim()) throw std::invalid_argument("product: dimension mismatch");
    if (f.cols() != g.rows()) throw std::invalid_argument("product: shape mismatch");
    const int d = f.dim();
    const int full = f.cutoff() + g.cutoff();
    const int N = (cap >= 0) ? std::min(cap, full) : full;
    const int R = f.rows(), K = f.cols(), C = g.cols();

    // Convolve into the full cube [-full, full]^d; a mode's flat position
    // there is the sum of per-factor offsets, so no index arithmetic is
    // needed in the inner loop.
    FourierSeries big(d, full, R, C);
    const int side = 2 * full + 1;
    auto offsets = [&](const FourierSeries& s) {
        std::vector<std::ptrdiff_t> off(s.num_modes());
        for (std::size_t q = 0; q < s.num_modes(); ++q) {
            const Index k = s.mode(q);
            std::ptrdiff_t o = 0;
            for (int i = 0; i < d; ++i) o = o * side + k[i];
            off[q] = o;
        }
        return off;
    };
    std::ptrdiff_t center = 0;
    for (int i = 0; i < d; ++i) center = center * side + full;
    // Sparse lists of nonzero modes keep the convolution cheap for thin series.
    auto nonzero = [](const FourierSeries& s) {
        std::vector<std::size_t> nz;
        const int e = s.entries();
        for (std::size_t q = 0; q < s.num_modes(); ++q)
            for (int r = 0; r < e; ++r)
                if (s.data()[q * e + r] != cplx(0.0, 0.0)) {
                    nz.push_back(q);
                    break;
                }
        return nz;
    };
    const auto nf = nonzero(f);
    const auto ng = nonzero(g);
    const auto of = offsets(f);
    const auto og = offsets(g);
    cplx* B = big.data().data();
    if (R == 1 && K == 1 && C == 1) {
        std::vector<cplx> gv(ng.size());
        std::vector<std::ptrdiff_t> go(ng.size());
        for (std::size_t t = 0; t < ng.size(); ++t) gv[t] = g.raw(ng[t]), go[t] = og[ng[t]];
        for (auto qf : nf) {
            const cplx a = f.raw(qf);
            cplx* base = B + center + of[qf];
            for (std::size_t t = 0; t < ng.size(); ++t) base[go[t]] += a * gv[t];
        }
    } else {
        const int E = R * C;
        for (auto qf : nf)
            for (auto qg : ng) {
                cplx* dst = B + (center + of[qf] + og[qg]) * E;
                for (int r = 0; r < R; ++r)
                    for (int c = 0; c < C; ++c) {
                        cplx v(0.0, 0.0);
                        for (int m = 0; m < K; ++m) v += f.raw(qf, r, m) * g.raw(qg, m, c);
                        dst[r * C + c] += v;
                    }
            }
    }
    if (N == full) return big;
    if (dropped) *dropped += strip_norm(tail(big, N), s_drop);
    return big.with_cutoff(N);
}

FourierSeries dir_derivative(const FourierSeries& f, const RealVec& w) {
    if (static_cast<int>(w.size()) != f.dim()) throw std::invalid_argument("dir_derivative: length mismatch");
    FourierSeries out = f;
    const int e = f.entries();
    for (std::size_t q = 0; q < f.num_modes(); ++q) {
        const cplx m(0.0, dot(f.mode(q), w));
        for (int r = 0; r < e; ++r) out.data()[q * e + r] *= m;
    }
    return out;
}

FourierSeries partial(const FourierSeries& f, int axis) {
    RealVec w(f.dim(), 0.0);
    w.at(axis) = 1.0;
    return dir_derivative(f, w);
}

FourierSeries conj_reflect(const FourierSeries& f) {
    FourierSeries out(f.dim(), f.cutoff(), f.rows(), f.cols());
    for (std::size_t q = 0; q < f.num_modes(); ++q)
        for (int r = 0; r < f.rows(); ++r)
            for (int c = 0; c < f.cols(); ++c) out.raw(q, r, c) = std::conj(f.raw(f.flat_neg(q), r, c));
    return out;
}

FourierSeries transpose(const FourierSeries& f) {
    FourierSeries out(f.dim(), f.cutoff(), f.cols(), f.rows());
    for (std::size_t q = 0; q < f.num_modes(); ++q)
        for (int r = 0; r < f.rows(); ++r)
            for (int c = 0; c < f.cols(); ++c) out.raw(q, c, r) = f.raw(q, r, c);
    return out;
}

FourierSeries adjoint(const FourierSeries& f) { return transpose(conj_reflect(f)); }

double reality_violation(const FourierSeries& f) {
    double m = 0.0;
    for (std::size_t q = 0; q < f.num_modes(); ++q)
        for (int r = 0; r < f.entries(); ++r)
            m = std::max(m, std::abs(std::conj(f.data()[q * f.entries() + r]) -
                                     f.data()[f.flat_neg(q) * f.entries() + r]));
    return m;
}

double self_adjoint_violation(const FourierSeries& f) {
    if (f.rows() != f.cols()) throw std::invalid_argument("self_adjoint_violation: not square");
    double m = 0.0;
    for (std::size_t q = 0; q < f.num_modes(); ++q)
        for (int r = 0; r < f.rows(); ++r)
            for (int c = 0; c < f.cols(); ++c)
                m = std::max(m, std::abs(f.raw(q, r, c) - std::conj(f.raw(f.flat_neg(q), c, r))));
    return m;
}

}  // namespace kam
