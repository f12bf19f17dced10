#pragma once
/// \file fourier.hpp
/// Truncated Fourier series on the torus T^d with analyticity-strip norms.
///
/// A series stores every coefficient with |k|_inf <= cutoff in a dense
/// block (the contract is the sparse map k -> coefficient; dense storage is
/// an internal convenience).  Coefficients may be scalar, vector (rows x 1)
/// or matrix (rows x cols) valued.

#include <complex>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace kam {

using cplx = std::complex<double>;
using Index = std::vector<int>;
using RealVec = std::vector<double>;

/// |k|_inf, the lattice metric used for truncation and decay distances.
int norm_inf(const Index& k);
/// |k|_1, the metric used in the strip weight e^{s|k|_1}.
int norm_l1(const Index& k);
/// <k, w> for an integer vector k and real vector w.
double dot(const Index& k, const RealVec& w);
/// Componentwise difference a - b.
Index sub(const Index& a, const Index& b);
/// Componentwise sum a + b.
Index add(const Index& a, const Index& b);
/// Componentwise negation.
Index neg(const Index& a);

class FourierSeries {
public:
    FourierSeries() = default;
    /// Zero series in dimension d with |k|_inf <= cutoff and rows x cols entries.
    FourierSeries(int d, int cutoff, int rows = 1, int cols = 1);

    int dim() const { return d_; }
    int cutoff() const { return cutoff_; }
    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int entries() const { return rows_ * cols_; }
    /// Number of lattice modes stored, (2*cutoff+1)^d.
    std::size_t num_modes() const { return modes_; }

    /// Lattice index of the flat mode position.
    Index mode(std::size_t flat) const;
    /// Flat mode position of k, or nullopt if |k|_inf > cutoff.
    std::optional<std::size_t> flat(const Index& k) const;
    /// Flat position of the negated mode -k (always stored).
    std::size_t flat_neg(std::size_t flat) const { return modes_ - 1 - flat; }

    /// Coefficient access; throws std::out_of_range if |k|_inf > cutoff.
    cplx& at(const Index& k, int r = 0, int c = 0);
    /// Coefficient value; zero when k lies outside the stored cube.
    cplx get(const Index& k, int r = 0, int c = 0) const;

    cplx& raw(std::size_t flat, int r = 0, int c = 0) { return data_[flat * entries() + r * cols_ + c]; }
    const cplx& raw(std::size_t flat, int r = 0, int c = 0) const { return data_[flat * entries() + r * cols_ + c]; }
    std::vector<cplx>& data() { return data_; }
    const std::vector<cplx>& data() const { return data_; }

    /// Scalar series extracted from entry (r, c).
    FourierSeries entry(int r, int c) const;
    /// Store scalar series s into entry (r, c); s may have any cutoff.
    void set_entry(int r, int c, const FourierSeries& s);

    /// Same coefficients re-embedded with a different cutoff (dropping or zero-padding).
    FourierSeries with_cutoff(int N) const;
    bool is_zero() const;
    /// Largest |coefficient| over all modes and entries.
    double max_abs() const;

    /// Value of the series at a real point x (entry r, c).
    cplx evaluate(const RealVec& x, int r = 0, int c = 0) const;

    FourierSeries& operator+=(const FourierSeries& o);
    FourierSeries& operator-=(const FourierSeries& o);
    FourierSeries& operator*=(cplx a);

private:
    int d_ = 0;
    int cutoff_ = 0;
    int rows_ = 1;
    int cols_ = 1;
    std::size_t modes_ = 0;
    std::vector<cplx> data_;
};

FourierSeries operator+(FourierSeries a, const FourierSeries& b);
FourierSeries operator-(FourierSeries a, const FourierSeries& b);
FourierSeries operator*(cplx a, FourierSeries f);

/// Constant (k = 0 only) scalar series.
FourierSeries constant_series(int d, cplx value);
/// Single-mode scalar series a * e^{i<k,x>}.
FourierSeries mode_series(int d, const Index& k, cplx a);

/// Keep exactly the coefficients with |k|_inf <= N.
FourierSeries truncate(const FourierSeries& f, int N);
/// (1 - truncate_N) f: the coefficients with |k|_inf > N.
FourierSeries tail(const FourierSeries& f, int N);
/// Sum_k |f(k)| e^{s|k|_1}, maximised over matrix entries.
double strip_norm(const FourierSeries& f, double s);
/// Coefficient convolution with matrix-product shape rule.  The result
/// cutoff is cutoff(f)+cutoff(g), optionally capped at `cap` (>= 0); the
/// strip norm (at weight `s_drop`) of the discarded modes is added to *dropped.
/// The discarded mass is exact: it is the strip norm of the true tail.
FourierSeries product(const FourierSeries& f, const FourierSeries& g, int cap = -1,
                      double* dropped = nullptr, double s_drop = 0.0);
/// Coefficient k multiplied by i<k,w>: the derivative along w.
FourierSeries dir_derivative(const FourierSeries& f, const RealVec& w);
/// Partial derivative along the coordinate axis.
FourierSeries partial(const FourierSeries& f, int axis);
/// Series of conj(f(x)) for real x: coefficient k becomes conj(f(-k)).
FourierSeries conj_reflect(const FourierSeries& f);
/// Entrywise transpose of a matrix-valued series.
FourierSeries transpose(const FourierSeries& f);
/// Conjugate transpose for real x: coefficient k becomes conj(f(-k))^T.
FourierSeries adjoint(const FourierSeries& f);
/// Largest |conj(f(k)) - f(-k)| over modes and entries (0 for real functions).
double reality_violation(const FourierSeries& f);
/// Largest |f_{rc}(k) - conj(f_{cr}(-k))|: deviation from self-adjointness.
double self_adjoint_violation(const FourierSeries& f);

}  // namespace kam
