#include "kam/jet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace kam {

int Signature::weighted_degree() const {
    int s = 0;
    for (int v : a) s += 2 * v;
    for (int v : b) s += v;
    for (int v : c) s += v;
    return s;
}

Signature make_signature(int d, int n) {
    Signature s;
    s.a.assign(d, 0);
    s.b.assign(n, 0);
    s.c.assign(n, 0);
    return s;
}

Signature sig_y(int d, int n, int i) {
    auto s = make_signature(d, n);
    s.a.at(i) = 1;
    return s;
}
Signature sig_z(int d, int n, int j) {
    auto s = make_signature(d, n);
    s.b.at(j) = 1;
    return s;
}
Signature sig_zbar(int d, int n, int j) {
    auto s = make_signature(d, n);
    s.c.at(j) = 1;
    return s;
}
Signature sig_zzbar(int d, int n, int j, int k) {
    auto s = make_signature(d, n);
    s.b.at(j) += 1;
    s.c.at(k) += 1;
    return s;
}

namespace {

int sum(const std::vector<int>& v) { return std::accumulate(v.begin(), v.end(), 0); }

/// Weighted-norm charge of a monomial with coefficient strip norm `cn` and
/// x-derivative strip norm `dn`, using the vector-field norm weights.
double monomial_vf(const Signature& s, double cn, double dn, double r) {
    const int A = sum(s.a), B = sum(s.b), C = sum(s.c);
    const double zpow = std::pow(r, B + C);
    double v = 0.0;
    if (A > 0) v += A * cn * std::pow(r, 2 * (A - 1)) * zpow;         // H_y
    v += dn * std::pow(r, 2 * A) * zpow / (r * r);                      // -H_x
    if (C > 0) v += C * cn * std::pow(r, 2 * A) * std::pow(r, B + C - 1) / r;  // i H_zbar
    if (B > 0) v += B * cn * std::pow(r, 2 * A) * std::pow(r, B + C - 1) / r;  // -i H_z
    return v;
}

double gradient_strip_norm(const FourierSeries& f, double s) {
    double v = 0.0;
    for (int i = 0; i < f.dim(); ++i) v += strip_norm(partial(f, i), s);
    return v;
}

}  // namespace

HamiltonianJet::HamiltonianJet(int d, int n, int max_degree, int cap)
    : d_(d), n_(n), max_degree_(max_degree), cap_(cap) {
    if (d < 1 || n < 0) throw std::invalid_argument("HamiltonianJet: bad dimensions");
}

const FourierSeries* HamiltonianJet::find(const Signature& s) const {
    auto it = terms_.find(s);
    return it == terms_.end() ? nullptr : &it->second;
}

FourierSeries HamiltonianJet::coeff(const Signature& s) const {
    auto p = find(s);
    return p ? *p : FourierSeries(d_, 0);
}

void HamiltonianJet::add(const Signature& s, const FourierSeries& f) {
    if (static_cast<int>(s.a.size()) != d_ || static_cast<int>(s.b.size()) != n_ ||
        static_cast<int>(s.c.size()) != n_)
        throw std::invalid_argument("HamiltonianJet::add: signature dimension mismatch");
    if (f.dim() != d_ || f.entries() != 1) throw std::invalid_argument("HamiltonianJet::add: coefficient must be scalar");
    if (s.weighted_degree() > max_degree_) {
        remainder_ += monomial_vf(s, strip_norm(f, ref_s_), gradient_strip_norm(f, ref_s_), ref_r_);
        return;
    }
    FourierSeries g = f;
    if (cap_ >= 0 && g.cutoff() > cap_) {
        FourierSeries t = tail(g, cap_);
        remainder_ += monomial_vf(s, strip_norm(t, ref_s_), gradient_strip_norm(t, ref_s_), ref_r_);
        g = truncate(g, cap_);
    }
    auto it = terms_.find(s);
    if (it == terms_.end()) {
        terms_.emplace(s, std::move(g));
    } else {
        it->second += g;
    }
}

void HamiltonianJet::set(const Signature& s, const FourierSeries& f) {
    terms_.erase(s);
    add(s, f);
}

void HamiltonianJet::prune() {
    for (auto it = terms_.begin(); it != terms_.end();) {
        if (it->second.is_zero()) it = terms_.erase(it);
        else ++it;
    }
}

HamiltonianJet& HamiltonianJet::operator+=(const HamiltonianJet& o) {
    if (o.d_ != d_ || o.n_ != n_) throw std::invalid_argument("HamiltonianJet: dimension mismatch");
    for (const auto& [s, f] : o.terms_) add(s, f);
    remainder_ += o.remainder_;
    return *this;
}

HamiltonianJet& HamiltonianJet::operator-=(const HamiltonianJet& o) {
    if (o.d_ != d_ || o.n_ != n_) throw std::invalid_argument("HamiltonianJet: dimension mismatch");
    for (const auto& [s, f] : o.terms_) add(s, cplx(-1.0, 0.0) * f);
    remainder_ += o.remainder_;
    return *this;
}

HamiltonianJet& HamiltonianJet::operator*=(cplx a) {
    for (auto& [s, f] : terms_) f *= a;
    remainder_ *= std::abs(a);
    return *this;
}

HamiltonianJet operator+(HamiltonianJet a, const HamiltonianJet& b) { return a += b; }
HamiltonianJet operator-(HamiltonianJet a, const HamiltonianJet& b) { return a -= b; }

HamiltonianJet poisson_bracket(const HamiltonianJet& F, const HamiltonianJet& G) {
    if (F.d() != G.d() || F.n() != G.n()) throw std::invalid_argument("poisson_bracket: dimension mismatch");
    const int d = F.d(), n = F.n();
    const int cap = (F.cap() >= 0 && G.cap() >= 0) ? std::max(F.cap(), G.cap()) : std::max(F.cap(), G.cap());
    HamiltonianJet out(d, n, std::max(F.max_degree(), G.max_degree()), cap);
    out.set_norm_weights(F.ref_s(), F.ref_r());

    // Accumulate products per output signature to keep the add() calls few.
    std::map<Signature, FourierSeries> acc;
    double dropped = 0.0;
    auto push = [&](Signature s, const FourierSeries& p, cplx w) {
        FourierSeries q = p;
        q *= w;
        auto it = acc.find(s);
        if (it == acc.end()) acc.emplace(std::move(s), std::move(q));
        else it->second += q;
    };

    for (const auto& [sf, f] : F.terms()) {
        for (const auto& [sg, g] : G.terms()) {
            Signature base = make_signature(d, n);
            for (int i = 0; i < d; ++i) base.a[i] = sf.a[i] + sg.a[i];
            for (int j = 0; j < n; ++j) {
                base.b[j] = sf.b[j] + sg.b[j];
                base.c[j] = sf.c[j] + sg.c[j];
            }
            // <F_x, G_y> - <F_y, G_x>
            for (int i = 0; i < d; ++i) {
                if (sg.a[i] > 0) {
                    Signature s = base;
                    s.a[i] -= 1;
                    double loc = 0.0;
                    push(s, product(partial(f, i), g, cap, &loc, F.ref_s()), cplx(sg.a[i], 0.0));
                    dropped += loc * sg.a[i];
                }
                if (sf.a[i] > 0) {
                    Signature s = base;
                    s.a[i] -= 1;
                    double loc = 0.0;
                    push(s, product(f, partial(g, i), cap, &loc, F.ref_s()), cplx(-sf.a[i], 0.0));
                    dropped += loc * sf.a[i];
                }
            }
            // i<F_z, G_zbar> - i<F_zbar, G_z>
            for (int j = 0; j < n; ++j) {
                if (sf.b[j] > 0 && sg.c[j] > 0) {
                    Signature s = base;
                    s.b[j] -= 1;
                    s.c[j] -= 1;
                    double loc = 0.0;
                    push(s, product(f, g, cap, &loc, F.ref_s()), cplx(0.0, sf.b[j] * sg.c[j]));
                    dropped += loc * sf.b[j] * sg.c[j];
                }
                if (sf.c[j] > 0 && sg.b[j] > 0) {
                    Signature s = base;
                    s.b[j] -= 1;
                    s.c[j] -= 1;
                    double loc = 0.0;
                    push(s, product(f, g, cap, &loc, F.ref_s()), cplx(0.0, -sf.c[j] * sg.b[j]));
                    dropped += loc * sf.c[j] * sg.b[j];
                }
            }
        }
    }
    for (auto& [s, f] : acc) out.add(s, f);
    // Cutoff-dropped mass: charged with the largest monomial weight present
    // (crude but sound up to the derivative factor, which stays below the
    // representation cutoff scale).
    if (dropped > 0.0) {
        const double r = F.ref_r();
        out.add_remainder(dropped * (1.0 + 2.0 * d * std::max(cap, 1)) * std::max(1.0, 1.0 / (r * r)));
    }
    out.prune();
    return out;
}

double vf_norm(const HamiltonianJet& P, double s, double r) {
    if (s < 0 || r <= 0) throw std::invalid_argument("vf_norm: need s >= 0, r > 0");
    const int d = P.d(), n = P.n();
    // Component-wise accumulation: |X| uses the l1 sum over y-components,
    // the other blocks likewise sum over their coordinates.
    double X = 0.0, Y = 0.0, Z = 0.0, Zb = 0.0;
    for (const auto& [sig, f] : P.terms()) {
        const int A = sum(sig.a), B = sum(sig.b), C = sum(sig.c);
        const double cn = strip_norm(f, s);
        const double zpow = std::pow(r, B + C);
        for (int i = 0; i < d; ++i)
            if (sig.a[i] > 0) X += sig.a[i] * cn * std::pow(r, 2 * (A - 1)) * zpow;
        for (int i = 0; i < d; ++i) Y += strip_norm(partial(f, i), s) * std::pow(r, 2 * A) * zpow;
        for (int j = 0; j < n; ++j) {
            if (sig.c[j] > 0) Zb += sig.c[j] * cn * std::pow(r, 2 * A) * std::pow(r, B + C - 1);
            if (sig.b[j] > 0) Z += sig.b[j] * cn * std::pow(r, 2 * A) * std::pow(r, B + C - 1);
        }
    }
    return X + Y / (r * r) + (Z + Zb) / r + P.remainder();
}

JetSplit split_low_high(const HamiltonianJet& P) {
    JetSplit out{HamiltonianJet(P.d(), P.n(), P.max_degree(), P.cap()),
                 HamiltonianJet(P.d(), P.n(), P.max_degree(), P.cap())};
    out.low.set_norm_weights(P.ref_s(), P.ref_r());
    out.high.set_norm_weights(P.ref_s(), P.ref_r());
    for (const auto& [s, f] : P.terms()) {
        if (s.weighted_degree() <= 2) out.low.add(s, f);
        else out.high.add(s, f);
    }
    // Unrepresented content is of high order by construction (degree or
    // cutoff overflow of brackets); it is tracked with the high part.
    out.high.set_remainder(P.remainder());
    return out;
}

RealityReport check_reality(const HamiltonianJet& P, double tol) {
    RealityReport rep;
    for (const auto& [s, f] : P.terms()) {
        Signature t = s;
        std::swap(t.b, t.c);
        const FourierSeries g = P.coeff(t);
        const FourierSeries gr = conj_reflect(g);  // coefficient k -> conj(g(-k))
        // Require f(k) = conj(g(-k)) for every stored k of either series.
        const int N = std::max(f.cutoff(), g.cutoff());
        const FourierSeries fe = f.with_cutoff(N), ge = gr.with_cutoff(N);
        for (std::size_t q = 0; q < fe.num_modes(); ++q)
            rep.worst = std::max(rep.worst, std::abs(fe.raw(q) - ge.raw(q)));
    }
    rep.ok = rep.worst <= tol;
    return rep;
}

HamiltonianJet symmetrize_reality(const HamiltonianJet& P) {
    HamiltonianJet out(P.d(), P.n(), P.max_degree(), P.cap());
    out.set_norm_weights(P.ref_s(), P.ref_r());
    for (const auto& [s, f] : P.terms()) {
        Signature t = s;
        std::swap(t.b, t.c);
        out.add(s, cplx(0.5, 0.0) * f);
        out.add(t, cplx(0.5, 0.0) * conj_reflect(f));
    }
    out.set_remainder(P.remainder());
    out.prune();
    return out;
}

LieResult lie_transform(const HamiltonianJet& H, const HamiltonianJet& F, int order, double s, double r) {
    if (order < 1) throw std::invalid_argument("lie_transform: order must be >= 1");
    LieResult res;
    res.value = H;
    res.terms.push_back(H);
    res.term_norms.push_back(vf_norm(H, s, r));
    HamiltonianJet cur = H;
    for (int j = 1; j <= order + 1; ++j) {
        cur = poisson_bracket(cur, F);
        cur *= cplx(1.0 / j, 0.0);
        const double nrm = vf_norm(cur, s, r);
        if (j == order + 1) {
            res.tail_bound = nrm;
            break;
        }
        res.terms.push_back(cur);
        res.term_norms.push_back(nrm);
        res.value += cur;
    }
    // Growth of successive corrections (beyond the first) signals that the
    // Lie series is outside its convergence regime.
    // Norms below a relative round-off floor are not compared.
    const double floor = res.term_norms.size() > 1 ? 1e-12 * res.term_norms[1] : 0.0;
    for (std::size_t j = 2; j < res.term_norms.size(); ++j)
        if (res.term_norms[j] > res.term_norms[j - 1] && res.term_norms[j] > floor)
            throw std::runtime_error("lie_transform: non-convergent series (term norms grow)");
    if (res.term_norms.size() >= 2 && res.tail_bound > res.term_norms.back() && res.tail_bound > floor)
        throw std::runtime_error("lie_transform: non-convergent series (tail exceeds last term)");
    return res;
}

// ---- extraction ---------------------------------------------------------

namespace {
FourierSeries coeff_or_zero(const HamiltonianJet& P, const Signature& s) { return P.coeff(s); }

int max_cut(const HamiltonianJet& P) {
    int N = 0;
    for (const auto& [s, f] : P.terms()) N = std::max(N, f.cutoff());
    return N;
}
}  // namespace

FourierSeries comp_x(const HamiltonianJet& P) {
    return coeff_or_zero(P, make_signature(P.d(), P.n())).with_cutoff(max_cut(P));
}

FourierSeries comp_y(const HamiltonianJet& P) {
    FourierSeries v(P.d(), max_cut(P), P.d(), 1);
    for (int i = 0; i < P.d(); ++i) v.set_entry(i, 0, P.coeff(sig_y(P.d(), P.n(), i)));
    return v;
}

FourierSeries comp_z(const HamiltonianJet& P) {
    FourierSeries v(P.d(), max_cut(P), std::max(P.n(), 1), 1);
    for (int j = 0; j < P.n(); ++j) v.set_entry(j, 0, P.coeff(sig_z(P.d(), P.n(), j)));
    return v;
}

FourierSeries comp_zbar(const HamiltonianJet& P) {
    FourierSeries v(P.d(), max_cut(P), std::max(P.n(), 1), 1);
    for (int j = 0; j < P.n(); ++j) v.set_entry(j, 0, P.coeff(sig_zbar(P.d(), P.n(), j)));
    return v;
}

namespace {
FourierSeries quad_matrix(const HamiltonianJet& P, bool bar) {
    const int d = P.d(), n = P.n();
    FourierSeries S(d, max_cut(P), std::max(n, 1), std::max(n, 1));
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            auto s = make_signature(d, n);
            auto& e = bar ? s.c : s.b;
            e[i] += 1;
            e[j] += 1;
            FourierSeries f = P.coeff(s);
            if (i == j) {
                S.set_entry(i, i, f);
            } else {
                f *= cplx(0.5, 0.0);
                S.set_entry(i, j, f);
                S.set_entry(j, i, f);
            }
        }
    return S;
}

void add_quad(HamiltonianJet& J, const FourierSeries& S, bool bar) {
    const int d = J.d(), n = J.n();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            auto s = make_signature(d, n);
            auto& e = bar ? s.c : s.b;
            e[i] += 1;
            e[j] += 1;
            J.add(s, S.entry(i, j));
        }
}
}  // namespace

FourierSeries comp_zz(const HamiltonianJet& P) { return quad_matrix(P, false); }
FourierSeries comp_zbzb(const HamiltonianJet& P) { return quad_matrix(P, true); }

FourierSeries comp_zzbar(const HamiltonianJet& P) {
    const int d = P.d(), n = P.n();
    FourierSeries M(d, max_cut(P), std::max(n, 1), std::max(n, 1));
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) M.set_entry(j, k, P.coeff(sig_zzbar(d, n, j, k)));
    return M;
}

void add_comp_x(HamiltonianJet& J, const FourierSeries& f) { J.add(make_signature(J.d(), J.n()), f); }

void add_comp_y(HamiltonianJet& J, const FourierSeries& v) {
    for (int i = 0; i < J.d(); ++i) J.add(sig_y(J.d(), J.n(), i), v.entry(i, 0));
}

void add_comp_z(HamiltonianJet& J, const FourierSeries& v) {
    for (int j = 0; j < J.n(); ++j) J.add(sig_z(J.d(), J.n(), j), v.entry(j, 0));
}

void add_comp_zbar(HamiltonianJet& J, const FourierSeries& v) {
    for (int j = 0; j < J.n(); ++j) J.add(sig_zbar(J.d(), J.n(), j), v.entry(j, 0));
}

void add_comp_zz(HamiltonianJet& J, const FourierSeries& S) { add_quad(J, S, false); }
void add_comp_zbzb(HamiltonianJet& J, const FourierSeries& S) { add_quad(J, S, true); }

void add_comp_zzbar(HamiltonianJet& J, const FourierSeries& M) {
    for (int j = 0; j < J.n(); ++j)
        for (int k = 0; k < J.n(); ++k) J.add(sig_zzbar(J.d(), J.n(), j, k), M.entry(j, k));
}

}  // namespace kam
