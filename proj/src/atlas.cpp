#include "kam/atlas.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace kam {

OmegaMap OmegaMap::identity(int d) {
    OmegaMap m;
    m.dim = d;
    m.components.resize(d);
    for (int i = 0; i < d; ++i) {
        Term t;
        t.coeff = 1.0;
        t.exponents.assign(d, 0);
        t.exponents[i] = 1;
        m.components[i].push_back(t);
    }
    return m;
}

RealVec OmegaMap::operator()(const RealVec& xi) const {
    if (static_cast<int>(xi.size()) != dim) throw std::invalid_argument("OmegaMap: parameter dimension mismatch");
    RealVec w(components.size(), 0.0);
    for (std::size_t i = 0; i < components.size(); ++i)
        for (const Term& t : components[i]) {
            double v = t.coeff;
            for (int j = 0; j < dim; ++j) v *= std::pow(xi[j], t.exponents[j]);
            w[i] += v;
        }
    return w;
}

double OmegaMap::lipschitz(const RealVec& lo, const RealVec& hi) const {
    double L = 0.0;
    for (const auto& comp : components) {
        double row = 0.0;
        for (int j = 0; j < dim; ++j) {
            double dj = 0.0;
            for (const Term& t : comp) {
                if (t.exponents[j] == 0) continue;
                double v = std::abs(t.coeff) * t.exponents[j];
                for (int m = 0; m < dim; ++m) {
                    const int e = t.exponents[m] - (m == j ? 1 : 0);
                    const double bound = std::max(std::abs(lo[m]), std::abs(hi[m]));
                    v *= std::pow(bound, e);
                }
                dj += v;
            }
            row += dj;
        }
        L = std::max(L, row);
    }
    return L;
}

double divisor_floor(const Index& k, double gamma, double tau) {
    const int m = norm_inf(k);
    return m == 0 ? gamma : gamma * std::pow(static_cast<double>(m), -tau);
}

namespace {

/// Calls f(k) for every k with |k|_inf <= N.
template <class Fn>
void for_each_mode(int d, int N, Fn&& f) {
    Index k(d, -N);
    while (true) {
        f(k);
        int i = d - 1;
        while (i >= 0 && k[i] == N) k[i--] = -N;
        if (i < 0) break;
        ++k[i];
    }
}

void consider(DivisorReport& r, const Index& k, double value, double floor, int j1, int j2) {
    const double margin = std::abs(value) / floor;
    if (r.worst_k.empty() || margin < r.worst_margin) {
        r.worst_k = k;
        r.worst_value = std::abs(value);
        r.worst_margin = margin;
        r.j1 = j1;
        r.j2 = j2;
    }
    if (!(std::abs(value) > floor)) r.ok = false;
}

}  // namespace

DivisorReport diophantine_ok(const RealVec& omega, int N, double gamma, double tau) {
    if (N < 1) throw std::invalid_argument("diophantine_ok: N must be >= 1");
    DivisorReport r;
    const int d = static_cast<int>(omega.size());
    for_each_mode(d, N, [&](const Index& k) {
        if (norm_inf(k) == 0) return;
        consider(r, k, dot(k, omega), divisor_floor(k, gamma, tau), -1, -1);
    });
    return r;
}

DivisorReport melnikov1_ok(const RealVec& omega, const RealVec& Omega, int N, double gamma, double tau,
                           bool doubled) {
    DivisorReport r;
    const int d = static_cast<int>(omega.size());
    const int n = static_cast<int>(Omega.size());
    for_each_mode(d, N, [&](const Index& k) {
        const double kw = dot(k, omega);
        const double fl = divisor_floor(k, gamma, tau);
        for (int j1 = 0; j1 < n; ++j1) {
            if (!doubled) {
                consider(r, k, kw + Omega[j1], fl, j1, -1);
                continue;
            }
            for (int j2 = j1; j2 < n; ++j2) consider(r, k, kw + Omega[j1] + Omega[j2], fl, j1, j2);
        }
    });
    return r;
}

double ParameterAtlas::ambient_volume() const {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
}

double ParameterAtlas::volume() const {
    const double box = std::pow(2.0 * half_width, static_cast<double>(lo.size()));
    return box * static_cast<double>(boxes.size());
}

double level_half_width(double A, double C3, int level) { return 0.5 * std::pow(A, -std::pow(level, C3)); }

ParameterAtlas root_atlas(const RealVec& lo, const RealVec& hi) {
    if (lo.size() != hi.size() || lo.empty()) throw std::invalid_argument("root_atlas: bad box");
    const double w = hi[0] - lo[0];
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(hi[i] > lo[i]) || std::abs((hi[i] - lo[i]) - w) > 1e-12 * w)
            throw std::invalid_argument("root_atlas: parameter box must be a cube");
    ParameterAtlas a;
    a.level = 0;
    a.lo = lo;
    a.hi = hi;
    a.half_width = w / 2;
    ParameterBox b;
    b.center.resize(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) b.center[i] = 0.5 * (lo[i] + hi[i]);
    b.half_width = w / 2;
    a.boxes.push_back(b);
    return a;
}

PavingResult pave_and_filter(const ParameterAtlas& atlas, int next_level, double child_half_width,
                             const BoxPredicate& keep) {
    if (!(child_half_width > 0)) throw std::invalid_argument("pave_and_filter: child size must be positive");
    const int d = static_cast<int>(atlas.lo.size());
    const int m = std::max(1, static_cast<int>(std::lround(atlas.half_width / child_half_width)));
    const double h = atlas.half_width / m;  // exact tiling
    PavingResult out;
    out.children_per_axis = m;
    out.atlas.level = next_level;
    out.atlas.lo = atlas.lo;
    out.atlas.hi = atlas.hi;
    out.atlas.half_width = h;
    const double child_volume = std::pow(2.0 * h, d);
    std::vector<int> idx(d, 0);
    RealVec c(d), corner(d);
    for (std::size_t p = 0; p < atlas.boxes.size(); ++p) {
        const ParameterBox& parent = atlas.boxes[p];
        std::fill(idx.begin(), idx.end(), 0);
        while (true) {
            for (int i = 0; i < d; ++i) c[i] = parent.center[i] - parent.half_width + (2 * idx[i] + 1) * h;
            bool ok = keep(c);
            for (int mask = 0; ok && mask < (1 << d); ++mask) {
                for (int i = 0; i < d; ++i) corner[i] = c[i] + ((mask >> i) & 1 ? h : -h);
                ok = keep(corner);
            }
            if (ok) {
                out.atlas.boxes.push_back(ParameterBox{c, h, next_level, static_cast<int>(p)});
                ++out.kept;
            } else {
                ++out.dropped;
                out.removed_measure += child_volume;
            }
            int i = d - 1;
            while (i >= 0 && idx[i] == m - 1) idx[i--] = 0;
            if (i < 0) break;
            ++idx[i];
        }
    }
    return out;
}

double measure_fraction(const ParameterAtlas& atlas, const ParameterAtlas& root) {
    for (std::size_t i = 0; i < root.lo.size(); ++i)
        if (atlas.lo[i] != root.lo[i] || atlas.hi[i] != root.hi[i])
            throw std::invalid_argument("measure_fraction: atlases have different ambient boxes");
    return atlas.volume() / root.ambient_volume();
}

AtlasCheck check_atlas(const ParameterAtlas& child, const ParameterAtlas& parent) {
    AtlasCheck r;
    const int d = static_cast<int>(child.lo.size());
    const double tol = 1e-12 * std::max(1.0, child.half_width);
    // Children share a common lattice, so disjointness means distinct centers
    // at least one full width apart along some axis.
    std::vector<RealVec> centers;
    for (const auto& b : child.boxes) centers.push_back(b.center);
    std::sort(centers.begin(), centers.end());
    for (std::size_t i = 0; i + 1 < centers.size(); ++i) {
        // sorted neighbours are the only candidates for exact duplicates
        bool same = true;
        for (int a = 0; a < d; ++a) same = same && std::abs(centers[i][a] - centers[i + 1][a]) < tol;
        if (same) r.disjoint = false;
    }
    for (std::size_t i = 0; i < child.boxes.size() && r.disjoint; ++i)
        for (std::size_t j = i + 1; j < child.boxes.size(); ++j) {
            bool overlap = true;
            for (int a = 0; a < d; ++a)
                overlap = overlap && std::abs(child.boxes[i].center[a] - child.boxes[j].center[a]) <
                                         child.boxes[i].half_width + child.boxes[j].half_width - tol;
            if (overlap) {
                r.disjoint = false;
                break;
            }
        }
    for (const auto& b : child.boxes) {
        if (b.parent < 0 || b.parent >= static_cast<int>(parent.boxes.size())) {
            r.nested = false;
            continue;
        }
        const auto& P = parent.boxes[b.parent];
        for (int a = 0; a < d; ++a)
            if (std::abs(b.center[a] - P.center[a]) + b.half_width > P.half_width + tol) r.nested = false;
    }
    return r;
}

MonteCarloEstimate monte_carlo_excluded(const RealVec& lo, const RealVec& hi, const BoxPredicate& keep,
                                        std::size_t samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<std::uniform_real_distribution<double>> u;
    for (std::size_t i = 0; i < lo.size(); ++i) u.emplace_back(lo[i], hi[i]);
    std::size_t bad = 0;
    RealVec xi(lo.size());
    for (std::size_t s = 0; s < samples; ++s) {
        for (std::size_t i = 0; i < lo.size(); ++i) xi[i] = u[i](rng);
        if (!keep(xi)) ++bad;
    }
    MonteCarloEstimate e;
    e.samples = samples;
    e.excluded_fraction = samples ? static_cast<double>(bad) / samples : 0.0;
    e.std_error = samples ? std::sqrt(e.excluded_fraction * (1 - e.excluded_fraction) / samples) : 0.0;
    return e;
}

bool exclusion_keep(const ExclusionSpec& spec, const RealVec& xi, DivisorReport* why) {
    const RealVec w = spec.omega_map(xi);
    auto fail = [&](const DivisorReport& r) {
        if (why) *why = r;
        return false;
    };
    if (spec.diophantine) {
        auto r = diophantine_ok(w, spec.N, spec.gamma, spec.tau);
        if (!r.ok) return fail(r);
    }
    if (spec.melnikov) {
        auto r = melnikov1_ok(w, spec.Omega, spec.N, spec.gamma, spec.tau, false);
        if (!r.ok) return fail(r);
    }
    if (spec.doubled) {
        auto r = melnikov1_ok(w, spec.Omega, spec.N, spec.gamma, spec.tau, true);
        if (!r.ok) return fail(r);
    }
    return true;
}

}  // namespace kam
