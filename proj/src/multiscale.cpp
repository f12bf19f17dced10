#include "kam/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>
#include <sstream>

#include "kam/errors.hpp"

namespace kam {

const char* shape_name(RegionShape s) {
    switch (s) {
        case RegionShape::FullRectangle: return "full_rectangle";
        case RegionShape::LShaped: return "l_shaped";
        case RegionShape::LowerDimensional: return "lower_dimensional";
        case RegionShape::Other: return "other";
    }
    return "unknown";
}

// ---- elementary regions -------------------------------------------------

bool ElementaryRegion::contains(const Index& k) const { return std::binary_search(sites.begin(), sites.end(), k); }

int ElementaryRegion::index_of(const Index& k) const {
    auto it = std::lower_bound(sites.begin(), sites.end(), k);
    if (it == sites.end() || *it != k) return -1;
    return static_cast<int>(it - sites.begin());
}

namespace {

/// Lattice points of lo..hi (inclusive, per axis), lexicographic.
std::vector<Index> box_sites(const Index& lo, const Index& hi) {
    const std::size_t d = lo.size();
    std::vector<Index> out;
    for (std::size_t i = 0; i < d; ++i)
        if (hi[i] < lo[i]) return out;
    Index k = lo;
    while (true) {
        out.push_back(k);
        int i = static_cast<int>(d) - 1;
        while (i >= 0 && k[i] == hi[i]) k[i] = lo[i], --i;
        if (i < 0) break;
        ++k[i];
    }
    return out;
}

void classify_shape(ElementaryRegion& R) {
    R.diameter = region_diameter(R.sites);
    if (R.sites.empty()) {
        R.shape = RegionShape::Other;
        return;
    }
    const std::size_t d = R.sites.front().size();
    Index lo = R.sites.front(), hi = lo;
    for (const auto& k : R.sites)
        for (std::size_t i = 0; i < d; ++i) lo[i] = std::min(lo[i], k[i]), hi[i] = std::max(hi[i], k[i]);
    std::size_t vol = 1;
    bool flat = false;
    for (std::size_t i = 0; i < d; ++i) {
        vol *= static_cast<std::size_t>(hi[i] - lo[i] + 1);
        if (hi[i] == lo[i] && d > 1) flat = true;
    }
    if (vol == R.sites.size())
        R.shape = flat ? RegionShape::LowerDimensional : RegionShape::FullRectangle;
    else
        R.shape = R.shift ? RegionShape::LShaped : RegionShape::Other;
}

}  // namespace

ElementaryRegion make_elementary_region(const Index& center, const std::vector<int>& half_widths,
                                        std::optional<Index> shift, std::optional<std::pair<Index, Index>> ambient) {
    const std::size_t d = center.size();
    if (half_widths.size() != d) throw std::invalid_argument("make_elementary_region: dimension mismatch");
    Index lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
        if (half_widths[i] < 0) throw std::invalid_argument("make_elementary_region: negative half-width");
        lo[i] = center[i] - half_widths[i];
        hi[i] = center[i] + half_widths[i];
    }
    ElementaryRegion R;
    R.center = center;
    R.half_widths = half_widths;
    R.shift = shift;
    R.ambient = ambient;
    for (const auto& k : box_sites(lo, hi)) {
        if (shift) {
            // k in R + z  <=>  k - z in R
            bool inside = true;
            for (std::size_t i = 0; i < d; ++i) {
                const int v = k[i] - (*shift)[i];
                inside = inside && v >= lo[i] && v <= hi[i];
            }
            if (inside) continue;
        }
        if (ambient) {
            bool in = true;
            for (std::size_t i = 0; i < d; ++i) in = in && k[i] >= ambient->first[i] && k[i] <= ambient->second[i];
            if (!in) continue;
        }
        R.sites.push_back(k);
    }
    if (R.sites.empty()) throw std::invalid_argument("make_elementary_region: realised set is empty");
    classify_shape(R);
    if (R.shape == RegionShape::LShaped && shift) {
        Index v(d);
        bool all = true;
        for (std::size_t i = 0; i < d; ++i) {
            const int z = (*shift)[i];
            if (z == 0) all = false;
            v[i] = z > 0 ? lo[i] + z : hi[i] + z;
        }
        if (all) R.interior_corner = v;
    }
    return R;
}

ElementaryRegion region_from_sites(std::vector<Index> sites) {
    ElementaryRegion R;
    std::sort(sites.begin(), sites.end());
    sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
    if (sites.empty()) throw std::invalid_argument("region_from_sites: empty");
    R.sites = std::move(sites);
    R.center = R.sites[R.sites.size() / 2];
    R.half_widths.assign(R.center.size(), 0);
    classify_shape(R);
    return R;
}

std::vector<Index> cube_intersect(const Index& m, int M, const ElementaryRegion& R) {
    std::vector<Index> out;
    for (const auto& k : cube_region(m, M))
        if (R.contains(k)) out.push_back(k);
    return out;
}

// ---- exhaustions --------------------------------------------------------

Exhaustion build_exhaustion(const ElementaryRegion& region, const Index& m, int M) {
    if (M < 1) throw std::invalid_argument("build_exhaustion: M must be >= 1");
    if (!region.contains(m)) throw std::invalid_argument("build_exhaustion: center outside the region");
    Exhaustion ex;
    ex.center = m;
    ex.M = M;
    const std::size_t total = region.sites.size();
    std::vector<char> in(total, 0);
    std::vector<Index> frontier = cube_intersect(m, M, region);
    std::size_t count = 0;
    for (const auto& k : frontier) in[region.index_of(k)] = 1, ++count;
    std::vector<Index> current = frontier;
    std::sort(current.begin(), current.end());
    while (count < total) {
        ex.S.push_back(current);
        ex.annuli.push_back(frontier);
        // Dilating only the newest annulus suffices: older points were dilated already.
        std::vector<Index> next;
        for (const auto& n : frontier)
            for (const auto& k : cube_region(n, 2 * M)) {
                const int idx = region.index_of(k);
                if (idx >= 0 && !in[idx]) {
                    in[idx] = 1;
                    ++count;
                    next.push_back(k);
                }
            }
        if (next.empty()) break;  // disconnected at this width: the rest is the remainder
        std::sort(next.begin(), next.end());
        frontier = next;
        std::vector<Index> merged;
        std::merge(current.begin(), current.end(), next.begin(), next.end(), std::back_inserter(merged));
        current = std::move(merged);
    }
    // remainder = Lambda \ S_l
    if (ex.S.empty()) {
        ex.remainder = region.sites;  // S_0 already fills the region
    } else {
        std::set_difference(region.sites.begin(), region.sites.end(), ex.S.back().begin(), ex.S.back().end(),
                            std::back_inserter(ex.remainder));
    }
    for (auto& a : ex.annuli) std::sort(a.begin(), a.end());
    if (region.interior_corner && !ex.annuli.empty()) {
        // Lambda point nearest the interior corner (l-inf, then l1, then lexicographic).
        const Index& v = *region.interior_corner;
        const Index* best = nullptr;
        std::pair<int, int> bk{std::numeric_limits<int>::max(), 0};
        for (const auto& k : region.sites) {
            const Index dlt = sub(k, v);
            const std::pair<int, int> key{norm_inf(dlt), norm_l1(dlt)};
            if (key < bk) bk = key, best = &k;
        }
        for (std::size_t j = 0; j < ex.annuli.size(); ++j)
            if (std::binary_search(ex.annuli[j].begin(), ex.annuli[j].end(), *best)) ex.exceptional = static_cast<int>(j);
    }
    return ex;
}

ExhaustionCheck check_exhaustion(const Exhaustion& ex, const ElementaryRegion& region) {
    ExhaustionCheck c;
    if (ex.S.empty()) return c;
    std::map<Index, int> owner;
    for (std::size_t j = 0; j < ex.annuli.size(); ++j)
        for (const auto& k : ex.annuli[j]) {
            if (owner.count(k)) c.partition = false;
            owner[k] = static_cast<int>(j);
        }
    const auto& Sl = ex.S.back();
    if (owner.size() != Sl.size()) c.partition = false;
    for (const auto& k : Sl)
        if (!owner.count(k)) c.partition = false;
    for (std::size_t j = 1; j < ex.S.size(); ++j)
        for (const auto& k : ex.S[j - 1])
            if (!std::binary_search(ex.S[j].begin(), ex.S[j].end(), k)) c.nested = false;
    // Also recheck each S_j against the definition by brute force.
    std::vector<Index> prev;
    for (const auto& k : region.sites)
        if (norm_inf(sub(k, ex.center)) <= ex.M) prev.push_back(k);
    if (prev != ex.S[0]) c.nested = false;
    for (std::size_t j = 1; j < ex.S.size(); ++j) {
        std::vector<Index> cur;
        for (const auto& k : region.sites)
            for (const auto& n : prev)
                if (norm_inf(sub(k, n)) <= 2 * ex.M) {
                    cur.push_back(k);
                    break;
                }
        if (cur != ex.S[j]) c.nested = false;
        prev = std::move(cur);
    }
    for (std::size_t i = 0; i < ex.annuli.size(); ++i)
        for (std::size_t j = i + 2; j < ex.annuli.size(); ++j)
            for (const auto& n : ex.annuli[i])
                for (const auto& np : ex.annuli[j])
                    if (norm_inf(sub(n, np)) <= 2 * ex.M) c.nonadjacent_disjoint = false;
    return c;
}

// ---- scale configuration ----------------------------------------------------

std::vector<std::string> ScaleConfig::violations() const {
    std::vector<std::string> v;
    if (!(0 < b && b < theta && theta < 1)) v.emplace_back("0 < b < theta < 1");
    if (!(1 < lambda && lambda < 2 - theta)) v.emplace_back("1 < lambda < 2 - theta");
    if (!(kappa > 0 && kappa < 1e-2)) v.emplace_back("0 < kappa < 1e-2");
    if (!(beta > 0)) v.emplace_back("beta > 0");
    if (!(rho > 0)) v.emplace_back("rho > 0");
    return v;
}

// ---- annulus classification ----------------------------------------------------

namespace {

CubeVerdict certify_cube(const LatticeMatrix& T, const std::vector<Index>& X, double alpha_target, int thr,
                         double norm_target, const GreensConfig& gcfg) {
    CubeVerdict v;
    try {
        DirectInverse di = invert_direct(T.on_region(X), thr, gcfg);
        CertifyResult cr = certify(di.G, X, T.block, alpha_target, thr, norm_target);
        v.pass = cr.pass;
        v.norm = cr.measured_norm;
        v.alpha = di.cert.alpha;
    } catch (const NearSingular&) {
        v.pass = false;
        v.norm = std::numeric_limits<double>::infinity();
    }
    return v;
}

int scale_threshold(int M, double theta) { return static_cast<int>(std::floor(std::pow(M, theta))); }

}  // namespace

AnnulusClass classify_annuli(const LatticeMatrix& T, const ElementaryRegion& region, const Exhaustion& ex,
                             double alpha_target, double b, double theta, const GreensConfig& gcfg) {
    AnnulusClass out;
    const int M = ex.M;
    const int thr = scale_threshold(M, theta);
    const double norm_target = std::exp(std::pow(M, b));
    std::set<Index> bad;
    for (std::size_t j = 0; j < ex.annuli.size(); ++j) {
        const auto& A = ex.annuli[j];
        ElementaryRegion Aj = region_from_sites(A);
        bool good = true;
        for (const auto& n : A) {
            const auto v1 = certify_cube(T, cube_intersect(n, M, Aj), alpha_target, thr, norm_target, gcfg);
            const auto v2 = certify_cube(T, cube_intersect(n, M, region), alpha_target, thr, norm_target, gcfg);
            if (!v1.pass || !v2.pass) {
                good = false;
                bad.insert(n);
            }
        }
        if (static_cast<int>(j) == ex.exceptional) good = false;
        out.good.push_back(good);
        if (!good) ++out.bad_count;
    }
    out.bad_sites.assign(bad.begin(), bad.end());
    return out;
}

// ---- coupling engine ----------------------------------------------------------

namespace {

/// Pairwise path pseudo-metric on the region's bounding box (king moves),
/// a step costing 0 when both endpoints are free sites and 1 otherwise.
/// Returns dist[a][b] for region sites a, b.
std::vector<std::vector<double>> path_metric(const std::vector<Index>& sites, const std::vector<Index>& free_sites) {
    const std::size_t S = sites.size();
    std::vector<std::vector<double>> D(S, std::vector<double>(S, 0.0));
    if (free_sites.empty()) {
        for (std::size_t a = 0; a < S; ++a)
            for (std::size_t b = 0; b < S; ++b) D[a][b] = norm_inf(sub(sites[a], sites[b]));
        return D;
    }
    const std::size_t d = sites.front().size();
    Index lo = sites.front(), hi = lo;
    for (const auto& k : sites)
        for (std::size_t i = 0; i < d; ++i) lo[i] = std::min(lo[i], k[i]), hi[i] = std::max(hi[i], k[i]);
    std::vector<int> ext(d);
    std::size_t cells = 1;
    for (std::size_t i = 0; i < d; ++i) ext[i] = hi[i] - lo[i] + 1, cells *= ext[i];
    auto flat = [&](const Index& k) {
        std::size_t f = 0;
        for (std::size_t i = 0; i < d; ++i) f = f * ext[i] + (k[i] - lo[i]);
        return f;
    };
    auto unflat = [&](std::size_t f) {
        Index k(d);
        for (int i = static_cast<int>(d) - 1; i >= 0; --i) k[i] = lo[i] + static_cast<int>(f % ext[i]), f /= ext[i];
        return k;
    };
    std::vector<char> is_free(cells, 0);
    for (const auto& k : free_sites) {
        bool inside = true;
        for (std::size_t i = 0; i < d; ++i) inside = inside && k[i] >= lo[i] && k[i] <= hi[i];
        if (inside) is_free[flat(k)] = 1;
    }
    // neighbour offsets of the king graph
    std::vector<Index> nb;
    for (const auto& k : cube_region(Index(d, 0), 1))
        if (norm_inf(k) == 1) nb.push_back(k);
    std::vector<int> dist(cells);
    for (std::size_t a = 0; a < S; ++a) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<int>::max());
        std::deque<std::size_t> dq;
        const std::size_t src = flat(sites[a]);
        dist[src] = 0;
        dq.push_back(src);
        while (!dq.empty()) {
            const std::size_t c = dq.front();
            dq.pop_front();
            const Index kc = unflat(c);
            for (const auto& o : nb) {
                Index kn = add(kc, o);
                bool inside = true;
                for (std::size_t i = 0; i < d; ++i) inside = inside && kn[i] >= lo[i] && kn[i] <= hi[i];
                if (!inside) continue;
                const std::size_t f = flat(kn);
                const int w = (is_free[c] && is_free[f]) ? 0 : 1;
                if (dist[c] + w < dist[f]) {
                    dist[f] = dist[c] + w;
                    if (w == 0) dq.push_front(f);
                    else dq.push_back(f);
                }
            }
        }
        for (std::size_t b = 0; b < S; ++b) D[a][b] = dist[flat(sites[b])];
    }
    return D;
}

/// Bound on |G_W(x, w)| from a certificate.
double cert_bound(const DecayCertificate& c, int dist) {
    if (dist <= c.threshold) return c.norm_bound;
    return std::min(c.norm_bound, std::exp(-c.alpha * dist));
}

}  // namespace

CouplingResult couple_windows(const LatticeMatrix& T, const std::vector<SiteWindow>& windows, int threshold_out,
                              double beta_max, Provenance prov, const std::vector<Index>& free_sites, double q_max) {
    const auto& sites = T.region;
    const int S = static_cast<int>(sites.size());
    const int n = T.block;
    if (static_cast<int>(windows.size()) != S) throw std::invalid_argument("couple_windows: one window per site required");
    std::map<Index, int> where;
    for (int a = 0; a < S; ++a) where[sites[a]] = a;

    CouplingResult res;
    CouplingDiagnostics& dg = res.diag;
    dg.eps_S = T.decay_c;
    dg.rho = T.decay_s;

    // Window membership and the per-window bound b_x(w).
    std::vector<std::vector<int>> win(S);
    std::vector<std::vector<double>> bx(S);
    bool degenerate = true;
    for (int a = 0; a < S; ++a) {
        const SiteWindow& W = windows[a];
        if (!W.cert && W.explicit_bound.size() != W.sites.size())
            throw std::invalid_argument("couple_windows: window without bound");
        bool has_x = false;
        for (std::size_t t = 0; t < W.sites.size(); ++t) {
            auto it = where.find(W.sites[t]);
            if (it == where.end()) throw std::invalid_argument("couple_windows: window leaves the region");
            win[a].push_back(it->second);
            const int dist = norm_inf(sub(W.sites[t], sites[a]));
            bx[a].push_back(W.cert ? cert_bound(*W.cert, dist) : W.explicit_bound[t]);
            has_x = has_x || it->second == a;
        }
        if (!has_x) throw std::invalid_argument("couple_windows: window must contain its site");
        if (static_cast<int>(win[a].size()) != S) degenerate = false;
    }
    if (degenerate) {
        // Every window is the whole region: its certificate already describes G.
        DecayCertificate c;
        bool first = true;
        for (int a = 0; a < S; ++a) {
            if (!windows[a].cert) continue;
            const auto& w = *windows[a].cert;
            c.norm_bound = first ? w.norm_bound : std::max(c.norm_bound, w.norm_bound);
            c.alpha = first ? w.alpha : std::min(c.alpha, w.alpha);
            c.threshold = first ? w.threshold : std::max(c.threshold, w.threshold);
            c.compounded_constant = std::max(c.compounded_constant, w.compounded_constant);
            first = false;
        }
        if (first) throw CertificateRefused("couple_windows: degenerate covering without certificates");
        c.region = describe_region(T, provenance_name(prov));
        c.provenance = prov;
        c.notes.push_back("degenerate covering: every window is the whole region");
        res.cert = c;
        dg.notes.push_back("degenerate covering");
        return res;
    }

    const auto D = path_metric(sites, free_sites);
    for (int a = 0; a < S; ++a)
        for (int b = 0; b < S; ++b)
            dg.metric_deficit = std::max(dg.metric_deficit, norm_inf(sub(sites[a], sites[b])) - D[a][b]);

    // s_x(u) = sum_{w in W(x)} b_x(w) e^{-rho |w - u|} for u outside W(x).
    const double rho = T.decay_s;
    std::vector<std::vector<std::pair<int, double>>> outside(S);
    for (int a = 0; a < S; ++a) {
        std::vector<char> inW(S, 0);
        for (int w : win[a]) inW[w] = 1;
        for (int u = 0; u < S; ++u) {
            if (inW[u]) continue;
            double s = 0.0;
            for (std::size_t t = 0; t < win[a].size(); ++t)
                s += bx[a][t] * std::exp(-rho * norm_inf(sub(sites[win[a][t]], sites[u])));
            outside[a].emplace_back(u, s);
        }
    }
    const double pref = T.decay_c * n * n;
    auto q_of = [&](double beta) {
        double q = 0.0;
        for (int a = 0; a < S; ++a) {
            double qa = 0.0;
            for (const auto& [u, s] : outside[a]) qa += s * std::exp(beta * D[a][u]);
            q = std::max(q, pref * qa);
        }
        return q;
    };
    auto A_of = [&](double beta) {
        double A = 0.0;
        for (int a = 0; a < S; ++a)
            for (std::size_t t = 0; t < win[a].size(); ++t)
                A = std::max(A, bx[a][t] * std::exp(beta * D[a][win[a][t]]));
        return A;
    };
    const double q0 = q_of(0.0);
    if (!(q0 <= q_max)) {
        std::ostringstream os;
        os << "coupling: contraction factor " << q0 << " exceeds " << q_max << " even without decay";
        throw CertificateRefused(os.str());
    }
    double beta = std::max(0.0, beta_max);
    if (q_of(beta) > q_max) {
        double lo = 0.0, hi = beta;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (q_of(mid) <= q_max ? lo : hi) = mid;
        }
        beta = lo;
    }
    dg.beta = beta;
    dg.q = q_of(beta);
    dg.A = A_of(beta);
    dg.C_hat = dg.A / (1.0 - dg.q);

    // |G(x,y)| <= C_hat e^{-beta D(x,y)} <= C_hat e^{beta deficit} e^{-beta |x-y|}.
    DecayCertificate c;
    c.threshold = threshold_out;
    c.alpha = beta - (std::log(std::max(1.0, dg.C_hat)) + beta * std::max(0.0, dg.metric_deficit)) /
                         (threshold_out + 1.0);
    double norm = 0.0;
    for (int a = 0; a < S; ++a) {
        double row = 0.0;
        for (int b = 0; b < S; ++b) row += n * dg.C_hat * std::exp(-beta * D[a][b]);
        norm = std::max(norm, row);
    }
    c.norm_bound = norm;
    c.region = describe_region(T, provenance_name(prov));
    c.provenance = prov;
    for (const auto& W : windows)
        if (W.cert) c.compounded_constant = std::max(c.compounded_constant, W.cert->compounded_constant);
    c.compounded_constant *= std::max(1.0, dg.C_hat);
    res.cert = c;
    return res;
}

// ---- single-scale coupling ----------------------------------------------------

CouplingResult cl1_couple(const LatticeMatrix& T, const std::map<Index, SiteCert>& site_certs, int M) {
    std::vector<SiteWindow> windows;
    double beta_max = T.decay_s, max_norm = 0.0;
    std::set<Index> region(T.region.begin(), T.region.end());
    for (const auto& x : T.region) {
        auto it = site_certs.find(x);
        if (it == site_certs.end()) {
            std::ostringstream os;
            os << "cl1_couple: site (";
            for (std::size_t i = 0; i < x.size(); ++i) os << (i ? "," : "") << x[i];
            os << ") lacks a certificate";
            throw CertificateRefused(os.str());
        }
        const SiteCert& sc = it->second;
        // dist(x, Lambda \ U(x)) > M / 2
        std::set<Index> U(sc.window.begin(), sc.window.end());
        if (!U.count(x)) throw CertificateRefused("cl1_couple: window does not contain its site");
        for (const auto& k : T.region)
            if (!U.count(k) && 2 * norm_inf(sub(k, x)) <= M)
                throw CertificateRefused("cl1_couple: window too close to its site (dist <= M/2)");
        windows.push_back(SiteWindow{sc.window, sc.cert, {}});
        beta_max = std::min(beta_max, sc.cert.alpha);
        max_norm = std::max(max_norm, sc.cert.norm_bound);
    }
    CouplingResult r = couple_windows(T, windows, M, std::max(0.0, beta_max), Provenance::CL1);
    const double size = std::max(2, region_diameter(T.region) + 1);
    r.diag.nominal_alpha = std::max(0.0, beta_max) - std::pow(std::log(size), -50.0);
    r.diag.nominal_norm = 2.0 * std::pow(size, T.d) * max_norm;
    r.diag.nominal_alpha_met = r.cert.alpha >= r.diag.nominal_alpha;
    r.diag.nominal_norm_met = r.cert.norm_bound <= r.diag.nominal_norm;
    return r;
}

// ---- two-scale coupling ---------------------------------------------------------

CouplingResult two_scale_couple(const LatticeMatrix& T, const DecayCertificate& certK,
                                const std::map<Index, DecayCertificate>& certsM0, const TwoScaleConfig& cfg) {
    const int d = T.d;
    if (cfg.N == cfg.K) {
        CouplingResult r;
        r.cert = certK;
        r.cert.provenance = Provenance::TwoScale;
        r.cert.region = describe_region(T, "two_scale");
        r.cert.notes.push_back("N = K: the central certificate covers the region");
        r.diag.notes.push_back("degenerate: N = K");
        return r;
    }
    if (!(2 * cfg.M0 < cfg.K && cfg.K < cfg.N))
        throw CertificateRefused("two_scale_couple: requires 2 M0 < K < N");
    const ElementaryRegion Lam = region_from_sites(T.region);
    const std::vector<Index> central = cube_region(d, cfg.K);
    std::vector<SiteWindow> windows;
    double beta_max = std::min(T.decay_s, certK.alpha);
    for (const auto& x : T.region) {
        if (2 * norm_inf(x) <= cfg.K) {
            windows.push_back(SiteWindow{central, certK, {}});
            continue;
        }
        auto it = certsM0.find(x);
        if (it == certsM0.end()) {
            std::ostringstream os;
            os << "two_scale_couple: missing window certificate at k0=(";
            for (int i = 0; i < d; ++i) os << (i ? "," : "") << x[i];
            os << ")";
            throw CertificateRefused(os.str());
        }
        windows.push_back(SiteWindow{cube_intersect(x, cfg.M0, Lam), it->second, {}});
        beta_max = std::min(beta_max, it->second.alpha);
    }
    const int thr = cfg.threshold_out > 0 ? cfg.threshold_out : cfg.M0;
    CouplingResult r = couple_windows(T, windows, thr, std::max(0.0, beta_max), Provenance::TwoScale);
    r.diag.nominal_alpha = std::max(0.0, beta_max) - std::pow(std::log(static_cast<double>(cfg.N)), -8.0);
    r.diag.nominal_alpha_met = r.cert.alpha >= r.diag.nominal_alpha;
    r.diag.nominal_norm = std::numeric_limits<double>::infinity();
    r.diag.nominal_norm_met = true;
    {
        std::ostringstream os;
        os << "multipliers: central window e^{-rate*K/2} = " << std::exp(-beta_max * cfg.K / 2.0)
           << ", small windows e^{2 rho M0^theta} = " << std::exp(2.0 * T.decay_s * std::pow(cfg.M0, 0.997));
        r.diag.notes.push_back(os.str());
    }
    return r;
}

// ---- good/bad-annulus coupling --------------------------------------------------

CL2Report cl2_couple(const LatticeMatrix& T_in, const ScaleConfig& cfg, const ElementaryRegion& region, int M,
                     double alpha_prev, const GreensConfig& gcfg) {
    if (auto v = cfg.violations(); !v.empty()) {
        std::ostringstream os;
        os << "cl2_couple: scale constants violate:";
        for (const auto& s : v) os << " [" << s << "]";
        throw ConfigError(os.str());
    }
    const LatticeMatrix T = T_in.on_region(region.sites);
    CL2Report rep;
    const double Mt = std::max(1, region.diameter);
    rep.bad_budget = std::max(cfg.kappa * std::pow(Mt, cfg.theta) / M, cfg.bad_annuli_allowance);
    const double alpha_target = std::min(alpha_prev, cfg.rho);

    // GOOD gate over every center's exhaustion.
    std::set<Index> bad_sites;
    std::vector<bool> worst_flags;
    for (const auto& m : region.sites) {
        const Exhaustion ex = build_exhaustion(region, m, M);
        const AnnulusClass ac = classify_annuli(T, region, ex, alpha_target, cfg.b, cfg.theta, gcfg);
        bad_sites.insert(ac.bad_sites.begin(), ac.bad_sites.end());
        if (ac.bad_count > rep.bad_budget) {
            std::ostringstream os;
            os << "cl2_couple: BAD region: center (";
            for (std::size_t i = 0; i < m.size(); ++i) os << (i ? "," : "") << m[i];
            os << ") has " << ac.bad_count << " bad annuli (budget " << rep.bad_budget << "): indices";
            for (std::size_t j = 0; j < ac.good.size(); ++j)
                if (!ac.good[j]) os << " " << j;
            throw CertificateRefused(os.str());
        }
        if (ac.bad_count >= rep.worst_center_bad) {
            rep.worst_center_bad = ac.bad_count;
            worst_flags = ac.good;
        }
    }
    // Runs and the multiplier recursion of the worst center.
    {
        double phi = 1.0;
        rep.nominal_phi.push_back(phi);
        for (std::size_t j = 0; j < worst_flags.size();) {
            std::size_t e = j;
            while (e < worst_flags.size() && worst_flags[e] == worst_flags[j]) ++e;
            const int len = static_cast<int>(e - j);
            rep.runs.emplace_back(worst_flags[j], len);
            phi *= worst_flags[j] ? std::exp(3 * cfg.beta * M) : std::exp(3 * cfg.beta * M * len);
            rep.nominal_phi.push_back(phi);
            j = e;
        }
    }
    rep.nominal_alpha = (1.0 - 15.0 * cfg.kappa) * alpha_target;

    // Windows: certified cubes for good sites, directly inverted neighbourhoods of bad clusters.
    const int thr = scale_threshold(M, cfg.theta);
    const double norm_target = std::exp(std::pow(M, cfg.b));
    DecayCertificate good_cert;
    good_cert.norm_bound = norm_target;
    good_cert.alpha = alpha_target;
    good_cert.threshold = thr;
    good_cert.provenance = Provenance::Direct;

    // Bad clusters: bad sites linked when their cubes overlap.
    std::vector<Index> bad(bad_sites.begin(), bad_sites.end());
    std::vector<int> comp(bad.size(), -1);
    int ncomp = 0;
    for (std::size_t i = 0; i < bad.size(); ++i) {
        if (comp[i] >= 0) continue;
        std::vector<std::size_t> stack{i};
        comp[i] = ncomp;
        while (!stack.empty()) {
            const std::size_t c = stack.back();
            stack.pop_back();
            for (std::size_t j = 0; j < bad.size(); ++j)
                if (comp[j] < 0 && norm_inf(sub(bad[c], bad[j])) <= 2 * M) comp[j] = ncomp, stack.push_back(j);
        }
        ++ncomp;
    }
    std::vector<std::vector<Index>> cluster_window(ncomp);
    std::vector<Eigen::MatrixXcd> cluster_G(ncomp);
    std::vector<Index> free_sites;
    for (int c = 0; c < ncomp; ++c) {
        std::set<Index> W;
        for (std::size_t i = 0; i < bad.size(); ++i)
            if (comp[i] == c)
                for (const auto& k : cube_intersect(bad[i], M, region)) W.insert(k);
        cluster_window[c].assign(W.begin(), W.end());
        cluster_G[c] = invert_direct(T.on_region(cluster_window[c]), 0, gcfg).G;
        free_sites.insert(free_sites.end(), cluster_window[c].begin(), cluster_window[c].end());
    }
    std::map<Index, int> in_cluster;
    for (int c = 0; c < ncomp; ++c)
        for (const auto& k : cluster_window[c]) in_cluster.emplace(k, c);

    std::vector<SiteWindow> windows;
    for (const auto& x : region.sites) {
        auto it = in_cluster.find(x);
        if (it == in_cluster.end()) {
            windows.push_back(SiteWindow{cube_intersect(x, M, region), good_cert, {}});
            continue;
        }
        const int c = it->second;
        const auto& W = cluster_window[c];
        const int a = static_cast<int>(std::lower_bound(W.begin(), W.end(), x) - W.begin());
        SiteWindow sw;
        sw.sites = W;
        for (int b = 0; b < static_cast<int>(W.size()); ++b)
            sw.explicit_bound.push_back(block_abs(cluster_G[c], T.block, a, b) * (1.0 + 1e-9));
        windows.push_back(std::move(sw));
    }
    const int thr_out = static_cast<int>(std::floor(std::pow(Mt, cfg.theta)));
    rep.result = couple_windows(T, windows, thr_out, alpha_target, Provenance::CL2, free_sites);
    DecayCertificate& out = rep.result.cert;
    rep.result.diag.nominal_alpha = rep.nominal_alpha;
    rep.result.diag.nominal_alpha_met = out.alpha >= rep.nominal_alpha;
    if (out.alpha > rep.nominal_alpha) {
        out.alpha = rep.nominal_alpha;  // never claim more than the coupling statement
    } else {
        out.notes.push_back("rigorous rate below beta(1-15 kappa) times the previous rate");
    }
    out.b_exponent = cfg.b;
    rep.result.diag.notes.push_back(std::to_string(ncomp) + " bad clusters");
    return rep;
}

// ---- sigma scan ---------------------------------------------------------------

namespace {

bool sigma_pass(const LatticeMatrix& T0, double sigma, const SigmaTargets& tg, const GreensConfig& gcfg,
                SigmaSample* s) {
    LatticeMatrix T = T0;
    T.sigma = sigma;
    SigmaSample smp;
    smp.sigma = sigma;
    try {
        DirectInverse di = invert_direct(T, tg.threshold, gcfg);
        CertifyResult cr = certify(di.G, T.region, T.block, tg.alpha_target, tg.threshold, tg.norm_target);
        smp.pass = cr.pass;
        smp.norm = cr.measured_norm;
        smp.alpha = di.cert.alpha;
    } catch (const NearSingular&) {
        smp.pass = false;
        smp.norm = std::numeric_limits<double>::infinity();
    }
    if (s) *s = smp;
    return smp.pass;
}

}  // namespace

SigmaScanReport sigma_scan(const LatticeMatrix& T, double lo, double hi, const SigmaTargets& targets,
                           double points_per_unit, double refine_tol, const GreensConfig& gcfg) {
    if (!(hi > lo) || !(points_per_unit > 0)) throw std::invalid_argument("sigma_scan: bad range");
    SigmaScanReport rep;
    rep.lo = lo;
    rep.hi = hi;
    const auto count = static_cast<std::size_t>(std::ceil((hi - lo) * points_per_unit));
    rep.step = (hi - lo) / static_cast<double>(count);
    rep.resolution = refine_tol;
    for (std::size_t i = 0; i <= count; ++i) {
        SigmaSample s;
        sigma_pass(T, lo + i * rep.step, targets, gcfg, &s);
        rep.samples.push_back(s);
    }
    auto refine = [&](double good, double bad) {
        while (std::abs(bad - good) > refine_tol) {
            const double mid = 0.5 * (good + bad);
            (sigma_pass(T, mid, targets, gcfg, nullptr) ? good : bad) = mid;
        }
        return 0.5 * (good + bad);
    };
    const std::size_t S = rep.samples.size();
    for (std::size_t i = 0; i < S;) {
        if (rep.samples[i].pass) {
            ++i;
            continue;
        }
        std::size_t e = i;
        while (e + 1 < S && !rep.samples[e + 1].pass) ++e;
        const double a = i == 0 ? lo : refine(rep.samples[i - 1].sigma, rep.samples[i].sigma);
        const double b = e + 1 == S ? hi : refine(rep.samples[e + 1].sigma, rep.samples[e].sigma);
        rep.bad_intervals.emplace_back(a, b);
        i = e + 1;
    }
    rep.bad_measure = interval_measure(rep.bad_intervals);
    rep.bad_fraction = rep.bad_measure / (hi - lo);
    return rep;
}

std::vector<std::pair<double, double>> diagonal_bad_intervals(const LatticeMatrix& T, double lo, double hi,
                                                              double norm_target) {
    const double delta = 1.0 / norm_target;
    const Index zero(T.d, 0);
    std::vector<std::pair<double, double>> iv;
    for (const auto& k : T.region)
        for (int j = 0; j < T.block; ++j) {
            const double Dk = T.diag(j, k) - T.sigma + T.symbol.get(zero, j, j).real();
            const double a = std::max(lo, -Dk - delta), b = std::min(hi, -Dk + delta);
            if (b > a) iv.emplace_back(a, b);
        }
    std::sort(iv.begin(), iv.end());
    std::vector<std::pair<double, double>> merged;
    for (const auto& p : iv) {
        if (!merged.empty() && p.first <= merged.back().second)
            merged.back().second = std::max(merged.back().second, p.second);
        else
            merged.push_back(p);
    }
    return merged;
}

double interval_measure(const std::vector<std::pair<double, double>>& iv) {
    double m = 0.0;
    for (const auto& [a, b] : iv) m += b - a;
    return m;
}

}  // namespace kam
