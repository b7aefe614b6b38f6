#include "finwb/product.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace finwb {

ProductSpace make_product_space(const SigmaAlg& xalg, const SigmaAlg& yalg) {
    ProductSpace ps;
    ps.nx = xalg.ground;
    ps.ny = yalg.ground;
    ps.xalg = xalg;
    ps.yalg = yalg;
    if (ps.ground() > 64)
        throw std::invalid_argument("product ground exceeds 64 pairs");
    for (Bits a : xalg.atoms)
        for (Bits b : yalg.atoms) ps.product_algebra.atoms.push_back(rect(ps, a, b));
    ps.product_algebra.ground = ps.ground();
    std::sort(ps.product_algebra.atoms.begin(), ps.product_algebra.atoms.end(),
              [](Bits u, Bits v) { return lowest_bit(u) < lowest_bit(v); });
    return ps;
}

Bits rect(const ProductSpace& ps, Bits a, Bits b) {
    Bits e = 0;
    for (int x : bit_indices(a))
        for (int y : bit_indices(b)) e |= Bits(1) << ps.pidx(x, y);
    return e;
}

Bits section_y(const ProductSpace& ps, Bits e, int y) {
    Bits s = 0;
    for (int x = 0; x < ps.nx; ++x)
        if (test_bit(e, ps.pidx(x, y))) s |= Bits(1) << x;
    return s;
}

Bits section_x(const ProductSpace& ps, Bits e, int x) {
    Bits s = 0;
    for (int y = 0; y < ps.ny; ++y)
        if (test_bit(e, ps.pidx(x, y))) s |= Bits(1) << y;
    return s;
}

Rat SkewProduct::mass(Bits e) const {
    Rat s = 0;
    for (int i : bit_indices(e)) s += weights[size_t(i)];
    return s;
}

FinMeasure SkewProduct::as_measure() const {
    return FinMeasure{space.ground(), space.product_algebra, weights};
}

void validate(const SkewProduct& r) {
    validate(r.P);
    validate(r.Q);
    if (r.space.nx != r.P.ground || r.space.ny != r.Q.ground ||
        int(r.weights.size()) != r.space.ground())
        throw std::invalid_argument("coupling shape mismatch");
    for (const Rat& w : r.weights)
        if (w < 0) throw std::invalid_argument("negative coupling weight");
    for (int x = 0; x < r.space.nx; ++x) {
        Rat s = 0;
        for (int y = 0; y < r.space.ny; ++y) s += r.weights[size_t(r.space.pidx(x, y))];
        if (s != r.P.weights[size_t(x)])
            throw std::invalid_argument("X-marginal mismatch");
    }
    for (int y = 0; y < r.space.ny; ++y) {
        Rat s = 0;
        for (int x = 0; x < r.space.nx; ++x) s += r.weights[size_t(r.space.pidx(x, y))];
        if (s != r.Q.weights[size_t(y)])
            throw std::invalid_argument("Y-marginal mismatch");
    }
}

SkewProduct skew_product_generate(const FinMeasure& P, const FinMeasure& Q,
                                  std::uint64_t seed) {
    SkewProduct r;
    r.space = make_product_space(P.algebra, Q.algebra);
    r.P = P;
    r.Q = Q;
    r.weights.assign(size_t(r.space.ground()), Rat(0));

    std::mt19937_64 rng(seed);
    std::vector<int> xs(size_t(P.ground)), ys(size_t(Q.ground));
    std::iota(xs.begin(), xs.end(), 0);
    std::iota(ys.begin(), ys.end(), 0);
    for (size_t i = xs.size(); i > 1; --i) std::swap(xs[i - 1], xs[rng() % i]);
    for (size_t i = ys.size(); i > 1; --i) std::swap(ys[i - 1], ys[rng() % i]);

    std::vector<Rat> supply(P.weights), demand(Q.weights);
    size_t i = 0, j = 0;
    while (i < xs.size() && j < ys.size()) {
        Rat& s = supply[size_t(xs[i])];
        Rat& d = demand[size_t(ys[j])];
        Rat w = std::min(s, d);
        r.weights[size_t(r.space.pidx(xs[i], ys[j]))] += w;
        s -= w;
        d -= w;
        if (s == 0) ++i;
        if (d == 0) ++j;
    }
    return r;
}

SkewProduct independent_product(const FinMeasure& P, const FinMeasure& Q) {
    SkewProduct r;
    r.space = make_product_space(P.algebra, Q.algebra);
    r.P = P;
    r.Q = Q;
    r.weights.assign(size_t(r.space.ground()), Rat(0));
    for (int x = 0; x < P.ground; ++x)
        for (int y = 0; y < Q.ground; ++y)
            r.weights[size_t(r.space.pidx(x, y))] =
                P.weights[size_t(x)] * Q.weights[size_t(y)];
    return r;
}

Disintegration disintegrate(const SkewProduct& r) {
    Disintegration dis;
    dis.algebra_y.assign(size_t(r.space.ny), r.space.xalg);
    dis.measure_y.reserve(size_t(r.space.ny));
    for (int y = 0; y < r.space.ny; ++y) {
        Bits b = r.space.yalg.atom_of(y);
        Rat qb = r.Q.mass(b);
        if (qb == 0) {
            dis.measure_y.push_back(r.P);
            continue;
        }
        std::vector<Rat> w(size_t(r.space.nx), Rat(0));
        for (int x = 0; x < r.space.nx; ++x)
            w[size_t(x)] = r.mass(rect(r.space, Bits(1) << x, b)) / qb;
        dis.measure_y.push_back(FinMeasure{r.space.nx, r.space.xalg, std::move(w)});
    }
    return dis;
}

void validate(const SkewProduct& r, const Disintegration& dis) {
    validate(r);
    if (int(dis.measure_y.size()) != r.space.ny ||
        int(dis.algebra_y.size()) != r.space.ny)
        throw std::invalid_argument("disintegration shape mismatch");
    for (int y = 0; y < r.space.ny; ++y) validate(dis.measure_y[size_t(y)]);
    // Measurable y-dependence: y ↦ S_y(A) constant on Y-atoms off null ones.
    for (Bits a : r.space.xalg.atoms) {
        for (Bits b : r.space.yalg.atoms) {
            if (r.Q.mass(b) == 0) continue;
            auto ys = bit_indices(b);
            for (size_t k = 1; k < ys.size(); ++k)
                if (dis.measure_y[size_t(ys[k])].mass(a) !=
                    dis.measure_y[size_t(ys[0])].mass(a))
                    throw std::invalid_argument("conditional not Y-measurable");
        }
        // Reconstruction identity against every Y-measurable B.
        for (Bits b : r.space.yalg.atoms) {
            Rat lhs = 0;
            for (int y : bit_indices(b))
                lhs += r.Q.weights[size_t(y)] * dis.measure_y[size_t(y)].mass(a);
            if (lhs != r.mass(rect(r.space, a, b)))
                throw std::invalid_argument("reconstruction identity fails");
        }
    }
}

Bits product_null_zone(const SkewProduct& r) {
    Bits z = 0;
    for (Bits e : r.space.product_algebra.atoms)
        if (r.mass(e) == 0) z |= e;
    return z;
}

SigmaAlg completed_product_algebra(const SkewProduct& r) {
    Bits z = product_null_zone(r);
    SigmaAlg out{r.space.ground(), {}};
    for (Bits e : r.space.product_algebra.atoms) {
        if (subset(e, z))
            for (int p : bit_indices(e)) out.atoms.push_back(Bits(1) << p);
        else
            out.atoms.push_back(e);
    }
    std::sort(out.atoms.begin(), out.atoms.end(),
              [](Bits u, Bits v) { return lowest_bit(u) < lowest_bit(v); });
    return out;
}

FubiniReport fubini_check(const SkewProduct& r, const Disintegration& dis,
                          const std::vector<Rat>& f, bool completed) {
    const ProductSpace& ps = r.space;
    if (int(f.size()) != ps.ground())
        throw std::invalid_argument("function shape mismatch");
    const SigmaAlg alg =
        completed ? completed_product_algebra(r) : ps.product_algebra;
    for (Bits e : alg.atoms) {
        auto pts = bit_indices(e);
        for (size_t k = 1; k < pts.size(); ++k)
            if (f[size_t(pts[k])] != f[size_t(pts[0])])
                throw std::invalid_argument(
                    "function not measurable: points " + std::to_string(pts[0]) +
                    " and " + std::to_string(pts[k]) + " share an atom");
    }

    Rat lhs = 0;
    for (int p = 0; p < ps.ground(); ++p) lhs += r.weights[size_t(p)] * f[size_t(p)];
    Rat rhs = 0;
    for (int y = 0; y < ps.ny; ++y) {
        if (r.Q.weights[size_t(y)] == 0) continue;
        Rat inner = 0;
        for (int x = 0; x < ps.nx; ++x)
            inner += dis.measure_y[size_t(y)].weights[size_t(x)] *
                     f[size_t(ps.pidx(x, y))];
        rhs += r.Q.weights[size_t(y)] * inner;
    }
    if (lhs != rhs)
        return {false, "integral mismatch " + rat_str(lhs) + " vs " + rat_str(rhs)};

    if (completed) {
        // Sections of the null zone must be conditionally null outside a
        // Q-null (and Y-measurable) set of y's.
        Bits z = product_null_zone(r);
        Bits bad = 0;
        for (int y = 0; y < ps.ny; ++y) {
            Bits sec = section_y(ps, z, y);
            if (outer_measure(dis.measure_y[size_t(y)], dis.algebra_y[size_t(y)],
                              sec) > 0)
                bad |= Bits(1) << y;
        }
        Bits cover = 0;
        for (int y : bit_indices(bad)) cover |= ps.yalg.atom_of(y);
        if (r.Q.mass(cover) != 0)
            return {false, "null-zone sections positive on a non-null y set"};
    }
    return {true, ""};
}

SigmaAlg make_inner_regular_subalgebra(const SkewProduct& r,
                                       const Disintegration& dis,
                                       std::uint64_t /*seed*/) {
    const int nx = r.space.nx;
    Bits carriers = 0;  // points positive under P or some Q-positive conditional
    for (int x = 0; x < nx; ++x) {
        bool pos = r.P.weights[size_t(x)] > 0;
        for (int y = 0; !pos && y < r.space.ny; ++y)
            if (r.Q.weights[size_t(y)] > 0 &&
                dis.measure_y[size_t(y)].weights[size_t(x)] > 0)
                pos = true;
        if (pos) carriers |= Bits(1) << x;
    }
    SigmaAlg c{nx, {}};
    Bits dead = 0;
    for (Bits a : r.space.xalg.atoms) {
        if (a & carriers)
            c.atoms.push_back(a);
        else
            dead |= a;
    }
    if (dead) c.atoms.push_back(dead);
    std::sort(c.atoms.begin(), c.atoms.end(),
              [](Bits u, Bits v) { return lowest_bit(u) < lowest_bit(v); });
    return c;
}

InnerRegularityCert check_inner_regular(const SkewProduct& r,
                                        const Disintegration& dis,
                                        const SigmaAlg& c) {
    if (!is_subalgebra(c, r.space.xalg)) return {false, 0, -2};
    auto inner_ok = [&](const FinMeasure& m, Bits a, int tag) -> InnerRegularityCert {
        Bits d = 0;
        for (Bits blk : c.atoms)
            if (subset(blk, a)) d |= blk;
        if (m.mass(a & ~d) != 0) return {false, a, tag};
        return {true, 0, -1};
    };
    for (Bits mask : measurable_sets(r.space.xalg)) {
        auto cert = inner_ok(r.P, mask, -1);
        if (!cert.ok) return cert;
        for (int y = 0; y < r.space.ny; ++y) {
            if (r.Q.weights[size_t(y)] == 0) continue;
            cert = inner_ok(dis.measure_y[size_t(y)], mask, y);
            if (!cert.ok) return cert;
        }
    }
    return {true, 0, -1};
}

}  // namespace finwb
