#include "finwb/condexp.hpp"

#include <stdexcept>

namespace finwb {

void validate(const RandVar& f) {
    validate(f.algebra);
    if (f.ground != f.algebra.ground || int(f.values.size()) != f.ground)
        throw std::invalid_argument("random variable shape mismatch");
    for (Bits a : f.algebra.atoms) {
        auto pts = bit_indices(a);
        for (size_t k = 1; k < pts.size(); ++k)
            if (f.values[size_t(pts[k])] != f.values[size_t(pts[0])])
                throw std::invalid_argument("values not constant on an atom");
    }
}

RandVar cond_expect(const RandVar& f, const SigmaAlg& sub, const FinMeasure& m,
                    const VersionPolicy& policy) {
    if (f.ground != m.ground)
        throw std::invalid_argument("function/measure shape mismatch");
    if (!is_subalgebra(sub, m.algebra))
        throw std::invalid_argument("conditioning algebra not a sub-algebra");
    for (Bits a : m.algebra.atoms) {
        auto pts = bit_indices(a);
        for (size_t k = 1; k < pts.size(); ++k)
            if (f.values[size_t(pts[k])] != f.values[size_t(pts[0])])
                throw std::invalid_argument("function not measurable");
    }
    RandVar g{f.ground, std::vector<Rat>(size_t(f.ground), Rat(0)), sub};
    for (Bits a : sub.atoms) {
        Rat ma = m.mass(a);
        Rat v = 0;
        if (ma > 0) {
            for (int x : bit_indices(a)) v += m.weights[size_t(x)] * f.values[size_t(x)];
            v /= ma;
        } else if (policy.mode == VersionPolicy::NullAtom::inherit) {
            for (int x : bit_indices(a)) v += f.values[size_t(x)];
            v /= popcount(a);
        }
        for (int x : bit_indices(a)) g.values[size_t(x)] = v;
    }
    return g;
}

namespace {

// Section of a product function at y, as a vector over X.
std::vector<Rat> fsection(const ProductSpace& ps, const std::vector<Rat>& f, int y) {
    std::vector<Rat> s(size_t(ps.nx), Rat(0));
    for (int x = 0; x < ps.nx; ++x) s[size_t(x)] = f[size_t(ps.pidx(x, y))];
    return s;
}

// Per-y conditional of a section: weighted mean on S_y-positive atoms of
// `sub`, policy value elsewhere.
std::vector<Rat> ysection_cond(const std::vector<Rat>& sec, const SigmaAlg& sub,
                               const FinMeasure& sy, const VersionPolicy& policy) {
    RandVar f{sy.ground, sec, discrete_algebra(sy.ground)};
    FinMeasure m{sy.ground, discrete_algebra(sy.ground), sy.weights};
    return cond_expect(f, sub, m, policy).values;
}

Rat dot(const FinMeasure& m, const std::vector<Rat>& v, Bits over) {
    Rat s = 0;
    for (int x : bit_indices(over)) s += m.weights[size_t(x)] * v[size_t(x)];
    return s;
}

// Mass of the set where two product functions differ.
Rat differ_mass(const SkewProduct& r, const std::vector<Rat>& a,
                const std::vector<Rat>& b) {
    Rat s = 0;
    for (int p = 0; p < r.space.ground(); ++p)
        if (a[size_t(p)] != b[size_t(p)]) s += r.weights[size_t(p)];
    return s;
}

// Section property of g at one y: g^y must be sub-measurable mod S_y-null and
// integrate like f^y over every sub-set.
bool section_version_ok(const ProductSpace& ps, const std::vector<Rat>& f,
                        const std::vector<Rat>& g, const SigmaAlg& c,
                        const FinMeasure& sy, int y) {
    for (Bits atom : c.atoms) {
        Rat gv = 0, fv = 0;
        bool seen = false;
        Rat first = 0;
        for (int x : bit_indices(atom)) {
            const Rat& w = sy.weights[size_t(x)];
            gv += w * g[size_t(ps.pidx(x, y))];
            fv += w * f[size_t(ps.pidx(x, y))];
            if (w > 0) {
                if (!seen) {
                    first = g[size_t(ps.pidx(x, y))];
                    seen = true;
                } else if (g[size_t(ps.pidx(x, y))] != first) {
                    return false;  // not c-measurable mod S_y-null
                }
            }
        }
        if (gv != fv) return false;
    }
    return true;
}

}  // namespace

T1Report t1_check(const SkewProduct& r, const Disintegration& dis,
                  const SigmaAlg& c, const std::vector<Rat>& f,
                  const VersionPolicy& policy) {
    const ProductSpace& ps = r.space;
    if (!is_subalgebra(c, ps.xalg))
        throw std::invalid_argument("conditioning algebra not below the X algebra");
    for (const SigmaAlg& ay : dis.algebra_y)
        if (!is_subalgebra(c, ay))
            throw std::invalid_argument("conditioning algebra not below a section algebra");

    SigmaAlg completed = completed_product_algebra(r);
    FinMeasure mprod{ps.ground(), completed, r.weights};
    SigmaAlg sub = make_product_space(c, ps.yalg).product_algebra;

    T1Report rep;
    rep.g = cond_expect(RandVar{ps.ground(), f, completed}, sub, mprod, policy);
    rep.disagree.assign(size_t(ps.ny), 0);

    for (int y = 0; y < ps.ny; ++y) {
        const FinMeasure& sy = dis.measure_y[size_t(y)];
        if (!section_version_ok(ps, f, rep.g.values, c, sy, y))
            rep.exceptional_y |= Bits(1) << y;
        // Pointwise disagreement against the per-y conditional built with the
        // same policy; S_y-null whenever y is not exceptional.
        auto ey = ysection_cond(fsection(ps, f, y), c, sy, policy);
        Bits d = 0;
        for (int x = 0; x < ps.nx; ++x)
            if (ey[size_t(x)] != rep.g.values[size_t(ps.pidx(x, y))])
                d |= Bits(1) << x;
        rep.disagree[size_t(y)] = d;
    }

    Bits cover = 0;
    for (int y : bit_indices(rep.exceptional_y)) cover |= ps.yalg.atom_of(y);
    rep.exceptional_mass = r.Q.mass(cover);
    rep.ok = rep.exceptional_mass == 0;
    for (int y = 0; y < ps.ny; ++y)
        if (!test_bit(rep.exceptional_y, y) &&
            dot(dis.measure_y[size_t(y)],
                std::vector<Rat>(size_t(ps.nx), Rat(1)), rep.disagree[size_t(y)]) != 0) {
            rep.ok = false;
            rep.witness = "disagreement set not null at y=" + std::to_string(y);
        }
    if (!rep.ok && rep.witness.empty())
        rep.witness = "section property fails on a Q-positive set of y";
    return rep;
}

T1Report successor_step_check(const SkewProduct& r, const Disintegration& dis,
                              const SigmaAlg& c_beta, Bits D,
                              const std::vector<Rat>& f,
                              const VersionPolicy& policy) {
    const ProductSpace& ps = r.space;
    if (!is_measurable(ps.xalg, D))
        throw std::invalid_argument("refining set not X-measurable");
    if (is_measurable(c_beta, D))
        throw std::invalid_argument(
            "refining set already measurable at the current stage");

    std::vector<Bits> gens(c_beta.atoms);
    gens.push_back(D);
    SigmaAlg c_gamma = sigma_generate(ps.nx, gens);

    SigmaAlg m_beta = make_product_space(c_beta, ps.yalg).product_algebra;
    SigmaAlg m_gamma = make_product_space(c_gamma, ps.yalg).product_algebra;
    SigmaAlg completed = completed_product_algebra(r);
    FinMeasure mprod{ps.ground(), completed, r.weights};

    Bits dxy = rect(ps, D, full_mask(ps.ny));
    auto masked = [&](const std::vector<Rat>& v, Bits keep) {
        std::vector<Rat> out(v.size(), Rat(0));
        for (int p : bit_indices(keep)) out[size_t(p)] = v[size_t(p)];
        return out;
    };
    auto cond = [&](const std::vector<Rat>& v, const SigmaAlg& sub) {
        return cond_expect(RandVar{ps.ground(), v, completed}, sub, mprod, policy)
            .values;
    };

    T1Report rep;
    std::vector<Rat> chiD(size_t(ps.ground()), Rat(0));
    for (int p : bit_indices(dxy)) chiD[size_t(p)] = 1;
    std::vector<Rat> chiDc(size_t(ps.ground()), Rat(1));
    for (int p : bit_indices(dxy)) chiDc[size_t(p)] = 0;

    auto numD = cond(masked(f, dxy), m_beta);
    auto denD = cond(chiD, m_beta);
    auto numDc = cond(masked(f, ~dxy & full_mask(ps.ground())), m_beta);
    auto denDc = cond(chiDc, m_beta);
    rep.f1.assign(size_t(ps.ground()), Rat(0));
    rep.f2.assign(size_t(ps.ground()), Rat(0));
    for (int p = 0; p < ps.ground(); ++p) {
        if (denD[size_t(p)] != 0) rep.f1[size_t(p)] = numD[size_t(p)] / denD[size_t(p)];
        if (denDc[size_t(p)] != 0)
            rep.f2[size_t(p)] = numDc[size_t(p)] / denDc[size_t(p)];
    }

    auto fail = [&](const std::string& w) {
        rep.ok = false;
        rep.witness = w;
        return rep;
    };

    // Two-sided decomposition of the refined conditional (exact mod R-null).
    auto e_gamma = cond(f, m_gamma);
    std::vector<Rat> rhs46(size_t(ps.ground()), Rat(0));
    for (int p = 0; p < ps.ground(); ++p)
        rhs46[size_t(p)] =
            test_bit(dxy, p) ? rep.f1[size_t(p)] : rep.f2[size_t(p)];
    if (differ_mass(r, e_gamma, rhs46) != 0)
        return fail("two-sided decomposition fails at the refined stage");

    // Conditional of the D-masked function collapses to the D side.
    auto e_gamma_d = cond(masked(f, dxy), m_gamma);
    std::vector<Rat> rhs13(size_t(ps.ground()), Rat(0));
    for (int p : bit_indices(dxy)) rhs13[size_t(p)] = rep.f1[size_t(p)];
    if (differ_mass(r, e_gamma_d, rhs13) != 0)
        return fail("masked conditional does not collapse to one side");

    // Stage-β product identity: E(fχ) = f1·E(χ) mod R-null.
    std::vector<Rat> rhs9(size_t(ps.ground()), Rat(0));
    for (int p = 0; p < ps.ground(); ++p)
        rhs9[size_t(p)] = rep.f1[size_t(p)] * denD[size_t(p)];
    if (differ_mass(r, numD, rhs9) != 0)
        return fail("stage product identity fails on the coupling");

    // Per-y analogues and the support identity.
    rep.f1y.assign(size_t(ps.ny), {});
    rep.f2y.assign(size_t(ps.ny), {});
    rep.A_y.assign(size_t(ps.ny), 0);
    for (int y = 0; y < ps.ny; ++y) {
        const FinMeasure& sy = dis.measure_y[size_t(y)];
        auto sec = fsection(ps, f, y);
        auto secD = sec, secDc = sec;
        std::vector<Rat> chiDx(size_t(ps.nx), Rat(0));
        for (int x = 0; x < ps.nx; ++x) {
            if (test_bit(D, x)) {
                secDc[size_t(x)] = 0;
                chiDx[size_t(x)] = 1;
            } else {
                secD[size_t(x)] = 0;
            }
        }
        std::vector<Rat> chiDcx(size_t(ps.nx), Rat(1));
        for (int x : bit_indices(D)) chiDcx[size_t(x)] = 0;

        auto ynumD = ysection_cond(secD, c_beta, sy, policy);
        auto ydenD = ysection_cond(chiDx, c_beta, sy, policy);
        auto ynumDc = ysection_cond(secDc, c_beta, sy, policy);
        auto ydenDc = ysection_cond(chiDcx, c_beta, sy, policy);
        auto& f1y = rep.f1y[size_t(y)];
        auto& f2y = rep.f2y[size_t(y)];
        f1y.assign(size_t(ps.nx), Rat(0));
        f2y.assign(size_t(ps.nx), Rat(0));
        Bits ay = 0;
        for (int x = 0; x < ps.nx; ++x) {
            if (ydenD[size_t(x)] != 0) {
                f1y[size_t(x)] = ynumD[size_t(x)] / ydenD[size_t(x)];
                ay |= Bits(1) << x;
            }
            if (ydenDc[size_t(x)] != 0)
                f2y[size_t(x)] = ynumDc[size_t(x)] / ydenDc[size_t(x)];
        }
        rep.A_y[size_t(y)] = ay;
        if (sy.mass(D & ~ay) != 0)
            return fail("support identity fails at y=" + std::to_string(y));

        auto null_differ = [&](const std::vector<Rat>& a,
                               const std::vector<Rat>& b) {
            Rat s = 0;
            for (int x = 0; x < ps.nx; ++x)
                if (a[size_t(x)] != b[size_t(x)]) s += sy.weights[size_t(x)];
            return s;
        };
        auto ye_gamma = ysection_cond(sec, c_gamma, sy, policy);
        std::vector<Rat> yrhs47(size_t(ps.nx), Rat(0));
        for (int x = 0; x < ps.nx; ++x)
            yrhs47[size_t(x)] =
                test_bit(D, x) ? f1y[size_t(x)] : f2y[size_t(x)];
        if (null_differ(ye_gamma, yrhs47) != 0)
            return fail("per-y two-sided decomposition fails at y=" +
                        std::to_string(y));
        auto ye_gamma_d = ysection_cond(secD, c_gamma, sy, policy);
        std::vector<Rat> yrhs12(size_t(ps.nx), Rat(0));
        for (int x : bit_indices(D)) yrhs12[size_t(x)] = f1y[size_t(x)];
        if (null_differ(ye_gamma_d, yrhs12) != 0)
            return fail("per-y masked conditional fails at y=" + std::to_string(y));
        std::vector<Rat> yrhs10(size_t(ps.nx), Rat(0));
        for (int x = 0; x < ps.nx; ++x)
            yrhs10[size_t(x)] = f1y[size_t(x)] * ydenD[size_t(x)];
        if (null_differ(ynumD, yrhs10) != 0)
            return fail("per-y stage product identity fails at y=" +
                        std::to_string(y));
    }

    // Section property at the refined stage (quantified over Q-a.e. y).
    T1Report t1 = t1_check(r, dis, c_gamma, f, policy);
    rep.ok = t1.ok;
    rep.g = t1.g;
    rep.exceptional_y = t1.exceptional_y;
    rep.exceptional_mass = t1.exceptional_mass;
    rep.disagree = t1.disagree;
    if (!rep.ok) rep.witness = t1.witness;
    return rep;
}

bool martingale_limit_check(const std::vector<SigmaAlg>& chain,
                            const FinMeasure& m, const RandVar& f) {
    if (chain.empty()) throw std::invalid_argument("empty chain");
    for (size_t i = 1; i < chain.size(); ++i)
        if (!is_subalgebra(chain[i - 1], chain[i]))
            throw std::invalid_argument("chain not increasing");
    VersionPolicy zero;
    std::vector<RandVar> stages;
    stages.reserve(chain.size());
    for (const SigmaAlg& alg : chain) stages.push_back(cond_expect(f, alg, m, zero));
    for (size_t i = 0; i < chain.size(); ++i)
        for (size_t j = i; j < chain.size(); ++j) {
            RandVar tower = cond_expect(stages[j], chain[i], m, zero);
            if (tower.values != stages[i].values) return false;
        }
    // Stabilization: once the chain stops refining, so does the sequence.
    for (size_t i = 1; i < chain.size(); ++i)
        if (same_algebra(chain[i - 1], chain[i]) &&
            stages[i - 1].values != stages[i].values)
            return false;
    return true;
}

}  // namespace finwb
