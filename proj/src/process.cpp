#include "finwb/process.hpp"

#include <algorithm>
#include <stdexcept>

namespace finwb {

namespace {

std::vector<Rat> distinct_values(const Process& p) {
    std::vector<Rat> vs = p.values;
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    return vs;
}

Bits level_set(const Process& p, const Rat& v) {
    Bits e = 0;
    for (size_t i = 0; i < p.values.size(); ++i)
        if (p.values[i] == v) e |= Bits(1) << i;
    return e;
}

}  // namespace

Process make_process(int nx, int ny, std::vector<Rat> values, bool raw) {
    Process p;
    p.nx = nx;
    p.ny = ny;
    p.values = std::move(values);
    p.raw = raw;
    if (p.values.size() != size_t(nx) * size_t(ny))
        throw std::invalid_argument("value matrix does not match the grid");
    return p;
}

void validate(const Process& p, const ProductSpace& ps) {
    if (p.nx != ps.nx || p.ny != ps.ny ||
        p.values.size() != size_t(ps.ground()))
        throw std::invalid_argument("process shape mismatch");
    if (!p.raw) {
        int y = first_raw_section(p, ps.xalg);
        if (y >= 0)
            throw std::invalid_argument(
                "section not X-measurable; flag the process as raw");
    }
}

int first_raw_section(const Process& p, const SigmaAlg& xalg) {
    for (int y = 0; y < p.ny; ++y)
        for (Bits a : xalg.atoms) {
            int x0 = lowest_bit(a);
            for (int x : bit_indices(a))
                if (p.at(x, y) != p.at(x0, y)) return y;
        }
    return -1;
}

int first_incoherent_section(const Process& p, const ProductSpace& ps,
                             const Disintegration& dis) {
    for (int y = 0; y < p.ny; ++y) {
        Bits zone = null_zone(dis.measure_y[size_t(y)]);
        for (Bits a : ps.xalg.atoms) {
            if (subset(a, zone)) continue;
            int x0 = lowest_bit(a);
            for (int x : bit_indices(a))
                if (p.at(x, y) != p.at(x0, y)) return y;
        }
    }
    return -1;
}

bool equivalent(const Process& a, const Process& b, const Disintegration& dis) {
    if (a.nx != b.nx || a.ny != b.ny)
        throw std::invalid_argument("process shape mismatch");
    for (int y = 0; y < a.ny; ++y) {
        Bits zone = null_zone(dis.measure_y[size_t(y)]);
        for (int x = 0; x < a.nx; ++x)
            if (a.at(x, y) != b.at(x, y) && !test_bit(zone, x)) return false;
    }
    return true;
}

bool is_measurable_process(const Process& p, const SkewProduct& r) {
    if (p.nx != r.space.nx || p.ny != r.space.ny)
        throw std::invalid_argument("process shape mismatch");
    for (Bits a : r.space.product_algebra.atoms) {
        if (r.mass(a) == 0) continue;
        int p0 = lowest_bit(a);
        for (int q : bit_indices(a))
            if (p.values[size_t(q)] != p.values[size_t(p0)]) return false;
    }
    return true;
}

NilMeasReport is_nil_measurable(const Process& p, const SkewProduct& r,
                                const Disintegration& dis) {
    if (p.nx != r.space.nx || p.ny != r.space.ny)
        throw std::invalid_argument("process shape mismatch");
    NilMeasReport rep;
    Bits hull = 0;
    for (Bits b : r.space.yalg.atoms) {
        if (r.Q.mass(b) == 0) continue;  // repairable wholesale
        for (Bits a : r.space.xalg.atoms) {
            bool seen = false, bad = false;
            Rat v;
            for (int y : bit_indices(b)) {
                if (subset(a, null_zone(dis.measure_y[size_t(y)]))) continue;
                for (int x : bit_indices(a)) {
                    if (!seen)
                        v = p.at(x, y), seen = true;
                    else if (p.at(x, y) != v)
                        bad = true;
                }
            }
            if (bad) {
                hull |= b;
                if (rep.bad_atom_b == 0) {
                    rep.bad_atom_a = a;
                    rep.bad_atom_b = b;
                }
            }
        }
    }
    rep.obstruction = r.Q.mass(hull);
    rep.ok = hull == 0;
    return rep;
}

Process lift_process(const ProdContext& ctx, const LowerDensity& pi,
                     const Process& p) {
    Process out = p;
    out.raw = true;
    Bits seen = 0;
    for (const Rat& v : distinct_values(p)) {
        Bits f = extend_lifting_nil(ctx, pi, level_set(p, v));
        if ((f & seen) != 0)
            throw std::logic_error("lifted level sets overlap");
        seen |= f;
        for (int q : bit_indices(f)) out.values[size_t(q)] = v;
    }
    if (seen != full_mask(ctx.r.space.ground()))
        throw std::logic_error("lifted level sets do not cover the grid");
    return out;
}

ModificationReport measurable_version(const Process& p, const ProdContext& ctx,
                                      const SplitLifting& split,
                                      bool force_split) {
    const ProductSpace& ps = ctx.r.space;
    if (p.nx != ps.nx || p.ny != ps.ny)
        throw std::invalid_argument("process shape mismatch");
    ModificationReport rep;
    rep.theta = p;

    int bad = first_incoherent_section(p, ps, ctx.dis);
    if (bad >= 0) {
        rep.bad_section_y = bad;
        return rep;
    }
    NilMeasReport nil = is_nil_measurable(p, ctx.r, ctx.dis);
    if (!nil.ok) {
        rep.obstruction_a = nil.bad_atom_a;
        rep.obstruction_b = nil.bad_atom_b;
        return rep;
    }

    // Decomposition of the grid into pieces on which the process is handled
    // separately; one piece suffices, the split mode exercises the disjoint
    // assembly.
    Bits fullp = full_mask(ps.ground());
    auto vs = distinct_values(p);
    if (force_split && vs.size() >= 2) {
        Bits o1 = level_set(p, vs.front());
        rep.omega = {o1, fullp & ~o1};
    } else {
        rep.omega = {fullp};
    }

    // Per piece: push the restricted matrix through the extended lifting and
    // record the Y-hull of the columns where it fails to agree conditionally
    // (always Q-null here, because the process decomposes across the ideal).
    std::vector<Process> lifted;
    std::vector<Bits> pio;
    for (Bits o : rep.omega) {
        Process part = p;
        for (int q = 0; q < ps.ground(); ++q)
            if (!test_bit(o, q)) part.values[size_t(q)] = 0;
        Process pl = lift_process(ctx, split.pi, part);
        Bits po = extend_lifting_nil(ctx, split.pi, o);
        Bits cover = 0;
        for (int y = 0; y < ps.ny; ++y) {
            Bits zone = null_zone(ctx.dis.measure_y[size_t(y)]);
            for (int x = 0; x < ps.nx; ++x) {
                bool moved = test_bit(po ^ o, ps.pidx(x, y));
                if (!test_bit(zone, x) &&
                    (moved || pl.at(x, y) != part.at(x, y))) {
                    cover |= ps.yalg.atom_of(y);
                    break;
                }
            }
        }
        if (ctx.r.Q.mass(cover) > 0)
            throw std::logic_error("exceptional columns carry positive mass");
        rep.exceptional.push_back(cover);
        lifted.push_back(std::move(pl));
        pio.push_back(po);
    }

    // Assembly: the lifted piece value where a point sits in the lifted
    // support of its piece off the exceptional columns, the original value
    // everywhere else.
    for (int x = 0; x < ps.nx; ++x)
        for (int y = 0; y < ps.ny; ++y) {
            for (size_t n = 0; n < rep.omega.size(); ++n)
                if (test_bit(pio[n], ps.pidx(x, y)) &&
                    !test_bit(rep.exceptional[n], y)) {
                    rep.theta.at(x, y) = lifted[n].at(x, y);
                    break;
                }
        }
    rep.theta.raw = true;

    if (!is_measurable_process(rep.theta, ctx.r))
        throw std::logic_error("assembled version is not measurable");
    if (!equivalent(p, rep.theta, ctx.dis))
        throw std::logic_error("assembled version is not equivalent");
    // Converse certificates: the disagreement set lies in the section-null
    // ideal, levelwise as well.
    Bits n = 0;
    for (int q = 0; q < ps.ground(); ++q)
        if (p.values[size_t(q)] != rep.theta.values[size_t(q)])
            n |= Bits(1) << q;
    if (!is_nil(ctx, n).nil)
        throw std::logic_error("disagreement set escapes the ideal");
    for (const Rat& v : distinct_values(p))
        if (!is_nil(ctx, level_set(p, v) ^ level_set(rep.theta, v)).nil)
            throw std::logic_error("a level set shifts outside the ideal");
    rep.has_version = true;
    return rep;
}

}  // namespace finwb
