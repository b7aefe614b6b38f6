#include "finwb/instance.hpp"

#include <json.hpp>

#include <cmath>
#include <random>
#include <stdexcept>

namespace finwb {

namespace {

using Json = nlohmann::ordered_json;

bool roll(std::mt19937_64& rng, double rate) {
    auto threshold = std::uint64_t(std::llround(rate * 1e6));
    return rng() % 1000000 < threshold;
}

FinMeasure random_marginal(int n, double null_rate, std::mt19937_64& rng) {
    std::vector<long> raw(size_t(n), 0);
    for (int i = 0; i < n; ++i) raw[size_t(i)] = 1 + long(rng() % 8);
    for (int i = 0; i < n; ++i)
        if (roll(rng, null_rate)) raw[size_t(i)] = 0;
    bool all0 = true;
    for (long v : raw) all0 &= v == 0;
    if (all0) raw[0] = 1;
    long total = 0;
    for (long v : raw) total += v;
    std::vector<Rat> w(size_t(n), Rat(0));
    for (int i = 0; i < n; ++i) w[size_t(i)] = Rat(raw[size_t(i)], total);
    return FinMeasure{n, discrete_algebra(n), std::move(w)};
}

Json atoms_json(const SigmaAlg& alg) {
    Json out = Json::array();
    for (Bits a : alg.atoms) {
        Json blk = Json::array();
        for (int i : bit_indices(a)) blk.push_back(i);
        out.push_back(std::move(blk));
    }
    return out;
}

SigmaAlg atoms_parse(int ground, const Json& j) {
    SigmaAlg alg;
    alg.ground = ground;
    for (const auto& blk : j) {
        Bits a = 0;
        for (const auto& i : blk) a |= Bits(1) << i.get<int>();
        alg.atoms.push_back(a);
    }
    validate(alg);
    return alg;
}

Json weights_json(const std::vector<Rat>& w) {
    Json out = Json::array();
    for (const Rat& v : w) out.push_back(rat_str(v));
    return out;
}

std::vector<Rat> weights_parse(const Json& j) {
    std::vector<Rat> w;
    for (const auto& v : j) w.push_back(rat_parse(v.get<std::string>()));
    return w;
}

std::string rate_str(double rate) {
    Rat r(std::llround(rate * 1e6), 1000000);
    return rat_str(r);
}

}  // namespace

void validate(const InstanceSpec& spec) {
    int cap = ground_cap();
    if (spec.size_x < 1 || spec.size_y < 1 || spec.size_x > cap ||
        spec.size_y > cap || spec.size_x * spec.size_y > 64)
        throw std::invalid_argument("instance sizes exceed the ground caps");
    for (double rate : {spec.null_rate, spec.coarse_b_rate})
        if (!(rate >= 0.0 && rate <= 1.0))
            throw std::invalid_argument("rates must lie in [0, 1]");
    if (spec.extra_gens < 0 || spec.extra_gens > 64)
        throw std::invalid_argument("generator count out of range");
}

Instance generate_instance(const InstanceSpec& spec) {
    validate(spec);
    std::mt19937_64 rng(spec.seed);
    Instance inst;
    inst.spec = spec;

    FinMeasure P = random_marginal(spec.size_x, spec.null_rate, rng);
    FinMeasure Q = random_marginal(spec.size_y, spec.null_rate, rng);
    // Coarsen the Y-algebra: each point may join its left neighbour's block.
    {
        std::vector<Bits> blocks{Bits(1)};
        for (int y = 1; y < spec.size_y; ++y) {
            if (roll(rng, spec.coarse_b_rate))
                blocks.back() |= Bits(1) << y;
            else
                blocks.push_back(Bits(1) << y);
        }
        Q.algebra = SigmaAlg{spec.size_y, std::move(blocks)};
    }

    inst.r = skew_product_generate(P, Q, rng());
    inst.dis = disintegrate(inst.r);
    inst.c = make_inner_regular_subalgebra(inst.r, inst.dis, rng());
    inst.gens.assign(inst.c.atoms.begin(), inst.c.atoms.end());
    for (int g = 0; g < spec.extra_gens; ++g) {
        Bits e = 0;
        for (Bits a : inst.c.atoms)
            if (rng() % 2) e |= a;
        inst.gens.push_back(e);
    }
    return inst;
}

std::string serialize(const Instance& inst) {
    Json j;
    j["format"] = "finwb-instance-1";
    j["spec"] = {{"seed", inst.spec.seed},
                 {"size_x", inst.spec.size_x},
                 {"size_y", inst.spec.size_y},
                 {"null_rate", rate_str(inst.spec.null_rate)},
                 {"coarse_b_rate", rate_str(inst.spec.coarse_b_rate)},
                 {"extra_gens", inst.spec.extra_gens}};
    j["x"] = {{"ground", inst.r.P.ground},
              {"atoms", atoms_json(inst.r.P.algebra)},
              {"weights", weights_json(inst.r.P.weights)}};
    j["y"] = {{"ground", inst.r.Q.ground},
              {"atoms", atoms_json(inst.r.Q.algebra)},
              {"weights", weights_json(inst.r.Q.weights)}};
    j["coupling"] = weights_json(inst.r.weights);
    Json disj = Json::array();
    for (const FinMeasure& sy : inst.dis.measure_y)
        disj.push_back(weights_json(sy.weights));
    j["disintegration"] = std::move(disj);
    j["subalgebra"] = atoms_json(inst.c);
    Json gj = Json::array();
    for (Bits g : inst.gens) {
        Json s = Json::array();
        for (int i : bit_indices(g)) s.push_back(i);
        gj.push_back(std::move(s));
    }
    j["generators"] = std::move(gj);
    return j.dump(2) + "\n";
}

Instance parse_instance(const std::string& text) {
    Json j;
    try {
        j = Json::parse(text);
    } catch (const Json::parse_error& e) {
        throw std::invalid_argument(std::string("instance parse: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != "finwb-instance-1")
            throw std::invalid_argument("unknown instance format");
        Instance inst;
        const Json& sp = j.at("spec");
        inst.spec.seed = sp.at("seed").get<std::uint64_t>();
        inst.spec.size_x = sp.at("size_x").get<int>();
        inst.spec.size_y = sp.at("size_y").get<int>();
        inst.spec.null_rate = rat_parse(sp.at("null_rate").get<std::string>())
                                  .convert_to<double>();
        inst.spec.coarse_b_rate =
            rat_parse(sp.at("coarse_b_rate").get<std::string>()).convert_to<double>();
        inst.spec.extra_gens = sp.at("extra_gens").get<int>();

        int nx = j.at("x").at("ground").get<int>();
        int ny = j.at("y").at("ground").get<int>();
        // Parsing is structural only: shapes, well-formed partitions, and
        // nonnegative weights. The semantic identities (marginal exactness,
        // reconstruction) are the fubini check's job, so corrupted data is
        // reported as a check failure with a witness, not a usage error.
        FinMeasure P{nx, atoms_parse(nx, j.at("x").at("atoms")),
                     weights_parse(j.at("x").at("weights"))};
        FinMeasure Q{ny, atoms_parse(ny, j.at("y").at("atoms")),
                     weights_parse(j.at("y").at("weights"))};
        if (int(P.weights.size()) != nx || int(Q.weights.size()) != ny)
            throw std::invalid_argument("marginal weight size mismatch");
        inst.r.P = P;
        inst.r.Q = Q;
        inst.r.space = make_product_space(P.algebra, Q.algebra);
        inst.r.weights = weights_parse(j.at("coupling"));
        if (int(inst.r.weights.size()) != nx * ny)
            throw std::invalid_argument("coupling size mismatch");
        const Json& disj = j.at("disintegration");
        if (int(disj.size()) != ny)
            throw std::invalid_argument("disintegration size mismatch");
        for (int y = 0; y < ny; ++y) {
            inst.dis.algebra_y.push_back(P.algebra);
            FinMeasure sy{nx, P.algebra, weights_parse(disj[size_t(y)])};
            if (int(sy.weights.size()) != nx)
                throw std::invalid_argument("conditional weight size mismatch");
            inst.dis.measure_y.push_back(std::move(sy));
        }
        for (const FinMeasure* m : {&inst.r.P, &inst.r.Q})
            for (const Rat& w : m->weights)
                if (w < 0)
                    throw std::invalid_argument("negative weight");
        for (const Rat& w : inst.r.weights)
            if (w < 0) throw std::invalid_argument("negative weight");
        inst.c = atoms_parse(nx, j.at("subalgebra"));
        if (!is_subalgebra(inst.c, P.algebra))
            throw std::invalid_argument("subalgebra is not below the X-algebra");
        for (const auto& s : j.at("generators")) {
            Bits g = 0;
            for (const auto& i : s) g |= Bits(1) << i.get<int>();
            inst.gens.push_back(g);
        }
        return inst;
    } catch (const Json::exception& e) {
        throw std::invalid_argument(std::string("instance parse: ") + e.what());
    }
}

}  // namespace finwb
