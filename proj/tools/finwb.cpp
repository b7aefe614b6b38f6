#include "finwb/checks.hpp"
#include "finwb/instance.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace finwb;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write " + path);
    out << text;
}

std::vector<std::string> split_checks(const std::string& csv) {
    if (csv.empty() || csv == "all") return all_checks();
    std::vector<std::string> names;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) names.push_back(item);
    for (const std::string& name : names) {
        bool known = false;
        for (const std::string& k : all_checks()) known |= k == name;
        if (!known) throw std::invalid_argument("unknown check: " + name);
    }
    return names;
}

int report_exit(const CampaignReport& rep) { return rep.all_pass() ? 0 : 1; }

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"finite-model workbench for liftings on product spaces"};
    app.require_subcommand(1);

    InstanceSpec spec;
    std::string out_path, checks_csv = "all", in_path;
    int count = 1, jobs = 1;
    bool trace = false;

    auto add_spec_flags = [&](CLI::App* cmd) {
        cmd->add_option("--seed", spec.seed, "generator seed");
        cmd->add_option("--size-x", spec.size_x, "ground size of X");
        cmd->add_option("--size-y", spec.size_y, "ground size of Y");
        cmd->add_option("--null-rate", spec.null_rate,
                        "chance of zeroing a marginal weight")
            ->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--coarse-b-rate", spec.coarse_b_rate,
                        "chance of merging adjacent Y-atoms")
            ->check(CLI::Range(0.0, 1.0));
        cmd->add_option("--extra-gens", spec.extra_gens,
                        "redundant generators appended to the list");
    };

    auto* gen = app.add_subcommand("gen", "write a seeded instance file");
    add_spec_flags(gen);
    gen->add_option("-o,--out", out_path, "output path (default stdout)");

    auto* verify = app.add_subcommand("verify", "run checks on an instance");
    verify->add_option("instance", in_path, "instance file")->required();
    verify->add_option("--checks", checks_csv, "comma-separated check names");
    verify->add_flag("--trace", trace, "include construction trace fields");
    verify->add_option("-o,--out", out_path, "report path (default stdout)");

    auto* camp = app.add_subcommand("campaign", "generate-and-verify sweep");
    add_spec_flags(camp);
    camp->add_option("--count", count, "number of seeded instances")
        ->check(CLI::PositiveNumber);
    camp->add_option("--checks", checks_csv, "comma-separated check names");
    camp->add_option("--jobs", jobs, "parallel instance workers")
        ->check(CLI::PositiveNumber);
    camp->add_flag("--trace", trace, "include construction trace fields");
    camp->add_option("-o,--out", out_path, "report path (default stdout)");

    auto* rpt = app.add_subcommand("report", "summarize a saved report");
    rpt->add_option("report_file", in_path, "report file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (gen->parsed()) {
            emit(out_path, serialize(generate_instance(spec)));
            return 0;
        }
        if (verify->parsed()) {
            Instance inst = parse_instance(slurp(in_path));
            CampaignReport rep;
            rep.entries.push_back(
                {inst.spec, run_checks(inst, split_checks(checks_csv), trace)});
            emit(out_path, render_report(rep, false));
            return report_exit(rep);
        }
        if (camp->parsed()) {
            auto rep =
                campaign(spec, count, split_checks(checks_csv), jobs, trace);
            emit(out_path, render_report(rep, true));
            return report_exit(rep);
        }
        if (rpt->parsed()) {
            std::istringstream in(slurp(in_path));
            std::string line;
            long long checks = 0, failed = 0;
            bool summary_seen = false;
            while (std::getline(in, line)) {
                if (line.rfind("check ", 0) == 0) {
                    ++checks;
                    failed += line.find(" pass=false") != std::string::npos;
                } else if (line.rfind("summary ", 0) == 0) {
                    summary_seen = true;
                }
            }
            if (!summary_seen)
                throw std::invalid_argument("not a workbench report file");
            std::cout << "checks=" << checks << " passed=" << (checks - failed)
                      << " failed=" << failed << "\n";
            return failed == 0 ? 0 : 1;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
