#include "reslab/experiment.hpp"
#include "reslab/selfcheck.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitSelfcheck = 4;

std::vector<double> parse_values(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw reslab::ValidationError("--values: '" + item + "' is not a number");
        }
        if (used != item.size()) throw reslab::ValidationError("--values: '" + item + "' is not a number");
        out.push_back(v);
    }
    if (out.empty()) throw reslab::ValidationError("--values: empty list");
    return out;
}

void print_record(const reslab::experiment::RunRecord& r) {
    std::cout << "experiment " << r.experiment << " -> " << r.output_dir.string() << "\n";
    std::cout << "config_hash " << r.config_hash << "\n";
    for (const auto& o : r.outputs) std::cout << "  " << o.path << " " << o.sha256 << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Resonance experiments for finite-level systems coupled to a truncated boson field"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    int jobs = 1;
    auto* run = app.add_subcommand("run", "Run the experiment named in a config file");
    run->add_option("--config", config_path, "Config file (JSON)")->required();
    run->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    run->add_option("--out", out_dir, "Output directory (overrides output_dir)");

    std::string axis, values;
    auto* sweep = app.add_subcommand("sweep", "Run a config over a list of values of one parameter");
    sweep->add_option("--config", config_path, "Config file (JSON)")->required();
    sweep->add_option("--axis", axis, "Parameter name (dotted path; model.<key> for model fields)")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    sweep->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
    sweep->add_option("--out", out_dir, "Output directory (overrides output_dir)");

    auto* selfcheck = app.add_subcommand("selfcheck", "Run the invariant suite");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    using namespace reslab;
    try {
        experiment::RunOptions opts;
        opts.jobs = jobs;
        if (!out_dir.empty()) opts.output_dir = out_dir;
        if (*selfcheck) {
            const auto results = selfcheck::run_all();
            for (const auto& r : results)
                std::printf("%-26s %s  value=%.3e tol=%.1e%s%s\n", r.name.c_str(), r.passed ? "PASS" : "FAIL", r.value,
                            r.tolerance, r.detail.empty() ? "" : "  ", r.detail.c_str());
            return selfcheck::all_passed(results) ? 0 : kExitSelfcheck;
        }
        const auto config = experiment::parse_config_file(config_path);
        if (*run) {
            const auto rec = experiment::run(config, opts);
            print_record(rec);
            return rec.passed ? 0 : kExitSelfcheck;
        }
        const auto entries = experiment::sweep(config, axis, parse_values(values), opts);
        int worst = 0;
        for (const auto& e : entries) {
            std::cout << axis << "=" << e.value << " " << e.status;
            if (!e.message.empty()) std::cout << " (" << e.message << ")";
            std::cout << "\n";
            if (e.status == "validation") worst = std::max(worst, kExitValidation);
            else if (e.status != "ok") worst = std::max(worst, kExitNumerical);
            else if (!e.record.passed) worst = std::max(worst, kExitSelfcheck);
        }
        return worst;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error [" << e.module() << "]: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
