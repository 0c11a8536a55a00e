#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pfl/errors.hpp"
#include "pfl/runner.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out_dir;
    std::string profile = "desk";
    long long seed = -1;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "run spec file (sectioned key = value)");
    cmd->add_option("--seed", o.seed, "override the spec seed");
    cmd->add_option("--out-dir", o.out_dir, "override the output directory");
    cmd->add_option("--profile", o.profile, "defaults profile")
        ->check(CLI::IsMember({"desk", "paper"}));
}

pfl::RunSpec resolve(const CommonOpts& o) {
    const pfl::Profile p = o.profile == "paper" ? pfl::Profile::Paper : pfl::Profile::Desk;
    pfl::RunSpec spec = o.config.empty() ? pfl::default_spec(p)
                                         : pfl::parse_run_spec_file(o.config, p);
    if (o.seed >= 0) spec.fed.seed = static_cast<std::uint64_t>(o.seed);
    if (!o.out_dir.empty()) spec.out_dir = o.out_dir;
    spec.validate();
    return spec;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"personalized federated averaging simulator"};
    app.require_subcommand(1);

    CommonOpts train_o, diag_o, part_o, cmp_o;
    CLI::App* train = app.add_subcommand("train", "run one federated training job");
    CLI::App* diag = app.add_subcommand("diagnose", "evaluate analytic bounds on a testbed");
    CLI::App* part = app.add_subcommand("partition", "build and describe a label-skew split");
    CLI::App* cmp = app.add_subcommand("compare", "fedavg vs meta-learning variants");
    add_common(train, train_o);
    add_common(diag, diag_o);
    add_common(part, part_o);
    add_common(cmp, cmp_o);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) pfl::run_train(resolve(train_o));
        else if (diag->parsed()) pfl::run_diagnose(resolve(diag_o));
        else if (part->parsed()) pfl::run_partition(resolve(part_o));
        else if (cmp->parsed()) pfl::run_compare(resolve(cmp_o));
    } catch (const pfl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const pfl::DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const pfl::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 4;
    }
    return 0;
}
