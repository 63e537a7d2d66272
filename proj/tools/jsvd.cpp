#include "jsvd/commands.hpp"
#include "jsvd/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

void add_common(CLI::App* cmd, jsvd::CliConfig& cfg) {
    cmd->add_option("--manifest", cfg.manifest,
                    "Path to model.json, or a builtin name "
                    "(resnet18, resnet34, resnet50)")
        ->required();
    cmd->add_option("--seed", cfg.seed, "Seed for generated inputs");
    cmd->add_option("--out", cfg.out, "Output / artifact directory");
}

void add_plan_flags(CLI::App* cmd, jsvd::CliConfig& cfg) {
    cmd->add_option("--method", cfg.method,
                    "Factorization method for every group")
        ->check(CLI::IsMember({"rjsvd", "ljsvd", "bijsvd"}));
    CLI::Option* r =
        cmd->add_option("--rank", cfg.rank, "Total rank per group");
    CLI::Option* t = cmd->add_option("--target-cf", cfg.target_cf,
                                     "Compression factor to plan");
    r->excludes(t);
    cmd->add_option("--p", cfg.p,
                    "Left-shared share of the total rank, in [0, 1]");
    cmd->add_option("--k", cfg.k, "Alternating iterations for bijsvd");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Joint low-rank factorization of grouped convolution weights"};
    app.require_subcommand(1);

    jsvd::CliConfig cfg;
    std::string precision = "f64";

    CLI::App* dec = app.add_subcommand(
        "decompose", "Factorize grouped tensors into a shared-factor artifact");
    add_common(dec, cfg);
    add_plan_flags(dec, cfg);
    dec->add_option("--threads", cfg.threads, "Worker threads across groups");
    dec->add_option("--precision", precision, "Stored factor precision")
        ->check(CLI::IsMember({"f32", "f64"}));
    dec->add_flag("--force", cfg.force, "Overwrite an existing artifact");

    CLI::App* ver = app.add_subcommand(
        "verify", "Check an artifact against its source model");
    add_common(ver, cfg);

    CLI::App* bud = app.add_subcommand(
        "budget", "Report parameter and MAC budgets, optionally plan ranks");
    add_common(bud, cfg);
    add_plan_flags(bud, cfg);

    CLI::App* ben = app.add_subcommand(
        "bench", "Time direct vs factored forwards of an artifact");
    add_common(ben, cfg);
    ben->add_option("--repeats", cfg.repeats, "Timed repetitions per case");

    CLI11_PARSE(app, argc, argv);
    cfg.precision = jsvd::dtype_from_name(precision);

    if (app.got_subcommand(dec)) return jsvd::cmd_decompose(cfg, std::cout);
    if (app.got_subcommand(ver)) return jsvd::cmd_verify(cfg, std::cout);
    if (app.got_subcommand(bud)) return jsvd::cmd_budget(cfg, std::cout);
    return jsvd::cmd_bench(cfg, std::cout);
}
