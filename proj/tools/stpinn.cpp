// Command-line driver: gen-ref, train, eval, compare.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "stpinn/commands.hpp"
#include "stpinn/config.hpp"

namespace {

struct Common {
    std::string config_path;
    std::string problem = "burgers";
    std::optional<std::uint64_t> seed;
    std::string out_dir;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config_path, "Run configuration file");
    cmd->add_option("--problem", c.problem, "Problem defaults when no config is given")
        ->check(CLI::IsMember({"burgers", "diff_react", "diff_sorb"}));
    cmd->add_option("--seed", c.seed, "Training seed (overrides run.seed)");
    cmd->add_option("--out", c.out_dir, "Output directory (overrides run.out_dir)");
}

stpinn::RunConfig resolve(const Common& c) {
    stpinn::RunConfig cfg = c.config_path.empty()
                                ? stpinn::default_config(stpinn::parse_problem_kind(c.problem))
                                : stpinn::load_config(c.config_path);
    if (c.seed) cfg.seed = *c.seed;
    if (!c.out_dir.empty()) cfg.out_dir = c.out_dir;
    stpinn::validate(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-informed network training with residual-ranked pseudo labels"};
    app.require_subcommand(1);

    Common gen_opts;
    auto* gen = app.add_subcommand("gen-ref", "Solve the configured problem and write the reference grid");
    add_common(gen, gen_opts);

    Common train_opts;
    bool baseline = false;
    auto* train = app.add_subcommand("train", "Train one network against the reference grid");
    add_common(train, train_opts);
    train->add_flag("--baseline", baseline, "Disable pseudo-label generation");

    Common eval_opts;
    std::string checkpoint;
    std::string grid;
    std::string error_grid;
    auto* eval = app.add_subcommand("eval", "Relative L2 and MSE of a checkpoint on a grid");
    add_common(eval, eval_opts);
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file (default <out>/selftrain.ckpt)");
    eval->add_option("--grid", grid, "Reference grid (default from the config)");
    eval->add_option("--error-grid", error_grid, "Write |prediction - reference| as a grid file");

    Common cmp_opts;
    int seeds = 3;
    auto* cmp = app.add_subcommand("compare", "Baseline against self-training over several seeds");
    add_common(cmp, cmp_opts);
    cmp->add_option("--seeds", seeds, "Number of seeds")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            stpinn::cmd_gen_ref(resolve(gen_opts), std::cout);
        } else if (*train) {
            stpinn::cmd_train(resolve(train_opts), baseline, std::cout);
        } else if (*eval) {
            const stpinn::RunConfig cfg = resolve(eval_opts);
            const std::filesystem::path ckpt =
                checkpoint.empty() ? cfg.out_dir / "selftrain.ckpt" : std::filesystem::path(checkpoint);
            const std::filesystem::path ref =
                grid.empty() ? stpinn::reference_path(cfg) : std::filesystem::path(grid);
            stpinn::cmd_eval(ckpt, ref, error_grid, std::cout);
        } else if (*cmp) {
            stpinn::cmd_compare(resolve(cmp_opts), seeds, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "stpinn: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
