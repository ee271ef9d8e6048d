#include <cstdio>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "kgl/error.hpp"
#include "kgl/experiment.hpp"

namespace fs = std::filesystem;

namespace {

// exit codes: 0 expectation met, 1 not met, 2 usage, 3 anything else
constexpr int exit_unmet = 1, exit_usage = 2, exit_other = 3;

fs::path config_dir() {
    if (const char* env = std::getenv("KGL_CONFIG_DIR")) return env;
    if (fs::is_directory("configs")) return "configs";
    return KGL_CONFIG_DIR;
}

// a path to an .ini, or the name of a shipped config
fs::path resolve(const std::string& arg) {
    if (fs::is_regular_file(arg)) return arg;
    const auto shipped = config_dir() / (arg + ".ini");
    if (fs::is_regular_file(shipped)) return shipped;
    throw kgl::Error(kgl::ErrorKind::usage, "no config file or shipped experiment named '" + arg + "'");
}

int run(const std::string& target, std::string out) {
    const auto cfg = kgl::load_experiment(resolve(target));
    if (out.empty()) out = "runs/" + cfg.name;
    const auto outcome = kgl::run_experiment(cfg, out);
    for (const auto& r : outcome.reports)
        std::printf("%-24s %s\n", r.name.c_str(), r.pass ? "pass" : "fail");
    std::printf("%s: expected %s, %s\nartifacts in %s\n", cfg.name.c_str(), cfg.expect_pass ? "pass" : "fail",
                outcome.expectation_met ? "met" : "NOT met", outcome.dir.string().c_str());
    return outcome.expectation_met ? 0 : exit_unmet;
}

int list(bool as_json) {
    const auto items = kgl::list_experiments(config_dir());
    if (as_json) {
        auto j = nlohmann::json::array();
        for (const auto& e : items) j.push_back({{"name", e.name}, {"description", e.description}, {"path", e.path.string()}});
        std::cout << j.dump(2) << "\n";
        return 0;
    }
    for (const auto& e : items) std::printf("%-22s %s\n", e.name.c_str(), e.description.c_str());
    return 0;
}

int plot(const std::string& dir) {
    for (const auto& f : kgl::plot_artifacts(dir)) std::printf("%s\n", f.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"kgl: weak geodesic lines on Riemann surfaces"};
    app.require_subcommand(1);

    std::string target, out, dir;
    bool as_json = false;
    auto* run_cmd = app.add_subcommand("run", "run an experiment config");
    run_cmd->add_option("config", target, "config file or shipped experiment name")->required();
    run_cmd->add_option("-o,--out", out, "artifact directory (default runs/<name>)");
    auto* list_cmd = app.add_subcommand("list", "list shipped experiments");
    list_cmd->add_flag("--json", as_json, "machine-readable listing");
    auto* plot_cmd = app.add_subcommand("plot", "render SVG plots from an artifact directory");
    plot_cmd->add_option("dir", dir, "artifact directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    try {
        if (*run_cmd) return run(target, out);
        if (*list_cmd) return list(as_json);
        return plot(dir);
    } catch (const kgl::Error& e) {
        std::fprintf(stderr, "kgl: %s\n", e.what());
        return e.kind() == kgl::ErrorKind::usage ? exit_usage : exit_other;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "kgl: %s\n", e.what());
        return exit_other;
    }
}
