#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include <thermoshadow/commands.hpp>

using namespace thermoshadow;

int main(int argc, char** argv) {
    CLI::App app{"thermoshadow: coupled temperature/potential solver on triangulated domains"};
    app.require_subcommand(1);

    std::string spec_path;
    std::string out_dir = "out";
    auto add = [&](const char* name, const char* desc) {
        CLI::App* cmd = app.add_subcommand(name, desc);
        cmd->add_option("--spec", spec_path, "run-spec JSON file")->required();
        cmd->add_option("--out", out_dir, "output directory (default: out)");
        return cmd;
    };
    CLI::App* solve = add("solve", "fixed-point solve of the coupled pair, with hypothesis audit");
    CLI::App* sweep = add("sweep", "solve across a conductivity ladder and compare to the limit");
    CLI::App* shadow = add("shadow", "solve the uniform-temperature limit model");
    CLI::App* mms = add("mms", "manufactured-solution convergence study");
    CLI::App* report = add("report", "hypothesis audit, trace constants, and smallness ledger");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        RunSpec spec = load_run_spec(spec_path);
        if (solve->parsed()) return cmd_solve(spec, out_dir);
        if (sweep->parsed()) return cmd_sweep(spec, out_dir);
        if (shadow->parsed()) return cmd_shadow(spec, out_dir);
        if (mms->parsed()) return cmd_mms(spec, out_dir);
        if (report->parsed()) return cmd_report(spec, out_dir);
    } catch (const SolveError& e) {
        std::fprintf(stderr, "solver error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
    return 0;
}
