// Process-level checks of the command-line contract: exit code 0 on
// success, 1 on configuration problems.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#ifndef UDSIM_PATH
#error "UDSIM_PATH must point at the built binary"
#endif

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(UDSIM_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("print-defaults succeeds without a config") {
    CHECK(run_cli("--print-defaults") == 0);
    CHECK(run_cli("--version") == 0);
}

TEST_CASE("no subcommand is a usage error") {
    CHECK(run_cli("") == 1);
}

TEST_CASE("validate accepts the shipped sample configs") {
    const std::filesystem::path configs = std::filesystem::path(PROJECT_SOURCE_DIR) / "configs";
    for (const auto& entry : std::filesystem::directory_iterator(configs)) {
        CHECK(run_cli("validate --config " + entry.path().string()) == 0);
    }
}

TEST_CASE("validate lists violations of a bad custom spec and exits 1") {
    const std::filesystem::path bad = std::filesystem::temp_directory_path() / "udsim_badspec.cfg";
    {
        std::ofstream out(bad);
        out << "[model]\nname = custom\nenergies = 0, 0\ndephasing_rates = 10, 10\n"
            << "hamiltonian = [0,0], [1,0] ; [0,0], [0,0]\n"  // not hermitian
            << "V_0_0 = [1,0], [0,0] ; [0,0], [1,0]\n";       // nonzero diagonal block
    }
    CHECK(run_cli("validate --config " + bad.string()) == 1);
}

TEST_CASE("configuration problems exit with code 1") {
    CHECK(run_cli("survival --config /nonexistent.cfg") == 1);

    const std::filesystem::path bad = std::filesystem::temp_directory_path() / "udsim_bad.cfg";
    {
        std::ofstream out(bad);
        out << "[model]\nname = von-neumann\n[solver]\nrel_tol = banana\n";
    }
    CHECK(run_cli("survival --config " + bad.string()) == 1);

    // missing field required by the experiment (no seed for trajectories)
    const std::filesystem::path noseed = std::filesystem::temp_directory_path() / "udsim_ns.cfg";
    {
        std::ofstream out(noseed);
        out << "[model]\nname = von-neumann\n[experiment]\nn_traj = 10\nt_max = 5\n";
    }
    CHECK(run_cli("trajectories --config " + noseed.string() + " --out /tmp/udsim_ns_out") == 1);
}

TEST_CASE("a full experiment runs end to end from the command line") {
    const std::filesystem::path cfg =
        std::filesystem::path(PROJECT_SOURCE_DIR) / "configs" / "two_site_arrival.cfg";
    const std::filesystem::path out = std::filesystem::temp_directory_path() / "udsim_cli_out";
    std::filesystem::remove_all(out);
    CHECK(run_cli("arrival --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(std::filesystem::exists(out / "arrival.csv"));
    CHECK(std::filesystem::exists(out / "manifest.json"));
}
