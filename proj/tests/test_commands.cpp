#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <json.hpp>

#include "jsvd/commands.hpp"
#include "jsvd/model_io.hpp"

using namespace jsvd;
namespace fs = std::filesystem;

namespace {

const fs::path kToy2 = fs::path(JSVD_SPECS_DIR) / "toy2/model.json";
const fs::path kToy4 = fs::path(JSVD_SPECS_DIR) / "toy4/model.json";

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("jsvd_cmd_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

struct Run {
    int exit_code = 0;
    std::string log;
};

Run decompose(CliConfig cfg) {
    std::ostringstream log;
    const int rc = cmd_decompose(cfg, log);
    return {rc, log.str()};
}

Run verify(CliConfig cfg) {
    std::ostringstream log;
    const int rc = cmd_verify(cfg, log);
    return {rc, log.str()};
}

Run budget(CliConfig cfg) {
    std::ostringstream log;
    const int rc = cmd_budget(cfg, log);
    return {rc, log.str()};
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

} // namespace

TEST_CASE("target-driven decomposition hits the exact compression factor") {
    const fs::path out = fresh_dir("target8");
    CliConfig cfg;
    cfg.manifest = kToy2.string();
    cfg.target_cf = 8.0;
    cfg.out = out.string();

    const Run d = decompose(cfg);
    REQUIRE_MESSAGE(d.exit_code == 0, d.log);
    CHECK(contains(d.log, "rank_right=1"));
    CHECK(contains(d.log, "cf=8"));
    CHECK(fs::exists(out / "model.factorized.json"));
    CHECK(fs::exists(out / "report.json"));
    CHECK(fs::exists(out / "factors/g0.v.bin"));

    CliConfig vcfg;
    vcfg.manifest = kToy2.string();
    vcfg.out = out.string();
    const Run v = verify(vcfg);
    REQUIRE_MESSAGE(v.exit_code == 0, v.log);
    CHECK(contains(v.log, "verify ok: 2 member(s)"));
}

TEST_CASE("the four-group toy survives a full round for each method") {
    for (const std::string method : {"rjsvd", "ljsvd", "bijsvd"}) {
        const fs::path out = fresh_dir("toy4_" + method);
        CliConfig cfg;
        cfg.manifest = kToy4.string();
        cfg.method = method;
        cfg.rank = 3;
        cfg.out = out.string();
        const Run d = decompose(cfg);
        REQUIRE_MESSAGE(d.exit_code == 0, method << ": " << d.log);

        CliConfig vcfg;
        vcfg.manifest = kToy4.string();
        vcfg.out = out.string();
        const Run v = verify(vcfg);
        REQUIRE_MESSAGE(v.exit_code == 0, method << ": " << v.log);
        CHECK(contains(v.log, "verify ok: 9 member(s) across 4 group(s)"));
    }
}

TEST_CASE("a zero left share reproduces the right-shared method") {
    const fs::path out_r = fresh_dir("p0_rjsvd");
    const fs::path out_b = fresh_dir("p0_bijsvd");
    CliConfig base;
    base.manifest = kToy2.string();
    base.rank = 2;

    CliConfig r = base;
    r.method = "rjsvd";
    r.out = out_r.string();
    REQUIRE(decompose(r).exit_code == 0);

    CliConfig b = base;
    b.method = "bijsvd";
    b.p = 0.0;
    b.out = out_b.string();
    REQUIRE(decompose(b).exit_code == 0);

    const FactorizedModel mr =
        load_factorized(out_r / "model.factorized.json");
    const FactorizedModel mb =
        load_factorized(out_b / "model.factorized.json");
    REQUIRE(mb.groups[0].rank_left == 0);
    CHECK(mb.groups[0].rank_right == 2);
    CHECK(std::abs(mr.groups[0].residual_sq - mb.groups[0].residual_sq) <=
          1e-10 * (1.0 + mr.groups[0].residual_sq));
    CHECK(mr.report.params_after == mb.report.params_after);
}

TEST_CASE("threaded decomposition matches the single-threaded artifact") {
    const fs::path out1 = fresh_dir("threads1");
    const fs::path out4 = fresh_dir("threads4");
    CliConfig cfg;
    cfg.manifest = kToy4.string();
    cfg.rank = 2;

    cfg.out = out1.string();
    cfg.threads = 1;
    REQUIRE(decompose(cfg).exit_code == 0);
    cfg.out = out4.string();
    cfg.threads = 4;
    REQUIRE(decompose(cfg).exit_code == 0);

    std::ifstream a(out1 / "model.factorized.json");
    std::ifstream b(out4 / "model.factorized.json");
    const std::string sa((std::istreambuf_iterator<char>(a)),
                         std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)),
                   std::istreambuf_iterator<char>());
    CHECK(sa == sb);
}

TEST_CASE("a missing manifest exits with code 2") {
    CliConfig cfg;
    cfg.manifest = "/nonexistent/model.json";
    cfg.rank = 1;
    const Run d = decompose(cfg);
    CHECK(d.exit_code == 2);
    CHECK(contains(d.log, "does not exist"));
    const Run b = budget(cfg);
    CHECK(b.exit_code == 2);
}

TEST_CASE("invalid options exit with code 1") {
    CliConfig cfg;
    cfg.manifest = kToy2.string();
    cfg.rank = 40; // stacked toy2 admits at most 12
    const Run d = decompose(cfg);
    CHECK(d.exit_code == 1);
    CHECK(contains(d.log, "outside"));

    CliConfig both = cfg;
    both.rank = 2;
    both.target_cf = 4.0;
    const Run d2 = decompose(both);
    CHECK(d2.exit_code == 1);

    CliConfig badp = cfg;
    badp.rank = 2;
    badp.p = 1.5;
    CHECK(decompose(badp).exit_code == 1);
}

TEST_CASE("decomposition refuses to overwrite an artifact without force") {
    const fs::path out = fresh_dir("overwrite");
    CliConfig cfg;
    cfg.manifest = kToy2.string();
    cfg.rank = 2;
    cfg.out = out.string();
    REQUIRE(decompose(cfg).exit_code == 0);

    const Run again = decompose(cfg);
    CHECK(again.exit_code == 1);
    CHECK(contains(again.log, "already exists"));

    cfg.force = true;
    CHECK(decompose(cfg).exit_code == 0);
}

TEST_CASE("verification fails loudly on a corrupted factor") {
    const fs::path out = fresh_dir("corrupt");
    CliConfig cfg;
    cfg.manifest = kToy2.string();
    cfg.rank = 2;
    cfg.out = out.string();
    REQUIRE(decompose(cfg).exit_code == 0);

    // Flip the leading coefficient of one member's factor to a huge value.
    const fs::path victim = out / "factors/g0.w2.u.bin";
    std::fstream f(victim,
                   std::ios::binary | std::ios::in | std::ios::out);
    REQUIRE(f.good());
    const double bogus = 1000.0;
    f.write(reinterpret_cast<const char*>(&bogus), sizeof(bogus));
    f.close();

    CliConfig vcfg;
    vcfg.manifest = kToy2.string();
    vcfg.out = out.string();
    const Run v = verify(vcfg);
    CHECK(v.exit_code == 1);
    CHECK(contains(v.log, "w2 residual mismatch"));
    CHECK(contains(v.log, "verify FAILED"));
    // The untouched member stays clean.
    CHECK_FALSE(contains(v.log, "w1 residual mismatch"));
}

TEST_CASE("verification output is deterministic for a fixed seed") {
    const fs::path out = fresh_dir("seeded");
    CliConfig cfg;
    cfg.manifest = kToy2.string();
    cfg.rank = 2;
    cfg.out = out.string();
    REQUIRE(decompose(cfg).exit_code == 0);

    CliConfig vcfg;
    vcfg.manifest = kToy2.string();
    vcfg.out = out.string();
    vcfg.seed = 42;
    const Run first = verify(vcfg);
    const Run second = verify(vcfg);
    CHECK(first.exit_code == 0);
    CHECK(first.log == second.log);
}

TEST_CASE("budget reproduces the builtin model totals and writes a report") {
    const fs::path out = fresh_dir("budget18");
    CliConfig cfg;
    cfg.manifest = "resnet18";
    cfg.out = out.string();
    const Run b = budget(cfg);
    REQUIRE_MESSAGE(b.exit_code == 0, b.log);
    CHECK(contains(b.log, "params_before=11173962"));
    CHECK(contains(b.log, "flops_before=1110845440"));

    std::ifstream in(out / "report.json");
    REQUIRE(in.good());
    const nlohmann::json j = nlohmann::json::parse(in);
    CHECK(j["params_before"].get<std::size_t>() == 11173962u);
    CHECK(j["flops_convention"].get<std::string>() == "two-per-mac");

    // Planning against a target reports the planned factor as well.
    CliConfig planned = cfg;
    planned.target_cf = 4.0;
    const Run p = budget(planned);
    REQUIRE(p.exit_code == 0);
    CHECK(contains(p.log, "planned cf="));
}

TEST_CASE("the installed binary wires argv to the same behavior") {
    const fs::path out = fresh_dir("cli_subprocess");
    const std::string exe = JSVD_CLI_PATH;
    const std::string quiet = " > " + (out / "stdout.txt").string() + " 2>&1";

    std::string cmd = exe + " decompose --manifest " + kToy2.string() +
                      " --rank 2 --out " + out.string() + quiet;
    REQUIRE(std::system(cmd.c_str()) == 0);

    cmd = exe + " verify --manifest " + kToy2.string() + " --out " +
          out.string() + quiet;
    CHECK(std::system(cmd.c_str()) == 0);

    cmd = exe + " verify --manifest /nonexistent/model.json" + quiet;
    const int rc = std::system(cmd.c_str());
    CHECK(WIFEXITED(rc));
    CHECK(WEXITSTATUS(rc) == 2);
}
