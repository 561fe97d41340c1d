#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "bcos/cli_config.hpp"
#include "bcos/common.hpp"

using namespace bcos;

#ifndef BCOS_CLI_PATH
#error "BCOS_CLI_PATH must point at the command line binary"
#endif
#ifndef BCOS_TEST_DATA
#error "BCOS_TEST_DATA must point at the test data directory"
#endif

namespace {

namespace fs = std::filesystem;

struct RunResult {
    int exit_code;
    std::string stdout_text;
};

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

RunResult run_cli(const std::string& args, const fs::path& workdir) {
    const fs::path out = workdir / "stdout.txt";
    const std::string cmd = "cd '" + workdir.string() + "' && '" + BCOS_CLI_PATH + "' " +
                            args + " > '" + out.string() + "' 2> stderr.txt";
    const int status = std::system(cmd.c_str());
    RunResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.stdout_text = slurp(out);
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kTinyData = "--dataset synth --classes 4 --n 160 --size 16 --data-seed 5";
const std::string kTinyTrain =
    " --b 2 --channels 8 --epochs 2 --batch 32 --seed 7 --out m.bcos --metrics m.csv";

}  // namespace

TEST(CliHelp, SnapshotsListEveryFlagWithDefaults) {
    const fs::path dir = fresh_dir("bcos_cli_help");
    for (const std::string sub : {"train", "explain", "neurons", "gridgame", "ablation"}) {
        RunResult r = run_cli(sub + " --help", dir);
        EXPECT_EQ(r.exit_code, 0);
        // drop the Usage line: it embeds the invocation path
        std::istringstream in(r.stdout_text);
        std::ostringstream filtered;
        std::string line;
        while (std::getline(in, line)) {
            if (line.rfind("Usage:", 0) == 0) continue;
            filtered << line << "\n";
        }
        const std::string golden = slurp(fs::path(BCOS_TEST_DATA) / ("help_" + sub + ".txt"));
        EXPECT_EQ(filtered.str(), golden) << "help snapshot changed for '" << sub << "'";
    }
}

TEST(CliTrain, ProducesArtifactsAndIsByteDeterministic) {
    const fs::path a = fresh_dir("bcos_cli_train_a");
    const fs::path b = fresh_dir("bcos_cli_train_b");
    RunResult ra = run_cli("train " + kTinyData + kTinyTrain, a);
    ASSERT_EQ(ra.exit_code, 0) << ra.stdout_text;
    EXPECT_TRUE(fs::exists(a / "m.bcos"));
    EXPECT_TRUE(fs::exists(a / "m.csv"));

    RunResult rb = run_cli("train " + kTinyData + kTinyTrain, b);
    ASSERT_EQ(rb.exit_code, 0);
    EXPECT_EQ(slurp(a / "m.csv"), slurp(b / "m.csv"));
    EXPECT_EQ(slurp(a / "m.bcos"), slurp(b / "m.bcos"));
}

TEST(CliTrain, MissingCifarDirectoryIsConfigError) {
    const fs::path dir = fresh_dir("bcos_cli_train_bad");
    EXPECT_EQ(run_cli("train --dataset cifar10", dir).exit_code, 2);
    EXPECT_EQ(run_cli("train --dataset cifar10 --data-dir /no/such/dir", dir).exit_code, 2);
}

TEST(CliTrain, NumericBlowupExitsWithCodeThree) {
    const fs::path dir = fresh_dir("bcos_cli_train_nan");
    RunResult r = run_cli("train " + kTinyData +
                              " --b 2 --channels 8 --epochs 1 --batch 32"
                              " --lr 1e38 --lr-final 1e30 --out m.bcos --metrics m.csv",
                          dir);
    EXPECT_EQ(r.exit_code, 3);
    const std::string err = slurp(dir / "stderr.txt");
    EXPECT_NE(err.find("error: non-finite loss"), std::string::npos);
}

TEST(CliExplain, CompletenessLineAndDeterminism) {
    const fs::path dir = fresh_dir("bcos_cli_explain");
    ASSERT_EQ(run_cli("train " + kTinyData + kTinyTrain, dir).exit_code, 0);

    const std::string explain =
        "explain --checkpoint m.bcos " + kTinyData + " --sample 3 --out e1.ppm";
    RunResult r1 = run_cli(explain, dir);
    ASSERT_EQ(r1.exit_code, 0) << r1.stdout_text;
    // residual printed on the completeness line stays within the contract
    const auto pos = r1.stdout_text.find("residual=");
    ASSERT_NE(pos, std::string::npos);
    const double residual = std::stod(r1.stdout_text.substr(pos + 9));
    EXPECT_LE(residual, 1e-3);

    RunResult r2 = run_cli(
        "explain --checkpoint m.bcos " + kTinyData + " --sample 3 --out e2.ppm", dir);
    ASSERT_EQ(r2.exit_code, 0);
    EXPECT_EQ(slurp(dir / "e1.ppm"), slurp(dir / "e2.ppm"));

    // png output variant
    RunResult r3 = run_cli(
        "explain --checkpoint m.bcos " + kTinyData + " --sample 3 --format png --out e.png",
        dir);
    ASSERT_EQ(r3.exit_code, 0);
    EXPECT_TRUE(fs::exists(dir / "e.png"));

    EXPECT_EQ(run_cli("explain --checkpoint m.bcos " + kTinyData + " --sample 3 --class 9",
                      dir)
                  .exit_code,
              2);
    EXPECT_EQ(run_cli("explain --checkpoint m.bcos " + kTinyData, dir).exit_code, 2);
}

TEST(CliGridgame, EmitsAggregateRowsWithUniformSanity) {
    const fs::path dir = fresh_dir("bcos_cli_grid");
    ASSERT_EQ(run_cli("train " + kTinyData + kTinyTrain, dir).exit_code, 0);
    RunResult r = run_cli("gridgame --checkpoint m.bcos " + kTinyData +
                              " --grids 4 --grid-n 2 --intgrad-steps 10",
                          dir);
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;

    std::ifstream agg(dir / "gridgame_aggregate.csv");
    std::string line;
    std::getline(agg, line);
    EXPECT_EQ(line, "method,mean,std,n");
    std::size_t rows = 0;
    double uniform_mean = -1.0;
    while (std::getline(agg, line)) {
        ++rows;
        if (line.rfind("uniform,", 0) == 0) {
            uniform_mean = std::stod(line.substr(8));
        }
    }
    EXPECT_EQ(rows, 5u);  // inherent, grad, ixg, intgrad, uniform
    EXPECT_NEAR(uniform_mean, 0.25, 1e-12);

    // per-cell results carry one row per method * grid * cell
    std::ifstream res(dir / "gridgame_results.csv");
    std::size_t result_rows = 0;
    while (std::getline(res, line)) ++result_rows;
    EXPECT_EQ(result_rows, 1 + 5 * 4 * 4);

    RunResult again = run_cli("gridgame --checkpoint m.bcos " + kTinyData +
                                  " --grids 4 --grid-n 2 --intgrad-steps 10",
                              dir);
    EXPECT_EQ(again.stdout_text, r.stdout_text);
}

TEST(CliAblation, RowPerExponent) {
    const fs::path dir = fresh_dir("bcos_cli_abl");
    RunResult r = run_cli("ablation " + kTinyData +
                              " --b-list 1,2 --channels 8 --epochs 1 --batch 32 --grids 2",
                          dir);
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
    std::ifstream csv(dir / "ablation.csv");
    std::string line;
    std::getline(csv, line);
    EXPECT_EQ(line, "b,accuracy,mean_localization");
    std::size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    EXPECT_EQ(rows, 2u);
}

TEST(CliConfigOverlay, FileValuesApplyAndFlagsWin) {
    const fs::path dir = fresh_dir("bcos_cli_config");
    {
        std::ofstream f(dir / "run.conf");
        f << "# overlay\n";
        f << "epochs = 1\n";
        f << "out = from_file.bcos\n";
    }
    // file sets epochs and checkpoint name; explicit --out wins over the file
    RunResult r = run_cli("train " + kTinyData +
                              " --b 2 --channels 8 --batch 32 --seed 7 --metrics m.csv"
                              " --config run.conf --out from_flag.bcos --verbose",
                          dir);
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
    EXPECT_TRUE(fs::exists(dir / "from_flag.bcos"));
    EXPECT_FALSE(fs::exists(dir / "from_file.bcos"));
    EXPECT_NE(r.stdout_text.find("epochs\t1"), std::string::npos);
    // provenance table names the sources
    EXPECT_NE(r.stdout_text.find("config\tepochs\t1\tfile"), std::string::npos);
    EXPECT_NE(r.stdout_text.find("config\tout\tfrom_flag.bcos\tflag"), std::string::npos);

    {
        std::ofstream f(dir / "bad.conf");
        f << "no_such_key = 1\n";
    }
    EXPECT_EQ(run_cli("train " + kTinyData + " --config bad.conf", dir).exit_code, 2);
}

TEST(ConfigResolver, PrecedenceAndErrors) {
    std::map<std::string, std::string> file{{"epochs", "5"}};
    ConfigResolver r(file);
    EXPECT_EQ(r.resolve("epochs", false, "20"), "5");
    EXPECT_EQ(r.resolve("batch", false, "64"), "64");
    EXPECT_EQ(r.resolve("seed", true, "7"), "7");
    EXPECT_EQ(r.resolved()[0].source, ConfigSource::File);
    EXPECT_EQ(r.resolved()[1].source, ConfigSource::Default);
    EXPECT_EQ(r.resolved()[2].source, ConfigSource::Flag);
    EXPECT_NO_THROW(r.check_unknown_keys());

    ConfigResolver bad(std::map<std::string, std::string>{{"typo", "1"}});
    bad.resolve("epochs", false, "20");
    EXPECT_THROW(bad.check_unknown_keys(), ConfigError);
}

TEST(ConfigFile, ParsingRules) {
    const fs::path dir = fresh_dir("bcos_cli_conf_parse");
    const fs::path p = dir / "c.conf";
    {
        std::ofstream f(p);
        f << "# comment\n\n  key = value with spaces  \nempty=\n";
    }
    auto m = parse_config_file(p.string());
    EXPECT_EQ(m.at("key"), "value with spaces");
    EXPECT_EQ(m.at("empty"), "");

    {
        std::ofstream f(p);
        f << "not a pair\n";
    }
    EXPECT_THROW(parse_config_file(p.string()), ConfigError);
    EXPECT_THROW(parse_config_file("/no/such/file.conf"), ConfigError);
}
