// Runs the built glassgpt binary against the fixture model directory.

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "support/fixtures.hpp"

namespace fs = std::filesystem;
namespace gt = glassgpt::testing;

namespace {

struct RunResult {
    int status = -1;
    std::string output;
};

std::string quote(const std::string& s) {
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

/// Runs the CLI with `args`, capturing stdout and stderr together.
RunResult run(const std::string& args, const std::string& model_dir = gt::model_dir.string()) {
    const std::string cmd =
        "GLASSGPT_MODEL_DIR=" + quote(model_dir) + " " + quote(GLASSGPT_CLI) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf;
    while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.output.append(buf.data(), n);
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

}  // namespace

TEST(Cli, EncodePrintsIdsAndDisplayTokens) {
    const auto r = run("encode 'Hello world'");
    EXPECT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(r.output, "15496 995\nHello | ·world\n");
}

TEST(Cli, UnknownFlagIsUsageError) {
    const auto r = run("forward --bogus 'x'");
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.output.find("--bogus"), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("Usage"), std::string::npos) << r.output;
}

TEST(Cli, OutOfRangeTemperatureIsUsageError) {
    EXPECT_EQ(run("forward --temperature 9 'x'").status, 1);
    EXPECT_EQ(run("forward --capture everything 'x'").status, 1);
    EXPECT_EQ(run("").status, 1);
}

TEST(Cli, MissingModelIsLoadError) {
    const auto r = run("forward --model /nonexistent/model.safetensors 'x'");
    EXPECT_EQ(r.status, 2) << r.output;
    EXPECT_NE(r.output.find("load failed"), std::string::npos) << r.output;
    EXPECT_EQ(run("encode 'x'", "/nonexistent").status, 2);
}

TEST(Cli, ForwardPrintsPredictionTable) {
    const auto r = run("forward --temperature 0.8 --capture none 'the quick brown'");
    ASSERT_EQ(r.status, 0) << r.output;
    // Top-1 from the reference run over the fixture checkpoint.
    EXPECT_NE(r.output.find("\n1     7594 "), std::string::npos) << r.output;
    EXPECT_NE(r.output.find("entropy "), std::string::npos);
    std::size_t rows = 0;
    for (std::size_t pos = 0; (pos = r.output.find('\n', pos)) != std::string::npos; ++pos) ++rows;
    EXPECT_EQ(rows, 12u) << r.output;
}

TEST(Cli, GenerateStreamsContinuation) {
    const auto r = run("generate --temperature 0 --max-new-tokens 2 'the quick brown'");
    ASSERT_EQ(r.status, 0) << r.output;
    EXPECT_EQ(r.output.rfind("the quick brown", 0), 0u) << r.output;
    EXPECT_GT(r.output.size(), std::string("the quick brown\n").size());
}

TEST(Cli, TraceWritesDocument) {
    const fs::path out = fs::temp_directory_path() / "glassgpt_cli_trace.json";
    fs::remove(out);
    const auto r = run("trace --capture summary --out " + quote(out.string()) + " 'Hello world'");
    ASSERT_EQ(r.status, 0) << r.output;
    std::ifstream in(out);
    const auto doc = nlohmann::json::parse(in);
    EXPECT_EQ(doc["trace_version"], 1);
    EXPECT_EQ(doc["trace"]["ids"], (std::vector<int>{15496, 995}));
    EXPECT_EQ(doc["trace"]["blocks"].size(), 12u);
    EXPECT_EQ(doc["predictions"].size(), 10u);
    fs::remove(out);
}
