#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <json.hpp>

#include "qhealth/caldata.hpp"
#include "qhealth/tempstats.hpp"

using namespace qhealth;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string err;
};

const fs::path& root() {
    static const fs::path dir = [] {
        const auto d = fs::current_path() / "cli_runs";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

Run cli(const std::string& args) {
    const auto err = root() / "stderr.txt";
    const std::string cmd = std::string("\"") + QHEALTH_CLI + "\" " + args + " > /dev/null 2> \"" + err.string() + "\"";
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

// Default corpus at seed 7, generated once.
const fs::path& corpus_dir() {
    static const fs::path dir = [] {
        const auto d = root() / "seed7";
        REQUIRE(cli("--seed 7 --out \"" + d.string() + "\" synth --default").code == 0);
        return d;
    }();
    return dir;
}

std::string out(const fs::path& d) { return "--seed 7 --out \"" + d.string() + "\" "; }

int count_lines(const std::string& s) {
    int n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

bool one_line_diagnostic(const std::string& err, const std::string& kind) {
    return err.rfind("qhealth: " + kind + ":", 0) == 0 && count_lines(err) == 1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes every record and reruns byte for byte") {
    const auto text = slurp(corpus_dir() / "corpus.csv");
    CHECK(count_lines(text) == 1 + 250 * 20 * 5 + 250 * 30);
    const auto again = root() / "seed7_again";
    REQUIRE(cli(out(again) + "synth --default").code == 0);
    CHECK(slurp(again / "corpus.csv") == text);
    CHECK(slurp(again / "scenario.json") == slurp(corpus_dir() / "scenario.json"));
}

TEST_CASE("synth argument and scenario errors") {
    const auto r = cli(out(root() / "none") + "synth");
    CHECK(r.code == 2);
    CHECK(one_line_diagnostic(r.err, "usage"));

    const auto bad = root() / "bad_scenario.json";
    std::ofstream(bad) << "{ not json";
    const auto b = cli(out(root() / "none") + "synth --scenario \"" + bad.string() + "\"");
    CHECK(b.code == 3);
    CHECK(one_line_diagnostic(b.err, "data"));
}

TEST_CASE("stats tables") {
    const auto d = corpus_dir();
    REQUIRE(cli(out(d) + "stats").code == 0);

    std::map<std::string, int> rows;
    std::istringstream acf(slurp(d / "acf.csv"));
    std::string line;
    std::getline(acf, line);
    CHECK(line == "target,metric,lag,r,ci");
    while (std::getline(acf, line)) ++rows[line.substr(0, line.find(',', line.find(',') + 1))];
    CHECK(rows.size() == 20 * 5 + 30);
    for (const auto& [key, n] : rows) CHECK_MESSAGE(n == 31, key);

    // Top entry per metric is the library ranking.
    const auto ds = ingest(d / "corpus.csv");
    std::istringstream ranking(slurp(d / "ranking.csv"));
    std::getline(ranking, line);
    int checked = 0;
    while (std::getline(ranking, line)) {
        std::istringstream row(line);
        std::string metric, rank, target;
        std::getline(row, metric, ',');
        std::getline(row, rank, ',');
        std::getline(row, target, ',');
        if (rank != "1") continue;
        CHECK(target == to_string(instability_ranking(ds, parse_metric(metric)).front().first));
        ++checked;
    }
    CHECK(checked == 6);
}

TEST_CASE("stats on an empty corpus fails cleanly") {
    const auto d = root() / "empty";
    fs::create_directories(d);
    const auto text = slurp(corpus_dir() / "corpus.csv");
    std::ofstream(d / "corpus.csv") << text.substr(0, text.find('\n') + 1);
    const auto r = cli(out(d) + "stats");
    CHECK(r.code == 3);
    CHECK(one_line_diagnostic(r.err, "data"));
}

TEST_CASE("corr writes four symmetric matrices") {
    const auto d = corpus_dir();
    REQUIRE(cli(out(d) + "corr --method all --window 130:209").code == 0);
    for (const char* tag : {"pearson", "spearman", "dcor", "mi"}) {
        REQUIRE(fs::exists(d / (std::string("corr_") + tag + ".csv")));
        const auto doc = nlohmann::json::parse(slurp(d / (std::string("corr_") + tag + ".json")));
        const auto& v = doc["values"];
        REQUIRE(v.size() == 6);
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) CHECK(v[i][j].get<double>() == v[j][i].get<double>());
    }
    const auto r = cli(out(d) + "corr --window 400:450");
    CHECK(r.code == 3);
    CHECK(one_line_diagnostic(r.err, "data"));
    CHECK(cli(out(d) + "corr").code == 2);
}

TEST_CASE("cluster reports four assignments") {
    const auto d = corpus_dir();
    const auto r = cli(out(d) + "cluster --k 1");
    CHECK(r.code == 2);
    CHECK(one_line_diagnostic(r.err, "usage"));

    REQUIRE(cli(out(d) + "cluster --method all --k auto").code == 0);
    const auto doc = nlohmann::json::parse(slurp(d / "cluster.json"));
    CHECK(doc["assignments"].size() == 4);
    CHECK(doc["pairwise_ari"].size() == 6);
    const auto first = slurp(d / "labels.csv");
    REQUIRE(cli(out(d) + "cluster --method all --k auto").code == 0);
    CHECK(slurp(d / "labels.csv") == first);
}

TEST_CASE("validate needs a clusters file") {
    const auto d = root() / "no_labels";
    fs::create_directories(d);
    fs::copy_file(corpus_dir() / "corpus.csv", d / "corpus.csv", fs::copy_options::overwrite_existing);
    const auto r = cli(out(d) + "validate");
    CHECK(r.code != 0);
    CHECK(count_lines(r.err) == 1);
    CHECK(r.err.find("qhealth cluster") != std::string::npos);
}

TEST_CASE("report, recommend and validate artifacts") {
    const auto d = corpus_dir();
    REQUIRE(cli(out(d) + "cluster --method all --k auto").code == 0);
    REQUIRE(cli(out(d) + "report").code == 0);
    const auto health = nlohmann::json::parse(slurp(d / "health.json"));
    CHECK(health["scores"].size() == 20);

    REQUIRE(cli(out(d) + "recommend --k 5 --top 5").code == 0);
    CHECK(count_lines(slurp(d / "subsets.csv")) == 6);
    CHECK(cli(out(d) + "recommend --k 9").code == 2);

    REQUIRE(cli(out(d) + "validate").code == 0);
    const auto v = nlohmann::json::parse(slurp(d / "validation.json"));
    REQUIRE(v["clusters"].size() >= 2);
    for (const auto& c : v["clusters"]) {
        CHECK(c.contains("mean"));
        CHECK(c.contains("std"));
    }
}

TEST_CASE("fit recovers an exact decay") {
    const auto input = root() / "curve.csv";
    {
        std::ofstream f(input);
        f << "x,y\n";
        for (int i = 0; i < 20; ++i) {
            const double t = 120.0 * i / 19;
            f << t << ',' << 0.9 * std::exp(-t / 40.0) + 0.1 << '\n';
        }
    }
    REQUIRE(cli(out(root()) + "fit --model exp --input \"" + input.string() + "\"").code == 0);
    const auto doc = nlohmann::json::parse(slurp(root() / "fit.json"));
    CHECK(doc["params"]["T"].get<double>() == doctest::Approx(40.0).epsilon(1e-4));
    CHECK(doc["converged"].get<bool>());

    CHECK(cli(out(root()) + "fit --model cubic --input \"" + input.string() + "\"").code == 2);
}

}  // TEST_SUITE
