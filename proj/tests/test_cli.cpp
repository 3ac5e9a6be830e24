#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <string>

#include "quantcurve/config.hpp"
#include "quantcurve/csv.hpp"
#include "quantcurve/io.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("quantcurve_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("fmt17 round trips doubles") {
    for (double v : {0.1, 1.0 / 3.0, 1e-300, 123456.789, -0.0, 2.2250738585072014e-308}) {
        const std::string s = quantcurve::fmt17(v);
        CHECK(std::stod(s) == v);
    }
}

TEST_CASE("atomic write leaves no temp file and round trips") {
    TempDir tmp;
    const std::string p = tmp.file("out.txt");
    quantcurve::atomic_write(p, "hello\n");
    CHECK(quantcurve::read_file(p) == "hello\n");
    CHECK_FALSE(fs::exists(p + ".tmp"));
    quantcurve::atomic_write(p, "replaced");
    CHECK(quantcurve::read_file(p) == "replaced");
    CHECK_THROWS(quantcurve::read_file(tmp.file("missing.txt")));
}

TEST_CASE("config parses values, lists and comments") {
    const auto cfg = quantcurve::Config::from_string(
        "# experiment setup\n"
        "command = fit\n"
        "alpha = 0.25\n"
        "alpha = 0.5   # repeated keys accumulate\n"
        "h=0.3\n"
        "\n"
        "n = 1000\n");
    CHECK(cfg.str("command") == "fit");
    CHECK(cfg.nums("alpha") == std::vector<double>{0.25, 0.5});
    CHECK(cfg.num("h") == 0.3);
    CHECK(cfg.integer("n") == 1000);
    CHECK(cfg.num_or("missing", 7.0) == 7.0);
    CHECK(cfg.str_or("missing", "x") == "x");
    CHECK_FALSE(cfg.has("missing"));
}

TEST_CASE("config override replaces the whole list") {
    auto cfg = quantcurve::Config::from_string("alpha=0.1\nalpha=0.2\n");
    cfg.override_set("alpha", "0.9");
    CHECK(cfg.nums("alpha") == std::vector<double>{0.9});
}

TEST_CASE("config errors name the offending key or line") {
    const auto cfg = quantcurve::Config::from_string("h=abc\nn=1.5\n");
    CHECK_THROWS_WITH(cfg.num("h"), Catch::Matchers::ContainsSubstring("'h'"));
    CHECK_THROWS_WITH(cfg.integer("n"), Catch::Matchers::ContainsSubstring("'n'"));
    CHECK_THROWS_WITH(cfg.str("nope"), Catch::Matchers::ContainsSubstring("'nope'"));
    CHECK_THROWS_WITH(quantcurve::Config::from_string("just a line\n"),
                      Catch::Matchers::ContainsSubstring(":1"));
}

TEST_CASE("csv round trip is exact") {
    TempDir tmp;
    quantcurve::Sample s;
    s.n = 3;
    s.d = 2;
    s.x = {0.1, -0.2, 1.0 / 3.0, 0.5, -1e-7, 2.0};
    s.y = {1.5, -2.25, 0.125};
    const std::string p = tmp.file("sample.csv");
    quantcurve::atomic_write(p, quantcurve::emit_csv(s));
    const quantcurve::Sample back = quantcurve::ingest_csv(p);
    CHECK(back.n == s.n);
    CHECK(back.d == s.d);
    CHECK(back.x == s.x);
    CHECK(back.y == s.y);
}

TEST_CASE("csv header and cell errors carry coordinates") {
    TempDir tmp;
    const std::string p = tmp.file("bad.csv");

    quantcurve::atomic_write(p, "a,b\n1,2\n");
    CHECK_THROWS_WITH(quantcurve::ingest_csv(p),
                      Catch::Matchers::ContainsSubstring("x1"));

    quantcurve::atomic_write(p, "x1,y\n1,2\n3\n");
    CHECK_THROWS_WITH(quantcurve::ingest_csv(p), Catch::Matchers::ContainsSubstring("row 3"));

    quantcurve::atomic_write(p, "x1,y\n1,2\n3,oops\n");
    CHECK_THROWS_WITH(quantcurve::ingest_csv(p),
                      Catch::Matchers::ContainsSubstring("row 3 column 2"));

    quantcurve::atomic_write(p, "x1,y\n");
    CHECK_THROWS_WITH(quantcurve::ingest_csv(p),
                      Catch::Matchers::ContainsSubstring("no data rows"));

    quantcurve::atomic_write(p, "x1,y\n1,nan\n");
    CHECK_THROWS_WITH(quantcurve::ingest_csv(p),
                      Catch::Matchers::ContainsSubstring("row 2 column 2"));
}

TEST_CASE("csv accepts crlf and blank trailing lines") {
    TempDir tmp;
    const std::string p = tmp.file("crlf.csv");
    quantcurve::atomic_write(p, "x1,y\r\n0.5,1.5\r\n\r\n");
    const quantcurve::Sample s = quantcurve::ingest_csv(p);
    CHECK(s.n == 1);
    CHECK(s.x == std::vector<double>{0.5});
    CHECK(s.y == std::vector<double>{1.5});
}
