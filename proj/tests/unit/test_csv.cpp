#include "sae/csv.hpp"

#include "toy.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

using namespace sae;

TEST_CASE("quote leaves plain fields alone and escapes the rest") {
    CHECK(csv::quote("abc") == "abc");
    CHECK(csv::quote("a,b") == "\"a,b\"");
    CHECK(csv::quote("say \"hi\"") == "\"say \"\"hi\"\"\"");
    CHECK(csv::quote("two\nlines") == "\"two\nlines\"");
}

TEST_CASE("split_record inverts quote") {
    const std::vector<std::string> fields{"plain", "with,comma", "with \"quotes\"", "", "1.5"};
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + csv::quote(fields[i]);
    CHECK(csv::split_record(line) == fields);
    CHECK(csv::split_record("a,b\r") == std::vector<std::string>{"a", "b"});
}

TEST_CASE("format_number round-trips doubles and floats") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double d = u(rng) * std::pow(10.0, i % 20 - 10);
        CHECK(std::stod(csv::format_number(d)) == d);
        const float f = static_cast<float>(d);
        CHECK(std::stof(csv::format_number(f)) == f);
    }
    CHECK(csv::format_number(0.5) == "0.5");
    CHECK(csv::format_number(3.0) == "3");
}

TEST_CASE("Writer writes the header once when appending") {
    toy::TempDir dir("csv");
    const auto path = dir / "log.csv";
    {
        csv::Writer w(path, {"a", "b"}, true);
        w.values(1, 0.25);
    }
    {
        csv::Writer w(path, {"a", "b"}, true);
        w.values(2, std::string("x,y"));
    }
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "a,b\n1,0.25\n2,\"x,y\"\n");
}
