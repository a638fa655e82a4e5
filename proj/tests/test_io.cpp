#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "gbd/io.hpp"
#include "gbd/rng.hpp"

using gbd::Matrix;

TEST_CASE("format_double round-trips exactly") {
  gbd::Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, 40.0 * (rng.uniform() - 0.5));
    const std::string s = gbd::format_double(x);
    CHECK(std::stod(s) == x);
  }
  CHECK(gbd::format_double(0.0) == "0");
  CHECK(gbd::format_double(1.0) == "1");
  CHECK(gbd::format_double(0.1) == "0.1");
  CHECK(gbd::format_double(-2.5) == "-2.5");
}

TEST_CASE("matrix CSV round-trips bit for bit") {
  gbd::Rng rng(7);
  const Matrix m = gbd::random_gaussian_matrix(9, 4, rng);
  std::stringstream ss;
  gbd::save_matrix_csv(m, ss);
  const Matrix back = gbd::load_matrix_csv(ss);
  REQUIRE(back.rows() == 9);
  REQUIRE(back.cols() == 4);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);

  // Serialization itself is byte-stable.
  std::stringstream ss2;
  gbd::save_matrix_csv(m, ss2);
  std::stringstream ss3;
  gbd::save_matrix_csv(m, ss3);
  CHECK(ss2.str() == ss3.str());
}

TEST_CASE("CSV header and first line") {
  Matrix m(2, 2);
  m << 1.0, 0.5, -3.0, 0.0;
  std::stringstream ss;
  gbd::save_matrix_csv(m, ss);
  std::string line;
  std::getline(ss, line);
  CHECK(line == "2,2");
  std::getline(ss, line);
  CHECK(line == "1,0.5");
}

TEST_CASE("malformed CSVs are rejected with precise errors") {
  auto load = [](const std::string& text) {
    std::stringstream ss(text);
    return gbd::load_matrix_csv(ss);
  };
  CHECK_THROWS_AS(load(""), gbd::InputError);
  CHECK_THROWS_AS(load("2,2\n1,2\n"), gbd::InputError);            // truncated
  CHECK_THROWS_AS(load("1,2\n1\n"), gbd::InputError);              // short row
  CHECK_THROWS_AS(load("1,2\n1,2,3\n"), gbd::InputError);          // long row
  CHECK_THROWS_AS(load("1,2\n1,abc\n"), gbd::InputError);          // non-number
  CHECK_THROWS_AS(load("bad header\n"), gbd::InputError);
  CHECK_THROWS_AS(load("0,2\n"), gbd::InputError);                 // empty dims
  CHECK_THROWS_AS(load("1,1\nnan\n"), gbd::InputError);            // non-finite
}

TEST_CASE("file-path overloads create and read back a file") {
  gbd::Rng rng(3);
  const Matrix m = gbd::random_gaussian_matrix(5, 5, rng);
  const std::string path = "test_io_roundtrip.csv";
  gbd::save_matrix_csv(m, path);
  const Matrix back = gbd::load_matrix_csv(path);
  CHECK((back - m).cwiseAbs().maxCoeff() == 0.0);
  std::remove(path.c_str());

  CHECK_THROWS_AS(gbd::load_matrix_csv("definitely_missing_file.csv"),
                  gbd::InputError);
}
