#include "fixtures.hpp"
#include "survcbps/dataset.hpp"
#include "survcbps/errors.hpp"
#include "survcbps/sim.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

using namespace survcbps;

TEST_CASE("parse_csv reads a small valid file") {
  std::istringstream in("y,delta,d,x1,x2\n1.5,1,1,0.1,0.2\n2,1,0,-1,3\n0.25,0,1,4e-1,5\n");
  const Dataset data = parse_csv(in);
  CHECK(data.n() == 3);
  CHECK(data.p() == 2);
  CHECK(data.y()[2] == 0.25);
  CHECK(data.x()(2, 0) == 0.4);
  CHECK(data.covariate_names() == std::vector<std::string>{"x1", "x2"});
}

TEST_CASE("parse_csv names the offending row and column") {
  std::string text = "y,delta,d,x1\n";
  for (int r = 1; r <= 6; ++r) text += "1," + std::to_string(r % 2) + "," + (r == 5 ? "2" : std::to_string(r % 2)) + ",0.5\n";
  std::istringstream in(text);
  try {
    parse_csv(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.row() == 5);
    CHECK(e.column() == "d");
  }
}

TEST_CASE("parse_csv rejects bad cells and schemas") {
  auto parse = [](const std::string& text, const CsvSchema& schema = {}) {
    std::istringstream in(text);
    return parse_csv(in, schema);
  };
  const std::string header = "y,delta,d,x1\n";
  const std::string ok = "1,1,1,0\n2,1,0,1\n";
  CHECK_THROWS_AS(parse(header + ok + "-1,1,0,0\n"), ParseError);
  CHECK_THROWS_AS(parse(header + ok + "1,1,0,nan\n"), ParseError);
  CHECK_THROWS_AS(parse(header + ok + "1,1,0,inf\n"), ParseError);
  CHECK_THROWS_AS(parse(header + ok + "1,1,0,\n"), ParseError);
  CHECK_THROWS_AS(parse(header + ok + "1,1,0,abc\n"), ParseError);
  CHECK_THROWS_AS(parse(header + ok + "1,0.5,0,1\n"), ParseError);
  CHECK_THROWS_AS(parse("y,d,x1\n1,1,0\n"), SchemaError);
  CHECK_THROWS_AS(parse("y,delta,d,x1,x3\n1,1,1,0,0\n2,1,0,0,0\n"), SchemaError);
  // Degenerate: no event in the control arm.
  CHECK_THROWS_AS(parse(header + "1,1,1,0\n2,0,0,1\n"), DegenerateError);
}

TEST_CASE("parse_csv honours an explicit column mapping") {
  std::istringstream in("time,event,trt,age,sex\n3,1,1,50,0\n4,1,0,60,1\n");
  const Dataset data = parse_csv(in, CsvSchema{"time", "event", "trt", {"sex", "age"}});
  CHECK(data.p() == 2);
  CHECK(data.x()(0, 0) == 0.0);
  CHECK(data.x()(0, 1) == 50.0);
  CHECK(data.covariate_names() == std::vector<std::string>{"sex", "age"});
}

TEST_CASE("write then parse reproduces a generated dataset exactly") {
  SimConfig config;
  config.n = 1000;
  config.p = 50;
  const Dataset original = generate_dataset(config, 12345, 0.2).data;
  std::stringstream buffer;
  write_csv(original, buffer);
  const Dataset back = parse_csv(buffer);
  CHECK(back == original);
}

TEST_CASE("summarize reports censoring rates") {
  const Dataset all_events = fixtures::make({1, 2, 3, 4}, {1, 1, 1, 1}, {1, 0, 1, 0}, {{0}, {0}, {0}, {0}});
  CHECK(summarize(all_events).censoring_rate == 0.0);

  const Dataset half = fixtures::make({1, 2, 3, 4}, {1, 0, 1, 0}, {1, 1, 0, 0}, {{0}, {0}, {0}, {0}});
  const DatasetSummary s = summarize(half);
  CHECK(s.censoring_rate == 0.5);
  CHECK(s.treated_fraction == 0.5);
  CHECK(s.censoring_rate_treated == 0.5);
  CHECK(s.censoring_rate_control == 0.5);
}

TEST_CASE("summarize is invariant to record order") {
  std::mt19937_64 rng(7);
  const Dataset data = fixtures::random_dataset(rng, 40, 3, Eigen::Vector3d(0.5, -0.5, 0.0));
  std::vector<Eigen::Index> order(40);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const DatasetSummary a = summarize(data);
  const DatasetSummary b = summarize(data.select_rows(order));
  CHECK(a.treated_fraction == b.treated_fraction);
  CHECK(a.censoring_rate == b.censoring_rate);
  CHECK(a.censoring_rate_treated == b.censoring_rate_treated);
  CHECK(a.censoring_rate_control == b.censoring_rate_control);
}

TEST_CASE("simulated design has about 30% censoring") {
  SimConfig config;
  config.n = 2000;
  config.p = 10;
  config.beta_nonzero = 3;
  const double rate = calibrate_censoring_rate(config);
  for (int rep = 0; rep < 5; ++rep) {
    const DatasetSummary s = summarize(generate_dataset(config, replication_seed(1, rep), rate).data);
    CHECK(std::abs(s.censoring_rate - 0.30) <= 0.05);
  }
}

TEST_CASE("record constructor rejects invalid values") {
  CHECK_THROWS_AS(fixtures::make({-1.0}, {1}, {1}, {{0}}), DataError);
  CHECK_THROWS_AS(fixtures::make({1.0}, {2}, {1}, {{0}}), DataError);
  CHECK_THROWS_AS(fixtures::make({1.0}, {1}, {1}, {{std::nan("")}}), DataError);
}
