#include "doctest.h"

#include "cachecnn/lp_format.hpp"

using namespace cachecnn;

namespace {

const char* kSample = R"(\ a small mixed program
Minimize
 cost: 3 x + 2 y
   - 0.5 z + 4
Subject To
 c1: x + y <= 1
 c2: 2 x
     + 3 z >= 1.5
 -y + z = 0
 c4: x - 2 >= -1
Bounds
 z >= 1
 -2 <= w <= 5
 y free
 v <= inf
Binaries
 x
 y
Generals
 w
End
)";

}  // namespace

TEST_CASE("parse a wrapped, commented LP") {
  const LpModel m = parse_lp(kSample);
  CHECK(m.minimize);
  CHECK(m.objective_name == "cost");
  REQUIRE(m.objective.size() == 3);
  CHECK(m.objective[2].coefficient == -0.5);
  CHECK(m.objective[2].variable == "z");
  CHECK(m.objective_constant == 4);

  REQUIRE(m.rows.size() == 4);
  CHECK(m.rows[0].name == "c1");
  CHECK(m.rows[0].sense == LpSense::kLessEqual);
  CHECK(m.rows[1].terms.size() == 2);
  CHECK(m.rows[1].rhs == 1.5);
  CHECK(m.rows[1].sense == LpSense::kGreaterEqual);
  CHECK(m.rows[2].name == "R3");
  CHECK(m.rows[2].sense == LpSense::kEqual);
  CHECK(m.rows[2].terms[0].coefficient == -1);
  // The constant moves to the right-hand side: x >= 1.
  CHECK(m.rows[3].rhs == 1);

  CHECK(m.bounds.at("z").lower == 1);
  CHECK(m.bounds.at("w").lower == -2);
  CHECK(m.bounds.at("w").upper == 5);
  CHECK(m.bounds.at("y").lower == -1e300);
  CHECK(m.bounds.at("v").upper == 1e300);
  CHECK(m.binaries == std::vector<std::string>{"x", "y"});
  CHECK(m.generals == std::vector<std::string>{"w"});
  CHECK(m.variables == std::vector<std::string>{"x", "y", "z", "w", "v"});
}

TEST_CASE("objective value and violations at a point") {
  const LpModel m = parse_lp(kSample);
  std::map<std::string, double> p{{"x", 1}, {"y", 0}, {"z", 0}, {"w", 0}, {"v", 0}};
  CHECK(m.objective_value(p) == doctest::Approx(7));
  // R3 needs z = y; z >= 1 bound is violated by 1.
  CHECK(m.max_violation(p) == doctest::Approx(1));
  p["z"] = 1;
  p["y"] = 1;
  // Now c1 reads 2 <= 1.
  CHECK(m.max_violation(p) == doctest::Approx(1));
  p["y"] = 0.5;
  // Fractional binary.
  CHECK(m.max_violation(p) >= 0.5 - 1e-12);
  p = {{"x", 1}, {"y", 0}, {"z", 1}, {"w", 0}, {"v", 0}};
  CHECK(m.max_violation(p) == doctest::Approx(1));  // R3: -0 + 1 = 0 fails by 1
}

TEST_CASE("maximize and alternative keywords") {
  const LpModel m = parse_lp("max\n a\ns.t.\n a <= 2\nbin\n a\nend\n");
  CHECK_FALSE(m.minimize);
  CHECK(m.rows.size() == 1);
  CHECK(m.binaries.size() == 1);
}

TEST_CASE("errors carry the line number") {
  CHECK_THROWS_WITH_AS(parse_lp("Minimize\n x y\nEnd\n"),
                       doctest::Contains("LP line"), LpParseError);
  CHECK_THROWS_WITH_AS(parse_lp("Minimize\n x\nSubject To\n c: x <= \nEnd\n"),
                       doctest::Contains("expected a number"), LpParseError);
  CHECK_THROWS_WITH_AS(parse_lp("Minimize\n x\n"), doctest::Contains("missing End"),
                       LpParseError);
  CHECK_THROWS_WITH_AS(parse_lp("x <= 1\nEnd\n"), doctest::Contains("line 1"),
                       LpParseError);
  CHECK_THROWS_AS(parse_lp("Minimize\n x ^ 2\nEnd\n"), LpParseError);
}

TEST_CASE("census formula per constraint family") {
  const MilpCensus c = milp_census(5, 8, 6, 14);
  CHECK(c.single_host == 5);
  CHECK(c.ec_capacity == 6);
  CHECK(c.unique_retrieval == 40);
  CHECK(c.retrieval_hosted == 240);
  CHECK(c.link_capacity == 14);
  CHECK(c.link_path == 140);
  CHECK(c.t_definition == 6);
  CHECK(c.chi_linking == 90);
  CHECK(c.constraints() == 541);
  CHECK(c.variables == 376);
  CHECK(c.binaries == 30 + 70 + 240);
  // The variable count grows by 74 per request, as in the four-scale table.
  CHECK(milp_census(10, 8, 6, 14).variables == 746);
  CHECK(milp_census(15, 8, 6, 14).variables == 1116);
  CHECK(milp_census(20, 8, 6, 14).variables == 1486);
}
