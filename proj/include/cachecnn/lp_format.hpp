#ifndef CACHECNN_LP_FORMAT_HPP_
#define CACHECNN_LP_FORMAT_HPP_

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "cachecnn/common.hpp"

namespace cachecnn {

class LpParseError : public Error {
 public:
  using Error::Error;
};

enum class LpSense { kLessEqual, kGreaterEqual, kEqual };

struct LpTerm {
  double coefficient = 0;
  std::string variable;
};

struct LpRow {
  std::string name;
  std::vector<LpTerm> terms;
  LpSense sense = LpSense::kLessEqual;
  double rhs = 0;
};

struct LpBound {
  double lower = 0;
  double upper = 1e300;
};

// A parsed LP file: linear objective, rows, bounds and integrality marks.
struct LpModel {
  bool minimize = true;
  std::string objective_name;
  std::vector<LpTerm> objective;
  double objective_constant = 0;
  std::vector<LpRow> rows;
  std::map<std::string, LpBound> bounds;
  std::vector<std::string> binaries;
  std::vector<std::string> generals;
  // Every variable in order of first appearance.
  std::vector<std::string> variables;

  double objective_value(const std::map<std::string, double>& values) const;
  // Largest violation over rows, bounds and integrality.
  double max_violation(const std::map<std::string, double>& values) const;
};

// Parses the CPLEX LP grammar subset: Minimize/Maximize, Subject To,
// Bounds, Binaries, Generals, End; backslash comments; rows may wrap.
LpModel parse_lp(std::string_view text);

// Row and variable counts per constraint family of the caching program,
// derived symbolically from the set sizes.
struct MilpCensus {
  long single_host = 0;         // K
  long ec_capacity = 0;         // E
  long unique_retrieval = 0;    // K A
  long retrieval_hosted = 0;    // K A E
  long link_capacity = 0;       // L
  long link_path = 0;           // 2 K L
  long t_definition = 0;        // E
  long chi_linking = 0;         // 3 K E
  long variables = 0;           // K E + K L + K A E + E + K E
  long binaries = 0;            // K E + K L + K A E

  long constraints() const {
    return single_host + ec_capacity + unique_retrieval + retrieval_hosted +
           link_capacity + link_path + t_definition + chi_linking;
  }
};

MilpCensus milp_census(int flows, int ars, int ecs, int links);

}  // namespace cachecnn

#endif  // CACHECNN_LP_FORMAT_HPP_
