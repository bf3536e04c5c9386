#include "cachecnn/lp_format.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <set>

namespace cachecnn {
namespace {

enum class Section { kNone, kObjective, kConstraints, kBounds, kBinaries, kGenerals, kEnd };

struct Token {
  enum Kind { kNumber, kName, kOp, kColon, kSign } kind;
  std::string text;
  double number = 0;
  int line = 0;
};

bool is_name_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '!' ||
         c == '"' || c == '#' || c == '$' || c == '%' || c == '&' || c == '(' ||
         c == ')' || c == '/' || c == ',' || c == ';' || c == '?' || c == '@' ||
         c == '`' || c == '\'' || c == '{' || c == '}' || c == '|' || c == '~';
}
bool is_name_char(char c) {
  return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) ||
         c == '.';
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw LpParseError("LP line " + std::to_string(line) + ": " + what);
}

std::vector<Token> tokenize_line(const std::string& line, int number) {
  std::vector<Token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '\\') {
      break;
    } else if (c == ':') {
      out.push_back({Token::kColon, ":", 0, number});
      ++i;
    } else if (c == '+' || c == '-') {
      out.push_back({Token::kSign, std::string(1, c), 0, number});
      ++i;
    } else if (c == '<' || c == '>' || c == '=') {
      std::string op(1, c);
      ++i;
      if (i < line.size() && (line[i] == '=' || line[i] == '<' || line[i] == '>')) {
        op += line[i++];
      }
      if (op == "<" || op == "<=" || op == "=<") op = "<=";
      else if (op == ">" || op == ">=" || op == "=>") op = ">=";
      else if (op != "=") fail(number, "bad operator '" + op + "'");
      out.push_back({Token::kOp, op, 0, number});
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = line.c_str() + i;
      char* end = nullptr;
      const double v = std::strtod(begin, &end);
      if (end == begin) fail(number, "bad number");
      out.push_back({Token::kNumber, std::string(begin, static_cast<std::size_t>(end - begin)), v, number});
      i += static_cast<std::size_t>(end - begin);
    } else if (is_name_start(c)) {
      std::size_t j = i;
      while (j < line.size() && is_name_char(line[j])) ++j;
      out.push_back({Token::kName, line.substr(i, j - i), 0, number});
      i = j;
    } else {
      fail(number, std::string("unexpected character '") + c + "'");
    }
  }
  return out;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Returns the section a (lowercased) line switches to, or kNone.
Section section_keyword(const std::string& raw, bool& minimize) {
  std::string s = lower(raw);
  s.erase(0, s.find_first_not_of(" \t"));
  s.erase(s.find_last_not_of(" \t\r") + 1);
  if (s == "minimize" || s == "minimum" || s == "min") {
    minimize = true;
    return Section::kObjective;
  }
  if (s == "maximize" || s == "maximum" || s == "max") {
    minimize = false;
    return Section::kObjective;
  }
  if (s == "subject to" || s == "such that" || s == "st" || s == "s.t.") {
    return Section::kConstraints;
  }
  if (s == "bounds" || s == "bound") return Section::kBounds;
  if (s == "binaries" || s == "binary" || s == "bin") return Section::kBinaries;
  if (s == "generals" || s == "general" || s == "gen") return Section::kGenerals;
  if (s == "end") return Section::kEnd;
  return Section::kNone;
}

class ExpressionReader {
 public:
  ExpressionReader(const std::vector<Token>& tokens, std::size_t& pos)
      : tokens_(tokens), pos_(pos) {}

  // Reads "[name:] terms" up to a relational operator or the end.
  void read(std::vector<LpTerm>& terms, double& constant) {
    while (pos_ < tokens_.size() && tokens_[pos_].kind != Token::kOp) {
      double sign = 1;
      bool have_sign = false;
      while (pos_ < tokens_.size() && tokens_[pos_].kind == Token::kSign) {
        if (tokens_[pos_].text == "-") sign = -sign;
        have_sign = true;
        ++pos_;
      }
      if (!terms.empty() || constant != 0 || seen_any_) {
        if (!have_sign) fail(line(), "missing '+' or '-' between terms");
      }
      if (pos_ >= tokens_.size()) fail(line(), "dangling sign");
      double coef = 1;
      bool have_coef = false;
      if (tokens_[pos_].kind == Token::kNumber) {
        coef = tokens_[pos_].number;
        have_coef = true;
        ++pos_;
      }
      if (pos_ < tokens_.size() && tokens_[pos_].kind == Token::kName) {
        terms.push_back({sign * coef, tokens_[pos_].text});
        ++pos_;
      } else if (have_coef) {
        constant += sign * coef;
      } else {
        fail(line(), "expected a coefficient or variable");
      }
      seen_any_ = true;
    }
  }

 private:
  int line() const {
    return pos_ < tokens_.size() ? tokens_[pos_].line
                                 : (tokens_.empty() ? 0 : tokens_.back().line);
  }

  const std::vector<Token>& tokens_;
  std::size_t& pos_;
  bool seen_any_ = false;
};

bool has_label(const std::vector<Token>& t, std::size_t pos) {
  return pos + 1 < t.size() && t[pos].kind == Token::kName &&
         t[pos + 1].kind == Token::kColon;
}

double read_signed_number(const std::vector<Token>& t, std::size_t& pos) {
  double sign = 1;
  while (pos < t.size() && t[pos].kind == Token::kSign) {
    if (t[pos].text == "-") sign = -sign;
    ++pos;
  }
  if (pos < t.size() && t[pos].kind == Token::kName) {
    const std::string s = lower(t[pos].text);
    if (s == "inf" || s == "infinity") {
      ++pos;
      return sign * 1e300;
    }
  }
  if (pos >= t.size() || t[pos].kind != Token::kNumber) {
    fail(pos < t.size() ? t[pos].line : 0, "expected a number");
  }
  return sign * t[pos++].number;
}

LpSense to_sense(const Token& op) {
  if (op.text == "<=") return LpSense::kLessEqual;
  if (op.text == ">=") return LpSense::kGreaterEqual;
  return LpSense::kEqual;
}

}  // namespace

LpModel parse_lp(std::string_view text) {
  LpModel model;
  Section section = Section::kNone;
  // Objective and constraint rows may wrap, so tokens are gathered per
  // section and parsed when the section closes.
  std::vector<Token> pending;
  std::set<std::string> known;
  auto note_var = [&](const std::string& v) {
    if (known.insert(v).second) model.variables.push_back(v);
  };

  auto flush = [&](Section closing) {
    std::size_t pos = 0;
    if (closing == Section::kObjective) {
      if (has_label(pending, pos)) {
        model.objective_name = pending[pos].text;
        pos += 2;
      }
      ExpressionReader(pending, pos).read(model.objective, model.objective_constant);
      if (pos != pending.size()) fail(pending[pos].line, "operator in objective");
      for (const LpTerm& term : model.objective) note_var(term.variable);
    } else if (closing == Section::kConstraints) {
      while (pos < pending.size()) {
        LpRow row;
        if (has_label(pending, pos)) {
          row.name = pending[pos].text;
          pos += 2;
        } else {
          row.name = "R" + std::to_string(model.rows.size() + 1);
        }
        double constant = 0;
        ExpressionReader(pending, pos).read(row.terms, constant);
        if (row.terms.empty()) fail(pending[std::min(pos, pending.size() - 1)].line,
                                    "row '" + row.name + "' has no variables");
        if (pos >= pending.size()) fail(pending.back().line, "row without operator");
        row.sense = to_sense(pending[pos++]);
        row.rhs = read_signed_number(pending, pos) - constant;
        for (const LpTerm& term : row.terms) note_var(term.variable);
        model.rows.push_back(std::move(row));
      }
    }
    pending.clear();
  };

  std::size_t start = 0;
  int line_no = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string line(text.substr(start, end - start));
    start = end + 1;
    ++line_no;

    bool minimize = model.minimize;
    const Section next = section_keyword(line, minimize);
    if (next != Section::kNone) {
      if (next == Section::kObjective && section != Section::kNone) {
        fail(line_no, "objective section must come first");
      }
      flush(section);
      model.minimize = minimize;
      section = next;
      if (section == Section::kEnd) break;
      continue;
    }
    const std::vector<Token> tokens = tokenize_line(line, line_no);
    if (tokens.empty()) continue;
    switch (section) {
      case Section::kNone:
        fail(line_no, "content before the objective section");
      case Section::kObjective:
      case Section::kConstraints:
        pending.insert(pending.end(), tokens.begin(), tokens.end());
        break;
      case Section::kBounds: {
        // "lo <= v <= hi", "v >= lo", "v <= hi", "v = value", "v free"
        std::size_t pos = 0;
        if (tokens.size() == 2 && tokens[0].kind == Token::kName &&
            lower(tokens[1].text) == "free") {
          model.bounds[tokens[0].text] = {-1e300, 1e300};
          note_var(tokens[0].text);
          break;
        }
        if (tokens[0].kind == Token::kName && lower(tokens[0].text) != "inf" &&
            lower(tokens[0].text) != "infinity") {
          const std::string var = tokens[0].text;
          pos = 1;
          if (pos >= tokens.size() || tokens[pos].kind != Token::kOp) {
            fail(line_no, "bound needs an operator");
          }
          const std::string op = tokens[pos++].text;
          const double v = read_signed_number(tokens, pos);
          LpBound& b = model.bounds[var];
          if (op == ">=") b.lower = v;
          else if (op == "<=") b.upper = v;
          else b.lower = b.upper = v;
          note_var(var);
        } else {
          const double lo = read_signed_number(tokens, pos);
          if (pos >= tokens.size() || tokens[pos].kind != Token::kOp) {
            fail(line_no, "bound needs an operator");
          }
          const std::string op1 = tokens[pos++].text;
          if (pos >= tokens.size() || tokens[pos].kind != Token::kName) {
            fail(line_no, "bound needs a variable");
          }
          const std::string var = tokens[pos++].text;
          LpBound& b = model.bounds[var];
          if (op1 == "<=") b.lower = lo;
          else if (op1 == ">=") b.upper = lo;
          else b.lower = b.upper = lo;
          if (pos < tokens.size()) {
            const std::string op2 = tokens[pos++].text;
            const double hi = read_signed_number(tokens, pos);
            if (op2 == "<=") b.upper = hi;
            else if (op2 == ">=") b.lower = hi;
            else fail(line_no, "bad double bound");
          }
          note_var(var);
        }
        if (pos != tokens.size()) fail(line_no, "trailing tokens in bound");
        break;
      }
      case Section::kBinaries:
      case Section::kGenerals:
        for (const Token& t : tokens) {
          if (t.kind != Token::kName) fail(line_no, "expected variable names");
          (section == Section::kBinaries ? model.binaries : model.generals)
              .push_back(t.text);
          note_var(t.text);
        }
        break;
      case Section::kEnd:
        break;
    }
  }
  if (section != Section::kEnd) fail(line_no, "missing End");
  return model;
}

double LpModel::objective_value(const std::map<std::string, double>& values) const {
  double v = objective_constant;
  for (const LpTerm& t : objective) {
    auto it = values.find(t.variable);
    if (it != values.end()) v += t.coefficient * it->second;
  }
  return v;
}

double LpModel::max_violation(const std::map<std::string, double>& values) const {
  auto value = [&](const std::string& v) {
    auto it = values.find(v);
    return it == values.end() ? 0.0 : it->second;
  };
  double worst = 0;
  for (const LpRow& row : rows) {
    double lhs = 0;
    for (const LpTerm& t : row.terms) lhs += t.coefficient * value(t.variable);
    switch (row.sense) {
      case LpSense::kLessEqual: worst = std::max(worst, lhs - row.rhs); break;
      case LpSense::kGreaterEqual: worst = std::max(worst, row.rhs - lhs); break;
      case LpSense::kEqual: worst = std::max(worst, std::abs(lhs - row.rhs)); break;
    }
  }
  for (const auto& [name, b] : bounds) {
    const double v = value(name);
    worst = std::max({worst, b.lower - v, v - b.upper});
  }
  for (const std::string& name : binaries) {
    const double v = value(name);
    worst = std::max(worst, std::min(std::abs(v), std::abs(v - 1)));
  }
  return worst;
}

MilpCensus milp_census(int flows, int ars, int ecs, int links) {
  const long k = flows, a = ars, e = ecs, l = links;
  MilpCensus c;
  c.single_host = k;
  c.ec_capacity = e;
  c.unique_retrieval = k * a;
  c.retrieval_hosted = k * a * e;
  c.link_capacity = l;
  c.link_path = 2 * k * l;
  c.t_definition = e;
  c.chi_linking = 3 * k * e;
  c.binaries = k * e + k * l + k * a * e;
  c.variables = c.binaries + e + k * e;
  return c;
}

}  // namespace cachecnn
