#include "ductsr/filter.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ductsr {

const char* name(Feature f) {
  switch (f) {
    case Feature::Re: return "re";
    case Feature::X: return "x";
    case Feature::Y: return "y";
    case Feature::Z: return "z";
    case Feature::X2: return "x2";
    case Feature::Y2: return "y2";
    case Feature::Z2: return "z2";
    case Feature::X3: return "x3";
    case Feature::Y3: return "y3";
    case Feature::Z3: return "z3";
    case Feature::X4: return "x4";
    case Feature::Y4: return "y4";
    case Feature::Z4: return "z4";
    case Feature::Nested: return "nested";
  }
  return "?";
}

namespace {

constexpr Feature kAllFeatures[] = {
    Feature::Re, Feature::X,  Feature::Y,  Feature::Z,  Feature::X2, Feature::Y2, Feature::Z2,
    Feature::X3, Feature::Y3, Feature::Z3, Feature::X4, Feature::Y4, Feature::Z4, Feature::Nested};

}  // namespace

std::optional<Feature> feature_from_name(std::string_view text) {
  for (Feature f : kAllFeatures)
    if (text == name(f)) return f;
  return std::nullopt;
}

bool has_feature(const ExprFeatures& fe, Feature f) {
  switch (f) {
    case Feature::Re: return fe.contains_re;
    case Feature::X: return fe.contains_x;
    case Feature::Y: return fe.contains_y;
    case Feature::Z: return fe.contains_z;
    case Feature::X2: return fe.has_x2;
    case Feature::Y2: return fe.has_y2;
    case Feature::Z2: return fe.has_z2;
    case Feature::X3: return fe.has_x3;
    case Feature::Y3: return fe.has_y3;
    case Feature::Z3: return fe.has_z3;
    case Feature::X4: return fe.has_x4;
    case Feature::Y4: return fe.has_y4;
    case Feature::Z4: return fe.has_z4;
    case Feature::Nested: return fe.nested;
  }
  return false;
}

void set_feature(ExprFeatures& fe, Feature f) {
  switch (f) {
    case Feature::Re: fe.contains_re = true; break;
    case Feature::X: fe.contains_x = true; break;
    case Feature::Y: fe.contains_y = true; break;
    case Feature::Z: fe.contains_z = true; break;
    case Feature::X2: fe.has_x2 = true; break;
    case Feature::Y2: fe.has_y2 = true; break;
    case Feature::Z2: fe.has_z2 = true; break;
    case Feature::X3: fe.has_x3 = true; break;
    case Feature::Y3: fe.has_y3 = true; break;
    case Feature::Z3: fe.has_z3 = true; break;
    case Feature::X4: fe.has_x4 = true; break;
    case Feature::Y4: fe.has_y4 = true; break;
    case Feature::Z4: fe.has_z4 = true; break;
    case Feature::Nested: fe.nested = true; break;
  }
}

FactsParseError::FactsParseError(const std::string& detail, std::size_t line)
    : Error("line " + std::to_string(line) + ": " + detail), line_(line) {}

std::vector<EquationFact> facts_from_frontier(const ParetoFrontier& frontier) {
  std::vector<EquationFact> facts;
  facts.reserve(frontier.size());
  for (const ParetoEntry& e : frontier.entries()) {
    EquationFact f;
    f.id = e.id;
    f.complexity = e.complexity;
    f.loss = std::llround(e.loss);  // rounds halves away from zero
    f.expression = format_expression(e.expression);
    f.features = extract_features(e.expression);
    facts.push_back(std::move(f));
  }
  std::sort(facts.begin(), facts.end(),
            [](const EquationFact& a, const EquationFact& b) { return a.id < b.id; });
  return facts;
}

namespace {

struct Cursor {
  std::string_view text;
  std::size_t pos = 0;
  std::size_t line = 0;

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }
  bool eat(char c) {
    skip_ws();
    if (pos < text.size() && text[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  void expect(char c, const char* what) {
    if (!eat(c)) throw FactsParseError(std::string("expected '") + c + "' " + what, line);
  }
  long long integer(const char* what) {
    skip_ws();
    std::size_t start = pos;
    if (pos < text.size() && (text[pos] == '-' || text[pos] == '+')) ++pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    long long value = 0;
    auto [end, ec] = std::from_chars(text.data() + start, text.data() + pos, value);
    if (ec != std::errc() || end != text.data() + pos || pos == start)
      throw FactsParseError(std::string("expected an integer ") + what, line);
    return value;
  }
  std::string quoted_string() {
    skip_ws();
    if (pos >= text.size() || text[pos] != '"')
      throw FactsParseError("expected a quoted expression string", line);
    ++pos;
    std::size_t start = pos;
    while (pos < text.size() && text[pos] != '"') ++pos;
    if (pos >= text.size()) throw FactsParseError("unterminated string", line);
    std::string s(text.substr(start, pos - start));
    ++pos;
    return s;
  }
  bool at_end() {
    skip_ws();
    return pos >= text.size();
  }
};

std::string strip_comment(std::string_view line) {
  bool in_quote = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_quote = !in_quote;
    if (line[i] == '%' && !in_quote) return std::string(line.substr(0, i));
  }
  return std::string(line);
}

}  // namespace

std::vector<EquationFact> parse_facts(std::string_view text) {
  struct Declared {
    long long id;
    Feature feature;
    std::size_t line;
  };
  std::vector<EquationFact> facts;
  std::map<long long, std::size_t> index;  // id -> position in facts
  std::map<long long, std::size_t> eq_line;
  std::vector<Declared> declared;

  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view raw =
        text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    const std::string stripped = strip_comment(raw);

    Cursor cur{stripped, 0, lineno};
    if (cur.at_end()) continue;

    cur.skip_ws();
    std::size_t ident_start = cur.pos;
    while (cur.pos < stripped.size() &&
           (std::isalnum(static_cast<unsigned char>(stripped[cur.pos])) ||
            stripped[cur.pos] == '_'))
      ++cur.pos;
    const std::string predicate = stripped.substr(ident_start, cur.pos - ident_start);
    if (predicate.empty()) throw FactsParseError("expected a predicate", lineno);

    if (predicate == "eq") {
      cur.expect('(', "after eq");
      EquationFact fact;
      fact.id = cur.integer("id");
      cur.expect(',', "after the id");
      fact.complexity = cur.integer("complexity");
      cur.expect(',', "after the complexity");
      fact.loss = cur.integer("loss");
      cur.expect(',', "after the loss");
      fact.expression = cur.quoted_string();
      cur.expect(')', "after the expression");
      cur.expect('.', "to end the fact");
      if (!cur.at_end()) throw FactsParseError("trailing text after the fact", lineno);
      if (fact.id < 0) throw FactsParseError("ids must be non-negative", lineno);
      if (fact.complexity < 1) throw FactsParseError("complexity must be at least 1", lineno);
      if (fact.loss < 0) throw FactsParseError("loss must be non-negative", lineno);
      if (index.count(fact.id))
        throw FactsParseError("duplicate equation id " + std::to_string(fact.id), lineno);
      index[fact.id] = facts.size();
      eq_line[fact.id] = lineno;
      facts.push_back(std::move(fact));
    } else if (predicate.rfind("contains_", 0) == 0) {
      const std::string feat_name = predicate.substr(9);
      const auto feature = feature_from_name(feat_name);
      if (!feature)
        throw FactsParseError("unknown feature predicate '" + predicate + "'", lineno);
      cur.expect('(', "after the predicate");
      const long long id = cur.integer("id");
      cur.expect(')', "after the id");
      cur.expect('.', "to end the fact");
      if (!cur.at_end()) throw FactsParseError("trailing text after the fact", lineno);
      declared.push_back(Declared{id, *feature, lineno});
    } else {
      throw FactsParseError("unknown predicate '" + predicate + "'", lineno);
    }
  }

  // features recomputed from the expression strings...
  for (EquationFact& fact : facts) {
    try {
      fact.features = extract_features(parse_expression(fact.expression));
    } catch (const ExprParseError& ex) {
      throw FactsParseError(
          "equation " + std::to_string(fact.id) + ": " + ex.what(), eq_line[fact.id]);
    }
  }
  // ...supplemented by the declared predicates
  for (const auto& d : declared) {
    auto it = index.find(d.id);
    if (it == index.end())
      throw FactsParseError("contains_" + std::string(name(d.feature)) + " references unknown id " +
                                std::to_string(d.id),
                            d.line);
    set_feature(facts[it->second].features, d.feature);
  }
  // a declared power of a variable the expression provably lacks contradicts
  // the expression text
  for (const auto& d : declared) {
    const ExprFeatures& fe = facts[index[d.id]].features;
    bool consistent = true;
    switch (d.feature) {
      case Feature::X2:
      case Feature::X3:
      case Feature::X4: consistent = fe.contains_x; break;
      case Feature::Y2:
      case Feature::Y3:
      case Feature::Y4: consistent = fe.contains_y; break;
      case Feature::Z2:
      case Feature::Z3:
      case Feature::Z4: consistent = fe.contains_z; break;
      default: break;
    }
    if (!consistent)
      throw FactsParseError("contains_" + std::string(name(d.feature)) + "(" +
                                std::to_string(d.id) + ") contradicts the equation text",
                            d.line);
  }

  std::sort(facts.begin(), facts.end(),
            [](const EquationFact& a, const EquationFact& b) { return a.id < b.id; });
  return facts;
}

std::vector<EquationFact> read_facts_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for reading");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_facts(ss.str());
}

std::string render_facts(const std::vector<EquationFact>& facts) {
  std::string out;
  bool first = true;
  for (const EquationFact& f : facts) {
    if (!first) out.push_back('\n');
    first = false;
    out += "eq(" + std::to_string(f.id) + ", " + std::to_string(f.complexity) + ", " +
           std::to_string(f.loss) + ", \"" + f.expression + "\").\n";
    for (Feature feat : kAllFeatures) {
      if (has_feature(f.features, feat))
        out += "contains_" + std::string(name(feat)) + "(" + std::to_string(f.id) + ").\n";
    }
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::string item =
        trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                             : comma - start));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool is_power_or_nested(Feature f) {
  return f != Feature::Re && f != Feature::X && f != Feature::Y && f != Feature::Z;
}

}  // namespace

ConstraintProgram parse_constraints(std::string_view text) {
  ConstraintProgram program;
  std::size_t lineno = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string_view raw =
        text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start);
    start = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    std::string line(raw);
    if (const auto hash = line.find_first_of("#%"); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw FactsParseError("expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));

    if (key == "max_complexity" || key == "max_loss") {
      long long v = 0;
      auto [end, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || end != value.data() + value.size() || v < 0)
        throw FactsParseError("'" + key + "' needs a non-negative integer", lineno);
      (key == "max_complexity" ? program.max_complexity : program.max_loss) = v;
    } else if (key == "forbid") {
      for (const std::string& item : split_list(value)) {
        const auto f = feature_from_name(item);
        if (!f || !is_power_or_nested(*f))
          throw FactsParseError("'" + item + "' cannot be forbidden (use x2..z4 or nested)",
                                lineno);
        program.forbidden.push_back(*f);
      }
    } else if (key == "require") {
      for (const std::string& item : split_list(value)) {
        const auto f = feature_from_name(item);
        if (!f || is_power_or_nested(*f))
          throw FactsParseError("'" + item + "' cannot be required (use x, y, z or re)", lineno);
        program.required.push_back(*f);
      }
    } else {
      throw FactsParseError("unknown constraint key '" + key + "'", lineno);
    }
  }
  return program;
}

ConstraintProgram read_constraints_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(path, "cannot open for reading");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_constraints(ss.str());
}

bool eligible(const EquationFact& fact, const ConstraintProgram& program) {
  if (program.max_complexity && fact.complexity > *program.max_complexity) return false;
  if (program.max_loss && fact.loss > *program.max_loss) return false;
  for (Feature f : program.forbidden)
    if (has_feature(fact.features, f)) return false;
  return true;
}

Selection solve(const std::vector<EquationFact>& facts, const ConstraintProgram& program) {
  Selection sel;
  for (const EquationFact& f : facts)
    if (eligible(f, program)) sel.selected.push_back(f);
  std::sort(sel.selected.begin(), sel.selected.end(),
            [](const EquationFact& a, const EquationFact& b) { return a.id < b.id; });
  for (Feature f : program.required) {
    const bool carried = std::any_of(sel.selected.begin(), sel.selected.end(),
                                     [&](const EquationFact& e) { return has_feature(e.features, f); });
    if (!carried) {
      sel.sat = false;
      sel.violation = std::string("no eligible equation carries the required feature '") +
                      name(f) + "'";
      sel.selected.clear();
      return sel;
    }
  }
  sel.sat = true;
  return sel;
}

std::vector<Verdict> explain(const std::vector<EquationFact>& facts,
                             const ConstraintProgram& program) {
  std::vector<const EquationFact*> ordered;
  ordered.reserve(facts.size());
  for (const EquationFact& f : facts) ordered.push_back(&f);
  std::sort(ordered.begin(), ordered.end(),
            [](const EquationFact* a, const EquationFact* b) { return a->id < b->id; });

  std::vector<Verdict> verdicts;
  for (const EquationFact* f : ordered) {
    Verdict v;
    v.id = f->id;
    v.eligible = true;
    if (program.max_complexity && f->complexity > *program.max_complexity) {
      v.eligible = false;
      v.reasons.push_back("complexity " + std::to_string(f->complexity) + " > " +
                          std::to_string(*program.max_complexity));
    }
    if (program.max_loss && f->loss > *program.max_loss) {
      v.eligible = false;
      v.reasons.push_back("loss " + std::to_string(f->loss) + " > " +
                          std::to_string(*program.max_loss));
    }
    for (Feature feat : program.forbidden) {
      if (has_feature(f->features, feat)) {
        v.eligible = false;
        v.reasons.push_back(std::string("contains forbidden feature ") + name(feat));
      }
    }
    for (Feature feat : program.required) {
      if (has_feature(f->features, feat))
        v.reasons.push_back(std::string("contributes required feature ") + name(feat));
      else
        v.reasons.push_back(std::string("missing contains_") + name(feat));
    }
    verdicts.push_back(std::move(v));
  }
  return verdicts;
}

std::string render_selection(const Selection& selection) {
  std::string out;
  if (!selection.sat) {
    out += "UNSATISFIABLE\n-------------\n\n";
    out += selection.violation + "\n";
    return out;
  }
  out += "SELECTED EQUATIONS\n------------------\n";
  for (const EquationFact& f : selection.selected) {
    out += "\nID " + std::to_string(f.id) + ": " + f.expression + "\n";
    out += "Complexity: " + std::to_string(f.complexity) +
           ", Loss: " + std::to_string(f.loss) + "\n";
  }
  return out;
}

std::string selection_report_json(const Selection& selection, const std::vector<Verdict>& verdicts) {
  nlohmann::ordered_json doc;
  doc["status"] = selection.sat ? "SAT" : "UNSAT";
  doc["selected"] = nlohmann::ordered_json::array();
  for (const EquationFact& f : selection.selected) {
    nlohmann::ordered_json item;
    item["id"] = f.id;
    item["complexity"] = f.complexity;
    item["loss"] = f.loss;
    item["expression"] = f.expression;
    doc["selected"].push_back(std::move(item));
  }
  doc["violations"] = nlohmann::ordered_json::array();
  if (!selection.sat) doc["violations"].push_back(selection.violation);
  doc["explain"] = nlohmann::ordered_json::array();
  for (const Verdict& v : verdicts) {
    nlohmann::ordered_json item;
    item["id"] = v.id;
    item["eligible"] = v.eligible;
    item["reasons"] = v.reasons;
    doc["explain"].push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

}  // namespace ductsr
