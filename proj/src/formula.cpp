#include "bayesd/formula.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "bayesd/data.hpp"
#include "bayesd/error.hpp"
#include "bayesd/io.hpp"

namespace bayesd {

namespace {

std::string strip(std::string_view s) { return std::string(io::trim(s)); }

// Splits on '+' that are not nested inside parentheses.
std::vector<std::string> split_top_level(std::string_view s) {
  std::vector<std::string> parts;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth < 0) throw DesignError("unbalanced parentheses in formula");
    if (c == '+' && depth == 0) {
      parts.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (depth != 0) throw DesignError("unbalanced parentheses in formula");
  parts.push_back(strip(cur));
  return parts;
}

bool valid_name(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.';
  });
}

void add_term(TermList& list, Term t) {
  if (std::find(list.terms.begin(), list.terms.end(), t) == list.terms.end()) list.terms.push_back(std::move(t));
}

void parse_fixed_piece(const std::string& piece, TermList& list, bool& saw_zero) {
  if (piece == "0" || piece == "-1") {
    list.intercept = false;
    saw_zero = true;
    return;
  }
  if (piece == "1") {
    list.intercept = true;
    return;
  }
  auto star = piece.find('*');
  if (star != std::string::npos) {
    const std::string a = strip(piece.substr(0, star)), b = strip(piece.substr(star + 1));
    if (!valid_name(a) || !valid_name(b)) throw DesignError("bad interaction term '" + piece + "'");
    add_term(list, Term{{a}});
    add_term(list, Term{{b}});
    add_term(list, Term{{a, b}});
    return;
  }
  auto colon = piece.find(':');
  if (colon != std::string::npos) {
    const std::string a = strip(piece.substr(0, colon)), b = strip(piece.substr(colon + 1));
    if (!valid_name(a) || !valid_name(b)) throw DesignError("bad interaction term '" + piece + "'");
    add_term(list, Term{{a, b}});
    return;
  }
  if (!valid_name(piece)) throw DesignError("bad term '" + piece + "'");
  add_term(list, Term{{piece}});
}

TermList parse_term_list(std::string_view text) {
  TermList list;
  bool saw_zero = false;
  for (const auto& piece : split_top_level(text)) {
    if (piece.empty()) throw DesignError("empty term in formula");
    parse_fixed_piece(piece, list, saw_zero);
  }
  // Interactions come after main effects, as in the usual model-matrix ordering.
  std::stable_sort(list.terms.begin(), list.terms.end(),
                   [](const Term& a, const Term& b) { return a.factors.size() < b.factors.size(); });
  return list;
}

std::string term_list_string(const TermList& list) {
  std::vector<std::string> parts;
  if (!list.intercept) parts.emplace_back("0");
  else if (list.terms.empty()) parts.emplace_back("1");
  for (const auto& t : list.terms) parts.push_back(t.label());
  return io::join(parts, " + ");
}

}  // namespace

std::string Term::label() const { return io::join(factors, ":"); }

std::string parse_formula(const std::string& text, Submodel& out) {
  const auto tilde = text.find('~');
  if (tilde == std::string::npos) throw DesignError("formula '" + text + "' has no '~'");
  const std::string lhs = strip(std::string_view(text).substr(0, tilde));
  const std::string rhs = strip(std::string_view(text).substr(tilde + 1));
  if (rhs.empty()) throw DesignError("formula '" + text + "' has an empty right-hand side");

  Submodel sub;
  std::vector<std::string> fixed_pieces;
  for (const auto& piece : split_top_level(rhs)) {
    if (piece.empty()) throw DesignError("empty term in formula '" + text + "'");
    if (piece.front() == '(') {
      if (piece.back() != ')') throw DesignError("bad group-level term '" + piece + "'");
      const std::string body = piece.substr(1, piece.size() - 2);
      const auto bar = body.find('|');
      if (bar == std::string::npos) throw DesignError("group-level term '" + piece + "' lacks '|'");
      bool correlated = true;
      std::size_t after = bar + 1;
      if (after < body.size() && body[after] == '|') {
        correlated = false;
        ++after;
      }
      const TermList inner = parse_term_list(body.substr(0, bar));
      // "(terms | f1 + f2)" is two independent terms, one per grouping factor.
      for (const auto& factor : split_top_level(body.substr(after))) {
        if (!valid_name(factor)) throw DesignError("bad grouping factor '" + factor + "'");
        for (const auto& existing : sub.random)
          if (existing.grouping_factor == factor)
            throw DesignError("grouping factor '" + factor + "' used twice in one submodel");
        sub.random.push_back(RandomTerm{inner, factor, correlated});
      }
    } else {
      fixed_pieces.push_back(piece);
    }
  }
  if (fixed_pieces.empty()) {
    sub.fixed.intercept = true;
  } else {
    std::string joined = io::join(fixed_pieces, " + ");
    sub.fixed = parse_term_list(joined);
  }
  out = std::move(sub);
  return lhs;
}

std::string to_string(const std::string& lhs, const Submodel& s) {
  std::string out = lhs + " ~ " + term_list_string(s.fixed);
  for (const auto& r : s.random)
    out += " + (" + term_list_string(r.inner) + (r.correlated ? " | " : " || ") + r.grouping_factor + ")";
  return out;
}

std::string response_name(Response r) { return r == Response::gain ? "po - pr" : "score"; }

std::string family_name(Family f) { return f == Family::normal ? "normal" : "student"; }

Family parse_family(const std::string& name) {
  if (name == "normal" || name == "gaussian") return Family::normal;
  if (name == "student" || name == "student_t") return Family::student_t;
  throw DesignError("unknown family '" + name + "'");
}

std::string serialize(const ModelSpec& spec) {
  std::ostringstream out;
  out << "name = " << spec.name << '\n';
  out << "family = " << family_name(spec.family) << '\n';
  out << "mean = " << to_string(response_name(spec.response), spec.mean) << '\n';
  out << "sigma = " << to_string("sigma", spec.sigma) << '\n';
  std::vector<std::string> subset;
  if (spec.subset.time) subset.push_back("time:" + *spec.subset.time);
  if (spec.subset.group) subset.push_back("group:" + *spec.subset.group);
  out << "subset = " << io::join(subset, " ") << '\n';
  out << "adapt_delta = " << io::format_double(spec.adapt_delta) << '\n';
  out << "max_treedepth = " << spec.max_treedepth << '\n';
  return out.str();
}

ModelSpec parse_model_spec(const std::string& text) {
  ModelSpec spec;
  spec.sigma.fixed.intercept = true;
  bool have_mean = false;
  std::istringstream in(text);
  std::string line;
  while (io::read_line(in, line)) {
    const auto t = io::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string_view::npos) throw DesignError("model spec line without '=': " + std::string(t));
    const std::string key = strip(t.substr(0, eq));
    const std::string value = strip(t.substr(eq + 1));
    if (key == "name") {
      spec.name = value;
    } else if (key == "family") {
      spec.family = parse_family(value);
    } else if (key == "mean") {
      const std::string lhs = parse_formula(value, spec.mean);
      std::string compact;
      for (char c : lhs)
        if (c != ' ') compact += c;
      if (compact == "score") spec.response = Response::score;
      else if (compact == "po-pr" || compact == "gain") spec.response = Response::gain;
      else throw DesignError("unsupported response '" + lhs + "'; expected score or po - pr");
      have_mean = true;
    } else if (key == "sigma") {
      if (parse_formula(value, spec.sigma) != "sigma") throw DesignError("sigma formula must start with 'sigma ~'");
    } else if (key == "subset") {
      std::istringstream parts{value};
      std::string part;
      while (parts >> part) {
        const auto colon = part.find(':');
        if (colon == std::string::npos) throw DesignError("bad subset entry '" + part + "'");
        const std::string f = part.substr(0, colon), lvl = part.substr(colon + 1);
        if (f == "time") spec.subset.time = lvl;
        else if (f == "group") spec.subset.group = lvl;
        else throw DesignError("subset factor must be time or group, got '" + f + "'");
      }
    } else if (key == "adapt_delta") {
      const auto v = io::parse_double(value);
      if (!v) throw DesignError("bad adapt_delta '" + value + "'");
      spec.adapt_delta = *v;
    } else if (key == "max_treedepth") {
      spec.max_treedepth = std::stoi(value);
    } else {
      throw DesignError("unknown model spec key '" + key + "'");
    }
  }
  if (!have_mean) throw DesignError("model spec lacks a mean formula");
  return spec;
}

ModelSpec preset(const std::string& name, const std::string& level) {
  ModelSpec spec;
  spec.name = name;
  spec.family = Family::student_t;
  auto set = [&](const std::string& mean, const std::string& sigma) {
    parse_formula(mean, spec.mean);
    parse_formula(sigma, spec.sigma);
  };
  if (name == "anova1") {
    set("score ~ 0 + time * group + (1|id)", "sigma ~ 1");
  } else if (name == "anova2") {
    set("score ~ 0 + time * group + (1|id)", "sigma ~ 0 + time * group");
  } else if (name == "anova3") {
    set("score ~ 0 + time * group + (1|id) + (0 + time * group|class)",
        "sigma ~ 0 + time * group + (0 + time * group|class)");
    spec.adapt_delta = 0.99;
    spec.max_treedepth = 15;
  } else if (name == "icc") {
    set("score ~ 1 + (1|class)", "sigma ~ 1");
  } else if (name == "ttest_between") {
    set("score ~ group + (0 + group|class)", "sigma ~ 0 + group + (0 + group|class)");
    spec.subset.time = level.empty() ? std::string(kPretest) : level;
  } else if (name == "ttest_within") {
    set("score ~ time + (1|id) + (0 + time|class)", "sigma ~ 0 + time + (0 + time|class)");
    spec.subset.group = level.empty() ? std::string(kControl) : level;
    spec.adapt_delta = 0.99;
    spec.max_treedepth = 15;
  } else if (name == "gain") {
    set("po - pr ~ group + (0 + group|class_pre + class_post)", "sigma ~ (1|class_pre + class_post)");
    spec.response = Response::gain;
    spec.subset.group = level.empty() ? std::string(kControl) : level;
    spec.adapt_delta = 0.99;
    spec.max_treedepth = 15;
  } else {
    throw DesignError("unknown preset '" + name + "'");
  }
  return spec;
}

std::vector<std::string> preset_names() {
  return {"anova1", "anova2", "anova3", "icc", "ttest_between", "ttest_within", "gain"};
}

}  // namespace bayesd
