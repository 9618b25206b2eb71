#pragma once

// Shared fixtures: a small corpus, the worked multi-hop and document cases,
// scripted mock gateways and a tiny arithmetic interpreter standing in for a
// real program executor.

#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "acesearcher/common.hpp"
#include "acesearcher/gateway.hpp"
#include "acesearcher/pipeline.hpp"
#include "acesearcher/retrieval.hpp"

namespace fixtures {

using namespace acesearcher;

inline std::vector<Passage> corpus() {
  return {
      {"p01", "Vera Barbosa",
       "Vera Barbosa (born 13 January 1989 in Vila Franca de Xira) is a Portuguese track and field athlete who "
       "competes in the 400 metres hurdles."},
      {"p02", "Vila Franca de Xira",
       "Vila Franca de Xira is a municipality in the Lisbon District in Portugal, on the banks of the Tagus."},
      {"p03", "Lisbon District",
       "Lisbon District is located on the west coast of Portugal. Its capital is the city of Lisbon."},
      {"p04", "Vera Krasova", "Vera Krasova is a Russian model and beauty pageant titleholder."},
      {"p05", "Barbosa, Antioquia", "Barbosa is a town and municipality in the Colombian department of Antioquia."},
      {"p06", "The Silver Treasure",
       "The Silver Treasure is a 1926 American silent drama film directed by Rowland V. Lee."},
      {"p07", "Taxi to Paradise",
       "Taxi to Paradise is a 1933 British comedy film directed by Adrian Brunel."},
      {"p08", "Rowland V. Lee",
       "Rowland Vance Lee (September 6, 1891 - December 21, 1975) was an American film director and actor."},
      {"p09", "Adrian Brunel",
       "Adrian Brunel (4 September 1892 - 18 February 1958) was an English film director and screenwriter."},
      {"p10", "Silver mining", "Silver mining is the extraction of silver by mining."},
      {"p11", "Paradise, Nevada", "Paradise is an unincorporated town in Clark County, Nevada."},
      {"p12", "Portuguese athletes", "Portugal has produced many track and field athletes over the years."},
  };
}

inline QAExample vera_barbosa() {
  return {"musique_vera", "In which state is Vera Barbosa's place of birth located?", {"Lisbon District"},
          TaskKind::multihop_qa, std::nullopt};
}

inline QAExample taxi_to_paradise() {
  return {"2wiki_taxi", "Which film has the director who was born later, The Silver Treasure or Taxi To Paradise?",
          {"Taxi To Paradise"}, TaskKind::multihop_qa, std::nullopt};
}

inline const char* kAsiaTable =
    "| Year | Segment | Americas | Europe | Asia | Total |\n"
    "| 2019 | Total | $72,522 | $4,056 | $2,483 | $79,061 |\n"
    "| 2018 | Total | $60,458 | $10,325 | $2,133 | $72,916 |";

inline QAExample asia_sales() {
  return {"docmath_asia",
          "What is the percentage change in Asia sales between 2018 and 2019 if the 2019 sales is doubled and "
          "increased by another 400 thousand? (in percent)",
          {"151.5705"}, TaskKind::document_math, std::string(kAsiaTable)};
}

inline const char* kVeraDecomposition =
    "### Who is Vera Barbosa?\n### Where was Vera Barbosa born?\n### In which state is #2 located?";

inline const char* kVeraFinal =
    "The documents state that Vera Barbosa is a Portuguese track and field athlete and was born in Vila Franca "
    "de Xira. Additionally, Vila Franca de Xira is located in the Lisbon District.\n\n"
    "<answer>Lisbon District</answer>";

/// Scripts the worked MusiQue case. Rules are checked in order, so needles
/// only need to be unique per prompt kind.
inline void script_vera(MockTransport& mock) {
  mock.on("Please break down the question \"In which state is Vera Barbosa", {kVeraDecomposition})
      .on("question \"Who is Vera Barbosa?\"", {"a Portuguese track and field athlete"})
      .on("question \"Where was Vera Barbosa born?\"", {"Vila Franca de Xira"})
      .on("question \"In which state is Vila Franca de Xira located?\"", {"Lisbon District"})
      .on("You are also given some subquestions and their answers:\n\n# subquestion #1: Who is Vera Barbosa?",
          {kVeraFinal});
}

inline const char* kTaxiDecomposition =
    "### Who directed The Silver Treasure?\n"
    "### Who directed Taxi To Paradise?\n"
    "### When was the director of #1 born?\n"
    "### When was the director of #2 born?\n"
    "### Is the year of #3 later than #4?";

inline void script_taxi(MockTransport& mock) {
  mock.on("Please break down the question \"Which film has the director", {kTaxiDecomposition})
      .on("question \"Who directed The Silver Treasure?\"", {"Rowland V. Lee"})
      .on("question \"Who directed Taxi To Paradise?\"", {"Adrian Brunel"})
      .on("question \"When was the director of Rowland V. Lee born?\"", {"September 6, 1891"})
      .on("question \"When was the director of Adrian Brunel born?\"", {"4 September 1892"})
      .on("question \"Is the year of September 6, 1891 later than 4 September 1892?\"", {"no"})
      .on("You are also given some subquestions and their answers:\n\n# subquestion #1: Who directed",
          {"Adrian Brunel was born later than Rowland V. Lee.\n\n<answer>Taxi To Paradise</answer>"});
}

inline const char* kAsiaDecomposition =
    "### What was the value of Asia sales in 2019?\n"
    "### What is the value of Asia sales in 2019 after doubling it?\n"
    "### What is the value of Asia sales in 2019 after doubling it and then adding 400,000?\n"
    "### What was the value of Asia sales in 2018?\n"
    "### What is the net change in the value of Asia sales from 2018 to 2019, after adjusting the 2019 value?\n"
    "### What is the percentage change in the value of Asia sales from 2018 to 2019, after adjusting the 2019 "
    "value?";

inline const char* kAsiaProgram =
    "```python\n"
    "# Given data\n"
    "asia_sales_2019 = 2483  # in thousands (Q1)\n"
    "asia_sales_2018 = 2133  # in thousands (Q4)\n"
    "\n"
    "# Adjust 2019 sales: double it and add 400 thousand (Q2, Q3)\n"
    "adjusted_2019_sales = (asia_sales_2019 * 2) + 400\n"
    "\n"
    "# Compute value change (Q5)\n"
    "change_in_sales = adjusted_2019_sales - asia_sales_2018\n"
    "\n"
    "# Compute percentage change (Q6)\n"
    "ans = (change_in_sales / asia_sales_2018) * 100\n"
    "```";

/// Intermediate answers follow the table; the subquestion responses are
/// programs in PoT style and boxed values in CoT style.
inline void script_asia(MockTransport& mock, bool program) {
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"What was the value of Asia sales in 2019?", "2483"},
      {"What is the value of Asia sales in 2019 after doubling it?", "4966"},
      {"after doubling it and then adding 400,000?", "5366"},
      {"What was the value of Asia sales in 2018?", "2133"},
      {"What is the net change", "3233"},
      {"What is the percentage change in the value", "151.57055789967183"},
  };
  mock.on("Please break down the question \"What is the percentage change in Asia sales", {kAsiaDecomposition});
  if (program) {
    mock.on("here is a referenced breakdown", {kAsiaProgram});
    for (const auto& [needle, value] : steps) mock.on(needle, {"```python\nans = " + value + "\n```"});
  } else {
    mock.on("here is a referenced breakdown",
            {"Doubling 2483 gives 4966; adding 400 gives 5366. The change is 3233, so the percentage is "
             "3233 / 2133 * 100.\n\n\\boxed{151.5705}"});
    for (const auto& [needle, value] : steps) mock.on(needle, {"So the value is \\boxed{" + value + "}."});
  }
}

inline RunConfig test_config() {
  RunConfig c;
  c.endpoint_url = "http://mock.invalid/v1";
  c.api_key_env = "ACESEARCHER_TEST_NO_KEY";
  return c;
}

inline GatewayOptions quick_options() {
  GatewayOptions o;
  o.endpoint_url = "http://mock.invalid/v1";
  o.backoff_base = std::chrono::milliseconds(1);
  return o;
}

struct MockSetup {
  std::shared_ptr<MockTransport> mock = std::make_shared<MockTransport>();
  Gateway gateway{quick_options(), mock};
};

// ---------------------------------------------------------------------------
// Test stand-in for a program executor: straight-line assignments over
// + - * / and parentheses. Not a Python interpreter.

class ArithmeticExecutor final : public ProgramExecutor {
 public:
  ExecutionResult run(std::string_view program) const override {
    std::map<std::string, double> vars;
    std::istringstream lines{std::string(program)};
    std::string line;
    try {
      while (std::getline(lines, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto body = trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string_view::npos) return {false, {}, "not an assignment: " + std::string(body)};
        std::string name(trim(body.substr(0, eq)));
        Parser p{std::string(body.substr(eq + 1)), 0, vars};
        double v = p.expr();
        p.skip();
        if (p.pos != p.text.size()) return {false, {}, "trailing input"};
        vars[name] = v;
      }
    } catch (const std::exception& e) {
      return {false, {}, e.what()};
    }
    auto it = vars.find("ans");
    if (it == vars.end()) return {false, {}, "ans is not set"};
    return {true, format_double(it->second), {}};
  }

 private:
  struct Parser {
    std::string text;
    std::size_t pos;
    const std::map<std::string, double>& vars;

    void skip() {
      while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    double expr() {
      double v = term();
      for (skip(); pos < text.size() && (text[pos] == '+' || text[pos] == '-'); skip()) {
        char op = text[pos++];
        double r = term();
        v = op == '+' ? v + r : v - r;
      }
      return v;
    }
    double term() {
      double v = factor();
      for (skip(); pos < text.size() && (text[pos] == '*' || text[pos] == '/'); skip()) {
        char op = text[pos++];
        double r = factor();
        v = op == '*' ? v * r : v / r;
      }
      return v;
    }
    double factor() {
      skip();
      if (pos >= text.size()) throw std::runtime_error("unexpected end");
      char c = text[pos];
      if (c == '-') {
        ++pos;
        return -factor();
      }
      if (c == '(') {
        ++pos;
        double v = expr();
        skip();
        if (pos >= text.size() || text[pos] != ')') throw std::runtime_error("missing )");
        ++pos;
        return v;
      }
      if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
        std::size_t used = 0;
        double v = std::stod(text.substr(pos), &used);
        pos += used;
        return v;
      }
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        std::size_t start = pos;
        while (pos < text.size() && (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_')) ++pos;
        auto it = vars.find(text.substr(start, pos - start));
        if (it == vars.end()) throw std::runtime_error("undefined name " + text.substr(start, pos - start));
        return it->second;
      }
      throw std::runtime_error(std::string("unexpected character ") + c);
    }
  };
};

class FailingExecutor final : public ProgramExecutor {
 public:
  ExecutionResult run(std::string_view) const override { return {false, {}, "sandbox refused"}; }
};

// ---------------------------------------------------------------------------

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng{std::random_device{}()};
    path_ = std::filesystem::temp_directory_path() / ("acesearcher-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace fixtures
