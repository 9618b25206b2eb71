#include <doctest.h>

#include <random>

#include "acesearcher/reward.hpp"

using namespace acesearcher;

namespace {

using Golds = std::vector<std::string>;

std::string random_string(std::mt19937_64& rng) {
  static const std::string alphabet = "aAbBtThHeEnN .,!?'\"-_ \t\n\xC3\xA9";
  std::string s;
  for (std::size_t i = 0, n = rng() % 24; i < n; ++i) s += alphabet[rng() % alphabet.size()];
  return s;
}

}  // namespace

TEST_SUITE("reward") {
  TEST_CASE("normalization examples") {
    CHECK(normalize_answer("The Lisbon District.") == "lisbon district");
    CHECK(normalize_answer("") == "");
    CHECK(normalize_answer("A  Taxi   To Paradise") == "taxi to paradise");
    CHECK(normalize_answer("theory an apple") == "theory apple");
  }

  TEST_CASE("property: normalization is idempotent") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 10000; ++i) {
      const auto once = normalize_answer(random_string(rng));
      CHECK(normalize_answer(once) == once);
    }
  }

  TEST_CASE("exact match") {
    CHECK(exact_match("the Lisbon district", Golds{"Lisbon District"}) == 1);
    CHECK(exact_match("Paris", Golds{"Lyon"}) == 0);
    CHECK(exact_match("x", Golds{"y", "x"}) == 1);
    CHECK_THROWS_AS(exact_match("x", Golds{}), Error);
  }

  TEST_CASE("token f1") {
    CHECK(token_f1("lisbon district", Golds{"district of lisbon"}) == doctest::Approx(0.8));
    CHECK(token_f1("paris", Golds{"paris"}) == 1.0);
    CHECK(token_f1("cat", Golds{"dog"}) == 0.0);
    CHECK(token_f1("the", Golds{"a"}) == 1.0);  // both normalize to nothing
    CHECK(token_f1("the", Golds{"cat"}) == 0.0);
    CHECK_THROWS_AS(token_f1("x", Golds{}), Error);
  }

  TEST_CASE("containment") {
    CHECK(answer_containment("the lisbon district area", Golds{"Lisbon District"}) == 1);
    CHECK(answer_containment("lisbon", Golds{"Lisbon District"}) == 0);
  }

  TEST_CASE("numeric match") {
    CHECK(numeric_match("151.57055789967183", "151.5705") == 1);
    CHECK(numeric_match("25.89", "151.5705") == 0);
    CHECK(numeric_match("x", "5") == 0);
    CHECK_THROWS_AS(numeric_match("5", "five"), Error);
    CHECK(numeric_match("$1,234.5 million", "1234.5") == 1);
    CHECK(numeric_match("-3", "-3.0") == 1);
    CHECK(numeric_match("12%", "12") == 1);
    CHECK(numeric_match("1e3", "1000") == 1);
    // 1% relative band
    CHECK(numeric_match("101", "100") == 1);
    CHECK(numeric_match("102", "100") == 0);
    // rounding to the gold's precision
    CHECK(numeric_match("0.0051", "0.01") == 1);
    CHECK(numeric_match("0.016", "0.01") == 0);
    CHECK(parse_number("  €42") == doctest::Approx(42));
    CHECK_FALSE(parse_number("about").has_value());
  }

  TEST_CASE("fact labels") {
    CHECK(canonical_fact_label("Yes") == FactLabel::supported);
    CHECK(canonical_fact_label("SUPPORTED") == FactLabel::supported);
    CHECK(canonical_fact_label("no.") == FactLabel::not_supported);
    CHECK(canonical_fact_label("NOT_SUPPORTED") == FactLabel::not_supported);
    CHECK(canonical_fact_label("maybe") == FactLabel::other);
    CHECK(task_match("Yes", Golds{"SUPPORTED"}, TaskKind::fact_verification) == 1);
    CHECK(task_match("No", Golds{"SUPPORTED"}, TaskKind::fact_verification) == 0);
    CHECK(task_match("maybe", Golds{"maybe"}, TaskKind::fact_verification) == 0);
  }

  TEST_CASE("reward is the product") {
    const Golds g{"Lisbon District"};
    CHECK(compute_reward("Lisbon District", g, true, TaskKind::multihop_qa) == RewardRecord{1, true, 1});
    CHECK(compute_reward("Lisbon District", g, false, TaskKind::multihop_qa) == RewardRecord{1, false, 0});
    CHECK(compute_reward("Porto", g, true, TaskKind::multihop_qa) == RewardRecord{0, true, 0});
    CHECK(compute_reward("151.5706", Golds{"151.5705"}, true, TaskKind::document_math).reward == 1);
  }

  TEST_CASE("property: em implies f1 = 1, reward <= em") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 5000; ++i) {
      const auto p = random_string(rng);
      const Golds g{random_string(rng), rng() % 2 ? p : random_string(rng)};
      if (exact_match(p, g)) CHECK(token_f1(p, g) == 1.0);
      if (exact_match(p, g)) CHECK(answer_containment(p, g) == 1);
      const auto r = compute_reward(p, g, rng() % 2 == 0, TaskKind::multihop_qa);
      CHECK(r.reward <= r.em);
    }
  }
}
