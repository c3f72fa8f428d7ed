#include <algorithm>
#include <atomic>
#include <set>
#include <fstream>
#include <thread>

#include "doctest.h"
#include "fidelity/cue_analysis.hpp"
#include "test_support.hpp"

using namespace fidelity;
using namespace fidelity::cue;
using fidelity::testing::english;
using fidelity::testing::lexicons;

namespace {

SourceCue cue_of(std::string_view s) { return extract_source_cue(s, english()); }

PreservationVerdict classify(Gender g, std::string_view hindi, FallbackOracle* oracle = nullptr) {
  SourceCue c;
  c.gender = g;
  c.evidence.push_back({g == Gender::female ? "she" : "he", CueType::pronoun, g});
  return classify_preservation(c, hindi, lexicons(), oracle);
}

std::vector<LabeledExample> fixtures() {
  std::ifstream in(testing::fixtures_dir() / "classifier_fixtures.jsonl");
  return read_labeled_jsonl(in);
}

class CountingOracle : public FallbackOracle {
 public:
  explicit CountingOracle(bool single) : single_(single) {}
  std::optional<PreservationState> judge(std::string_view, std::string_view, Gender) override {
    const int now = ++active_;
    peak_ = std::max(peak_.load(), now);
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
    --active_;
    ++calls_;
    return PreservationState::preserved;
  }
  bool single_flight() const override { return single_; }
  int peak() const { return peak_; }
  int calls() const { return calls_; }

 private:
  bool single_;
  std::atomic<int> active_{0}, peak_{0}, calls_{0};
};

class FailingOracle : public FallbackOracle {
 public:
  std::optional<PreservationState> judge(std::string_view, std::string_view, Gender) override {
    throw std::runtime_error("offline");
  }
};

}  // namespace

TEST_SUITE("cue_analysis") {
  TEST_CASE("source cue extraction") {
    auto c = cue_of("She started working as a social worker in 2020.");
    CHECK(c.gender == Gender::female);
    CHECK(c.clause_index == 0);
    CHECK_FALSE(c.evidence.empty());

    c = cue_of("The engineer completed the project. Later, she received an award.");
    CHECK(c.gender == Gender::female);
    CHECK(c.clause_index == 1);
    CHECK(c.multi_clause);

    c = cue_of("The clerk filed the report.");
    CHECK(c.gender == Gender::neutral);
    CHECK(c.evidence.empty());

    CHECK(cue_of("He said she left.").gender == Gender::ambiguous);
    CHECK(cue_of("The man waited.").gender == Gender::male);
    CHECK(cue_of("HERSELF").gender == Gender::female);
    // Whole words only.
    CHECK(cue_of("The theme shelters them.").gender == Gender::neutral);
  }

  TEST_CASE("names resolve through the name table") {
    const auto& names = testing::resources().bundle.names;
    for (const auto& n : names) {
      const auto c = cue_of(n.name + " is a pilot.");
      CHECK(c.gender == n.gender);
      REQUIRE_FALSE(c.evidence.empty());
      CHECK(c.evidence[0].type == CueType::name);
    }
  }

  TEST_CASE("phenomenon detection") {
    auto p = [](std::string_view s) { return detect_phenomenon(s, cue_of(s), english()); };
    CHECK(p("The engineer met with the nurse because he needed advice.") == Phenomenon::winograd_coref);
    CHECK(p("The engineer completed the project. Later, she received an award.") == Phenomenon::late_binding);
    CHECK(p("She is a skilled babysitter during the planning phase.") == Phenomenon::explicit_gender);
    CHECK(p("The clerk filed the report.") == Phenomenon::other);
    // Two professions but the pronoun sits in the main clause: not coreference.
    CHECK(p("She met the engineer and the nurse.") == Phenomenon::explicit_gender);
  }

  TEST_CASE("classifier examples") {
    auto v = classify(Gender::female, "वह नर्स के रूप में काम करती थी।");
    CHECK(v.state == PreservationState::preserved);
    CHECK(v.rule_path == RulePath::morphology);

    v = classify(Gender::female, "उन्होंने नर्स के रूप में काम किया।");
    CHECK(v.state == PreservationState::neutralized);
    CHECK(v.rule_path == RulePath::honorific);

    v = classify(Gender::female, "वह हाल ही में इंजीनियर बना।");
    CHECK(v.state == PreservationState::wrong_gender);

    v = classify(Gender::male, "वह पुरुष ने पुरस्कार प्राप्त किया।");
    CHECK(v.state == PreservationState::preserved);
    CHECK(v.rule_path == RulePath::lexical_marker);

    v = classify(Gender::male, "उसने प्रोजेक्ट पूरा किया");
    CHECK(v.state == PreservationState::neutralized);
    CHECK(v.rule_path == RulePath::ergative);
  }

  TEST_CASE("no rule and no oracle gives the default branch") {
    const auto v = classify(Gender::female, "यह एक परीक्षा है।");
    CHECK(v.state == PreservationState::neutralized);
    CHECK(v.rule_path == RulePath::default_path);
    CHECK_FALSE(v.used_fallback);
  }

  TEST_CASE("oracle is consulted only when no rule fires; failures degrade") {
    CountingOracle o(false);
    auto v = classify(Gender::female, "यह एक परीक्षा है।", &o);
    CHECK(v.used_fallback);
    CHECK(v.rule_path == RulePath::fallback);
    CHECK(v.state == PreservationState::preserved);
    v = classify(Gender::female, "वह काम करती थी।", &o);
    CHECK_FALSE(v.used_fallback);
    CHECK(o.calls() == 1);

    FailingOracle bad;
    v = classify(Gender::female, "यह एक परीक्षा है।", &bad);
    CHECK(v.oracle_failed);
    CHECK_FALSE(v.used_fallback);
    CHECK(v.rule_path == RulePath::default_path);
  }

  TEST_CASE("single-flight oracles are serialized") {
    CountingOracle o(true);
    std::vector<std::thread> ts;
    for (int i = 0; i < 8; ++i)
      ts.emplace_back([&] {
        for (int j = 0; j < 5; ++j) classify(Gender::male, "यह एक परीक्षा है।", &o);
      });
    for (auto& t : ts) t.join();
    CHECK(o.calls() == 40);
    CHECK(o.peak() == 1);
  }

  TEST_CASE("lexical evidence outranks conflicting morphology and is flagged") {
    const auto v = classify(Gender::female, "वह महिला डॉक्टर बना।");
    CHECK(v.state == PreservationState::preserved);
    CHECK(v.conflict_resolved);
    CHECK(v.rule_path_label() == "lexical_marker+conflict_resolved");
  }

  TEST_CASE("monotone marking") {
    const std::vector<std::string> neutralized = {"उसने प्रोजेक्ट पूरा किया।", "उन्होंने नर्स के रूप में काम किया।",
                                                  "यह एक परीक्षा है।", "उसने पुरस्कार प्राप्त किया।"};
    for (Gender g : {Gender::male, Gender::female}) {
      const std::string same = g == Gender::female ? "महिला" : "पुरुष";
      const std::string other = g == Gender::female ? "पुरुष" : "महिला";
      for (const auto& s : neutralized) {
        REQUIRE(classify(g, s).state == PreservationState::neutralized);
        CHECK(classify(g, s + " वह " + same + " है।").state == PreservationState::preserved);
      }
      const std::string matched = g == Gender::female ? "वह काम करती थी।" : "वह काम करता था।";
      REQUIRE(classify(g, matched).state == PreservationState::preserved);
      CHECK(classify(g, matched + " वह " + other + " है।").state != PreservationState::preserved);
      CHECK(classify(g, other + " " + matched).state != PreservationState::preserved);
    }
  }

  TEST_CASE("unmarked sources") {
    CHECK(classify_unmarked_source("वह काम करती थी।", lexicons()).state == PreservationState::neutralized);
    const auto v = classify_unmarked_source("वह महिला डॉक्टर है।", lexicons());
    CHECK(v.state == PreservationState::wrong_gender);
    CHECK(v.rule_path == RulePath::unlicensed_marker);
    SourceCue neutral;
    CHECK(classify_preservation(neutral, "वह महिला है", lexicons()).rule_path == RulePath::unlicensed_marker);
  }

  TEST_CASE("shipped fixtures: every verdict matches its label") {
    const auto ex = fixtures();
    CHECK(ex.size() >= 60);
    std::size_t curated = 0;
    for (const auto& e : ex) curated += e.id.starts_with("c");
    CHECK(curated >= 40);
    const auto r = agreement(ex, english(), lexicons());
    for (const auto& d : r.disagreements)
      INFO(d.id, " expected ", to_string(d.label), " got ", to_string(d.verdict.state));
    CHECK(r.agree == r.total);
    CHECK(r.rule_determined_agree == r.rule_determined);
    CHECK(r.disagreements.empty());
    CHECK(r.percent() == doctest::Approx(100.0));
  }

  TEST_CASE("fixture corpus contains the worked examples") {
    std::set<std::string> hindi;
    for (const auto& e : fixtures()) hindi.insert(e.hindi);
    for (const char* s : {"वह नर्स के रूप में काम करती थी।", "उन्होंने नर्स के रूप में काम किया।",
                          "वह पुरुष ने पुरस्कार प्राप्त किया।", "उसने प्रोजेक्ट पूरा किया"})
      CHECK(std::any_of(hindi.begin(), hindi.end(), [&](const std::string& h) { return h.find(s) != std::string::npos; }));
  }

  TEST_CASE("per-label agreement sums to totals") {
    const auto r = agreement(fixtures(), english(), lexicons());
    std::size_t a = 0, t = 0;
    for (const auto& [_, p] : r.per_label) {
      a += p.first;
      t += p.second;
    }
    CHECK(a == r.agree);
    CHECK(t == r.total);
  }

  TEST_CASE("labeled reader rejects bad labels") {
    std::istringstream in(R"({"id":"x","source_en":"She ran.","hindi":"वह दौड़ी।","label":"maybe"})" "\n");
    CHECK_THROWS(read_labeled_jsonl(in));
  }
}
