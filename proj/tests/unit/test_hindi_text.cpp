#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fidelity/error.hpp"
#include "fidelity/hindi_text.hpp"
#include "test_support.hpp"

using namespace fidelity;
using namespace fidelity::hindi;
using fidelity::testing::lexicons;

namespace {

std::vector<MorphSignal> ergative(std::string_view s) { return detect_ergative(tokenize(s), lexicons()); }
std::vector<MorphSignal> honorific(std::string_view s) { return detect_honorific(tokenize(s), lexicons()); }
std::vector<MorphSignal> morph(std::string_view s) { return detect_gendered_morphology(tokenize(s), lexicons()); }
std::vector<MorphSignal> lexical(std::string_view s) { return detect_lexical_gender(tokenize(s), lexicons()); }

}  // namespace

TEST_SUITE("hindi_text") {
  TEST_CASE("tokenize") {
    const auto t = tokenize("उसने प्रोजेक्ट पूरा किया");
    REQUIRE(t.size() == 4);
    for (const auto& tok : t) CHECK(tok.script == Script::devanagari);
    CHECK(tokenize("").empty());
    const auto one = tokenize("नेता");
    REQUIRE(one.size() == 1);
    CHECK(one[0].surface == "नेता");
  }

  TEST_CASE("danda and punctuation are single tokens") {
    const auto t = tokenize("वह नर्स है।");
    REQUIRE(t.size() == 4);
    CHECK(t[3].surface == "।");
    CHECK(t[3].script == Script::punct);
  }

  TEST_CASE("spans are ordered, disjoint, and reproduce the input minus separators") {
    std::mt19937 rng(7);
    const std::vector<std::string> parts = {"वह", "नर्स", "है", "।", ",", "abc", "2020", " ", "  ", "किया", "?"};
    for (int trial = 0; trial < 500; ++trial) {
      std::string s;
      for (int i = 0; i < 12; ++i) s += parts[rng() % parts.size()];
      const auto toks = tokenize(s);
      const auto cps = text::decode_utf8(s);
      std::u32string joined, expected;
      std::size_t prev = 0;
      for (const auto& tok : toks) {
        CHECK(tok.begin >= prev);
        CHECK(tok.end > tok.begin);
        prev = tok.end;
        joined += cps.substr(tok.begin, tok.end - tok.begin);
        CHECK(text::encode_utf8(cps.substr(tok.begin, tok.end - tok.begin)) == tok.surface);
      }
      for (char32_t c : cps)
        if (!text::is_space(c)) expected += c;
      CHECK(joined == expected);
    }
  }

  TEST_CASE("ergative detection respects token boundaries") {
    const auto a = ergative("उसने प्रोजेक्ट पूरा किया");
    REQUIRE(a.size() == 1);
    CHECK(a[0].token_index == 0);
    CHECK(a[0].gender == Gender::none);
    CHECK(ergative("वह नर्स के रूप में काम करती थी।").empty());
    const auto b = ergative("नेता ने कहा");
    REQUIRE(b.size() == 1);
    CHECK(b[0].token_index == 1);
    CHECK(ergative("नेताओं").empty());
  }

  TEST_CASE("honorific detection") {
    CHECK_FALSE(honorific("उन्होंने नर्स के रूप में काम किया।").empty());
    CHECK(honorific("वह नर्स है").empty());
    const auto u = honorific("उनका घर");
    REQUIRE(u.size() == 1);
    CHECK(lexicons().is_honorific("उनका"));
    // आप counts only with plural agreement.
    CHECK_FALSE(honorific("आप डॉक्टर हैं।").empty());
    CHECK(honorific("आप").empty());
  }

  TEST_CASE("gendered morphology") {
    auto m = morph("वह हाल ही में इंजीनियर बनी।");
    REQUIRE(m.size() == 1);
    CHECK(m[0].kind == SignalKind::fem_verb);
    CHECK(m[0].gender == Gender::female);
    m = morph("वह 2020 में कार्यरत हुई।");
    REQUIRE(m.size() == 1);
    CHECK(m[0].kind == SignalKind::fem_verb);
    CHECK(morph("किया").empty());
    m = morph("वह इंजीनियर बना।");
    REQUIRE(m.size() == 1);
    CHECK(m[0].kind == SignalKind::masc_verb);
    for (const char* masc : {"करता", "गया", "था", "हुआ"}) {
      const auto s = morph(std::string("वह ") + masc);
      REQUIRE(s.size() == 1);
      CHECK(s[0].gender == Gender::male);
    }
  }

  TEST_CASE("a bare stem before a modal is not a verb form") {
    const auto m = morph("वह बस चला सकती है");
    REQUIRE(m.size() == 1);
    CHECK(m[0].gender == Gender::female);
  }

  TEST_CASE("fem and masc never fire on the same token") {
    for (const char* s : {"वह काम करती थी और करता था", "बनी बना हुई हुआ गई गया", "वह पढ़ती रही"}) {
      std::set<std::size_t> fem, masc;
      for (const auto& sig : morph(s)) (sig.kind == SignalKind::fem_verb ? fem : masc).insert(sig.token_index);
      for (auto i : fem) CHECK_FALSE(masc.contains(i));
    }
  }

  TEST_CASE("lexical gender words") {
    auto l = lexical("एक कुशल महिला बेबीसिटर");
    REQUIRE(l.size() == 1);
    CHECK(l[0].gender == Gender::female);
    l = lexical("वह पुरुष ने");
    REQUIRE(l.size() == 1);
    CHECK(l[0].gender == Gender::male);
    CHECK(ergative("वह पुरुष ने").size() == 1);
    CHECK(lexical("प्रोजेक्ट पूरा").empty());
  }

  TEST_CASE("name lookup reads the shipped name table") {
    const auto& bundle = testing::resources().bundle;
    const PersonName* female = nullptr;
    const PersonName* male = nullptr;
    for (const auto& n : bundle.names) {
      if (!female && n.gender == Gender::female) female = &n;
      if (!male && n.gender == Gender::male) male = &n;
    }
    REQUIRE(female);
    REQUIRE(male);
    CHECK(lookup_name_gender(tokenize(female->devanagari)[0], lexicons()) == Gender::female);
    CHECK(lookup_name_gender(tokenize(male->devanagari)[0], lexicons()) == Gender::male);
    CHECK_FALSE(lookup_name_gender(tokenize("प्रोजेक्ट")[0], lexicons()).has_value());
  }

  TEST_CASE("no detector fires on a substring of a longer token") {
    // Every detector's hit must be a whole token that the lexicon knows or
    // that a suffix rule covers; glue two lexicon forms together and expect
    // no ergative, honorific, or lexical hit.
    for (const char* glued : {"उसनेउसने", "महिलापुरुष", "उनकाघर", "नेने"}) {
      CHECK(ergative(glued).empty());
      CHECK(honorific(glued).empty());
      CHECK(lexical(glued).empty());
    }
  }

  TEST_CASE("detectors are pure") {
    const std::string s = "उन्होंने कहा कि वह महिला डॉक्टर बनी।";
    CHECK(morph(s) == morph(s));
    CHECK(ergative(s) == ergative(s));
    CHECK(lexical(s) == lexical(s));
  }

  TEST_CASE("lexicon parser rejects bad rows") {
    std::istringstream bad_gender("करती\tverb\tnone\n");
    CHECK_THROWS_AS(Lexicons::parse(bad_gender, "t"), ValidationError);
    std::istringstream bad_kind("x\tnoun\tnone\n");
    CHECK_THROWS_AS(Lexicons::parse(bad_kind, "t"), ValidationError);
    std::istringstream conflict("बना\tverb\tmale\nबना\tverb\tfemale\n");
    CHECK_THROWS_AS(Lexicons::parse(conflict, "t"), ValidationError);
    std::istringstream empty("# nothing\n");
    CHECK_THROWS_AS(Lexicons::parse(empty, "t"), ValidationError);
  }

  TEST_CASE("clause ids split at sentence punctuation and conjunctions") {
    const auto toks = tokenize("वह आई, और उसने कहा कि काम हुआ।");
    const auto ids = clause_ids(toks, lexicons());
    REQUIRE(ids.size() == toks.size());
    CHECK(ids.front() < ids.back());
    for (std::size_t i = 1; i < ids.size(); ++i) CHECK(ids[i] >= ids[i - 1]);
  }
}
