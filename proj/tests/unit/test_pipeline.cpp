#include <sstream>

#include "doctest.h"
#include "fidelity/error.hpp"
#include "fidelity/pipeline.hpp"
#include "test_support.hpp"

using namespace fidelity;
using namespace fidelity::pipeline;

namespace {

struct Fixture {
  backends::MockBackend backend{backends::BackendSpec::parse("mock:seed=7")};
  Context ctx{testing::resources(), testing::english(), backend, {}, nullptr};
};

class Flaky final : public backends::Backend {
 public:
  Flaky() : Backend(backends::BackendSpec::parse("mock")) {}
  std::string translate(std::string_view, std::string_view source) override {
    if (source.find("nurse") != std::string_view::npos) throw BackendError("boom", true);
    return "वह काम करती थी।";
  }
  backends::SampleResult sample(std::string_view p, std::string_view s, std::size_t) override {
    backends::SampleResult r;
    r.requested = 3;
    r.failures = 2;
    r.texts = {translate(p, s)};
    return r;
  }
};

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("modes") {
    Fixture f;
    const auto set = testing::target_bench(4, 1);
    const auto& inst = set.instances.front();
    const auto base = run_instance(inst, Mode::baseline, f.ctx);
    CHECK(base.method == rerank::Method::baseline);
    CHECK(base.scores.size() == 1);
    CHECK(base.chosen_text == f.backend.translate(rerank::generic_prompt().instruction, inst.source_en));

    const auto sar = run_instance(inst, Mode::sar, f.ctx);
    CHECK(sar.method == rerank::Method::sar);
    CHECK(sar.scores.size() >= 2);
    CHECK(sar.scores.size() <= 6);
    CHECK(sar.scores[0].origin == rerank::Origin::base_system);

    const auto par = run_instance(inst, Mode::par, f.ctx, std::string("दिया गया आधार।"));
    CHECK((par.method == rerank::Method::par || par.method == rerank::Method::par_fallback_sar));
    CHECK(par.scores[0].text == "दिया गया आधार।");
    CHECK(par.config_digest == rerank::RerankConfig{}.digest());
  }

  TEST_CASE("pool determinism") {
    Fixture a, b;
    const auto set = testing::target_bench(10, 2);
    std::ostringstream x, y;
    write_records(x, run_batch(set.instances, Mode::par, a.ctx, {}, 1).records);
    write_records(y, run_batch(set.instances, Mode::par, b.ctx, {}, 3).records);
    CHECK(x.str() == y.str());
  }

  TEST_CASE("record JSON round trip") {
    Fixture f;
    const auto set = testing::target_bench(4, 5);
    const auto recs = run_batch(set.instances, Mode::sar, f.ctx, {}, 1).records;
    std::ostringstream out;
    write_records(out, recs);
    std::istringstream in(out.str());
    const auto back = read_records(in);
    std::ostringstream again;
    write_records(again, back);
    CHECK(again.str() == out.str());
    const auto line = to_json_line(recs[0]);
    for (const char* field : {"\"id\"", "\"mode\"", "\"chosen_text\"", "\"method\"", "\"scores\"",
                              "\"config_digest\"", "\"state\"", "\"rule_path\"", "\"used_fallback\""})
      CHECK(line.find(field) != std::string::npos);
    std::istringstream texts(out.str());
    CHECK(read_texts(texts).size() == recs.size());
  }

  TEST_CASE("backend failures become failure entries; partial pools warn") {
    Flaky flaky;
    Context ctx{testing::resources(), testing::english(), flaky, {}, nullptr};
    bench::BenchmarkSet set;
    bench::BenchmarkInstance a, b;
    a.id = "explicit_gender:t:1";
    a.category = "explicit_gender";
    a.gold = Gender::female;
    a.source_en = "She is a nurse.";
    b = a;
    b.id = "explicit_gender:t:2";
    b.source_en = "She is a pilot.";
    set.instances = {a, b};
    const auto r = run_batch(set.instances, Mode::par, ctx, {}, 2);
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].first == a.id);
    CHECK(r.partial());
    REQUIRE(r.records.size() == 1);
    CHECK_FALSE(r.records[0].warnings.empty());
  }

  TEST_CASE("classify_output routes unmarked sources") {
    const auto v = classify_output("The clerk filed the report.", "वह महिला क्लर्क है।", testing::english(),
                                   testing::lexicons());
    CHECK(v.state == cue::PreservationState::wrong_gender);
    CHECK(classify_output("She filed it.", "उसने फ़ाइल किया।", testing::english(), testing::lexicons()).state ==
          cue::PreservationState::neutralized);
  }

  TEST_CASE("mode parsing") {
    CHECK(parse_mode("par") == Mode::par);
    CHECK_FALSE(parse_mode("best").has_value());
  }
}
