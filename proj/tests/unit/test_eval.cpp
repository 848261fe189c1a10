#include <algorithm>
#include <random>

#include "doctest.h"
#include "mags/core/dataset.hpp"
#include "mags/eval/eval.hpp"
#include "support.hpp"

using namespace mags;
using namespace mags::eval;
using mags::rollout::ChatPart;
using mags::rollout::ScriptedChatClient;
using nlohmann::json;
using testsupport::fixture;

namespace {

std::shared_ptr<ScriptedChatClient> replying(const std::vector<std::string>& replies) {
  return std::make_shared<ScriptedChatClient>(json{{"default", {{"replies", replies}}}});
}

// Answers the n-th call with replies[n], whatever the request.
class SequenceClient final : public rollout::ChatClient {
 public:
  explicit SequenceClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}
  rollout::ChatResponse complete(const rollout::ChatRequest& r) override {
    last = r;
    return {replies_.at(std::min(calls++, replies_.size() - 1)), std::nullopt};
  }
  std::size_t calls = 0;
  rollout::ChatRequest last;

 private:
  std::vector<std::string> replies_;
};

EvalRecord record(const std::string& ds, Difficulty b, double score, bool inclusion, bool refusal = false) {
  EvalRecord r;
  r.sample_id = ds + std::to_string(score);
  r.dataset = ds;
  r.extracted = refusal ? ExtractedAnswer::refused() : ExtractedAnswer::answer("x");
  r.gpt_score = score;
  r.inclusion = inclusion;
  r.bucket = b;
  return r;
}

Sample sample(Difficulty d) {
  Sample s;
  s.id = "s";
  s.question = "How many buses?";
  s.ground_truth = "4";
  s.task_type = TaskType::counting;
  s.gt_count = 4;
  s.difficulty = d;
  return s;
}

}  // namespace

TEST_CASE("prompt templates") {
  CHECK(system_template(JudgeRole::answer_similarity) == system_template(JudgeRole::rubric_scorer));
  CHECK(system_template(JudgeRole::extractor).find("Refusal") != std::string_view::npos);
  CHECK(system_template(JudgeRole::difficulty_scorer).find("zoom_score") != std::string_view::npos);
  CHECK(system_template(JudgeRole::rubric_scorer).find("A concise, short answer MUST receive a 1.0") != std::string_view::npos);
  CHECK(extractor_user_prompt("Q", "R") == "Question: Q\nModel Response: R\nExtracted Answer:");
  CHECK(rubric_user_prompt("Q", "G", "A") == "Question: Q\nGround Truth: G\nModel Answer: A\nScore:");
  CHECK(difficulty_user_prompt("Q") == "Question: Q");
}

TEST_CASE("extract_answer") {
  auto h = std::make_shared<JudgeHandle>(JudgeRole::extractor, replying({"4\n"}));
  CHECK(extract_answer("How many?", "The image shows four buses parked near the rail.", *h) == ExtractedAnswer::answer("4"));

  JudgeHandle refusal(JudgeRole::extractor, replying({"  Refusal \n"}));
  CHECK(extract_answer("q", "no idea", refusal).refusal);
  JudgeHandle lower(JudgeRole::extractor, replying({"refusal"}));
  CHECK_FALSE(extract_answer("q", "r", lower).refusal);
  JudgeHandle multi(JudgeRole::extractor, replying({" left of the car \nsecond line"}));
  CHECK(extract_answer("q", "r", multi).text == "left of the car");

  JudgeHandle wrong(JudgeRole::rubric_scorer, replying({"1.0"}));
  CHECK_THROWS_AS(extract_answer("q", "r", wrong), ConfigError);

  auto seq = std::make_shared<SequenceClient>(std::vector<std::string>{"x"});
  JudgeHandle probe(JudgeRole::extractor, seq);
  extract_answer("Q1", "R1", probe);
  REQUIRE(seq->last.messages.size() == 2);
  CHECK(seq->last.messages[0].role == "system");
  CHECK(seq->last.messages[1].parts[0].text == "Question: Q1\nModel Response: R1\nExtracted Answer:");
  CHECK(seq->last.params.temperature == 0.0);
}

TEST_CASE("lattice snapping") {
  CHECK(snap_to_lattice(0.73) == 0.75);
  CHECK(snap_to_lattice(0.1) == 0.0);
  CHECK(snap_to_lattice(0.125) == 0.25);
  CHECK(snap_to_lattice(0.374) == 0.25);
  CHECK(snap_to_lattice(-3) == 0.0);
  CHECK(snap_to_lattice(7) == 1.0);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-0.5, 1.5);
  for (int i = 0; i < 2000; ++i) {
    const double v = d(rng);
    const double s = snap_to_lattice(v);
    CHECK(s * 4 == std::round(s * 4));
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    if (v >= 0 && v <= 1) CHECK(std::abs(s - v) <= 0.125 + 1e-15);
  }
}

TEST_CASE("gpt_accuracy") {
  JudgeHandle exact(JudgeRole::rubric_scorer, replying({"1.0"}));
  auto g = gpt_accuracy("q", "4", ExtractedAnswer::answer("4"), exact);
  CHECK(g.score == 1.0);
  CHECK_FALSE(g.snapped);
  CHECK_FALSE(g.error);

  auto seq = std::make_shared<SequenceClient>(std::vector<std::string>{"0.73"});
  JudgeHandle off(JudgeRole::rubric_scorer, seq);
  g = gpt_accuracy("q", "4", ExtractedAnswer::answer("four-ish"), off);
  CHECK(g.score == 0.75);
  CHECK(g.snapped);

  auto none = std::make_shared<SequenceClient>(std::vector<std::string>{"x"});
  JudgeHandle unused(JudgeRole::rubric_scorer, none);
  g = gpt_accuracy("q", "4", ExtractedAnswer::refused(), unused);
  CHECK(g.score == 0.0);
  CHECK(none->calls == 0);

  auto retry = std::make_shared<SequenceClient>(std::vector<std::string>{"about half", "0.5"});
  JudgeHandle once(JudgeRole::rubric_scorer, retry);
  g = gpt_accuracy("q", "4", ExtractedAnswer::answer("3"), once);
  CHECK(g.score == 0.5);
  CHECK_FALSE(g.error);
  CHECK(retry->calls == 2);

  auto bad = std::make_shared<SequenceClient>(std::vector<std::string>{"dunno", "still dunno", "1.0"});
  JudgeHandle twice(JudgeRole::rubric_scorer, bad);
  g = gpt_accuracy("q", "4", ExtractedAnswer::answer("3"), twice);
  CHECK(g.error);
  CHECK(g.score == 0.0);
  CHECK(bad->calls == 2);
}

TEST_CASE("parse_judge_float") {
  CHECK(parse_judge_float(" 0.25\n") == 0.25);
  CHECK(parse_judge_float("+1") == 1.0);
  CHECK_FALSE(parse_judge_float("0.5 points"));
  CHECK_FALSE(parse_judge_float(""));
  CHECK_FALSE(parse_judge_float("nan"));
  CHECK_FALSE(parse_judge_float("inf"));
}

TEST_CASE("inclusion accuracy") {
  CHECK(inclusion_accuracy("4", ExtractedAnswer::answer("4")));
  CHECK(inclusion_accuracy("cat", ExtractedAnswer::answer("a black cat")));
  CHECK_FALSE(inclusion_accuracy("yes", ExtractedAnswer::answer("no")));
  CHECK(inclusion_accuracy("  Left  of the\tCar ", ExtractedAnswer::answer("it is left of the car")));
  CHECK_FALSE(inclusion_accuracy("4", ExtractedAnswer::refused()));
  CHECK_FALSE(inclusion_accuracy("", ExtractedAnswer::answer("anything")));
}

TEST_CASE("difficulty buckets") {
  for (long long s = 1; s <= 10; ++s) {
    const auto want = s <= 3 ? Difficulty::easy : s <= 7 ? Difficulty::medium : Difficulty::hard;
    CHECK(bucket_for_score(s) == want);
  }
  CHECK(bucket_for_score(2) == Difficulty::easy);
  CHECK(bucket_for_score(7) == Difficulty::medium);
  CHECK_THROWS_AS(bucket_for_score(11), StratificationError);
  CHECK_THROWS_AS(bucket_for_score(0), StratificationError);
}

TEST_CASE("parse_zoom_score variants") {
  CHECK(parse_zoom_score(R"({"reasoning": "small", "zoom_score": 7})") == 7);
  CHECK(parse_zoom_score("Sure! {\"reasoning\": \"x\", \"zoom_score\": 3} hope it helps") == 3);
  CHECK(parse_zoom_score(R"({"zoom_score": 8.0})") == 8);
  CHECK(parse_zoom_score(R"({"zoom_score": "9"})") == 9);
  CHECK(parse_zoom_score("{ reasoning: crowded, zoom_score: 10 }") == 10);
  CHECK(parse_zoom_score("zoom_score = nope, but 'zoom_score': 4") == 4);
  CHECK_THROWS_AS(parse_zoom_score(R"({"zoom_score": 7.5})"), StratificationError);
  CHECK_THROWS_AS(parse_zoom_score("I would say it is hard."), StratificationError);
  CHECK_THROWS_AS(parse_zoom_score(R"({"reasoning": "x"})"), StratificationError);
}

TEST_CASE("stratify with a mock judge") {
  const auto samples = load_samples(fixture("scenario/difficulty_samples.jsonl"));
  auto client = ScriptedChatClient::from_file(fixture("scenario/difficulty_judge.json"));
  JudgeHandle judge(JudgeRole::difficulty_scorer, client);
  auto load = [](const Sample& s) { return read_ppm(fixture("scenario") / s.image_path); };
  const auto out = stratify_all(samples, judge, load, 3);
  REQUIRE(out.samples.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(out.samples[i].id == samples[i].id);
    CHECK(out.samples[i].difficulty == bucket_for_score(static_cast<long long>(i + 1)));
  }
  REQUIRE(out.excluded.size() == 1);
  CHECK(out.excluded[0].first == "d11");

  JudgeHandle wrong(JudgeRole::extractor, client);
  CHECK_THROWS_AS(stratify(samples[0], load(samples[0]), wrong), ConfigError);
}

TEST_CASE("judge cache") {
  auto seq = std::make_shared<SequenceClient>(std::vector<std::string>{"1.0", "0.0"});
  JudgeHandle h(JudgeRole::rubric_scorer, seq);
  const std::vector<ChatPart> parts{ChatPart::text_part("same")};
  CHECK(h.ask(parts) == "1.0");
  CHECK(h.ask(parts) == "1.0");
  CHECK(h.wire_calls() == 1);
  CHECK(h.cache_hits() == 1);
  CHECK(seq->calls == 1);
  CHECK(h.ask({ChatPart::text_part("other")}) == "0.0");
  CHECK(h.ask(parts, true) == "0.0");
  CHECK(h.ask(parts) == "0.0");
  CHECK(seq->calls == 3);

  // Different roles never share entries even with one cache.
  auto shared = std::make_shared<JudgeCache>();
  auto c1 = std::make_shared<SequenceClient>(std::vector<std::string>{"a"});
  auto c2 = std::make_shared<SequenceClient>(std::vector<std::string>{"b"});
  JudgeHandle x(JudgeRole::extractor, c1, shared), y(JudgeRole::rubric_scorer, c2, shared);
  CHECK(x.ask(parts) == "a");
  CHECK(y.ask(parts) == "b");

  // Images take part in the key.
  auto img1 = std::make_shared<RasterImage>(2, 2, Rgb{1, 1, 1});
  auto img2 = std::make_shared<RasterImage>(2, 2, Rgb{1, 1, 2});
  auto ci = std::make_shared<SequenceClient>(std::vector<std::string>{"p", "q"});
  JudgeHandle im(JudgeRole::difficulty_scorer, ci);
  CHECK(im.ask({ChatPart::image_part(img1, "a"), ChatPart::text_part("t")}) == "p");
  CHECK(im.ask({ChatPart::image_part(img2, "a"), ChatPart::text_part("t")}) == "q");
  CHECK(im.ask({ChatPart::image_part(img1, "renamed"), ChatPart::text_part("t")}) == "p");
}

TEST_CASE("disk cache survives a new handle") {
  testsupport::TempDir dir;
  const std::vector<ChatPart> parts{ChatPart::text_part("persist me")};
  {
    JudgeHandle h(JudgeRole::rubric_scorer, replying({"0.25"}), std::make_shared<JudgeCache>(dir.path()));
    CHECK(h.ask(parts) == "0.25");
  }
  auto seq = std::make_shared<SequenceClient>(std::vector<std::string>{"1.0"});
  JudgeHandle again(JudgeRole::rubric_scorer, seq, std::make_shared<JudgeCache>(dir.path()));
  CHECK(again.ask(parts) == "0.25");
  CHECK(seq->calls == 0);
  CHECK(again.cache_hits() == 1);
}

TEST_CASE("judge retries one transport failure") {
  json script = {{"default", {{"replies", {"0.5"}}, {"fail_first", 1}}}};
  JudgeHandle h(JudgeRole::rubric_scorer, std::make_shared<ScriptedChatClient>(script));
  CHECK(h.ask({ChatPart::text_part("x")}) == "0.5");
  script["default"]["fail_first"] = 2;
  JudgeHandle h2(JudgeRole::rubric_scorer, std::make_shared<ScriptedChatClient>(script));
  CHECK_THROWS_AS(h2.ask({ChatPart::text_part("x")}), TransportError);
}

TEST_CASE("answer judge adapter") {
  HandleAnswerJudge ok(std::make_shared<JudgeHandle>(JudgeRole::answer_similarity, replying({"0.75"})));
  CHECK(ok.score("q", "4", "four") == 0.75);
  HandleAnswerJudge high(std::make_shared<JudgeHandle>(JudgeRole::answer_similarity, replying({"3"})));
  CHECK(high.score("q", "4", "four") == 1.0);
  HandleAnswerJudge bad(std::make_shared<JudgeHandle>(JudgeRole::answer_similarity, replying({"yes"})));
  CHECK_THROWS_AS(bad.score("q", "4", "four"), DataError);
}

TEST_CASE("evaluate_response") {
  auto ex = std::make_shared<JudgeHandle>(JudgeRole::extractor, replying({"4"}));
  auto ru = std::make_shared<JudgeHandle>(JudgeRole::rubric_scorer, replying({"1.0"}));
  auto r = evaluate_response(sample(Difficulty::hard), "<answer>4</answer>", *ex, *ru);
  CHECK(r.extracted.text == "4");
  CHECK(r.gpt_score == 1.0);
  CHECK(r.inclusion);
  CHECK(r.bucket == Difficulty::hard);

  JudgeHandle rex(JudgeRole::extractor, replying({"Refusal"}));
  auto rr = evaluate_response(sample(Difficulty::easy), "???", rex, *ru);
  CHECK(rr.extracted.refusal);
  CHECK(rr.gpt_score == 0.0);
  CHECK_FALSE(rr.inclusion);

  Sample no_bucket = sample(Difficulty::easy);
  no_bucket.difficulty.reset();
  CHECK_THROWS_AS(evaluate_response(no_bucket, "x", *ex, *ru), ConfigError);
}

TEST_CASE("records round trip and validation") {
  testsupport::TempDir dir;
  std::vector<EvalRecord> rs{record("VSR", Difficulty::easy, 0.75, true), record("GQA", Difficulty::hard, 0, false, true)};
  rs[0].raw_answer = "line one\nline two";
  save_records(dir / "r.jsonl", rs);
  CHECK(load_records(dir / "r.jsonl") == rs);

  auto j = to_json(rs[0]);
  j["gpt_score"] = 0.6;
  CHECK_THROWS(record_from_json(j));
  j = to_json(rs[1]);
  j["inclusion"] = true;
  CHECK_THROWS(record_from_json(j));
}

TEST_CASE("aggregate examples") {
  auto rep = aggregate({record("VSR", Difficulty::easy, 1.0, true), record("VSR", Difficulty::easy, 0.5, false)});
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.rows[0].gpt_accuracy == 75.0);
  CHECK(rep.rows[0].inclusion_accuracy == 50.0);
  CHECK(rep.rows[0].count == 2);
  CHECK(rep.notes.size() == 2);

  rep = aggregate({record("T", Difficulty::hard, 0, false, true), record("T", Difficulty::hard, 0, false, true)});
  CHECK(rep.rows[0].gpt_accuracy == 0.0);
  CHECK(rep.rows[0].inclusion_accuracy == 0.0);

  rep = aggregate({record("", Difficulty::medium, 0.25, false)});
  CHECK(rep.rows[0].dataset == "all");

  CHECK_THROWS_AS(aggregate({}), ConfigError);
  CHECK(round2(33.333333) == 33.33);
  CHECK(round2(41.666666) == 41.67);
}

TEST_CASE("golden records aggregate to the golden table") {
  const auto recs = load_records(fixture("scenario/golden_records.jsonl"));
  const auto table = format_table(aggregate(recs));
  CHECK(table == testsupport::slurp(fixture("scenario/golden_table.txt")));
  const auto j = to_json(aggregate(recs));
  CHECK(j["rows"].size() == 4);
  CHECK(j["notes"].size() == 2);
}

TEST_CASE("aggregate is permutation invariant") {
  std::mt19937_64 rng(17);
  const char* names[] = {"VSR", "GQA", "TallyQA"};
  std::uniform_int_distribution<int> ds(0, 2), b(0, 2), lat(0, 4), len(1, 60);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<EvalRecord> rs;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      const bool refusal = lat(rng) == 0;
      rs.push_back(record(names[ds(rng)], static_cast<Difficulty>(b(rng)), refusal ? 0 : lat(rng) * 0.25,
                          !refusal && lat(rng) > 1, refusal));
    }
    const auto a = format_table(aggregate(rs));
    std::shuffle(rs.begin(), rs.end(), rng);
    CHECK(format_table(aggregate(rs)) == a);
  }
}
