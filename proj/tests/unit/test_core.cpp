#include <random>

#include "doctest.h"
#include "json.hpp"
#include "mags/core/codec.hpp"
#include "mags/core/dataset.hpp"
#include "mags/core/endpoint.hpp"
#include "mags/core/errors.hpp"
#include "mags/core/prompts.hpp"
#include "mags/core/raster_image.hpp"
#include "mags/core/stage_config.hpp"
#include "support.hpp"

using namespace mags;
using nlohmann::json;

TEST_CASE("stage defaults") {
  const auto s1 = default_stage_config(Stage::stage1);
  CHECK(s1.kl_beta == 0.04);
  CHECK(s1.sampling_temperature == 0.09);
  CHECK(s1.learning_rate == 2e-6);
  CHECK(s1.max_steps == 300);
  CHECK(s1.zoom_reward_variant == ZoomRewardVariant::precision);
  CHECK(s1.reference_policy == "base");

  const auto s2 = default_stage_config(Stage::stage2);
  CHECK(s2.kl_beta == 0.03);
  CHECK(s2.sampling_temperature == 1.0);
  CHECK(s2.learning_rate == 5e-7);
  CHECK(s2.max_steps == 225);
  CHECK(s2.zoom_reward_variant == ZoomRewardVariant::recall_counting);
  CHECK(s2.reference_policy == "stage1");

  for (const auto& s : {s1, s2}) {
    CHECK(s.lambda_ans == 2.0);
    CHECK(s.lambda_zoom == 1.0);
    CHECK(s.lambda_revo == 0.5);
    CHECK(s.fmt_weights.zfmt == 0.5);
    CHECK(s.fmt_weights.afmt == 0.1);
    CHECK(s.fmt_weights.tfmt == 0.1);
    CHECK(s.fmt_weights.rfmt == 0.1);
    CHECK(s.group_size == 16);
    CHECK(s.batch_size == 64);
    CHECK(s.clip_eps == 0.2);
    CHECK_FALSE(s.prompts_overridden);
  }
  CHECK(s1.system_prompt == prompts::kStage1System);
  CHECK(s1.prompt_suffix == prompts::kStage1Suffix);
  CHECK(s2.system_prompt == prompts::kStage2System);
  CHECK(s2.prompt_suffix == prompts::kStage2Suffix);
  CHECK(s1.system_prompt != s2.system_prompt);
}

TEST_CASE("prompt texts carry the protocol rules") {
  CHECK(prompts::kStage1System.find("<zoom>") != std::string_view::npos);
  CHECK(prompts::kStage1System.find("</think>") != std::string_view::npos);
  CHECK(prompts::kExtractorSystem.find("'Refusal'") != std::string_view::npos);
  CHECK(prompts::kRubricSystem.find("Output ONLY the float value") != std::string_view::npos);
  CHECK(prompts::kDifficultySystem.find("zoom_score") != std::string_view::npos);
}

TEST_CASE("overrides") {
  auto c = apply_overrides(default_stage_config(Stage::stage1), json{{"clip_eps", 0.1}});
  auto d = default_stage_config(Stage::stage1);
  CHECK(c.clip_eps == 0.1);
  d.clip_eps = 0.1;
  CHECK(c.kl_beta == d.kl_beta);
  CHECK(c.system_prompt == d.system_prompt);
  CHECK(c.group_size == d.group_size);

  c = apply_overrides(default_stage_config(Stage::stage1), json{{"fmt_subweights", {{"zfmt", 0.7}}}});
  CHECK(c.fmt_weights.zfmt == 0.7);
  CHECK(c.fmt_weights.afmt == 0.1);

  c = apply_overrides(default_stage_config(Stage::stage2),
                      json{{"override_prompts", {{"system_prompt", "custom"}}}});
  CHECK(c.system_prompt == "custom");
  CHECK(c.prompts_overridden);

  auto key_of = [](const json& j) {
    try {
      apply_overrides(default_stage_config(Stage::stage1), j);
    } catch (const ConfigError& e) {
      return e.key;
    }
    return std::string("<none>");
  };
  CHECK(key_of(json{{"system_prompt", "sneaky"}}) == "system_prompt");
  CHECK(key_of(json{{"bogus", 1}}) == "bogus");
  CHECK(key_of(json{{"clip_eps", "wide"}}) == "clip_eps");
  CHECK(key_of(json{{"fmt_subweights", {{"xfmt", 1}}}}).find("xfmt") != std::string::npos);
}

TEST_CASE("load_stage_config reads an override file") {
  testsupport::TempDir dir;
  testsupport::spit(dir / "o.json", R"({"kl_beta": 0.5, "group_size": 8})");
  const auto c = load_stage_config(Stage::stage2, dir / "o.json");
  CHECK(c.kl_beta == 0.5);
  CHECK(c.group_size == 8);
  CHECK(c.sampling_temperature == 1.0);
  testsupport::spit(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(load_stage_config(Stage::stage1, dir / "bad.json"), ConfigError);
}

TEST_CASE("parse_stage") {
  CHECK(parse_stage("stage1") == Stage::stage1);
  CHECK(parse_stage("Stage2") == Stage::stage2);
  CHECK(parse_stage("2") == Stage::stage2);
  CHECK_FALSE(parse_stage("stage3").has_value());
}

TEST_CASE("samples: counting gt_count, errors with line numbers, empty file") {
  const auto samples = parse_samples(
      R"({"id":"b1","image_path":"bus.ppm","question":"How many buses are there?","ground_truth":"4","task_type":"counting"})"
      "\n\n"
      R"({"id":"v1","image_path":"v.ppm","question":"Is the cat left of the car?","ground_truth":"yes","task_type":"other","difficulty":"hard","dataset":"VSR"})");
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].gt_count == 4);
  CHECK(samples[0].is_counting());
  CHECK(samples[1].difficulty == Difficulty::hard);
  CHECK(samples[1].dataset == "VSR");
  CHECK(parse_samples("").empty());

  try {
    parse_samples(
        R"({"id":"a","image_path":"a","question":"q","ground_truth":"1","task_type":"counting"})"
        "\n"
        R"({"id":"b","image_path":"b","question":"q","ground_truth":"blue","task_type":"counting"})");
    FAIL("expected a DataError");
  } catch (const DataError& e) {
    CHECK(e.line == 2);
  }
  CHECK_THROWS_AS(parse_samples("{oops"), DataError);
  CHECK_THROWS_AS(parse_samples(R"({"id":"a","image_path":"a","question":"q","ground_truth":"3","task_type":"counting","gt_count":4})"),
                  DataError);
  CHECK_THROWS_AS(parse_samples(R"({"id":"a","image_path":"a","question":"q","ground_truth":"3","task_type":"tally"})"),
                  DataError);
}

TEST_CASE("count literal parsing is strict") {
  CHECK(parse_count_literal("4") == 4);
  CHECK(parse_count_literal(" 12 ") == 12);
  CHECK_FALSE(parse_count_literal("4.0").has_value());
  CHECK_FALSE(parse_count_literal("+4").has_value());
  CHECK_FALSE(parse_count_literal("-1").has_value());
  CHECK_FALSE(parse_count_literal("four").has_value());
  CHECK_FALSE(parse_count_literal("").has_value());
}

TEST_CASE("property: samples round-trip through serialization") {
  std::mt19937 rng(13);
  std::uniform_int_distribution<int> d(0, 9);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Sample> in;
    const int n = d(rng);
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.id = "s" + std::to_string(i) + "\"\t\xc3\xa9";
      s.image_path = "img/" + std::to_string(d(rng)) + ".ppm";
      s.question = "q " + std::to_string(d(rng)) + "\nline";
      if (d(rng) % 2) {
        s.task_type = TaskType::counting;
        s.gt_count = d(rng);
        s.ground_truth = std::to_string(*s.gt_count);
      } else {
        s.ground_truth = "answer " + std::to_string(d(rng));
      }
      if (d(rng) % 3 == 0) s.difficulty = static_cast<Difficulty>(d(rng) % 3);
      if (d(rng) % 2) s.dataset = "GQA";
      in.push_back(s);
    }
    CHECK(parse_samples(serialize_samples(in)) == in);
  }
}

TEST_CASE("ppm encode/decode") {
  RasterImage img(3, 2, Rgb{1, 2, 3});
  img.set(2, 1, {200, 100, 50});
  const auto bytes = encode_ppm(img);
  const std::string header(bytes.begin(), bytes.begin() + 11);
  CHECK(header == "P6\n3 2\n255\n");
  CHECK(decode_ppm(bytes) == img);
  CHECK(decode_ppm(bytes).at(2, 1) == Rgb{200, 100, 50});

  const std::string with_comment = "P6\n# made by hand\n1 1\n255\n\x01\x02\x03";
  const std::vector<std::uint8_t> raw(with_comment.begin(), with_comment.end());
  CHECK(decode_ppm(raw).at(0, 0) == Rgb{1, 2, 3});

  const std::string truncated = "P6\n2 2\n255\n\x01\x02";
  CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(truncated.begin(), truncated.end())), DataError);
  const std::string p3 = "P3\n1 1\n255\n1 2 3";
  CHECK_THROWS_AS(decode_ppm(std::vector<std::uint8_t>(p3.begin(), p3.end())), DataError);
  CHECK_THROWS_AS(RasterImage(0, 3), DataError);
  CHECK_THROWS_AS(RasterImage(2, 2, std::vector<std::uint8_t>(5)), DataError);
  CHECK_THROWS_AS(read_ppm("/nonexistent/x.ppm"), DataError);
}

TEST_CASE("base64 and content hash") {
  const std::string text = "hello, world";
  const std::vector<std::uint8_t> bytes(text.begin(), text.end());
  CHECK(base64_encode(bytes) == "aGVsbG8sIHdvcmxk");
  CHECK(base64_decode("aGVsbG8s\nIHdvcmxk") == bytes);
  CHECK_THROWS_AS(base64_decode("!!!"), DataError);
  CHECK(content_hash("abc").size() == 64);
  CHECK(content_hash("abc") == content_hash("abc"));
  CHECK(content_hash("abc") != content_hash("abd"));
  // BLAKE2b-256 of the empty string.
  CHECK(content_hash("") == "0e5751c026e543b2e8ab2eb06099daa1d1e5df47778f7787faab45cdf12fe3a8");
}

TEST_CASE("endpoints") {
  auto e = parse_endpoint("http://localhost:8080/v1/chat/completions");
  CHECK(e.base == "http://localhost:8080");
  CHECK(e.path == "/v1/chat/completions");
  e = parse_endpoint("https://judge.example");
  CHECK(e.path == "/");
  CHECK_THROWS_AS(parse_endpoint("ftp://x"), ConfigError);
  CHECK_THROWS_AS(parse_endpoint("localhost:80"), ConfigError);
}
