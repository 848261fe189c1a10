#include "mags/cli/cli.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <ostream>
#include <sstream>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "mags/core/dataset.hpp"
#include "mags/core/errors.hpp"
#include "mags/core/parallel.hpp"
#include "mags/core/stage_config.hpp"
#include "mags/eval/eval.hpp"
#include "mags/eval/judge.hpp"
#include "mags/grpo/grpo.hpp"
#include "mags/grpo/toy_policy.hpp"
#include "mags/parse/response_parser.hpp"
#include "mags/reward/reward_engine.hpp"
#include "mags/rollout/chat.hpp"
#include "mags/rollout/rollout.hpp"
#include "mags/text/strings.hpp"
#include "mags/zoom/zoom_agent.hpp"

namespace mags::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string stage = "stage1";
  std::string samples;
  std::string responses;
  std::string records;
  std::string backend_url;
  std::string judge_url;
  std::string model = "policy";
  std::string out;
  std::string config;
  std::string image;
  std::string boxes;
  std::string method = "bilinear";
  std::string sr_url;
  std::string cache_dir;
  std::uint64_t seed = 0;
  int parallelism = default_parallelism();
  double area_limit = zoom::kDefaultAreaLimit;
  int target_min_side = zoom::kDefaultTargetMinSide;
  std::optional<double> clip_eps;
  std::optional<double> kl_beta;
  std::optional<int> group_size;
  double judge_rate = 0;
  bool logprobs = false;
  bool timing = false;
  // grpo-check
  int vocab = 32;
  int length = 8;
  int seeds = 1;
  bool equal_rewards = false;
  bool flip_sign = false;
};

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::is_regular_file(path)) throw ConfigError("no such file: " + path, flag);
}

void require_flag(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

StageConfig stage_config(const Options& o) {
  const auto stage = parse_stage(o.stage);
  if (!stage) throw ConfigError("unknown stage \"" + o.stage + "\" (expected stage1 or stage2)", "--stage");
  std::optional<fs::path> overrides;
  if (!o.config.empty()) {
    require_file(o.config, "--config");
    overrides = o.config;
  }
  auto cfg = load_stage_config(*stage, overrides);
  json flags = json::object();
  if (o.clip_eps) flags["clip_eps"] = *o.clip_eps;
  if (o.kl_beta) flags["kl_beta"] = *o.kl_beta;
  if (o.group_size) flags["group_size"] = *o.group_size;
  return flags.empty() ? cfg : apply_overrides(cfg, flags);
}

zoom::UpscaleMethod parse_method(const std::string& m) {
  if (m == "nearest") return zoom::UpscaleMethod::nearest;
  if (m == "bilinear") return zoom::UpscaleMethod::bilinear;
  if (m == "external_sr") return zoom::UpscaleMethod::external_sr;
  throw ConfigError("unknown upscale method \"" + m + "\"", "--method");
}

zoom::ZoomConfig zoom_config(const Options& o) {
  if (!(o.area_limit > 0 && o.area_limit <= 1)) throw ConfigError("must lie in (0, 1]", "--area-limit");
  if (o.target_min_side < 1) throw ConfigError("must be positive", "--target-min-side");
  zoom::ZoomConfig z;
  z.area_limit = o.area_limit;
  z.target_min_side = o.target_min_side;
  z.method = parse_method(o.method);
  if (!o.sr_url.empty()) z.sr = std::make_shared<zoom::HttpSuperResolutionClient>(o.sr_url);
  if (z.method == zoom::UpscaleMethod::external_sr && !z.sr) throw ConfigError("external_sr needs --sr-url", "--method");
  return z;
}

WireOptions wire(const char* key_env) {
  WireOptions w;
  w.api_key = env_or_empty(key_env);
  return w;
}

std::function<RasterImage(const Sample&)> image_loader(const std::string& samples_path) {
  const auto dir = fs::path(samples_path).parent_path();
  return [dir](const Sample& s) { return read_ppm(resolve_image_path(s, dir)); };
}

std::vector<Sample> load_unique_samples(const std::string& path) {
  auto samples = load_samples(path);
  std::set<std::string> seen;
  for (const auto& s : samples) {
    if (!seen.insert(s.id).second) throw DataError("duplicate sample id " + s.id + " in " + path);
  }
  return samples;
}

std::string file_stem_for(const std::string& id) {
  std::string s = id;
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) c = '_';
  }
  return s.empty() ? "sample" : s;
}

void write_text(const fs::path& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  f << body;
}

// Writes to --out when given, else to the report stream.
void emit(const Options& o, std::ostream& out, const std::string& body) {
  if (o.out.empty()) out << body;
  else write_text(o.out, body);
}

struct Judges {
  std::shared_ptr<rollout::ChatClient> client;
  std::shared_ptr<eval::JudgeCache> cache;
  double rate = 0;

  std::shared_ptr<eval::JudgeHandle> handle(eval::JudgeRole role) const {
    return std::make_shared<eval::JudgeHandle>(role, client, cache, rate);
  }
};

Judges make_judges(const Options& o) {
  Judges j;
  j.client = rollout::make_chat_client(o.judge_url, "judge", wire("MAGS_JUDGE_API_KEY"));
  j.cache = std::make_shared<eval::JudgeCache>(o.cache_dir.empty() ? std::nullopt
                                                                     : std::optional<fs::path>(o.cache_dir));
  j.rate = o.judge_rate;
  return j;
}

rollout::BackendHandle make_backend(const Options& o) {
  require_flag(o.backend_url, "--backend-url");
  rollout::BackendHandle b;
  b.identity = o.backend_url;
  b.capabilities.returns_logprobs = o.logprobs;
  b.client = rollout::make_chat_client(o.backend_url, o.model, wire("MAGS_BACKEND_API_KEY"));
  return b;
}

int worst_exit(const std::vector<rollout::RolloutTranscript>& ts) {
  int code = kExitOk;
  for (const auto& t : ts) {
    if (!t.error) continue;
    code = std::max(code, t.transport_failure ? kExitTransport : kExitData);
  }
  return code;
}

// ---- score ----------------------------------------------------------------

int cmd_score(const Options& o, std::ostream& out, std::ostream& err) {
  const auto cfg = stage_config(o);
  require_file(o.samples, "--samples");
  require_file(o.responses, "--responses");
  if (!(o.area_limit > 0 && o.area_limit <= 1)) throw ConfigError("must lie in (0, 1]", "--area-limit");
  std::shared_ptr<eval::HandleAnswerJudge> judge;
  if (!o.judge_url.empty()) {
    judge = std::make_shared<eval::HandleAnswerJudge>(make_judges(o).handle(eval::JudgeRole::answer_similarity));
  }

  std::map<std::string, Sample> by_id;
  for (auto& s : load_unique_samples(o.samples)) by_id.emplace(s.id, std::move(s));
  const auto dir = fs::path(o.samples).parent_path();

  struct Line {
    std::size_t number;
    std::string id;
    std::string response;
  };
  std::vector<Line> lines;
  std::vector<std::string> errors;
  {
    std::ifstream in(o.responses);
    std::string raw;
    for (std::size_t n = 1; std::getline(in, raw); ++n) {
      if (text::trim(raw).empty()) continue;
      try {
        const auto j = json::parse(raw);
        lines.push_back({n, j.at("id").get<std::string>(), j.at("response").get<std::string>()});
      } catch (const json::exception& e) {
        errors.push_back("line " + std::to_string(n) + ": malformed response record: " + e.what());
      }
    }
  }

  std::vector<std::optional<std::string>> results(lines.size());
  std::vector<std::optional<std::string>> failures(lines.size());
  std::mutex image_mutex;
  std::map<fs::path, std::pair<int, int>> image_sizes;
  parallel_for(lines.size(), o.parallelism, [&](std::size_t i) {
    const auto& line = lines[i];
    try {
      const auto it = by_id.find(line.id);
      if (it == by_id.end()) throw DataError("no sample with id " + line.id);
      const auto& sample = it->second;
      const auto parsed = parse::parse_response(line.response);
      std::size_t k = 0;
      const std::size_t n = parsed.zoom_boxes_raw.size();
      if (n > 0) {
        const auto path = resolve_image_path(sample, dir);
        std::pair<int, int> size;
        {
          std::lock_guard lock(image_mutex);
          auto cached = image_sizes.find(path);
          if (cached == image_sizes.end()) {
            const auto img = read_ppm(path);
            cached = image_sizes.emplace(path, std::pair{img.width(), img.height()}).first;
          }
          size = cached->second;
        }
        k = zoom::count_valid(zoom::validate_boxes(parsed.zoom_boxes_raw, size.first, size.second, o.area_limit));
      }
      const auto b = reward::total_reward(sample, parsed, k, n, cfg, judge.get());
      results[i] = json{{"id", line.id}, {"rewards", reward::to_json(b)}}.dump();
    } catch (const Error& e) {
      failures[i] = "line " + std::to_string(line.number) + ": " + e.what();
    }
  });

  std::string report;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (results[i]) report += *results[i] + "\n";
    if (failures[i]) errors.push_back(*failures[i]);
  }
  emit(o, out, report);
  for (const auto& e : errors) err << "error: " << e << '\n';
  return errors.empty() ? kExitOk : kExitData;
}

// ---- rollout / group ------------------------------------------------------

rollout::RolloutContext rollout_context(const Options& o, const StageConfig& cfg, reward::AnswerJudge* judge) {
  rollout::RolloutContext ctx;
  ctx.backend = make_backend(o);
  ctx.stage = cfg;
  ctx.judge = judge;
  ctx.zoom = zoom_config(o);
  ctx.load_image = image_loader(o.samples);
  ctx.record_timing = o.timing;
  return ctx;
}

std::shared_ptr<reward::AnswerJudge> optional_answer_judge(const Options& o) {
  if (o.judge_url.empty()) return nullptr;
  return std::make_shared<eval::HandleAnswerJudge>(make_judges(o).handle(eval::JudgeRole::answer_similarity));
}

void write_transcript(const rollout::RolloutTranscript& t, const fs::path& dir, const std::string& stem) {
  const auto crops = dir / "crops";
  if (!t.zoom.feedback.crops.empty()) fs::create_directories(crops);
  write_text(dir / (stem + ".json"), rollout::transcript_to_json(t, crops, stem, dir).dump(2) + "\n");
}

std::string summary_line(const rollout::RolloutTranscript& t) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s seed=%llu r_total=%.6g k=%zu n=%zu", t.sample_id.c_str(),
                static_cast<unsigned long long>(t.seed), t.rewards.r_total, t.zoom.k, t.zoom.n);
  return std::string(buf) + (t.error ? " error: " + *t.error : "");
}

int cmd_rollout(const Options& o, std::ostream& out, std::ostream&) {
  const auto cfg = stage_config(o);
  require_file(o.samples, "--samples");
  require_flag(o.out, "--out");
  const auto judge = optional_answer_judge(o);
  const auto ctx = rollout_context(o, cfg, judge.get());
  const auto samples = load_unique_samples(o.samples);

  fs::create_directories(o.out);
  std::vector<rollout::RolloutTranscript> ts(samples.size());
  parallel_for(samples.size(), o.parallelism, [&](std::size_t i) { ts[i] = rollout::run_rollout(ctx, samples[i], o.seed); });
  for (const auto& t : ts) {
    write_transcript(t, o.out, file_stem_for(t.sample_id));
    out << summary_line(t) << '\n';
  }
  return worst_exit(ts);
}

int cmd_group(const Options& o, std::ostream& out, std::ostream&) {
  const auto cfg = stage_config(o);
  require_file(o.samples, "--samples");
  require_flag(o.out, "--out");
  const auto judge = optional_answer_judge(o);
  const auto ctx = rollout_context(o, cfg, judge.get());
  const auto samples = load_unique_samples(o.samples);

  const fs::path dir(o.out);
  fs::create_directories(dir / "transcripts");
  std::vector<grpo::GroupBatch> batches;
  int code = kExitOk;
  for (const auto& s : samples) {
    std::vector<rollout::RolloutTranscript> ts;
    try {
      auto g = rollout::run_group(ctx, s, cfg.group_size, o.seed, o.parallelism);
      ts = std::move(g.transcripts);
      batches.push_back(std::move(g.batch));
      const auto& b = batches.back();
      out << s.id << " members=" << b.members.size() << "/" << cfg.group_size << '\n';
    } catch (const rollout::GroupDiscarded& e) {
      out << s.id << " discarded: " << e.what() << '\n';
      ts = e.transcripts;
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
      write_transcript(ts[i], dir / "transcripts", file_stem_for(s.id) + "_g" + std::to_string(i));
    }
    code = std::max(code, worst_exit(ts));
  }
  grpo::save_group_batches(dir / "groups.jsonl", batches);
  return code;
}

// ---- zoom -----------------------------------------------------------------

std::vector<BoundingBox> read_boxes(const std::string& arg) {
  std::string textual = arg;
  if (fs::is_regular_file(arg)) {
    std::ifstream in(arg);
    std::stringstream ss;
    ss << in.rdbuf();
    textual = ss.str();
  }
  const auto j = json::parse(textual, nullptr, false);
  if (j.is_array()) {
    std::vector<BoundingBox> out;
    for (const auto& b : j) {
      if (!b.is_array() || b.size() != 4) throw ConfigError("each box must be [x1, y1, x2, y2]", "--boxes");
      for (const auto& v : b)
        if (!v.is_number()) throw ConfigError("box coordinates must be numbers", "--boxes");
      out.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()});
    }
    return out;
  }
  // Anything else is read like a <zoom> payload.
  return parse::parse_zoom_payload(textual);
}

int cmd_zoom(const Options& o, std::ostream& out, std::ostream&) {
  require_file(o.image, "--image");
  require_flag(o.boxes, "--boxes");
  require_flag(o.out, "--out");
  const auto zc = zoom_config(o);
  const auto boxes = read_boxes(o.boxes);
  const auto image = read_ppm(o.image);

  const auto r = zoom::execute_zoom(image, boxes, zc);
  fs::create_directories(o.out);
  json verdicts = json::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back({{"box", {v.box.x1, v.box.y1, v.box.x2, v.box.y2}},
                        {"valid", v.valid},
                        {"reason", std::string(zoom::to_string(v.reason))}});
  }
  json crops = json::array();
  for (const auto& c : r.feedback.crops) {
    const auto name = "crop_" + std::to_string(c.box_index) + ".ppm";
    write_ppm(fs::path(o.out) / name, c.image);
    crops.push_back({{"box_index", c.box_index}, {"file", name}, {"width", c.image.width()}, {"height", c.image.height()}});
  }
  const bool ok = r.feedback.outcome == zoom::ZoomFeedback::Outcome::crops;
  const json summary = {{"k", r.k},
                        {"n", r.n},
                        {"outcome", ok ? "crops" : "failure"},
                        {"failure_message", ok ? json(nullptr) : json(r.feedback.failure_message)},
                        {"verdicts", std::move(verdicts)},
                        {"crops", std::move(crops)},
                        {"notes", r.notes}};
  write_text(fs::path(o.out) / "zoom.json", summary.dump(2) + "\n");
  out << "k=" << r.k << " n=" << r.n << " crops=" << r.feedback.crops.size() << '\n';
  if (!ok) out << r.feedback.failure_message << '\n';
  return kExitOk;
}

// ---- stratify / evaluate --------------------------------------------------

int cmd_stratify(const Options& o, std::ostream& out, std::ostream&) {
  require_file(o.samples, "--samples");
  require_flag(o.judge_url, "--judge-url");
  require_flag(o.out, "--out");
  const auto judges = make_judges(o);
  const auto samples = load_unique_samples(o.samples);
  const auto handle = judges.handle(eval::JudgeRole::difficulty_scorer);
  const auto result = eval::stratify_all(samples, *handle, image_loader(o.samples), o.parallelism);
  save_samples(o.out, result.samples);

  std::map<Difficulty, std::size_t> counts{{Difficulty::easy, 0}, {Difficulty::medium, 0}, {Difficulty::hard, 0}};
  for (const auto& s : result.samples) ++counts[*s.difficulty];
  for (const auto& [b, n] : counts) out << to_string(b) << ' ' << n << '\n';
  out << "excluded " << result.excluded.size() << '\n';
  return kExitOk;
}

std::map<std::string, std::string> read_responses(const std::string& path) {
  std::map<std::string, std::string> out;
  std::ifstream in(path);
  std::string raw;
  for (std::size_t n = 1; std::getline(in, raw); ++n) {
    if (text::trim(raw).empty()) continue;
    try {
      const auto j = json::parse(raw);
      out[j.at("id").get<std::string>()] = j.at("response").get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(std::string("malformed response record: ") + e.what(), n);
    }
  }
  return out;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream&) {
  std::vector<eval::EvalRecord> records;
  int code = kExitOk;
  if (!o.records.empty()) {
    require_file(o.records, "--records");
    if (!o.out.empty()) fs::create_directories(o.out);
    records = eval::load_records(o.records);
  } else {
    require_file(o.samples, "--samples");
    require_flag(o.judge_url, "--judge-url");
    if (o.responses.empty() && o.backend_url.empty()) throw ConfigError("evaluate needs --records, --responses or --backend-url");
    if (!o.responses.empty()) require_file(o.responses, "--responses");
    const auto judges = make_judges(o);
    const auto extractor = judges.handle(eval::JudgeRole::extractor);
    const auto rubric = judges.handle(eval::JudgeRole::rubric_scorer);
    auto samples = load_unique_samples(o.samples);
    for (const auto& s : samples) {
      if (!s.difficulty) throw DataError("sample " + s.id + " has no difficulty; run stratify first");
    }

    std::vector<std::optional<std::string>> answers(samples.size());
    if (!o.responses.empty()) {
      const auto responses = read_responses(o.responses);
      for (std::size_t i = 0; i < samples.size(); ++i) {
        if (auto it = responses.find(samples[i].id); it != responses.end()) answers[i] = it->second;
        else spdlog::warn("no response for sample {}; skipped", samples[i].id);
      }
    } else {
      auto ctx = rollout_context(o, stage_config(o), nullptr);
      ctx.use_stage_temperature = false;
      ctx.backend.params.temperature = rollout::kEvalTemperature;
      ctx.backend.params.top_p = rollout::kEvalTopP;
      std::vector<rollout::RolloutTranscript> ts(samples.size());
      parallel_for(samples.size(), o.parallelism, [&](std::size_t i) { ts[i] = rollout::run_rollout(ctx, samples[i], o.seed); });
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!ts[i].error) answers[i] = ts[i].round1.text + ts[i].round2.raw_output;
      }
      code = worst_exit(ts);
    }

    std::vector<std::optional<eval::EvalRecord>> slots(samples.size());
    parallel_for(samples.size(), o.parallelism, [&](std::size_t i) {
      if (answers[i]) slots[i] = eval::evaluate_response(samples[i], *answers[i], *extractor, *rubric);
    });
    for (auto& r : slots)
      if (r) records.push_back(std::move(*r));
    if (!o.out.empty()) {
      fs::create_directories(o.out);
      eval::save_records(fs::path(o.out) / "records.jsonl", records);
    }
    spdlog::info("judge wire calls: extractor {}, rubric {}; cache hits {}", extractor->wire_calls(),
                 rubric->wire_calls(), extractor->cache_hits() + rubric->cache_hits());
  }

  const auto report = eval::aggregate(records);
  if (!o.out.empty()) write_text(fs::path(o.out) / "report.json", eval::to_json(report).dump(2) + "\n");
  out << eval::format_table(report);
  return code;
}

// ---- grpo-check -----------------------------------------------------------

int cmd_grpo_check(const Options& o, std::ostream& out, std::ostream&) {
  if (o.vocab < 2 || o.vocab > grpo::ToyPolicy::kMaxVocab) throw ConfigError("must lie in 2..64", "--vocab");
  if (o.length < 1 || o.length > grpo::ToyPolicy::kMaxLength) throw ConfigError("must lie in 1..8", "--length");
  if (o.seeds < 1) throw ConfigError("must be at least 1", "--seeds");
  grpo::GradCheckSpec spec;
  spec.group_size = o.group_size.value_or(16);
  spec.clip_eps = o.clip_eps.value_or(0.2);
  spec.kl_beta = o.kl_beta.value_or(0.04);
  spec.equal_rewards = o.equal_rewards;
  spec.flip_analytic_sign = o.flip_sign;

  bool pass = true;
  for (int i = 0; i < o.seeds; ++i) {
    spec.seed = o.seed + static_cast<std::uint64_t>(i);
    const auto policy = grpo::ToyPolicy::random(o.vocab, o.length, spec.seed);
    const auto r = grpo::toy_policy_grad_check(policy, spec);
    const bool ok = r.max_rel_error < grpo::kGradCheckTolerance;
    pass = pass && ok;
    char buf[160];
    std::snprintf(buf, sizeof buf, "seed %llu: max relative error %.3e (%s)", static_cast<unsigned long long>(spec.seed),
                  r.max_rel_error, ok ? "pass" : "FAIL");
    out << buf << '\n';
  }
  out << (pass ? "pass" : "fail") << '\n';
  return pass ? kExitOk : kExitData;
}

// ---- wiring ---------------------------------------------------------------

void add_stage_flags(CLI::App* c, Options& o) {
  c->add_option("--stage", o.stage, "Curriculum stage: stage1 or stage2");
  c->add_option("--config", o.config, "JSON file of stage-config overrides");
  c->add_option("--clip-eps", o.clip_eps, "Ratio clip epsilon");
  c->add_option("--kl-beta", o.kl_beta, "KL penalty weight");
  c->add_option("--group-size", o.group_size, "Rollouts per group");
}

void add_backend_flags(CLI::App* c, Options& o) {
  c->add_option("--backend-url", o.backend_url, "Policy backend: http(s) URL or mock:<script.json>");
  c->add_option("--model", o.model, "Model name sent to the backend");
  c->add_flag("--logprobs", o.logprobs, "Ask the backend for token log-probs");
}

void add_zoom_flags(CLI::App* c, Options& o) {
  c->add_option("--area-limit", o.area_limit, "Reject boxes covering at least this fraction of the image");
  c->add_option("--target-min-side", o.target_min_side, "Upscale crops until their shorter side reaches this");
  c->add_option("--method", o.method, "Upscaler: nearest, bilinear or external_sr");
  c->add_option("--sr-url", o.sr_url, "External super-resolution endpoint");
}

void add_judge_flags(CLI::App* c, Options& o) {
  c->add_option("--judge-url", o.judge_url, "Judge endpoint: http(s) URL or mock:<script.json>");
  c->add_option("--cache-dir", o.cache_dir, "Directory for the judge response cache");
  c->add_option("--judge-rate", o.judge_rate, "Max judge calls per second (0 = unlimited)");
}

void add_common(CLI::App* c, Options& o) {
  c->add_option("--seed", o.seed, "Base seed");
  c->add_option("--parallelism", o.parallelism, "Worker threads")->check(CLI::PositiveNumber);
  c->add_option("--out", o.out, "Output file or directory");
}

class OstreamRedirect {
 public:
  explicit OstreamRedirect(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("mags", sink);
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
  }
  ~OstreamRedirect() { spdlog::set_default_logger(previous_); }

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  OstreamRedirect logs(err);
  Options o;
  std::string log_level = "warn";
  CLI::App app{"Two-round zoom-agent rollouts, rewards, GRPO checks and evaluation", "mags"};
  app.require_subcommand(1);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off");

  auto* score = app.add_subcommand("score", "Score canned responses against their samples");
  add_stage_flags(score, o);
  add_common(score, o);
  add_judge_flags(score, o);
  score->add_option("--samples", o.samples, "Samples JSONL")->required();
  score->add_option("--responses", o.responses, "Responses JSONL: {id, response}")->required();
  score->add_option("--area-limit", o.area_limit, "Reject boxes covering at least this fraction of the image");

  auto* roll = app.add_subcommand("rollout", "Run one two-round rollout per sample");
  add_stage_flags(roll, o);
  add_common(roll, o);
  add_backend_flags(roll, o);
  add_zoom_flags(roll, o);
  add_judge_flags(roll, o);
  roll->add_option("--samples", o.samples, "Samples JSONL")->required();
  roll->add_flag("--timing", o.timing, "Record wall-clock time in transcripts");

  auto* group = app.add_subcommand("group", "Run G rollouts per sample and compute group advantages");
  add_stage_flags(group, o);
  add_common(group, o);
  add_backend_flags(group, o);
  add_zoom_flags(group, o);
  add_judge_flags(group, o);
  group->add_option("--samples", o.samples, "Samples JSONL")->required();
  group->add_flag("--timing", o.timing, "Record wall-clock time in transcripts");

  auto* zm = app.add_subcommand("zoom", "Validate boxes, crop and upscale one image");
  add_common(zm, o);
  add_zoom_flags(zm, o);
  zm->add_option("--image", o.image, "PPM image")->required();
  zm->add_option("--boxes", o.boxes, "Boxes as JSON, a <zoom> payload, or a file holding either")->required();

  auto* strat = app.add_subcommand("stratify", "Bucket samples by judged zoom difficulty");
  add_common(strat, o);
  add_judge_flags(strat, o);
  strat->add_option("--samples", o.samples, "Samples JSONL")->required();

  auto* ev = app.add_subcommand("evaluate", "Extract, judge and aggregate answers");
  add_stage_flags(ev, o);
  add_common(ev, o);
  add_backend_flags(ev, o);
  add_zoom_flags(ev, o);
  add_judge_flags(ev, o);
  ev->add_option("--samples", o.samples, "Stratified samples JSONL");
  ev->add_option("--responses", o.responses, "Responses JSONL: {id, response}");
  ev->add_option("--records", o.records, "Aggregate existing evaluation records instead");

  auto* gc = app.add_subcommand("grpo-check", "Finite-difference check of the GRPO gradient on a toy policy");
  gc->add_option("--seed", o.seed, "First seed");
  gc->add_option("--seeds", o.seeds, "Number of consecutive seeds");
  gc->add_option("--vocab", o.vocab, "Toy vocabulary size");
  gc->add_option("--length", o.length, "Toy sequence length");
  gc->add_option("--group-size", o.group_size, "Group size");
  gc->add_option("--clip-eps", o.clip_eps, "Ratio clip epsilon");
  gc->add_option("--kl-beta", o.kl_beta, "KL penalty weight");
  gc->add_flag("--equal-rewards", o.equal_rewards, "Give every group member the same reward");
  gc->add_flag("--flip-sign", o.flip_sign, "Negate the analytic gradient (negative control)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*score) return cmd_score(o, out, err);
    if (*roll) return cmd_rollout(o, out, err);
    if (*group) return cmd_group(o, out, err);
    if (*zm) return cmd_zoom(o, out, err);
    if (*strat) return cmd_stratify(o, out, err);
    if (*ev) return cmd_evaluate(o, out, err);
    if (*gc) return cmd_grpo_check(o, out, err);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TransportError& e) {
    err << "transport error: " << e.what() << '\n';
    return kExitTransport;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace mags::cli
