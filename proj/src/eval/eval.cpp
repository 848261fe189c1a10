#include "mags/eval/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <spdlog/spdlog.h>

#include "mags/core/parallel.hpp"
#include "mags/text/strings.hpp"

namespace mags::eval {

using nlohmann::json;

namespace {

void require_role(const JudgeHandle& judge, JudgeRole role, const char* op) {
  if (judge.role() != role) {
    throw ConfigError(std::string(op) + " needs a " + std::string(to_string(role)) + " judge, got " +
                      std::string(to_string(judge.role())));
  }
}

std::string first_line(std::string_view s) {
  const auto t = text::trim(s);
  return std::string(text::trim(t.substr(0, t.find('\n'))));
}

std::optional<long long> integral(double v) {
  if (!std::isfinite(v) || std::floor(v) != v || std::fabs(v) > 1e15) return std::nullopt;
  return static_cast<long long>(v);
}

std::optional<long long> integral(std::string_view s) {
  s = text::trim(s);
  double v = 0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || end != s.data() + s.size()) return std::nullopt;
  return integral(v);
}

}  // namespace

ExtractedAnswer extract_answer(const std::string& question, const std::string& raw_response, JudgeHandle& judge) {
  require_role(judge, JudgeRole::extractor, "extract_answer");
  const auto reply = judge.ask({rollout::ChatPart::text_part(extractor_user_prompt(question, raw_response))});
  auto line = first_line(reply);
  if (line == kRefusal) return ExtractedAnswer::refused();
  return ExtractedAnswer::answer(std::move(line));
}

double snap_to_lattice(double v) { return std::clamp(std::round(v * 4.0) / 4.0, 0.0, 1.0); }

GptScore gpt_accuracy(const std::string& question, const std::string& ground_truth, const ExtractedAnswer& extracted,
                      JudgeHandle& judge) {
  require_role(judge, JudgeRole::rubric_scorer, "gpt_accuracy");
  GptScore out;
  if (extracted.refusal) return out;
  const std::vector parts{rollout::ChatPart::text_part(rubric_user_prompt(question, ground_truth, extracted.text))};
  for (int attempt = 0; attempt < 2; ++attempt) {
    const auto reply = judge.ask(parts, attempt > 0);
    out.raw_reply = reply;
    if (const auto v = parse_judge_float(reply)) {
      out.score = snap_to_lattice(*v);
      if (out.score != *v) {
        out.snapped = true;
        spdlog::warn("rubric score {} is off the lattice, snapped to {}", *v, out.score);
      }
      return out;
    }
  }
  spdlog::error("rubric judge reply \"{}\" is not a score; recording 0", out.raw_reply.value_or(""));
  out.error = true;
  out.score = 0;
  return out;
}

bool inclusion_accuracy(const std::string& ground_truth, const ExtractedAnswer& extracted) {
  if (extracted.refusal) return false;
  const auto gt = text::normalize_spaces(ground_truth);
  if (gt.empty()) return false;
  return text::normalize_spaces(extracted.text).find(gt) != std::string::npos;
}

long long parse_zoom_score(const std::string& reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open) {
    const auto j = json::parse(reply.substr(open, close - open + 1), nullptr, false);
    if (j.is_object() && j.contains("zoom_score")) {
      const auto& v = j["zoom_score"];
      std::optional<long long> n;
      if (v.is_number_integer()) n = v.get<long long>();
      else if (v.is_number()) n = integral(v.get<double>());
      else if (v.is_string()) n = integral(v.get<std::string>());
      if (!n) throw StratificationError("zoom_score is not an integer: " + v.dump());
      return *n;
    }
  }
  static const std::regex pattern(R"re(zoom_score["']?\s*:\s*["']?([-+]?[0-9]+(?:\.[0-9]+)?))re");
  std::smatch m;
  if (std::regex_search(reply, m, pattern)) {
    if (auto n = integral(m[1].str())) return *n;
    throw StratificationError("zoom_score is not an integer: " + m[1].str());
  }
  throw StratificationError("judge reply has no zoom_score");
}

Difficulty bucket_for_score(long long s) {
  if (s >= 1 && s <= 3) return Difficulty::easy;
  if (s >= 4 && s <= 7) return Difficulty::medium;
  if (s >= 8 && s <= 10) return Difficulty::hard;
  throw StratificationError("zoom_score " + std::to_string(s) + " is outside 1..10");
}

Difficulty stratify(const Sample& sample, const RasterImage& image, JudgeHandle& judge) {
  require_role(judge, JudgeRole::difficulty_scorer, "stratify");
  const auto reply = judge.ask({rollout::ChatPart::image_part(std::make_shared<RasterImage>(image), sample.image_path),
                                rollout::ChatPart::text_part(difficulty_user_prompt(sample.question))});
  return bucket_for_score(parse_zoom_score(reply));
}

StratifyOutcome stratify_all(const std::vector<Sample>& samples, JudgeHandle& judge,
                             const std::function<RasterImage(const Sample&)>& load_image, int parallelism) {
  std::vector<std::optional<Difficulty>> buckets(samples.size());
  std::vector<std::string> reasons(samples.size());
  parallel_for(samples.size(), parallelism, [&](std::size_t i) {
    try {
      const auto image = load_image ? load_image(samples[i]) : read_ppm(samples[i].image_path);
      buckets[i] = stratify(samples[i], image, judge);
    } catch (const StratificationError& e) {
      reasons[i] = e.what();
    } catch (const DataError& e) {
      reasons[i] = e.what();
    }
  });
  StratifyOutcome out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (buckets[i]) {
      auto s = samples[i];
      s.difficulty = buckets[i];
      out.samples.push_back(std::move(s));
    } else {
      spdlog::warn("sample {} excluded from stratification: {}", samples[i].id, reasons[i]);
      out.excluded.emplace_back(samples[i].id, reasons[i]);
    }
  }
  return out;
}

EvalRecord evaluate_response(const Sample& sample, const std::string& raw_response, JudgeHandle& extractor,
                             JudgeHandle& rubric) {
  if (!sample.difficulty) throw ConfigError("sample " + sample.id + " has no difficulty bucket; stratify first");
  EvalRecord r;
  r.sample_id = sample.id;
  r.dataset = sample.dataset;
  r.raw_answer = raw_response;
  r.bucket = *sample.difficulty;
  r.extracted = extract_answer(sample.question, raw_response, extractor);
  const auto g = gpt_accuracy(sample.question, sample.ground_truth, r.extracted, rubric);
  r.gpt_score = g.score;
  r.gpt_error = g.error;
  r.inclusion = inclusion_accuracy(sample.ground_truth, r.extracted);
  return r;
}

json to_json(const EvalRecord& r) {
  return {{"id", r.sample_id},
          {"dataset", r.dataset},
          {"raw_answer", r.raw_answer},
          {"extracted", r.extracted.refusal ? json(kRefusal) : json(r.extracted.text)},
          {"refusal", r.extracted.refusal},
          {"gpt_score", r.gpt_score},
          {"gpt_error", r.gpt_error},
          {"inclusion", r.inclusion},
          {"bucket", std::string(to_string(r.bucket))}};
}

EvalRecord record_from_json(const json& j) {
  EvalRecord r;
  try {
    r.sample_id = j.at("id").get<std::string>();
    r.dataset = j.value("dataset", std::string{});
    r.raw_answer = j.value("raw_answer", std::string{});
    if (j.value("refusal", false)) r.extracted = ExtractedAnswer::refused();
    else r.extracted = ExtractedAnswer::answer(j.at("extracted").get<std::string>());
    r.gpt_score = j.at("gpt_score").get<double>();
    r.gpt_error = j.value("gpt_error", false);
    r.inclusion = j.at("inclusion").get<bool>();
    const auto b = parse_difficulty(j.at("bucket").get<std::string>());
    if (!b) throw DataError("unknown bucket " + j.at("bucket").dump());
    r.bucket = *b;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed evaluation record: ") + e.what());
  }
  if (snap_to_lattice(r.gpt_score) != r.gpt_score) {
    throw DataError("gpt_score " + std::to_string(r.gpt_score) + " is not on the rubric lattice");
  }
  if (r.extracted.refusal && (r.gpt_score != 0 || r.inclusion)) {
    throw DataError("record " + r.sample_id + " is a refusal but carries a nonzero score");
  }
  return r;
}

std::vector<EvalRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<EvalRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim(line).empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(e.what(), n);
    } catch (const DataError& e) {
      throw DataError(e.what(), n);
    }
  }
  return out;
}

void save_records(const std::filesystem::path& path, const std::vector<EvalRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

Report aggregate(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw ConfigError("nothing to aggregate: no evaluation records");
  std::map<std::pair<std::string, Difficulty>, std::vector<const EvalRecord*>> groups;
  std::set<std::string> datasets;
  for (const auto& r : records) {
    const auto ds = r.dataset.empty() ? std::string(kDefaultDataset) : r.dataset;
    datasets.insert(ds);
    groups[{ds, r.bucket}].push_back(&r);
  }
  Report report;
  for (const auto& ds : datasets) {
    for (const auto b : {Difficulty::easy, Difficulty::medium, Difficulty::hard}) {
      const auto it = groups.find({ds, b});
      if (it == groups.end()) {
        report.notes.push_back(ds + " " + std::string(to_string(b)) + ": no records, row omitted");
        continue;
      }
      // Sum in sorted order so the result does not depend on record order.
      std::vector<double> scores;
      std::size_t included = 0;
      for (const auto* r : it->second) {
        scores.push_back(r->gpt_score);
        included += r->inclusion ? 1 : 0;
      }
      std::sort(scores.begin(), scores.end());
      double sum = 0;
      for (double s : scores) sum += s;
      const auto n = static_cast<double>(scores.size());
      report.rows.push_back({ds, b, scores.size(), round2(sum / n * 100.0), round2(included / n * 100.0)});
    }
  }
  return report;
}

namespace {
std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}
}  // namespace

json to_json(const Report& report) {
  json rows = json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"dataset", r.dataset},
                    {"bucket", std::string(to_string(r.bucket))},
                    {"count", r.count},
                    {"gpt_accuracy", r.gpt_accuracy},
                    {"inclusion_accuracy", r.inclusion_accuracy}});
  }
  return {{"rows", std::move(rows)}, {"notes", report.notes}};
}

std::string format_table(const Report& report) {
  std::vector<std::array<std::string, 5>> cells{{"dataset", "bucket", "n", "GPT ACC", "Inc. ACC"}};
  for (const auto& r : report.rows) {
    cells.push_back({r.dataset, std::string(to_string(r.bucket)), std::to_string(r.count), fixed2(r.gpt_accuracy),
                     fixed2(r.inclusion_accuracy)});
  }
  std::array<std::size_t, 5> width{};
  for (const auto& row : cells)
    for (std::size_t c = 0; c < 5; ++c) width[c] = std::max(width[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 5; ++c) {
      const auto pad = std::string(width[c] - row[c].size(), ' ');
      // Text columns left-aligned, numbers right-aligned.
      if (c < 2) out << row[c] << pad;
      else out << pad << row[c];
      out << (c + 1 < 5 ? "  " : "\n");
    }
  }
  for (const auto& note : report.notes) out << "note: " << note << '\n';
  return out.str();
}

}  // namespace mags::eval
