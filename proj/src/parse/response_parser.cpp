#include "mags/parse/response_parser.hpp"

#include <charconv>
#include <cmath>

#include "mags/text/strings.hpp"

namespace mags::parse {

std::string_view open_tag(TagFamily f) {
  switch (f) {
    case TagFamily::think:
      return "<think>";
    case TagFamily::zoom:
      return "<zoom>";
    case TagFamily::rethink:
      return "<rethink>";
    case TagFamily::answer:
      return "<answer>";
  }
  return "";
}

std::string_view close_tag(TagFamily f) {
  switch (f) {
    case TagFamily::think:
      return "</think>";
    case TagFamily::zoom:
      return "</zoom>";
    case TagFamily::rethink:
      return "</rethink>";
    case TagFamily::answer:
      return "</answer>";
  }
  return "";
}

bool TagSpan::ordered() const {
  // An opening tag has a single '<', so a later close can never overlap it.
  return open_pos && close_pos && *open_pos < *close_pos;
}

const TagSpan& StructuredResponse::span(TagFamily f) const {
  switch (f) {
    case TagFamily::think:
      return think;
    case TagFamily::zoom:
      return zoom;
    case TagFamily::rethink:
      return rethink;
    case TagFamily::answer:
      return answer;
  }
  return think;
}

std::string StructuredResponse::think_reasoning() const {
  if (!think_text) return {};
  if (!zoom_nested_in_think) return *think_text;
  // Both spans are absolute offsets into raw; cut [zoom open, zoom close end).
  const std::size_t think_begin = *think.open_pos + open_tag(TagFamily::think).size();
  const std::size_t cut_begin = *zoom.open_pos - think_begin;
  const std::size_t cut_end = *zoom.close_pos + close_tag(TagFamily::zoom).size() - think_begin;
  std::string out = think_text->substr(0, cut_begin);
  out += ' ';
  out += think_text->substr(cut_end);
  return out;
}

namespace {

TagSpan locate(std::string_view raw, TagFamily f) {
  TagSpan s;
  if (auto p = raw.find(open_tag(f)); p != std::string_view::npos) s.open_pos = p;
  if (auto p = raw.find(close_tag(f)); p != std::string_view::npos) s.close_pos = p;
  return s;
}

std::optional<std::string> content(std::string_view raw, const TagSpan& s, TagFamily f) {
  if (!s.ordered()) return std::nullopt;
  const std::size_t begin = *s.open_pos + open_tag(f).size();
  return std::string(raw.substr(begin, *s.close_pos - begin));
}

std::optional<double> parse_number(std::string_view token) {
  token = text::trim(token);
  if (token.empty()) return std::nullopt;
  // from_chars would also take "inf"/"nan"; coordinates must be plain decimals.
  for (char c : token) {
    if (!((c >= '0' && c <= '9') || c == '.' || c == '-' || c == 'e' || c == 'E')) return std::nullopt;
  }
  double v = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<BoundingBox> parse_group(std::string_view inner) {
  double coords[4];
  std::size_t count = 0;
  std::size_t start = 0;
  while (true) {
    const auto comma = inner.find(',', start);
    const auto token = inner.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    if (count == 4) return std::nullopt;
    const auto v = parse_number(token);
    if (!v) return std::nullopt;
    coords[count++] = *v;
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (count != 4) return std::nullopt;
  return BoundingBox{coords[0], coords[1], coords[2], coords[3]};
}

}  // namespace

std::vector<BoundingBox> parse_zoom_payload(std::string_view payload) {
  std::vector<BoundingBox> boxes;
  std::optional<std::size_t> last_open;
  for (std::size_t i = 0; i < payload.size(); ++i) {
    if (payload[i] == '[') {
      last_open = i;
    } else if (payload[i] == ']' && last_open) {
      if (auto box = parse_group(payload.substr(*last_open + 1, i - *last_open - 1))) boxes.push_back(*box);
      last_open.reset();
    }
  }
  return boxes;
}

StructuredResponse parse_response(std::string_view raw) {
  StructuredResponse r;
  r.raw = std::string(raw);
  r.think = locate(raw, TagFamily::think);
  r.zoom = locate(raw, TagFamily::zoom);
  r.rethink = locate(raw, TagFamily::rethink);
  r.answer = locate(raw, TagFamily::answer);

  r.think_text = content(raw, r.think, TagFamily::think);
  r.zoom_payload = content(raw, r.zoom, TagFamily::zoom);
  r.rethink_text = content(raw, r.rethink, TagFamily::rethink);
  r.answer_text = content(raw, r.answer, TagFamily::answer);

  if (r.zoom_payload) {
    r.zoom_boxes_raw = parse_zoom_payload(*r.zoom_payload);
    if (r.think.ordered()) {
      const std::size_t think_inner = *r.think.open_pos + open_tag(TagFamily::think).size();
      const std::size_t zoom_end = *r.zoom.close_pos + close_tag(TagFamily::zoom).size();
      r.zoom_nested_in_think = *r.zoom.open_pos >= think_inner && zoom_end <= *r.think.close_pos;
    }
  }
  return r;
}

TruncatedRound1 truncate_at_think_close(std::string_view raw) {
  const auto close = close_tag(TagFamily::think);
  const auto pos = raw.find(close);
  if (pos == std::string_view::npos) return {std::string(raw), true};
  const std::size_t end = pos + close.size();
  return {std::string(raw.substr(0, end)), end != raw.size()};
}

}  // namespace mags::parse
