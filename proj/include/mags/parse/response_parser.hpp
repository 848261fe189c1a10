#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mags/core/types.hpp"

namespace mags::parse {

enum class TagFamily { think, zoom, rethink, answer };

std::string_view open_tag(TagFamily f);
std::string_view close_tag(TagFamily f);

// Where the first opening and first closing tag of one family sit in the raw
// text. Only first occurrences count; later duplicates are ignored.
struct TagSpan {
  std::optional<std::size_t> open_pos;   // offset of the first "<tag>"
  std::optional<std::size_t> close_pos;  // offset of the first "</tag>"

  bool both_found() const { return open_pos && close_pos; }
  // The family is detected only when the first opening tag ends before the
  // first closing tag starts.
  bool ordered() const;
};

struct StructuredResponse {
  std::string raw;

  TagSpan think;
  TagSpan zoom;
  TagSpan rethink;
  TagSpan answer;

  std::optional<std::string> think_text;    // round-1 reasoning, zoom block included
  std::optional<std::string> zoom_payload;  // text between the zoom tags
  std::optional<std::string> rethink_text;
  std::optional<std::string> answer_text;

  std::vector<BoundingBox> zoom_boxes_raw;
  bool zoom_nested_in_think = false;

  const TagSpan& span(TagFamily f) const;
  bool present(TagFamily f) const { return span(f).ordered(); }
  // Both tags exist but the first close precedes the first open.
  bool disordered(TagFamily f) const { return span(f).both_found() && !span(f).ordered(); }

  // Round-1 reasoning with the nested zoom block cut out; this is the text
  // whose lexical statistics gate the zoom rewards.
  std::string think_reasoning() const;
};

// Total: never throws, whatever the bytes.
StructuredResponse parse_response(std::string_view raw);

// Every innermost "[a, b, c, d]" group of four finite numbers, in order.
// Groups of any other arity, or with non-numeric members, are skipped.
std::vector<BoundingBox> parse_zoom_payload(std::string_view payload);

struct TruncatedRound1 {
  std::string text;
  // Set when "</think>" is missing or the model kept generating after it.
  bool violation = false;
};

TruncatedRound1 truncate_at_think_close(std::string_view raw);

}  // namespace mags::parse
