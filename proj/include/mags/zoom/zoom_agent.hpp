#pragma once

#include <cstddef>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mags/core/endpoint.hpp"
#include "mags/core/raster_image.hpp"
#include "mags/core/types.hpp"

namespace mags::zoom {

inline constexpr double kDefaultAreaLimit = 0.40;
inline constexpr int kDefaultTargetMinSide = 448;

// Sent back to the policy in place of crops when no proposed box survives.
extern const std::string_view kFailureMessage;

enum class VerdictReason { ok, degenerate, area_exceeds_limit, unparseable };
std::string_view to_string(VerdictReason r);

struct BoxVerdict {
  BoundingBox box;  // after clamping to the image and snapping outward to integers
  bool valid = false;
  VerdictReason reason = VerdictReason::unparseable;
};

// Clamp into [0,w]x[0,h] (floor mins, ceil maxes), then reject empty boxes,
// then reject boxes covering >= area_limit of the image.
std::vector<BoxVerdict> validate_boxes(std::span<const BoundingBox> boxes, int width, int height,
                                       double area_limit = kDefaultAreaLimit);
std::size_t count_valid(std::span<const BoxVerdict> verdicts);

// Exact pixel copy of a valid verdict's rectangle. Throws ConfigError for an
// invalid verdict or one that does not fit the image.
RasterImage crop(const RasterImage& image, const BoxVerdict& verdict);

enum class UpscaleMethod { nearest, bilinear, external_sr };
std::string_view to_string(UpscaleMethod m);

// ceil(target_min_side / min(width, height)), never below 1.
int scale_factor(int width, int height, int target_min_side);

RasterImage upscale_nearest(const RasterImage& image, int factor);
// Half-pixel-centred bilinear interpolation with edge clamping.
RasterImage upscale_bilinear(const RasterImage& image, int factor);

// External super-resolution service. Must be safe for concurrent calls.
class SuperResolutionClient {
 public:
  virtual ~SuperResolutionClient() = default;
  virtual RasterImage upscale(const RasterImage& crop, int target_min_side) = 0;
};

// POSTs the crop as a binary PPM to the endpoint with the desired minimum side
// in an "X-Target-Min-Side" header; the response body must be a PPM image.
// At most `max_in_flight` requests run at once.
class HttpSuperResolutionClient final : public SuperResolutionClient {
 public:
  HttpSuperResolutionClient(const std::string& url, WireOptions options = {}, int max_in_flight = 4);
  RasterImage upscale(const RasterImage& crop, int target_min_side) override;

 private:
  Endpoint endpoint_;
  WireOptions options_;
  std::counting_semaphore<1024> slots_;
};

struct UpscaleResult {
  RasterImage image;
  // external_sr failed (or had no client) and bilinear was used instead.
  bool fell_back = false;
  std::string note;
};

UpscaleResult upscale(const RasterImage& image, int target_min_side, UpscaleMethod method,
                      SuperResolutionClient* sr = nullptr);

struct ZoomConfig {
  double area_limit = kDefaultAreaLimit;
  int target_min_side = kDefaultTargetMinSide;
  UpscaleMethod method = UpscaleMethod::bilinear;
  std::shared_ptr<SuperResolutionClient> sr;
};

struct ZoomCrop {
  std::size_t box_index = 0;  // position in the proposal list
  BoundingBox box;            // clamped coordinates
  RasterImage image;          // upscaled crop
};

struct ZoomFeedback {
  enum class Outcome { crops, failure };
  Outcome outcome = Outcome::failure;
  std::vector<ZoomCrop> crops;
  std::string failure_message;
};

struct ZoomResult {
  ZoomFeedback feedback;
  std::vector<BoxVerdict> verdicts;
  std::size_t k = 0;  // valid boxes
  std::size_t n = 0;  // proposed boxes
  std::vector<std::string> notes;
};

ZoomResult execute_zoom(const RasterImage& image, std::span<const BoundingBox> boxes, const ZoomConfig& config);

}  // namespace mags::zoom
