#include "mags/zoom/zoom_agent.hpp"

#include <algorithm>
#include <cmath>

#include "httplib.h"
#include "mags/core/errors.hpp"

namespace mags::zoom {

const std::string_view kFailureMessage =
    "Zoom failed: no valid regions were provided. Re-examine the original image and answer directly.";

std::string_view to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::ok:
      return "ok";
    case VerdictReason::degenerate:
      return "degenerate";
    case VerdictReason::area_exceeds_limit:
      return "area_exceeds_limit";
    case VerdictReason::unparseable:
      return "unparseable";
  }
  return "unparseable";
}

std::string_view to_string(UpscaleMethod m) {
  switch (m) {
    case UpscaleMethod::nearest:
      return "nearest";
    case UpscaleMethod::bilinear:
      return "bilinear";
    case UpscaleMethod::external_sr:
      return "external_sr";
  }
  return "bilinear";
}

std::vector<BoxVerdict> validate_boxes(std::span<const BoundingBox> boxes, int width, int height,
                                       double area_limit) {
  if (width < 1 || height < 1) throw ConfigError("image must be at least 1x1");
  const double w = width;
  const double h = height;
  const double image_area = w * h;
  std::vector<BoxVerdict> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) {
    BoxVerdict v;
    v.box = b;
    if (!std::isfinite(b.x1) || !std::isfinite(b.y1) || !std::isfinite(b.x2) || !std::isfinite(b.y2)) {
      v.reason = VerdictReason::unparseable;
      out.push_back(v);
      continue;
    }
    v.box = {std::floor(std::clamp(b.x1, 0.0, w)), std::floor(std::clamp(b.y1, 0.0, h)),
             std::ceil(std::clamp(b.x2, 0.0, w)), std::ceil(std::clamp(b.y2, 0.0, h))};
    if (v.box.x2 <= v.box.x1 || v.box.y2 <= v.box.y1) {
      v.reason = VerdictReason::degenerate;
    } else if ((v.box.x2 - v.box.x1) * (v.box.y2 - v.box.y1) / image_area >= area_limit) {
      v.reason = VerdictReason::area_exceeds_limit;
    } else {
      v.reason = VerdictReason::ok;
      v.valid = true;
    }
    out.push_back(v);
  }
  return out;
}

std::size_t count_valid(std::span<const BoxVerdict> verdicts) {
  return static_cast<std::size_t>(std::count_if(verdicts.begin(), verdicts.end(), [](const auto& v) { return v.valid; }));
}

RasterImage crop(const RasterImage& image, const BoxVerdict& verdict) {
  if (!verdict.valid) throw ConfigError("refusing to crop a box rejected as " + std::string(to_string(verdict.reason)));
  const int x1 = static_cast<int>(verdict.box.x1);
  const int y1 = static_cast<int>(verdict.box.y1);
  const int x2 = static_cast<int>(verdict.box.x2);
  const int y2 = static_cast<int>(verdict.box.y2);
  if (x1 < 0 || y1 < 0 || x2 > image.width() || y2 > image.height() || x2 <= x1 || y2 <= y1) {
    throw ConfigError("crop box does not fit the image");
  }
  RasterImage out(x2 - x1, y2 - y1);
  const auto src = image.pixels();
  auto dst = out.pixels();
  const auto row_bytes = static_cast<std::size_t>(x2 - x1) * 3;
  for (int y = y1; y < y2; ++y) {
    const auto from = (static_cast<std::size_t>(y) * static_cast<std::size_t>(image.width()) + static_cast<std::size_t>(x1)) * 3;
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(from), row_bytes,
                dst.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(y - y1) * row_bytes));
  }
  return out;
}

int scale_factor(int width, int height, int target_min_side) {
  const int min_side = std::min(width, height);
  if (target_min_side <= min_side) return 1;
  return (target_min_side + min_side - 1) / min_side;
}

RasterImage upscale_nearest(const RasterImage& image, int factor) {
  if (factor < 1) throw ConfigError("scale factor must be >= 1");
  if (factor == 1) return image;
  RasterImage out(image.width() * factor, image.height() * factor);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) out.set(x, y, image.at(x / factor, y / factor));
  }
  return out;
}

RasterImage upscale_bilinear(const RasterImage& image, int factor) {
  if (factor < 1) throw ConfigError("scale factor must be >= 1");
  if (factor == 1) return image;
  const int w = image.width();
  const int h = image.height();
  RasterImage out(w * factor, h * factor);

  struct Tap {
    int lo;
    int hi;
    double frac;
  };
  auto taps = [factor](int n_out, int n_in) {
    std::vector<Tap> t(static_cast<std::size_t>(n_out));
    for (int i = 0; i < n_out; ++i) {
      const double s = std::clamp((i + 0.5) / factor - 0.5, 0.0, static_cast<double>(n_in - 1));
      const int lo = static_cast<int>(std::floor(s));
      t[static_cast<std::size_t>(i)] = {lo, std::min(lo + 1, n_in - 1), s - lo};
    }
    return t;
  };
  const auto xs = taps(out.width(), w);
  const auto ys = taps(out.height(), h);

  for (int y = 0; y < out.height(); ++y) {
    const auto& ty = ys[static_cast<std::size_t>(y)];
    for (int x = 0; x < out.width(); ++x) {
      const auto& tx = xs[static_cast<std::size_t>(x)];
      const Rgb a = image.at(tx.lo, ty.lo);
      const Rgb b = image.at(tx.hi, ty.lo);
      const Rgb c = image.at(tx.lo, ty.hi);
      const Rgb d = image.at(tx.hi, ty.hi);
      Rgb px;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = a[ch] + (b[ch] - a[ch]) * tx.frac;
        const double bottom = c[ch] + (d[ch] - c[ch]) * tx.frac;
        const double v = top + (bottom - top) * ty.frac;
        px[ch] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
      out.set(x, y, px);
    }
  }
  return out;
}

HttpSuperResolutionClient::HttpSuperResolutionClient(const std::string& url, WireOptions options, int max_in_flight)
    : endpoint_(parse_endpoint(url)), options_(std::move(options)), slots_(std::clamp(max_in_flight, 1, 1024)) {}

RasterImage HttpSuperResolutionClient::upscale(const RasterImage& crop_image, int target_min_side) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};

  httplib::Client client(endpoint_.base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  httplib::Headers headers{{"X-Target-Min-Side", std::to_string(target_min_side)}};
  if (!options_.api_key.empty()) headers.emplace("Authorization", "Bearer " + options_.api_key);
  const auto bytes = encode_ppm(crop_image);
  auto res = client.Post(endpoint_.path, headers, reinterpret_cast<const char*>(bytes.data()), bytes.size(),
                         "image/x-portable-pixmap");
  if (!res) throw TransportError("super-resolution service unreachable: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300) {
    throw TransportError("super-resolution service returned HTTP " + std::to_string(res->status));
  }
  try {
    const auto* data = reinterpret_cast<const std::uint8_t*>(res->body.data());
    return decode_ppm({data, res->body.size()});
  } catch (const DataError& e) {
    throw TransportError(std::string("super-resolution response is not a PPM image: ") + e.what());
  }
}

UpscaleResult upscale(const RasterImage& image, int target_min_side, UpscaleMethod method, SuperResolutionClient* sr) {
  const int f = scale_factor(image.width(), image.height(), target_min_side);
  switch (method) {
    case UpscaleMethod::nearest:
      return {upscale_nearest(image, f), false, {}};
    case UpscaleMethod::bilinear:
      return {upscale_bilinear(image, f), false, {}};
    case UpscaleMethod::external_sr:
      break;
  }
  if (sr == nullptr) return {upscale_bilinear(image, f), true, "no super-resolution client configured; used bilinear"};
  try {
    return {sr->upscale(image, target_min_side), false, {}};
  } catch (const Error& e) {
    return {upscale_bilinear(image, f), true, std::string("super-resolution failed (") + e.what() + "); used bilinear"};
  }
}

ZoomResult execute_zoom(const RasterImage& image, std::span<const BoundingBox> boxes, const ZoomConfig& config) {
  ZoomResult r;
  r.verdicts = validate_boxes(boxes, image.width(), image.height(), config.area_limit);
  r.n = r.verdicts.size();
  r.k = count_valid(r.verdicts);
  for (std::size_t i = 0; i < r.verdicts.size(); ++i) {
    const auto& v = r.verdicts[i];
    if (!v.valid) continue;
    auto up = upscale(crop(image, v), config.target_min_side, config.method, config.sr.get());
    if (up.fell_back) r.notes.push_back("box " + std::to_string(i) + ": " + up.note);
    r.feedback.crops.push_back({i, v.box, std::move(up.image)});
  }
  if (r.k == 0) {
    r.feedback.outcome = ZoomFeedback::Outcome::failure;
    r.feedback.failure_message = std::string(kFailureMessage);
  } else {
    r.feedback.outcome = ZoomFeedback::Outcome::crops;
  }
  return r;
}

}  // namespace mags::zoom
