#pragma once

// Byte-exact external denoiser protocol (little-endian):
//
//   request : "PPD1" | u32 height | u32 width | f64 tau
//             | height*width f64 real plane | height*width f64 imag plane
//   response: "PPR1" | u8 status
//             status 0: two f64 planes as in the request
//             status 1: u32 msg_len | msg_len bytes of UTF-8
//
// One request per message; responses come back in order.

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pnprecon/image.hpp"

namespace pnp::wire {

inline constexpr char kRequestMagic[4] = {'P', 'P', 'D', '1'};
inline constexpr char kResponseMagic[4] = {'P', 'P', 'R', '1'};
inline constexpr std::uint8_t kStatusOk = 0;
inline constexpr std::uint8_t kStatusError = 1;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Request {
  Shape shape;
  double tau = 0.0;
  std::vector<double> re;
  std::vector<double> im;
};

struct Response {
  bool ok = true;
  std::vector<double> re;
  std::vector<double> im;
  std::string message;
};

/// Fills exactly `out.size()` bytes or throws.
using ReadExact = std::function<void(std::span<std::uint8_t> out)>;

Request make_request(const ComplexImage& img, double tau);
ComplexImage to_image(const Shape& shape, const Response& resp);

std::vector<std::uint8_t> encode(const Request& req);
std::vector<std::uint8_t> encode(const Response& resp);

/// Throws ProtocolError on bad magic or when the image exceeds max_pixels.
Request decode_request(const ReadExact& read, std::size_t max_pixels = 1u << 24);
/// Throws ProtocolError on bad magic or an unknown status byte.
Response decode_response(const ReadExact& read, const Shape& expected);

}  // namespace pnp::wire
