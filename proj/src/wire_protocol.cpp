#include "pnprecon/wire_protocol.hpp"

#include <bit>
#include <cstring>

namespace pnp::wire {

namespace {

static_assert(std::endian::native == std::endian::little,
              "wire protocol encoding assumes a little-endian host");

template <typename T>
void put(std::vector<std::uint8_t>& buf, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

void put_plane(std::vector<std::uint8_t>& buf, const std::vector<double>& plane) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(plane.data());
  buf.insert(buf.end(), p, p + plane.size() * sizeof(double));
}

template <typename T>
T get(const ReadExact& read) {
  T v{};
  read(std::span(reinterpret_cast<std::uint8_t*>(&v), sizeof(T)));
  return v;
}

std::vector<double> get_plane(const ReadExact& read, std::size_t n) {
  std::vector<double> plane(n);
  read(std::span(reinterpret_cast<std::uint8_t*>(plane.data()), n * sizeof(double)));
  return plane;
}

void expect_magic(const ReadExact& read, const char (&magic)[4]) {
  std::uint8_t got[4];
  read(got);
  if (std::memcmp(got, magic, 4) != 0) throw ProtocolError("bad magic in denoiser message");
}

}  // namespace

Request make_request(const ComplexImage& img, double tau) {
  Request req{img.shape(), tau, std::vector<double>(img.size()), std::vector<double>(img.size())};
  for (std::size_t i = 0; i < img.size(); ++i) {
    req.re[i] = img[i].real();
    req.im[i] = img[i].imag();
  }
  return req;
}

ComplexImage to_image(const Shape& shape, const Response& resp) {
  if (resp.re.size() != shape.size() || resp.im.size() != shape.size())
    throw ProtocolError("response plane length does not match the request shape");
  ComplexImage img(shape);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = {resp.re[i], resp.im[i]};
  return img;
}

std::vector<std::uint8_t> encode(const Request& req) {
  std::vector<std::uint8_t> buf;
  buf.reserve(20 + 16 * req.shape.size());
  buf.insert(buf.end(), kRequestMagic, kRequestMagic + 4);
  put(buf, static_cast<std::uint32_t>(req.shape.height));
  put(buf, static_cast<std::uint32_t>(req.shape.width));
  put(buf, req.tau);
  put_plane(buf, req.re);
  put_plane(buf, req.im);
  return buf;
}

std::vector<std::uint8_t> encode(const Response& resp) {
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kResponseMagic, kResponseMagic + 4);
  put(buf, resp.ok ? kStatusOk : kStatusError);
  if (resp.ok) {
    put_plane(buf, resp.re);
    put_plane(buf, resp.im);
  } else {
    put(buf, static_cast<std::uint32_t>(resp.message.size()));
    buf.insert(buf.end(), resp.message.begin(), resp.message.end());
  }
  return buf;
}

Request decode_request(const ReadExact& read, std::size_t max_pixels) {
  expect_magic(read, kRequestMagic);
  Request req;
  req.shape.height = get<std::uint32_t>(read);
  req.shape.width = get<std::uint32_t>(read);
  req.tau = get<double>(read);
  if (req.shape.size() > max_pixels) throw ProtocolError("request image too large");
  req.re = get_plane(read, req.shape.size());
  req.im = get_plane(read, req.shape.size());
  return req;
}

Response decode_response(const ReadExact& read, const Shape& expected) {
  expect_magic(read, kResponseMagic);
  const auto status = get<std::uint8_t>(read);
  Response resp;
  if (status == kStatusOk) {
    resp.re = get_plane(read, expected.size());
    resp.im = get_plane(read, expected.size());
  } else if (status == kStatusError) {
    resp.ok = false;
    const auto len = get<std::uint32_t>(read);
    if (len > (1u << 20)) throw ProtocolError("error message length is implausible");
    resp.message.resize(len);
    read(std::span(reinterpret_cast<std::uint8_t*>(resp.message.data()), len));
  } else {
    throw ProtocolError("unknown response status " + std::to_string(status));
  }
  return resp;
}

}  // namespace pnp::wire
