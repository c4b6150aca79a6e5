#include "keyshap/image.hpp"

#include <cctype>

#include "keyshap/error.hpp"
#include "keyshap/io.hpp"

namespace keyshap {

Image::Image(int w, int h, std::uint8_t fill) : width(w), height(h) {
  if (w < 1 || h < 1) throw Error(ErrorKind::kConfig, "image dimensions must be positive");
  pixels.assign(static_cast<std::size_t>(w) * h * 3, fill);
}

namespace {

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  long long next_int() {
    skip_space_and_comments();
    long long v = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      v = v * 10 + (bytes_[pos_++] - '0');
      if (++digits > 9) throw Error(ErrorKind::kMalformedInput, "PPM header value too large");
    }
    if (digits == 0) throw Error(ErrorKind::kMalformedInput, "PPM header truncated");
    return v;
  }

  std::size_t pos() const noexcept { return pos_; }
  void advance() { ++pos_; }

 private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 2;
};

}  // namespace

Image decode_ppm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6')
    throw Error(ErrorKind::kMalformedInput, "not a binary PPM (P6) image");
  HeaderReader header(bytes);
  const auto w = header.next_int();
  const auto h = header.next_int();
  const auto maxval = header.next_int();
  if (w < 1 || h < 1) throw Error(ErrorKind::kMalformedInput, "PPM dimensions must be positive");
  if (maxval != 255) throw Error(ErrorKind::kMalformedInput, "only maxval 255 PPM images are supported");
  if (header.pos() >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[header.pos()])))
    throw Error(ErrorKind::kMalformedInput, "PPM header not terminated");
  header.advance();
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - header.pos() < need)
    throw Error(ErrorKind::kMalformedInput, "PPM pixel data truncated");
  Image img(static_cast<int>(w), static_cast<int>(h));
  const auto* src = reinterpret_cast<const std::uint8_t*>(bytes.data() + header.pos());
  img.pixels.assign(src, src + need);
  return img;
}

std::string encode_ppm(const Image& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(read_text_file(path)); }

void write_ppm(const std::filesystem::path& path, const Image& image) {
  write_text_file(path, encode_ppm(image));
}

}  // namespace keyshap
