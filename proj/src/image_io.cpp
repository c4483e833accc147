#include <png.h>

#include <cctype>
#include <fstream>
#include <string>

#include "irispad/error.hpp"
#include "irispad/imaging.hpp"

namespace irispad {

namespace {

bool has_png_signature(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  return in.gcount() == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

}  // namespace

ColorImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw Error(ErrorKind::io, path.string() + ": " + image.message);
  }
  // Alpha carries no intensity information here.
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  const int channels = color ? 3 : 1;
  std::vector<std::uint8_t> data(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, data.data(), 0, nullptr)) {
    const std::string message = image.message;
    png_image_free(&image);
    throw Error(ErrorKind::io, path.string() + ": " + message);
  }
  return ColorImage(static_cast<int>(image.width), static_cast<int>(image.height), channels,
                    std::move(data));
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());

  auto next_token = [&]() {
    std::string token;
    char c;
    while (in.get(c)) {
      if (c == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(c))) {
        if (!token.empty()) break;
        continue;
      }
      token.push_back(c);
    }
    return token;
  };

  if (next_token() != "P5") throw Error(ErrorKind::parse, path.string() + ": not a binary PGM (P5)");
  int width = 0, height = 0, maxval = 0;
  try {
    width = std::stoi(next_token());
    height = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw Error(ErrorKind::parse, path.string() + ": malformed PGM header");
  }
  if (width < 1 || height < 1 || maxval < 1 || maxval > 65535) {
    throw Error(ErrorKind::parse, path.string() + ": invalid PGM header values");
  }

  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<std::uint8_t> data(n);
  if (maxval < 256) {
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
      throw Error(ErrorKind::parse, path.string() + ": truncated PGM data");
    }
    if (maxval != 255) {
      for (auto& v : data) v = static_cast<std::uint8_t>((v * 255 + maxval / 2) / maxval);
    }
  } else {
    std::vector<unsigned char> raw(2 * n);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
      throw Error(ErrorKind::parse, path.string() + ": truncated PGM data");
    }
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = (raw[2 * i] << 8) | raw[2 * i + 1];
      data[i] = static_cast<std::uint8_t>((v * 255u + maxval / 2) / maxval);
    }
  }
  return GrayImage(width, height, std::move(data));
}

GrayImage read_gray_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorKind::io, "no such file " + path.string());
  if (!has_png_signature(path)) return read_pgm(path);

  const auto color = read_png(path);
  if (color.channels() == 1) {
    const auto bytes = color.bytes();
    return GrayImage(color.width(), color.height(), {bytes.begin(), bytes.end()});
  }
  if (color.channels() == 3) return extract_red_channel(color);
  throw Error(ErrorKind::invalid_input,
              path.string() + ": unsupported channel count " + std::to_string(color.channels()));
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  if (image.empty()) throw Error(ErrorKind::invalid_input, "cannot write empty image");
  png_image out{};
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width());
  out.height = static_cast<png_uint_32>(image.height());
  out.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&out, path.c_str(), 0, image.pixels().data(), 0, nullptr)) {
    throw Error(ErrorKind::io, path.string() + ": " + out.message);
  }
}

}  // namespace irispad
