#include "patchaudit/image_io.hpp"

#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include <jpeglib.h>

#include "patchaudit/errors.hpp"

namespace patchaudit {

namespace {

enum class FileKind { png, jpeg, other };

FileKind sniff(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::missing_path, "cannot open " + path.string());
  unsigned char magic[8] = {};
  in.read(reinterpret_cast<char*>(magic), sizeof magic);
  static const unsigned char png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  if (in.gcount() >= 8 && std::memcmp(magic, png_sig, 8) == 0) return FileKind::png;
  if (in.gcount() >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF)
    return FileKind::jpeg;
  return FileKind::other;
}

ImageTensor from_interleaved(const unsigned char* bytes, int channels, int h, int w) {
  ImageTensor out(channels, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const unsigned char* px = bytes + (static_cast<size_t>(y) * w + x) * channels;
      for (int c = 0; c < channels; ++c)
        out.at(c, y, x) = static_cast<float>(px[c]) / 255.0f;
    }
  }
  return out;
}

ImageTensor decode_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str()))
    fail(ErrorCode::corrupt_image, path.string() + ": " + image.message);

  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  const int channels = gray ? 1 : 3;

  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string message = image.message;
    png_image_free(&image);
    fail(ErrorCode::corrupt_image, path.string() + ": " + message);
  }
  return from_interleaved(buffer.data(), channels, static_cast<int>(image.height),
                          static_cast<int>(image.width));
}

struct JpegErrorTrap {
  jpeg_error_mgr mgr;
  std::jmp_buf env;
  char message[JMSG_LENGTH_MAX] = {};
};

void jpeg_error_exit(j_common_ptr cinfo) {
  auto* trap = reinterpret_cast<JpegErrorTrap*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, trap->message);
  std::longjmp(trap->env, 1);
}

ImageTensor decode_jpeg(const std::filesystem::path& path) {
  std::FILE* file = std::fopen(path.string().c_str(), "rb");
  if (!file) fail(ErrorCode::missing_path, "cannot open " + path.string());

  jpeg_decompress_struct cinfo;
  JpegErrorTrap trap;
  cinfo.err = jpeg_std_error(&trap.mgr);
  trap.mgr.error_exit = jpeg_error_exit;

  std::vector<unsigned char> pixels;
  int channels = 0, height = 0, width = 0;

  if (setjmp(trap.env)) {
    jpeg_destroy_decompress(&cinfo);
    std::fclose(file);
    fail(ErrorCode::corrupt_image, path.string() + ": " + trap.message);
  }

  jpeg_create_decompress(&cinfo);
  jpeg_stdio_src(&cinfo, file);
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space =
      cinfo.jpeg_color_space == JCS_GRAYSCALE ? JCS_GRAYSCALE : JCS_RGB;
  jpeg_start_decompress(&cinfo);

  channels = cinfo.output_components;
  height = static_cast<int>(cinfo.output_height);
  width = static_cast<int>(cinfo.output_width);
  pixels.resize(static_cast<size_t>(channels) * height * width);
  while (cinfo.output_scanline < cinfo.output_height) {
    unsigned char* row =
        pixels.data() + static_cast<size_t>(cinfo.output_scanline) * width * channels;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  std::fclose(file);

  return from_interleaved(pixels.data(), channels, height, width);
}

}  // namespace

ImageTensor decode_image(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorCode::missing_path, path.string());
  switch (sniff(path)) {
    case FileKind::png: return decode_png(path);
    case FileKind::jpeg: return decode_jpeg(path);
    case FileKind::other: break;
  }
  fail(ErrorCode::unsupported_format, path.string() + " is not PNG or JPEG");
}

void save_png(const ImageTensor& image, const std::filesystem::path& path) {
  if (image.channels != 1 && image.channels != 3)
    fail(ErrorCode::unsupported_channel_count,
         "PNG output supports 1 or 3 channels, got " + std::to_string(image.channels));

  std::vector<unsigned char> buffer(image.size());
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      unsigned char* px =
          buffer.data() + (static_cast<size_t>(y) * image.width + x) * image.channels;
      for (int c = 0; c < image.channels; ++c) {
        const float v = image.at(c, y, x);
        const long q = std::lround(static_cast<double>(v) * 255.0);
        px[c] = static_cast<unsigned char>(q < 0 ? 0 : (q > 255 ? 255 : q));
      }
    }
  }

  png_image out;
  std::memset(&out, 0, sizeof out);
  out.version = PNG_IMAGE_VERSION;
  out.width = static_cast<png_uint_32>(image.width);
  out.height = static_cast<png_uint_32>(image.height);
  out.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&out, path.string().c_str(), 0, buffer.data(), 0, nullptr))
    fail(ErrorCode::io_failure, "cannot write " + path.string() + ": " + out.message);
}

}  // namespace patchaudit
