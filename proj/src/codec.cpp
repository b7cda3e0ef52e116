// PNG/JPEG decoding through libpng and libjpeg. Both libraries report
// errors with longjmp, so each decoder keeps every C++ object that must
// survive an error outside the setjmp scope.

#include "lesionkit/error.hpp"
#include "lesionkit/imaging.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

#include <jpeglib.h>
#include <jerror.h>
#include <png.h>

namespace lesionkit {

namespace {

struct PngSource
{
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos;
};

void
png_read_from_span(png_structp png, png_bytep out, png_size_t count)
{
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->size - src->pos < count)
    png_error(png, "truncated payload");
  std::memcpy(out, src->data + src->pos, count);
  src->pos += count;
}

struct PngMessage
{
  char text[256] = "png decode error";
};

void
png_on_error(png_structp png, png_const_charp msg)
{
  auto* m = static_cast<PngMessage*>(png_get_error_ptr(png));
  std::snprintf(m->text, sizeof(m->text), "png: %s", msg);
  png_longjmp(png, 1);
}

void
png_on_warning(png_structp, png_const_charp)
{}

// Fills `out` (already sized by the caller once dimensions are known).
// Returns false with `msg` set on failure.
bool
png_decode_into(std::span<const std::uint8_t> bytes,
                std::vector<std::uint8_t>& out,
                int& width,
                int& height,
                PngMessage& msg)
{
  PngSource src{ bytes.data(), bytes.size(), 0 };
  png_structp png =
    png_create_read_struct(PNG_LIBPNG_VER_STRING, &msg, png_on_error,
                           png_on_warning);
  if (!png)
    return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  std::vector<png_bytep>* rows = new std::vector<png_bytep>();

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    delete rows;
    return false;
  }

  png_set_read_fn(png, &src, png_read_from_span);
  png_read_info(png, info);
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_set_interlace_handling(png);
  png_read_update_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  if (png_get_channels(png, info) != 3 || png_get_bit_depth(png, info) != 8)
    png_error(png, "unsupported pixel layout");
  if (w == 0 || h == 0 || w > 1u << 15 || h > 1u << 15)
    png_error(png, "unsupported dimensions");
  width = static_cast<int>(w);
  height = static_cast<int>(h);
  out.assign(static_cast<std::size_t>(w) * h * 3, 0);
  rows->resize(h);
  for (png_uint_32 r = 0; r < h; ++r)
    (*rows)[r] = out.data() + static_cast<std::size_t>(r) * w * 3;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);

  png_destroy_read_struct(&png, &info, nullptr);
  delete rows;
  return true;
}

struct JpegErrorManager
{
  jpeg_error_mgr base;
  std::jmp_buf jump;
  char text[JMSG_LENGTH_MAX] = "jpeg decode error";
};

void
jpeg_on_error(j_common_ptr cinfo)
{
  auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
  (*cinfo->err->format_message)(cinfo, err->text);
  std::longjmp(err->jump, 1);
}

void
jpeg_on_message(j_common_ptr cinfo, int level)
{
  // Warnings (level -1) cover corrupt and truncated data, which libjpeg
  // would otherwise decode with padding.
  if (level < 0)
    jpeg_on_error(cinfo);
}

bool
jpeg_decode_into(std::span<const std::uint8_t> bytes,
                 std::vector<std::uint8_t>& out,
                 int& width,
                 int& height,
                 JpegErrorManager& err)
{
  jpeg_decompress_struct cinfo;
  cinfo.err = jpeg_std_error(&err.base);
  err.base.error_exit = jpeg_on_error;
  err.base.emit_message = jpeg_on_message;
  jpeg_create_decompress(&cinfo);

  if (setjmp(err.jump)) {
    jpeg_destroy_decompress(&cinfo);
    return false;
  }

  jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
  jpeg_read_header(&cinfo, TRUE);
  cinfo.out_color_space = JCS_RGB;
  jpeg_start_decompress(&cinfo);
  if (cinfo.output_components != 3)
    ERREXIT(&cinfo, JERR_BAD_IN_COLORSPACE);
  width = static_cast<int>(cinfo.output_width);
  height = static_cast<int>(cinfo.output_height);
  out.assign(static_cast<std::size_t>(width) * height * 3, 0);
  while (cinfo.output_scanline < cinfo.output_height) {
    JSAMPROW row =
      out.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
    jpeg_read_scanlines(&cinfo, &row, 1);
  }
  jpeg_finish_decompress(&cinfo);
  jpeg_destroy_decompress(&cinfo);
  return true;
}

bool
is_png(std::span<const std::uint8_t> bytes)
{
  static constexpr std::uint8_t sig[8] = { 0x89, 'P',  'N',  'G',
                                           '\r', '\n', 0x1a, '\n' };
  return bytes.size() >= 8 && std::memcmp(bytes.data(), sig, 8) == 0;
}

bool
is_jpeg(std::span<const std::uint8_t> bytes)
{
  return bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 &&
         bytes[2] == 0xFF;
}

std::vector<std::uint8_t>
png_write(const void* pixels, int width, int height, png_uint_32 format)
{
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(width);
  image.height = static_cast<png_uint_32>(height);
  image.format = format;

  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels, 0,
                                 nullptr))
    throw Error(std::string("png encode: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels, 0,
                                 nullptr))
    throw Error(std::string("png encode: ") + image.message);
  out.resize(size);
  return out;
}

} // namespace

RasterImage
decode_image(std::span<const std::uint8_t> bytes)
{
  RasterImage image;
  if (is_png(bytes)) {
    PngMessage msg;
    if (!png_decode_into(bytes, image.pixels, image.width, image.height, msg))
      throw InputError(msg.text);
    return image;
  }
  if (is_jpeg(bytes)) {
    JpegErrorManager err;
    if (!jpeg_decode_into(bytes, image.pixels, image.width, image.height,
                          err))
      throw InputError(std::string("jpeg: ") + err.text);
    if (image.width <= 0 || image.height <= 0)
      throw InputError("jpeg: empty image");
    return image;
  }
  throw InputError("unsupported image format (expected PNG or JPEG)");
}

BinaryMask
decode_mask(std::span<const std::uint8_t> bytes)
{
  return binarize(decode_image(bytes));
}

std::vector<std::uint8_t>
encode_png(const RasterImage& image)
{
  return png_write(image.pixels.data(), image.width, image.height,
                   PNG_FORMAT_RGB);
}

std::vector<std::uint8_t>
encode_png(const BinaryMask& mask)
{
  std::vector<std::uint8_t> gray(mask.bits.size());
  for (std::size_t i = 0; i < gray.size(); ++i)
    gray[i] = mask.bits[i] ? 255 : 0;
  return png_write(gray.data(), mask.width, mask.height, PNG_FORMAT_GRAY);
}

} // namespace lesionkit
