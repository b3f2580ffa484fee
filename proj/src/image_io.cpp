#include "nsnet/image_io.hpp"

#include <fstream>
#include <iterator>
#include <ostream>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "nsnet/binary_io.hpp"
#include "nsnet/error.hpp"

namespace nsnet {

RasterImage decode_image(std::span<const std::uint8_t> encoded) {
  if (encoded.empty()) throw InputError("empty image buffer");
  const cv::Mat buf(1, static_cast<int>(encoded.size()), CV_8UC1,
                    const_cast<std::uint8_t*>(encoded.data()));
  const cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) throw InputError("not a decodable PNG or JPEG image");

  RasterImage img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(x, y, 0) = row[x][2];
      img.at(x, y, 1) = row[x][1];
      img.at(x, y, 2) = row[x][0];
    }
  }
  return img;
}

RasterImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                        std::istreambuf_iterator<char>()};
  try {
    return decode_image(bytes);
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const RasterImage& img) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x] = cv::Vec3b(img.at(x, y, 2), img.at(x, y, 1), img.at(x, y, 0));
    }
  }
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) throw IoError("PNG encoding failed");
  return out;
}

void save_png(const RasterImage& img, const std::filesystem::path& path) {
  const auto bytes = encode_png(img);
  io::write_file_atomic(path, [&](std::ostream& out) {
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  });
}

}  // namespace nsnet
