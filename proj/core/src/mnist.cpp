#include "ssgdlab/mnist.hpp"

#include <zlib.h>

#include <cstdint>
#include <fstream>
#include <string>

#include "ssgdlab/errors.hpp"

namespace ssgdlab {
namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open " + path.string());
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return bytes;
}

std::vector<std::uint8_t> gunzip(const std::vector<std::uint8_t>& in,
                                 const std::string& name) {
  z_stream strm{};
  // 15 + 16 selects gzip container decoding.
  if (inflateInit2(&strm, 15 + 16) != Z_OK) {
    throw DataError("zlib init failed for " + name);
  }
  std::vector<std::uint8_t> out;
  out.reserve(in.size() * 4);
  std::uint8_t buf[1 << 16];
  strm.next_in = const_cast<std::uint8_t*>(in.data());
  strm.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    strm.next_out = buf;
    strm.avail_out = sizeof(buf);
    rc = inflate(&strm, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&strm);
      throw DataError("corrupt gzip stream in " + name);
    }
    out.insert(out.end(), buf, buf + (sizeof(buf) - strm.avail_out));
  }
  inflateEnd(&strm);
  return out;
}

std::vector<std::uint8_t> read_maybe_gz(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes = read_file(path);
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) {
    return gunzip(bytes, path.filename().string());
  }
  return bytes;
}

class IdxReader {
 public:
  IdxReader(std::vector<std::uint8_t> bytes, std::string name)
      : bytes_(std::move(bytes)), name_(std::move(name)) {}

  std::uint32_t read_be32() {
    if (pos_ + 4 > bytes_.size()) {
      fail("truncated at byte offset " + std::to_string(pos_));
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v = (v << 8) | bytes_[pos_++];
    }
    return v;
  }

  const std::uint8_t* take(std::size_t count) {
    if (pos_ + count > bytes_.size()) {
      fail("truncated at byte offset " + std::to_string(pos_) + " (need " +
           std::to_string(count) + " more bytes)");
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += count;
    return p;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void fail(const std::string& why) const {
    throw DataError(name_ + ": " + why);
  }

 private:
  std::vector<std::uint8_t> bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::filesystem::path resolve(const std::filesystem::path& dir,
                              const std::string& stem) {
  const std::filesystem::path raw = dir / stem;
  if (std::filesystem::exists(raw)) {
    return raw;
  }
  const std::filesystem::path gz = dir / (stem + ".gz");
  if (std::filesystem::exists(gz)) {
    return gz;
  }
  throw DataError("missing dataset file " + raw.string() + "[.gz]");
}

}  // namespace

std::vector<Sample> load_idx_pair(const std::filesystem::path& images,
                                  const std::filesystem::path& labels) {
  IdxReader img(read_maybe_gz(images), images.filename().string());
  const std::uint32_t img_magic = img.read_be32();
  if (img_magic != kImageMagic) {
    img.fail("bad image magic " + std::to_string(img_magic) +
             " at byte offset 0");
  }
  const std::uint32_t count = img.read_be32();
  const std::uint32_t rows = img.read_be32();
  const std::uint32_t cols = img.read_be32();
  if (rows != 28 || cols != 28) {
    img.fail("expected 28x28 images, found " + std::to_string(rows) + "x" +
             std::to_string(cols));
  }

  IdxReader lab(read_maybe_gz(labels), labels.filename().string());
  const std::uint32_t lab_magic = lab.read_be32();
  if (lab_magic != kLabelMagic) {
    lab.fail("bad label magic " + std::to_string(lab_magic) +
             " at byte offset 0");
  }
  const std::uint32_t lab_count = lab.read_be32();
  if (lab_count != count) {
    lab.fail("label count " + std::to_string(lab_count) +
             " does not match image count " + std::to_string(count));
  }

  std::vector<Sample> out;
  out.reserve(count);
  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint8_t* px = img.take(pixels);
    const std::uint8_t* lb = lab.take(1);
    if (*lb > 9) {
      lab.fail("label " + std::to_string(*lb) + " out of range for sample " +
               std::to_string(i));
    }
    Sample s;
    s.input = Tensor({rows, cols});
    for (std::size_t p = 0; p < pixels; ++p) {
      s.input[p] = static_cast<double>(px[p]) / 255.0;
    }
    s.label = *lb;
    out.push_back(std::move(s));
  }
  if (img.remaining() != 0) {
    img.fail("trailing bytes after " + std::to_string(count) + " images");
  }
  if (lab.remaining() != 0) {
    lab.fail("trailing bytes after " + std::to_string(count) + " labels");
  }
  return out;
}

MnistData load_mnist(const std::filesystem::path& dir) {
  MnistData data;
  data.train = load_idx_pair(resolve(dir, "train-images-idx3-ubyte"),
                             resolve(dir, "train-labels-idx1-ubyte"));
  data.test = load_idx_pair(resolve(dir, "t10k-images-idx3-ubyte"),
                            resolve(dir, "t10k-labels-idx1-ubyte"));
  return data;
}

}  // namespace ssgdlab
