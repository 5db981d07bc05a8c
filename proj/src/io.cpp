#include "fxlab/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fxlab/errors.hpp"
#include "json_convert.hpp"

namespace fxlab {

namespace {

constexpr char kCheckpointMagic[8] = {'F', 'X', 'L', 'A', 'B', 'C', 'K', '1'};
constexpr char kSamplesMagic[4] = {'F', 'X', 'S', 'B'};

static_assert(std::endian::native == std::endian::little ||
                  std::endian::native == std::endian::big,
              "mixed-endian hosts are not supported");

template <typename U>
void put_le(std::vector<char>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

void put_f32(std::vector<char>& out, double value) {
  put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(value)));
}

class Reader {
 public:
  explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

  template <typename U>
  U get_le() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(U);
    return v;
  }

  double get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }

  std::string get_bytes(std::size_t n) {
    need(n);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw ArgumentError("file is truncated");
  }

  const std::vector<char>& bytes_;
  std::size_t pos_ = 0;
};

void put_matrix(std::vector<char>& out, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) put_f32(out, m(i, j));
}

void get_matrix(Reader& in, Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = in.get_f32();
}

void get_vector(Reader& in, Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = in.get_f32();
}

}  // namespace

std::vector<char> encode_checkpoint(const MLPDenoiser& model, std::uint64_t seed) {
  const auto& vocab = *model.vocab();
  const auto& p = model.params();
  Json tensors = Json::array();
  tensors.push_back({{"name", "vocab"}, {"shape", {vocab.size(), vocab.dim()}}});
  for (std::size_t l = 0; l < p.trunk.size(); ++l) {
    tensors.push_back({{"name", "trunk." + std::to_string(l) + ".weight"},
                       {"shape", {p.trunk[l].weight.rows(), p.trunk[l].weight.cols()}}});
    tensors.push_back({{"name", "trunk." + std::to_string(l) + ".bias"},
                       {"shape", {p.trunk[l].bias.size()}}});
  }
  for (std::size_t l = 0; l < p.cond.size(); ++l) {
    tensors.push_back({{"name", "cond." + std::to_string(l) + ".weight"},
                       {"shape", {p.cond[l].rows(), p.cond[l].cols()}}});
  }
  Json header = {{"format_version", kCheckpointFormatVersion},
                 {"arch", to_json(model.arch())},
                 {"seed", seed},
                 {"vocab", {{"size", vocab.size()},
                            {"dim", vocab.dim()},
                            {"null_token", vocab.null_token()}}},
                 {"tensors", tensors}};
  const std::string text = header.dump();

  std::vector<char> out(kCheckpointMagic, kCheckpointMagic + 8);
  put_le<std::uint32_t>(out, kCheckpointFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  const std::uint64_t count =
      static_cast<std::uint64_t>(vocab.embeddings().size()) + p.num_scalars();
  put_le<std::uint64_t>(out, count);
  put_matrix(out, vocab.embeddings());
  for (const auto& l : p.trunk) {
    put_matrix(out, l.weight);
    put_matrix(out, l.bias.transpose());
  }
  for (const auto& u : p.cond) put_matrix(out, u);
  return out;
}

Checkpoint decode_checkpoint(const std::vector<char>& bytes) {
  Reader in(bytes);
  if (in.get_bytes(8) != std::string(kCheckpointMagic, 8)) {
    throw ArgumentError("not a checkpoint file (bad magic)");
  }
  const auto version = in.get_le<std::uint32_t>();
  if (version != kCheckpointFormatVersion) {
    throw ArgumentError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = in.get_le<std::uint32_t>();
  Json header;
  try {
    header = Json::parse(in.get_bytes(header_len));
  } catch (const nlohmann::json::exception& e) {
    throw ArgumentError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const ArchSpec arch = arch_from_json(header.at("arch"));
  const int vsize = header.at("vocab").at("size").get<int>();
  const int vdim = header.at("vocab").at("dim").get<int>();
  const int null_token = header.at("vocab").at("null_token").get<int>();

  // Shapes come from a freshly initialized model of the same architecture.
  MlpParameters p;
  {
    auto dummy = std::make_shared<TokenVocabulary>(
        TokenVocabulary::random(std::max(vsize, 1), vdim, 0, 0));
    p = MLPDenoiser::initialize(arch, dummy, 0).params();
  }
  const std::uint64_t expected =
      static_cast<std::uint64_t>(vsize) * vdim + p.num_scalars();
  if (in.get_le<std::uint64_t>() != expected) {
    throw ShapeError("checkpoint scalar count does not match its architecture");
  }
  Matrix emb(vsize, vdim);
  get_matrix(in, emb);
  emb.rowwise().normalize();
  for (auto& l : p.trunk) {
    get_matrix(in, l.weight);
    get_vector(in, l.bias);
  }
  for (auto& u : p.cond) get_matrix(in, u);
  if (!in.done()) throw ArgumentError("trailing bytes after checkpoint payload");

  auto vocab = std::make_shared<const TokenVocabulary>(std::move(emb), null_token);
  return Checkpoint{MLPDenoiser(arch, std::move(vocab), std::move(p)),
                    header.at("seed").get<std::uint64_t>(), version};
}

std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(f), {});
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ArgumentError("cannot write " + path.string());
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

void save_checkpoint(const std::filesystem::path& path, const MLPDenoiser& model,
                     std::uint64_t seed) {
  const auto bytes = encode_checkpoint(model, seed);
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

MLPDenoiser quantize_like_checkpoint(const MLPDenoiser& model) {
  return decode_checkpoint(encode_checkpoint(model, 0)).model;
}

void write_samples(const std::filesystem::path& path, const Matrix& points) {
  std::vector<char> out(kSamplesMagic, kSamplesMagic + 4);
  put_le<std::uint32_t>(out, kSamplesFormatVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.rows()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(points.cols()));
  put_matrix(out, points);
  write_file(path, std::string(out.begin(), out.end()));
}

Matrix read_samples(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  Reader in(bytes);
  if (in.get_bytes(4) != std::string(kSamplesMagic, 4)) {
    throw ArgumentError("not a samples file (bad magic): " + path.string());
  }
  const auto version = in.get_le<std::uint32_t>();
  if (version != kSamplesFormatVersion) {
    throw ArgumentError("unsupported samples version " + std::to_string(version));
  }
  const auto n = in.get_le<std::uint32_t>();
  const auto d = in.get_le<std::uint32_t>();
  Matrix m(n, d);
  get_matrix(in, m);
  if (!in.done()) throw ArgumentError("trailing bytes in samples file");
  return m;
}

}  // namespace fxlab
