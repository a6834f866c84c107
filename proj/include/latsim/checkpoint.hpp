#ifndef LATSIM_CHECKPOINT_HPP_
#define LATSIM_CHECKPOINT_HPP_

// Model checkpoint container.
//
//   bytes 0..7    magic "LATSIMCK"
//   bytes 8..15   header length N, uint64 little-endian
//   bytes 16..    N bytes of UTF-8 JSON header
//   then          tensor payload
//
// The header holds "format_version", "precision" ("float32" | "float64"),
// "shape" {input_dim, hidden, latent}, "window_length", "train" (the
// TrainConfig including seed), "epoch_loss", and "tensors": a list of
// {name, rows, cols, offset} in the fixed parameter order. Each tensor is
// stored row-major at `offset` bytes past the end of the header, as
// little-endian IEEE values of the stated precision.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "latsim/autoencoder.hpp"
#include "latsim/error.hpp"
#include "latsim/io.hpp"

namespace latsim {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

inline constexpr char kCheckpointMagic[8] = {'L', 'A', 'T', 'S', 'I', 'M', 'C', 'K'};
inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string precision;  // "float32" | "float64"
  Eigen::Index window_length = 0;
  TrainConfig train;
  std::vector<double> epoch_loss;
};

inline nlohmann::ordered_json to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},       {"epochs", c.epochs},
          {"learning_rate", c.learning_rate}, {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},       {"adam_eps", c.adam_eps},
          {"clip_norm", c.clip_norm},         {"seed", c.seed}};
}

inline TrainConfig train_config_from_json(const nlohmann::ordered_json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.epochs = j.at("epochs").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.adam_beta1 = j.at("adam_beta1").get<double>();
  c.adam_beta2 = j.at("adam_beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.clip_norm = j.at("clip_norm").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <typename Scalar>
std::string serialize_checkpoint(const ModelParams<Scalar>& p, const CheckpointMeta& meta) {
  static_assert(std::is_same_v<Scalar, float> || std::is_same_v<Scalar, double>);
  nlohmann::ordered_json header;
  header["format_version"] = kCheckpointVersion;
  header["precision"] = std::is_same_v<Scalar, float> ? "float32" : "float64";
  header["shape"] = {{"input_dim", p.shape.input_dim},
                     {"hidden", p.shape.hidden},
                     {"latent", p.shape.latent}};
  header["window_length"] = meta.window_length;
  header["train"] = to_json(meta.train);
  header["epoch_loss"] = meta.epoch_loss;
  auto tensors = nlohmann::ordered_json::array();
  std::string payload;
  ModelParams<Scalar>::zip(
      [&](const std::string& name, const auto& t) {
        tensors.push_back({{"name", name},
                           {"rows", t.rows()},
                           {"cols", t.cols()},
                           {"offset", payload.size()}});
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
          for (Eigen::Index c = 0; c < t.cols(); ++c) {
            const Scalar v = t(r, c);
            char bytes[sizeof(Scalar)];
            std::memcpy(bytes, &v, sizeof(Scalar));
            payload.append(bytes, sizeof(Scalar));
          }
        }
      },
      p);
  header["tensors"] = std::move(tensors);
  const std::string h = header.dump();
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t len = h.size();
  char len_bytes[8];
  std::memcpy(len_bytes, &len, 8);
  out.append(len_bytes, 8);
  out += h;
  out += payload;
  return out;
}

template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path, const ModelParams<Scalar>& p,
                     const CheckpointMeta& meta) {
  io::write_file(path, serialize_checkpoint(p, meta));
}

struct LoadedCheckpoint {
  ModelParams<double> params;  // widened from the stored precision
  CheckpointMeta meta;
};

inline LoadedCheckpoint parse_checkpoint(const std::string& bytes) {
  auto bad = [](const std::string& why) -> void { fail(ErrorCode::CheckpointInvalid, why); };
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    bad("not a latsim checkpoint");
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, 8);
  if (len > bytes.size() - 16) bad("truncated header");
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("header is not JSON: ") + e.what());
  }
  const std::size_t base = 16 + len;

  LoadedCheckpoint out;
  try {
    if (header.at("format_version").get<int>() != kCheckpointVersion) bad("unsupported version");
    out.meta.precision = header.at("precision").get<std::string>();
    if (out.meta.precision != "float32" && out.meta.precision != "float64")
      bad("unknown precision " + out.meta.precision);
    const std::size_t width = out.meta.precision == "float32" ? 4 : 8;
    ModelShape shape;
    shape.input_dim = header.at("shape").at("input_dim").get<Eigen::Index>();
    shape.hidden = header.at("shape").at("hidden").get<Eigen::Index>();
    shape.latent = header.at("shape").at("latent").get<Eigen::Index>();
    out.meta.window_length = header.at("window_length").get<Eigen::Index>();
    out.meta.train = train_config_from_json(header.at("train"));
    out.meta.epoch_loss = header.at("epoch_loss").get<std::vector<double>>();
    out.params = ModelParams<double>::zeros(shape);

    const auto& tensors = header.at("tensors");
    std::size_t k = 0;
    ModelParams<double>::zip(
        [&](const std::string& name, auto& t) {
          if (k >= tensors.size()) bad("missing tensor " + name);
          const auto& d = tensors[k++];
          if (d.at("name").get<std::string>() != name) bad("unexpected tensor order at " + name);
          if (d.at("rows").get<Eigen::Index>() != t.rows() ||
              d.at("cols").get<Eigen::Index>() != t.cols())
            bad("tensor " + name + " has the wrong shape");
          const auto off = base + d.at("offset").get<std::size_t>();
          if (off + static_cast<std::size_t>(t.size()) * width > bytes.size())
            bad("tensor " + name + " runs past end of file");
          std::size_t pos = off;
          for (Eigen::Index r = 0; r < t.rows(); ++r) {
            for (Eigen::Index c = 0; c < t.cols(); ++c, pos += width) {
              if (width == 4) {
                float v;
                std::memcpy(&v, bytes.data() + pos, 4);
                t(r, c) = v;
              } else {
                double v;
                std::memcpy(&v, bytes.data() + pos, 8);
                t(r, c) = v;
              }
            }
          }
        },
        out.params);
    if (k != tensors.size()) bad("unexpected extra tensors");
  } catch (const nlohmann::json::exception& e) {
    bad(std::string("malformed header: ") + e.what());
  }
  if (!out.params.all_finite()) bad("non-finite parameters");
  return out;
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    fail(ErrorCode::IoError, "checkpoint not found: " + path.string());
  return parse_checkpoint(io::read_file(path));
}

}  // namespace latsim

#endif  // LATSIM_CHECKPOINT_HPP_
