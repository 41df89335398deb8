#include "resqos/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "json.hpp"
#include "resqos/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads assume a little-endian host");

namespace resqos {

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t len) {
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned int chunk = data[i] << 16;
    if (i + 1 < len) chunk |= data[i + 1] << 8;
    if (i + 2 < len) chunk |= data[i + 2];
    out.push_back(kB64Alphabet[(chunk >> 18) & 0x3f]);
    out.push_back(kB64Alphabet[(chunk >> 12) & 0x3f]);
    out.push_back(i + 1 < len ? kB64Alphabet[(chunk >> 6) & 0x3f] : '=');
    out.push_back(i + 2 < len ? kB64Alphabet[chunk & 0x3f] : '=');
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  int lookup[256];
  std::fill(std::begin(lookup), std::end(lookup), -1);
  for (int i = 0; i < 64; ++i) {
    lookup[static_cast<unsigned char>(kB64Alphabet[i])] = i;
  }
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  unsigned int chunk = 0;
  int bits = 0;
  for (char c : text) {
    if (c == '=') break;
    const int v = lookup[static_cast<unsigned char>(c)];
    if (v < 0) throw DataError("invalid base64 character in checkpoint");
    chunk = (chunk << 6) | static_cast<unsigned int>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((chunk >> bits) & 0xff));
    }
  }
  return out;
}

nlohmann::json config_to_json(const PlresConfig& c) {
  return {{"n_blocks", c.n_blocks},
          {"id_embed_dim", c.id_embed_dim},
          {"loc_embed_dim", c.loc_embed_dim},
          {"k_intervals", c.k_intervals},
          {"use_probability", c.use_probability},
          {"use_location", c.use_location},
          {"use_shortcuts", c.use_shortcuts},
          {"seed", c.seed}};
}

PlresConfig config_from_json(const nlohmann::json& j) {
  PlresConfig c;
  c.n_blocks = j.at("n_blocks").get<int>();
  c.id_embed_dim = j.at("id_embed_dim").get<int>();
  c.loc_embed_dim = j.at("loc_embed_dim").get<int>();
  c.k_intervals = j.at("k_intervals").get<int>();
  c.use_probability = j.at("use_probability").get<bool>();
  c.use_location = j.at("use_location").get<bool>();
  c.use_shortcuts = j.at("use_shortcuts").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

nlohmann::json vocabs_to_json(const VocabSizes& v) {
  return {{"n_users", v.n_users},
          {"n_services", v.n_services},
          {"user_countries", v.user_countries},
          {"user_as", v.user_as},
          {"service_countries", v.service_countries},
          {"service_as", v.service_as}};
}

VocabSizes vocabs_from_json(const nlohmann::json& j) {
  VocabSizes v;
  v.n_users = j.at("n_users").get<int>();
  v.n_services = j.at("n_services").get<int>();
  v.user_countries = j.at("user_countries").get<int>();
  v.user_as = j.at("user_as").get<int>();
  v.service_countries = j.at("service_countries").get<int>();
  v.service_as = j.at("service_as").get<int>();
  return v;
}

}  // namespace

Checkpoint make_checkpoint(const PlresModel& model) {
  Checkpoint ckpt;
  ckpt.config = model.config();
  ckpt.vocab_sizes = model.vocab_sizes();
  ckpt.params = model.snapshot();
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path,
                     const Checkpoint& ckpt) {
  nlohmann::json j;
  j["schema_version"] = ckpt.schema_version;
  j["config"] = config_to_json(ckpt.config);
  j["vocab_sizes"] = vocabs_to_json(ckpt.vocab_sizes);
  nlohmann::json params = nlohmann::json::array();
  for (const auto& t : ckpt.params) {
    params.push_back(
        {{"name", t.name},
         {"shape", t.shape},
         {"data",
          base64_encode(reinterpret_cast<const unsigned char*>(t.data.data()),
                        t.data.size() * sizeof(double))}});
  }
  j["params"] = std::move(params);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump() << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  Checkpoint ckpt;
  ckpt.schema_version = j.at("schema_version").get<int>();
  if (ckpt.schema_version != 1) {
    throw DataError("unsupported checkpoint schema version " +
                    std::to_string(ckpt.schema_version));
  }
  ckpt.config = config_from_json(j.at("config"));
  ckpt.vocab_sizes = vocabs_from_json(j.at("vocab_sizes"));
  for (const auto& p : j.at("params")) {
    NamedTensor t;
    t.name = p.at("name").get<std::string>();
    t.shape = p.at("shape").get<std::vector<long>>();
    const auto bytes = base64_decode(p.at("data").get<std::string>());
    if (bytes.size() % sizeof(double) != 0) {
      throw DataError("checkpoint tensor '" + t.name +
                      "' payload is not a whole number of doubles");
    }
    long expected = 1;
    for (long d : t.shape) expected *= d;
    if (static_cast<long>(bytes.size() / sizeof(double)) != expected) {
      throw DataError("checkpoint tensor '" + t.name +
                      "' payload does not match its declared shape");
    }
    t.data.resize(bytes.size() / sizeof(double));
    std::memcpy(t.data.data(), bytes.data(), bytes.size());
    ckpt.params.push_back(std::move(t));
  }
  return ckpt;
}

PlresModel model_from_checkpoint(const Checkpoint& ckpt) {
  PlresModel model(ckpt.config, ckpt.vocab_sizes);
  model.restore(ckpt.params);  // rejects name/shape mismatches
  return model;
}

}  // namespace resqos
