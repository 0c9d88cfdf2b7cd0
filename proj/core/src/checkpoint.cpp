// Copyright (c) 2026 the groklab authors
// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "groklab/model.hpp"
#include "json.hpp"

namespace groklab {

namespace {

constexpr char kB64[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string base64_encode(const unsigned char* data, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  for (std::size_t i = 0; i < n; i += 3) {
    const unsigned b0 = data[i];
    const unsigned b1 = i + 1 < n ? data[i + 1] : 0;
    const unsigned b2 = i + 2 < n ? data[i + 2] : 0;
    out.push_back(kB64[b0 >> 2]);
    out.push_back(kB64[((b0 & 0x3) << 4) | (b1 >> 4)]);
    out.push_back(i + 1 < n ? kB64[((b1 & 0xF) << 2) | (b2 >> 6)] : '=');
    out.push_back(i + 2 < n ? kB64[b2 & 0x3F] : '=');
  }
  return out;
}

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<unsigned char> base64_decode(const std::string& text, int line_no) {
  if (text.size() % 4 != 0) {
    throw ParseError("checkpoint line " + std::to_string(line_no) +
                     ": base64 length not a multiple of 4");
  }
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    int vals[4];
    int pad = 0;
    for (int j = 0; j < 4; ++j) {
      const char c = text[i + j];
      if (c == '=') {
        vals[j] = 0;
        ++pad;
      } else {
        vals[j] = b64_value(c);
        if (vals[j] < 0 || pad > 0) {
          throw ParseError("checkpoint line " + std::to_string(line_no) +
                           ": invalid base64");
        }
      }
    }
    out.push_back(static_cast<unsigned char>((vals[0] << 2) | (vals[1] >> 4)));
    if (pad < 2) out.push_back(static_cast<unsigned char>((vals[1] << 4) | (vals[2] >> 2)));
    if (pad < 1) out.push_back(static_cast<unsigned char>((vals[2] << 6) | vals[3]));
  }
  return out;
}

// Parameter payloads are little-endian 64-bit floats regardless of host.
std::string doubles_to_b64(const std::vector<double>& values) {
  std::vector<unsigned char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &values[i], 8);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    std::memcpy(bytes.data() + i * 8, &bits, 8);
  }
  return base64_encode(bytes.data(), bytes.size());
}

std::vector<double> b64_to_doubles(const std::string& text, int line_no) {
  const std::vector<unsigned char> bytes = base64_decode(text, line_no);
  if (bytes.size() % 8 != 0) {
    throw ParseError("checkpoint line " + std::to_string(line_no) +
                     ": payload is not a whole number of doubles");
  }
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, bytes.data() + i * 8, 8);
    if constexpr (std::endian::native == std::endian::big) {
      bits = __builtin_bswap64(bits);
    }
    std::memcpy(&out[i], &bits, 8);
  }
  return out;
}

nlohmann::ordered_json config_to_json(const ModelConfig& config) {
  nlohmann::ordered_json j;
  j["arch"] = arch_tag(config);
  std::visit(
      [&j](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        nlohmann::ordered_json f;
        if constexpr (std::is_same_v<T, TransformerConfig>) {
          f["n_layers"] = c.n_layers;
          f["d_model"] = c.d_model;
          f["n_heads"] = c.n_heads;
          f["head_dim"] = c.head_dim;
          f["ffn_hidden"] = c.ffn_hidden;
          f["vocab_size"] = c.vocab_size;
          f["seq_len"] = c.seq_len;
          f["n_outputs"] = c.n_outputs;
          f["use_layer_norm"] = c.use_layer_norm;
          f["positional"] = c.positional == Positional::learned ? "learned" : "sinusoidal";
          f["init_scale"] = c.init_scale;
        } else if constexpr (std::is_same_v<T, MLPConfig>) {
          f["hidden"] = c.hidden;
          f["n_layers"] = c.n_layers;
          f["vocab_size"] = c.vocab_size;
          f["embed_dim"] = c.embed_dim;
          f["n_outputs"] = c.n_outputs;
          f["init_scale"] = c.init_scale;
        } else {
          f["hidden"] = c.hidden;
          f["vocab_size"] = c.vocab_size;
          f["embed_dim"] = c.embed_dim;
          f["n_outputs"] = c.n_outputs;
          f["init_scale"] = c.init_scale;
        }
        j["config"] = std::move(f);
      },
      config);
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  const std::string arch = j.at("arch").get<std::string>();
  const nlohmann::json& f = j.at("config");
  if (arch == "transformer") {
    TransformerConfig c;
    c.n_layers = f.at("n_layers").get<int>();
    c.d_model = f.at("d_model").get<int>();
    c.n_heads = f.at("n_heads").get<int>();
    c.head_dim = f.at("head_dim").get<int>();
    c.ffn_hidden = f.at("ffn_hidden").get<int>();
    c.vocab_size = f.at("vocab_size").get<int>();
    c.seq_len = f.at("seq_len").get<int>();
    c.n_outputs = f.at("n_outputs").get<int>();
    c.use_layer_norm = f.at("use_layer_norm").get<bool>();
    c.positional = f.at("positional").get<std::string>() == "sinusoidal"
                       ? Positional::sinusoidal
                       : Positional::learned;
    c.init_scale = f.at("init_scale").get<double>();
    return c;
  }
  if (arch == "mlp") {
    MLPConfig c;
    c.hidden = f.at("hidden").get<int>();
    c.n_layers = f.at("n_layers").get<int>();
    c.vocab_size = f.at("vocab_size").get<int>();
    c.embed_dim = f.at("embed_dim").get<int>();
    c.n_outputs = f.at("n_outputs").get<int>();
    c.init_scale = f.at("init_scale").get<double>();
    return c;
  }
  if (arch == "lstm") {
    LSTMConfig c;
    c.hidden = f.at("hidden").get<int>();
    c.vocab_size = f.at("vocab_size").get<int>();
    c.embed_dim = f.at("embed_dim").get<int>();
    c.n_outputs = f.at("n_outputs").get<int>();
    c.init_scale = f.at("init_scale").get<double>();
    return c;
  }
  throw ParseError("checkpoint line 1: unknown arch \"" + arch + "\"");
}

Shape parse_shape(const std::string& text, int line_no) {
  Shape shape;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t stop = text.find('x', start);
    const std::string tok = text.substr(start, stop == std::string::npos
                                                   ? std::string::npos
                                                   : stop - start);
    try {
      shape.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ParseError("checkpoint line " + std::to_string(line_no) +
                       ": bad shape token \"" + tok + "\"");
    }
    if (stop == std::string::npos) break;
    start = stop + 1;
  }
  return shape;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& config,
                     const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << config_to_json(config).dump() << '\n';
  for (const auto& [name, tensor] : params.tensors()) {  // map order = sorted
    out << name << '|';
    const Shape& s = tensor.shape();
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << 'x';
      out << s[i];
    }
    out << '|' << doubles_to_b64(tensor.values()) << '\n';
  }
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint line 1: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint line 1: bad JSON header: ") + e.what());
  }
  ModelConfig config = config_from_json(header);
  ModelParams params(arch_tag(config));
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t p1 = line.find('|');
    const std::size_t p2 = p1 == std::string::npos ? std::string::npos
                                                   : line.find('|', p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos) {
      throw ParseError("checkpoint line " + std::to_string(line_no) +
                       ": expected path|shape|data");
    }
    const std::string name = line.substr(0, p1);
    Shape shape = parse_shape(line.substr(p1 + 1, p2 - p1 - 1), line_no);
    std::vector<double> values = b64_to_doubles(line.substr(p2 + 1), line_no);
    if (static_cast<std::int64_t>(values.size()) != shape_size(shape)) {
      throw ParseError("checkpoint line " + std::to_string(line_no) +
                       ": payload does not match shape");
    }
    params.insert(name, Tensor(std::move(shape), std::move(values)));
  }
  return {std::move(config), std::move(params)};
}

}  // namespace groklab
