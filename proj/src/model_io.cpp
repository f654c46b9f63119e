#include "vad/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include <nlohmann/json.hpp>
#include <zlib.h>

#include "vad/errors.hpp"

namespace vad {

namespace {

using nlohmann::json;
using nn::Matrix;
using nn::Vector;

// Minimal emitter so that every real is written with 17 significant digits.
class Writer {
 public:
  void raw(std::string_view s) { out_ += s; }
  void key(std::string_view k) {
    out_ += '"';
    out_ += k;
    out_ += "\": ";
  }
  void str(std::string_view s) {
    out_ += '"';
    out_ += s;
    out_ += '"';
  }
  void real(double v) { out_ += format_double(v); }
  void integer(long long v) { out_ += std::to_string(v); }
  template <class It>
  void reals(It begin, It end) {
    out_ += '[';
    for (It it = begin; it != end; ++it) {
      if (it != begin) out_ += ", ";
      real(*it);
    }
    out_ += ']';
  }
  void ints(const std::vector<int>& v) {
    out_ += '[';
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out_ += ", ";
      integer(v[i]);
    }
    out_ += ']';
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

std::vector<double> row_major(const Matrix& m) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.push_back(m(r, c));
  }
  return out;
}

std::string_view activation_name(nn::Activation a) {
  switch (a) {
    case nn::Activation::ReLU:
      return "relu";
    case nn::Activation::Sigmoid:
      return "sigmoid";
    case nn::Activation::Identity:
      break;
  }
  return "identity";
}

nn::Activation activation_from(std::string_view s) {
  if (s == "relu") return nn::Activation::ReLU;
  if (s == "sigmoid") return nn::Activation::Sigmoid;
  if (s == "identity") return nn::Activation::Identity;
  throw ModelFormatError(ModelFormatError::Kind::Shape, "unknown activation '" + std::string(s) + "'");
}

struct LayerRef {
  std::string role;
  const nn::DenseLayer* dense = nullptr;
  const nn::LstmLayer* lstm = nullptr;
};

std::vector<LayerRef> layer_refs(const ModelParams& model) {
  std::vector<LayerRef> refs;
  if (const auto* d = std::get_if<nn::DenseAutoencoder>(&model.network)) {
    const auto& layers = d->layers();
    for (std::size_t i = 0; i < layers.size(); ++i) {
      std::string role = i + 1 == layers.size() ? "output" : "hidden_" + std::to_string(i);
      refs.push_back({std::move(role), &layers[i], nullptr});
    }
  } else {
    const auto& l = std::get<nn::LstmAutoencoder>(model.network);
    for (std::size_t i = 0; i < l.encoder().size(); ++i) refs.push_back({"encoder_" + std::to_string(i), nullptr, &l.encoder()[i]});
    for (std::size_t i = 0; i < l.decoder().size(); ++i) refs.push_back({"decoder_" + std::to_string(i), nullptr, &l.decoder()[i]});
    refs.push_back({"output", &l.output(), nullptr});
  }
  return refs;
}

void append_tensor(std::string& bytes, const Matrix& m) {
  for (double v : row_major(m)) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) bytes.push_back(static_cast<char>((bits >> (8 * k)) & 0xFF));
  }
}

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

[[noreturn]] void corrupt(const std::string& why) {
  throw ModelFormatError(ModelFormatError::Kind::Checksum, "model file failed integrity check: " + why);
}

[[noreturn]] void bad_shape(const std::string& why) {
  throw ModelFormatError(ModelFormatError::Kind::Shape, "model file shape inconsistency: " + why);
}

Matrix read_matrix(const json& arr, Eigen::Index rows, Eigen::Index cols, const std::string& what) {
  if (!arr.is_array() || arr.size() != static_cast<std::size_t>(rows * cols)) {
    bad_shape(what + " has " + std::to_string(arr.is_array() ? arr.size() : 0) + " values, expected " +
              std::to_string(rows * cols));
  }
  Matrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = arr[k++].get<double>();
  }
  return m;
}

std::vector<int> read_ints(const json& arr) {
  std::vector<int> out;
  for (const auto& v : arr) out.push_back(v.get<int>());
  return out;
}

}  // namespace

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t weight_checksum(const ModelParams& model) {
  std::string bytes;
  for (const auto& ref : layer_refs(model)) {
    if (ref.dense) {
      append_tensor(bytes, ref.dense->W);
      append_tensor(bytes, ref.dense->b);
    } else {
      append_tensor(bytes, ref.lstm->W);
      append_tensor(bytes, ref.lstm->U);
      append_tensor(bytes, ref.lstm->b);
    }
  }
  return crc32_of(bytes);
}

std::string serialize_model(const ModelParams& model) {
  Writer w;
  w.raw("{\n  ");
  w.key("format_version");
  w.integer(kModelFormatVersion);
  w.raw(",\n  ");
  w.key("architecture");
  w.raw("{");
  if (const auto* v = std::get_if<nn::VanillaAeSpec>(&model.architecture)) {
    w.key("kind"), w.str("vanilla"), w.raw(", ");
    w.key("input_width"), w.integer(v->input_width), w.raw(", ");
    w.key("encoder"), w.ints(v->encoder), w.raw(", ");
    w.key("decoder"), w.ints(v->decoder);
  } else {
    const auto& l = std::get<nn::LstmAeSpec>(model.architecture);
    w.key("kind"), w.str("lstm"), w.raw(", ");
    w.key("input_width"), w.integer(l.input_width), w.raw(", ");
    w.key("encoder"), w.ints(l.encoder), w.raw(", ");
    w.key("decoder"), w.ints(l.decoder), w.raw(", ");
    w.key("sequence_length"), w.integer(l.sequence_length), w.raw(", ");
    w.key("stride"), w.integer(l.stride);
  }
  w.raw("},\n  ");
  w.key("scaler");
  w.raw("{");
  w.key("min"), w.reals(model.scaler.min.begin(), model.scaler.min.end()), w.raw(", ");
  w.key("max"), w.reals(model.scaler.max.begin(), model.scaler.max.end());
  w.raw("},\n  ");
  w.key("thresholds");
  w.raw("{");
  w.key("tau"), w.real(model.thresholds.tau), w.raw(", ");
  w.key("high_cut"), w.real(model.thresholds.high_cut);
  w.raw("},\n  ");
  w.key("layers");
  w.raw("[");
  const auto refs = layer_refs(model);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& ref = refs[i];
    w.raw(i ? ",\n    {" : "\n    {");
    w.key("role"), w.str(ref.role), w.raw(", ");
    if (ref.dense) {
      const auto& d = *ref.dense;
      w.key("type"), w.str("dense"), w.raw(", ");
      w.key("activation"), w.str(activation_name(d.activation)), w.raw(", ");
      w.key("shape"), w.ints({static_cast<int>(d.out()), static_cast<int>(d.in())}), w.raw(", ");
      w.key("weights"), w.raw("{");
      const auto W = row_major(d.W);
      w.key("W"), w.reals(W.begin(), W.end()), w.raw(", ");
      w.key("b"), w.reals(d.b.data(), d.b.data() + d.b.size());
      w.raw("}}");
    } else {
      const auto& l = *ref.lstm;
      w.key("type"), w.str("lstm"), w.raw(", ");
      w.key("return_sequences"), w.raw(l.return_sequences ? "true" : "false"), w.raw(", ");
      w.key("shape"), w.ints({static_cast<int>(l.hidden()), static_cast<int>(l.in())}), w.raw(", ");
      w.key("weights"), w.raw("{");
      const auto W = row_major(l.W);
      const auto U = row_major(l.U);
      w.key("W"), w.reals(W.begin(), W.end()), w.raw(", ");
      w.key("U"), w.reals(U.begin(), U.end()), w.raw(", ");
      w.key("b"), w.reals(l.b.data(), l.b.data() + l.b.size());
      w.raw("}}");
    }
  }
  w.raw("\n  ],\n  ");
  w.key("training");
  w.raw("{");
  w.key("seed"), w.raw(std::to_string(model.training.seed)), w.raw(", ");
  w.key("epochs"), w.integer(model.training.epochs), w.raw(", ");
  w.key("batch_size"), w.integer(model.training.batch_size), w.raw(", ");
  w.key("final_loss"), w.real(model.training.final_loss);
  w.raw("},\n  ");
  w.key("checksum");
  w.str(hex32(weight_checksum(model)));
  w.raw("\n}\n");
  return w.take();
}

ModelParams deserialize_model(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    corrupt(std::string("document is truncated or malformed (") + e.what() + ")");
  }

  ModelParams model;
  try {
    if (!doc.contains("format_version") || !doc.contains("checksum")) corrupt("missing format_version or checksum");
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelFormatError(ModelFormatError::Kind::Version, "unsupported model format_version " +
                                                                  std::to_string(version) + " (expected " +
                                                                  std::to_string(kModelFormatVersion) + ")");
    }

    const json& arch = doc.at("architecture");
    const std::string kind = arch.at("kind").get<std::string>();
    int width = arch.at("input_width").get<int>();
    if (kind == "vanilla") {
      nn::VanillaAeSpec spec;
      spec.input_width = width;
      spec.encoder = read_ints(arch.at("encoder"));
      spec.decoder = read_ints(arch.at("decoder"));
      model.architecture = spec;
    } else if (kind == "lstm") {
      nn::LstmAeSpec spec;
      spec.input_width = width;
      spec.encoder = read_ints(arch.at("encoder"));
      spec.decoder = read_ints(arch.at("decoder"));
      spec.sequence_length = arch.at("sequence_length").get<int>();
      spec.stride = arch.at("stride").get<int>();
      model.architecture = spec;
    } else {
      bad_shape("unknown architecture kind '" + kind + "'");
    }
    if (width != static_cast<int>(kNumSignals)) bad_shape("architecture input width " + std::to_string(width) + " != 8");

    const json& sc = doc.at("scaler");
    const json& mn = sc.at("min");
    const json& mx = sc.at("max");
    if (mn.size() != static_cast<std::size_t>(width) || mx.size() != static_cast<std::size_t>(width)) {
      bad_shape("scaler has " + std::to_string(mn.size()) + "/" + std::to_string(mx.size()) +
                " features but the architecture is " + std::to_string(width) + " wide");
    }
    for (std::size_t k = 0; k < kNumSignals; ++k) {
      model.scaler.min[k] = mn[k].get<double>();
      model.scaler.max[k] = mx[k].get<double>();
    }
    model.thresholds.tau = doc.at("thresholds").at("tau").get<double>();
    model.thresholds.high_cut = doc.at("thresholds").at("high_cut").get<double>();

    const json& layers = doc.at("layers");
    auto read_dense = [&](const json& j, Eigen::Index out, Eigen::Index in, const std::string& role) {
      if (j.at("type") != "dense") bad_shape(role + " should be a dense layer");
      const auto shape = read_ints(j.at("shape"));
      if (shape.size() != 2 || shape[0] != out || shape[1] != in) bad_shape(role + " has the wrong shape");
      nn::DenseLayer d;
      d.activation = activation_from(j.at("activation").get<std::string>());
      d.W = read_matrix(j.at("weights").at("W"), out, in, role + ".W");
      d.b = read_matrix(j.at("weights").at("b"), out, 1, role + ".b");
      return d;
    };
    auto read_lstm = [&](const json& j, Eigen::Index hidden, Eigen::Index in, const std::string& role) {
      if (j.at("type") != "lstm") bad_shape(role + " should be an lstm layer");
      const auto shape = read_ints(j.at("shape"));
      if (shape.size() != 2 || shape[0] != hidden || shape[1] != in) bad_shape(role + " has the wrong shape");
      nn::LstmLayer l;
      l.return_sequences = j.at("return_sequences").get<bool>();
      l.W = read_matrix(j.at("weights").at("W"), 4 * hidden, in, role + ".W");
      l.U = read_matrix(j.at("weights").at("U"), 4 * hidden, hidden, role + ".U");
      l.b = read_matrix(j.at("weights").at("b"), 4 * hidden, 1, role + ".b");
      return l;
    };

    if (const auto* v = std::get_if<nn::VanillaAeSpec>(&model.architecture)) {
      std::vector<int> widths = v->encoder;
      widths.insert(widths.end(), v->decoder.begin(), v->decoder.end());
      widths.push_back(width);
      if (layers.size() != widths.size()) bad_shape("layer count does not match the architecture");
      std::vector<nn::DenseLayer> ds;
      int prev = width;
      for (std::size_t i = 0; i < widths.size(); ++i) {
        ds.push_back(read_dense(layers[i], widths[i], prev, "layer " + std::to_string(i)));
        prev = widths[i];
      }
      model.network = nn::DenseAutoencoder(std::move(ds));
    } else {
      const auto& spec = std::get<nn::LstmAeSpec>(model.architecture);
      if (layers.size() != spec.encoder.size() + spec.decoder.size() + 1) bad_shape("layer count does not match the architecture");
      std::vector<nn::LstmLayer> enc, dec;
      int prev = width;
      std::size_t k = 0;
      for (int h : spec.encoder) {
        enc.push_back(read_lstm(layers[k], h, prev, "layer " + std::to_string(k)));
        ++k;
        prev = h;
      }
      for (int h : spec.decoder) {
        dec.push_back(read_lstm(layers[k], h, prev, "layer " + std::to_string(k)));
        ++k;
        prev = h;
      }
      nn::DenseLayer out = read_dense(layers[k], width, prev, "layer " + std::to_string(k));
      try {
        model.network = nn::LstmAutoencoder(std::move(enc), std::move(dec), std::move(out));
      } catch (const ShapeError& e) {
        bad_shape(e.what());
      }
    }

    const json& tr = doc.at("training");
    model.training.seed = tr.at("seed").get<std::uint64_t>();
    model.training.epochs = tr.at("epochs").get<int>();
    model.training.batch_size = tr.at("batch_size").get<int>();
    model.training.final_loss = tr.at("final_loss").get<double>();

    const std::string stored = doc.at("checksum").get<std::string>();
    if (stored != hex32(weight_checksum(model))) corrupt("weight checksum mismatch");
  } catch (const json::exception& e) {
    corrupt(std::string("missing or mistyped field (") + e.what() + ")");
  }
  return model;
}

void save_model(const ModelParams& model, const std::filesystem::path& path) {
  write_text_file(path, serialize_model(model));
}

ModelParams load_model(const std::filesystem::path& path) { return deserialize_model(read_text_file(path)); }

std::string format_verdicts(std::span<const AnomalyVerdict> verdicts) {
  std::string out = "timestamp,score,label\n";
  for (const auto& v : verdicts) {
    out += format_timestamp(v.timestamp);
    out += ',';
    out += format_double(v.score);
    out += ',';
    out += label_name(v.label);
    out += '\n';
  }
  return out;
}

std::vector<AnomalyVerdict> parse_verdicts(std::string_view csv_text) {
  std::vector<AnomalyVerdict> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < csv_text.size()) {
    std::size_t eol = csv_text.find('\n', pos);
    if (eol == std::string_view::npos) eol = csv_text.size();
    const std::string_view line = csv_text.substr(pos, eol - pos);
    pos = eol + 1;
    if (++line_no == 1) {
      if (line != "timestamp,score,label") throw SchemaError("verdict header must be 'timestamp,score,label'");
      continue;
    }
    if (line.empty()) continue;
    const std::size_t c1 = line.find(',');
    const std::size_t c2 = line.find(',', c1 == std::string_view::npos ? c1 : c1 + 1);
    if (c1 == std::string_view::npos || c2 == std::string_view::npos) throw ParseError(line_no, "expected three cells");
    const auto ts = parse_timestamp(line.substr(0, c1));
    if (!ts) throw ParseError(line_no, "malformed timestamp");
    const std::string score(line.substr(c1 + 1, c2 - c1 - 1));
    char* end = nullptr;
    const double v = std::strtod(score.c_str(), &end);
    if (end == score.c_str() || *end != '\0') throw ParseError(line_no, "malformed score");
    out.push_back({*ts, v, label_from_name(line.substr(c2 + 1))});
  }
  return out;
}

}  // namespace vad
