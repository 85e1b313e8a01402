#pragma once

// Interchange formats: model files, input sets, run configurations and
// quantification reports. Schemas are documented in docs/formats.md.
//
// Numeric payloads are base64-encoded little-endian arrays; model weights are
// float32, report vectors float64.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <openssl/evp.h>

#include "json.hpp"
#include "riskq/error.hpp"
#include "riskq/network.hpp"
#include "riskq/property.hpp"
#include "riskq/quantifier.hpp"

namespace riskq {

using Json = nlohmann::json;

inline constexpr const char* kModelFormatVersion = "1.0";
inline constexpr const char* kReportSchemaVersion = "1.0";

// ---------------------------------------------------------------------------
// Encoding helpers.

inline std::string base64_encode(const std::vector<unsigned char>& bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3) + 1, '\0');
  const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                      static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(written));
  return out;
}

inline std::vector<unsigned char> base64_decode(std::string_view text) {
  std::string clean;
  clean.reserve(text.size());
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)))
      clean.push_back(c);
  if (clean.size() % 4 != 0)
    throw ModelError("base64 payload length is not a multiple of 4");
  std::vector<unsigned char> out(clean.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(clean.data()),
                                static_cast<int>(clean.size()));
  if (n < 0)
    throw ModelError("invalid base64 payload");
  std::size_t padding = 0;
  if (!clean.empty() && clean.back() == '=')
    padding = clean.size() >= 2 && clean[clean.size() - 2] == '=' ? 2 : 1;
  out.resize(static_cast<std::size_t>(n) - padding);
  return out;
}

namespace detail {

template <typename T>
std::vector<unsigned char> to_le_bytes(std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T v = static_cast<T>(values[i]);
    unsigned char* dst = bytes.data() + i * sizeof(T);
    std::memcpy(dst, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(dst, dst + sizeof(T));
  }
  return bytes;
}

template <typename T>
std::vector<double> from_le_bytes(const std::vector<unsigned char>& bytes) {
  if (bytes.size() % sizeof(T) != 0)
    throw ModelError("payload size is not a multiple of the element size");
  std::vector<double> values(bytes.size() / sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, bytes.data() + i * sizeof(T), sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    values[i] = static_cast<double>(v);
  }
  return values;
}

// Non-negative integer; JSON built in code stores these as signed values.
inline bool is_count(const Json& j) { return j.is_number_integer() && j.get<long long>() >= 0; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ModelError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw ConfigError("cannot write '" + path + "'");
  out << text;
}

inline Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ModelError(what + " is not valid JSON: " + e.what());
  }
}

} // namespace detail

inline std::string encode_f32(std::span<const double> values) {
  return base64_encode(detail::to_le_bytes<float>(values));
}
inline std::string encode_f64(std::span<const double> values) {
  return base64_encode(detail::to_le_bytes<double>(values));
}
inline std::vector<double> decode_f32(std::string_view text) {
  return detail::from_le_bytes<float>(base64_decode(text));
}
inline std::vector<double> decode_f64(std::string_view text) {
  return detail::from_le_bytes<double>(base64_decode(text));
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xF]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Models.

struct ModelFile {
  Network network;
  std::string format_version;
  std::string name;
  std::string digest; // SHA-256 of the canonical "layers" section
  std::optional<double> training_accuracy;
  std::vector<std::string> class_names;
};

namespace detail {

class LayerReader {
public:
  LayerReader(const Json& layer, std::size_t index) : layer_(layer) {
    kind_ = layer.contains("type") && layer["type"].is_string() ? layer["type"].get<std::string>() : "";
    where_ = "layer " + std::to_string(index) + (kind_.empty() ? "" : " (" + kind_ + ")");
    if (kind_.empty())
      throw ModelError(where_ + ": missing string field 'type'");
  }

  const std::string& kind() const { return kind_; }
  const std::string& where() const { return where_; }

  [[noreturn]] void fail(const std::string& what) const { throw ModelError(where_ + ": " + what); }

  std::size_t count(const char* field) const {
    if (!layer_.contains(field) || !is_count(layer_[field]))
      fail(std::string("missing non-negative integer field '") + field + "'");
    return layer_[field].get<std::size_t>();
  }

  std::pair<std::size_t, std::size_t> pair(const char* field,
                                           std::optional<std::pair<std::size_t, std::size_t>> fallback = {}) const {
    if (!layer_.contains(field)) {
      if (fallback)
        return *fallback;
      fail(std::string("missing field '") + field + "'");
    }
    const Json& v = layer_[field];
    if (is_count(v))
      return {v.get<std::size_t>(), v.get<std::size_t>()};
    if (v.is_array() && v.size() == 2 && is_count(v[0]) && is_count(v[1]))
      return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
    fail(std::string("field '") + field + "' must be an integer or a pair of integers");
  }

  // Reads {"shape": [...], "dtype": "float32", "data": base64} or
  // {"shape": [...], "values": [...]} and checks the element count.
  std::vector<double> tensor(const char* field, const std::vector<std::size_t>& expected_shape) const {
    if (!layer_.contains(field) || !layer_[field].is_object())
      fail(std::string("missing tensor field '") + field + "'");
    const Json& t = layer_[field];
    if (!t.contains("shape") || !t["shape"].is_array())
      fail(std::string("tensor '") + field + "' has no shape array");
    std::vector<std::size_t> shape;
    for (const Json& d : t["shape"]) {
      if (!is_count(d))
        fail(std::string("tensor '") + field + "' shape entries must be non-negative integers");
      shape.push_back(d.get<std::size_t>());
    }
    auto fmt = [](const std::vector<std::size_t>& s) {
      std::string out = "[";
      for (std::size_t i = 0; i < s.size(); ++i)
        out += (i ? "," : "") + std::to_string(s[i]);
      return out + "]";
    };
    if (shape != expected_shape)
      fail(std::string("tensor '") + field + "' has shape " + fmt(shape) + ", expected " +
           fmt(expected_shape));
    std::size_t expected = 1;
    for (std::size_t d : shape)
      expected *= d;
    std::vector<double> values;
    if (t.contains("data")) {
      const std::string dtype = t.value("dtype", std::string("float32"));
      if (!t["data"].is_string())
        fail(std::string("tensor '") + field + "' data must be a base64 string");
      try {
        if (dtype == "float32")
          values = decode_f32(t["data"].get<std::string>());
        else if (dtype == "float64")
          values = decode_f64(t["data"].get<std::string>());
        else
          fail(std::string("tensor '") + field + "' has unsupported dtype '" + dtype + "'");
      } catch (const ModelError& e) {
        fail(std::string("tensor '") + field + "': " + e.what());
      }
    } else if (t.contains("values") && t["values"].is_array()) {
      for (const Json& v : t["values"]) {
        if (!v.is_number())
          fail(std::string("tensor '") + field + "' values must be numbers");
        values.push_back(v.get<double>());
      }
    } else {
      fail(std::string("tensor '") + field + "' needs 'data' or 'values'");
    }
    if (values.size() != expected)
      fail(std::string("tensor '") + field + "' has " + std::to_string(values.size()) +
           " values but shape " + fmt(shape) + " needs " + std::to_string(expected));
    for (double v : values)
      if (!std::isfinite(v))
        fail(std::string("tensor '") + field + "' contains a non-finite value");
    return values;
  }

  const Json& json() const { return layer_; }

private:
  const Json& layer_;
  std::string kind_;
  std::string where_;
};

inline void push_activation(const LayerReader& r, std::vector<LayerKind>& out) {
  if (!r.json().contains("activation"))
    return;
  const std::string act = r.json()["activation"].get<std::string>();
  if (act == "relu")
    out.emplace_back(ReLU{});
  else if (act == "tanh")
    out.emplace_back(Tanh{});
  else if (act == "sigmoid")
    out.emplace_back(Sigmoid{});
  else if (act == "softmax")
    out.emplace_back(Softmax{});
  else if (act != "linear")
    r.fail("unsupported activation '" + act + "'");
}

inline Shape parse_input_shape(const Json& doc) {
  if (!doc.contains("input_shape") || !doc["input_shape"].is_array())
    throw ModelError("missing array field 'input_shape'");
  std::vector<std::size_t> dims;
  for (const Json& d : doc["input_shape"]) {
    if (!is_count(d) || d.get<std::size_t>() == 0)
      throw ModelError("'input_shape' entries must be positive integers");
    dims.push_back(d.get<std::size_t>());
  }
  if (dims.size() == 1)
    return Shape::flat(dims[0]);
  if (dims.size() == 3)
    return Shape::image(dims[0], dims[1], dims[2]);
  throw ModelError("'input_shape' must have 1 (n) or 3 (H, W, C) entries");
}

} // namespace detail

inline ModelFile parse_model(const Json& doc) {
  if (!doc.is_object())
    throw ModelError("model document must be a JSON object");
  const std::string version = doc.value("format_version", std::string());
  if (version.empty())
    throw VersionError("missing field 'format_version'");
  if (version.substr(0, version.find('.')) != "1")
    throw VersionError("unsupported format_version '" + version + "' (expected 1.x)");
  Shape shape = detail::parse_input_shape(doc);
  if (doc.contains("input_range") &&
      !(doc["input_range"].is_array() && doc["input_range"].size() == 2 &&
        doc["input_range"][0].is_number() && doc["input_range"][1].is_number() &&
        doc["input_range"][0].get<double>() == 0.0 && doc["input_range"][1].get<double>() == 1.0))
    throw ModelError("'input_range' must be [0, 1]; inputs are expected pre-normalised");
  if (!doc.contains("layers") || !doc["layers"].is_array() || doc["layers"].empty())
    throw ModelError("missing non-empty array field 'layers'");

  // Shapes are tracked while reading so payload sizes can be derived from the
  // incoming shape and errors carry the file's layer index.
  std::vector<LayerKind> kinds;
  Shape current = shape;
  const Json& layers = doc["layers"];
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (!layers[i].is_object())
      throw ModelError("layer " + std::to_string(i) + " must be an object");
    const detail::LayerReader r(layers[i], i);
    const std::string& kind = r.kind();
    std::vector<LayerKind> produced;
    if (kind == "dense") {
      if (!current.is_flat())
        r.fail("dense layer needs a flat input, got " + to_string(current));
      Dense d;
      d.in = current.size();
      d.out = r.count("units");
      const std::vector<double> w = r.tensor("weights", {d.in, d.out}); // [in, out]
      d.weights.resize(d.in * d.out);
      for (std::size_t i_in = 0; i_in < d.in; ++i_in)
        for (std::size_t o = 0; o < d.out; ++o)
          d.weights[o * d.in + i_in] = w[i_in * d.out + o];
      d.bias = r.tensor("bias", {d.out});
      produced.emplace_back(std::move(d));
      detail::push_activation(r, produced);
    } else if (kind == "conv2d") {
      if (current.is_flat())
        r.fail("conv2d needs an HxWxC input");
      Conv2D c;
      std::tie(c.kernel_h, c.kernel_w) = r.pair("kernel_size");
      std::tie(c.stride_h, c.stride_w) = r.pair("strides", std::pair<std::size_t, std::size_t>{1, 1});
      c.in_channels = current.channels;
      c.filters = r.count("filters");
      const std::string padding = r.json().value("padding", std::string("valid"));
      if (padding == "same")
        c.padding = Padding::Same;
      else if (padding != "valid")
        r.fail("padding must be 'valid' or 'same'");
      c.kernel = r.tensor("weights", {c.kernel_h, c.kernel_w, c.in_channels, c.filters});
      c.bias = r.tensor("bias", {c.filters});
      produced.emplace_back(std::move(c));
      detail::push_activation(r, produced);
    } else if (kind == "maxpool") {
      MaxPool p;
      std::tie(p.window_h, p.window_w) = r.pair("pool_size");
      std::tie(p.stride_h, p.stride_w) = r.pair("strides", std::pair{p.window_h, p.window_w});
      produced.emplace_back(p);
    } else if (kind == "batchnorm") {
      const std::size_t ch = current.channels;
      const std::vector<double> gamma = r.tensor("gamma", {ch});
      const std::vector<double> beta = r.tensor("beta", {ch});
      const std::vector<double> mean = r.tensor("moving_mean", {ch});
      const std::vector<double> var = r.tensor("moving_variance", {ch});
      const double eps = r.json().value("epsilon", 1e-3);
      BatchNormFolded bn;
      bn.scale.resize(ch);
      bn.shift.resize(ch);
      for (std::size_t c = 0; c < ch; ++c) {
        if (var[c] + eps <= 0.0)
          r.fail("moving_variance + epsilon must be positive");
        bn.scale[c] = gamma[c] / std::sqrt(var[c] + eps);
        bn.shift[c] = beta[c] - mean[c] * bn.scale[c];
      }
      produced.emplace_back(std::move(bn));
    } else if (kind == "batchnorm_folded") {
      BatchNormFolded bn;
      bn.scale = r.tensor("scale", {current.channels});
      bn.shift = r.tensor("shift", {current.channels});
      produced.emplace_back(std::move(bn));
    } else if (kind == "dropout") {
      // identity at inference
    } else if (kind == "flatten") {
      produced.emplace_back(Flatten{});
    } else if (kind == "relu") {
      produced.emplace_back(ReLU{});
    } else if (kind == "tanh") {
      produced.emplace_back(Tanh{});
    } else if (kind == "sigmoid") {
      produced.emplace_back(Sigmoid{});
    } else if (kind == "softmax") {
      produced.emplace_back(Softmax{});
    } else {
      throw UnsupportedLayerError(r.where() + ": unsupported layer type '" + kind + "'");
    }
    for (LayerKind& k : produced) {
      try {
        current = Network::infer_output(i, k, current);
      } catch (const ShapeError& e) {
        throw ModelError(e.what());
      }
      kinds.push_back(std::move(k));
    }
  }
  if (!current.is_flat())
    throw ModelError("final layer must produce a flat output, got " + to_string(current));

  ModelFile file{Network(shape, std::move(kinds)), version, doc.value("name", std::string()),
                 sha256_hex(layers.dump()), std::nullopt, {}};
  if (doc.contains("metadata") && doc["metadata"].is_object()) {
    const Json& meta = doc["metadata"];
    if (meta.contains("training_accuracy") && meta["training_accuracy"].is_number())
      file.training_accuracy = meta["training_accuracy"].get<double>();
    if (meta.contains("class_names") && meta["class_names"].is_array())
      for (const Json& c : meta["class_names"])
        file.class_names.push_back(c.get<std::string>());
  }
  if (!file.class_names.empty() && file.class_names.size() != file.network.output_dim())
    throw ModelError("metadata.class_names has " + std::to_string(file.class_names.size()) +
                     " entries but the network has " + std::to_string(file.network.output_dim()) +
                     " outputs");
  return file;
}

inline ModelFile load_model(const std::string& path) {
  const std::string text = detail::read_file(path);
  try {
    return parse_model(detail::parse_json(text, "model file '" + path + "'"));
  } catch (const ModelError& e) {
    // Subclass identity matters to callers, so only prefix the message.
    if (dynamic_cast<const VersionError*>(&e))
      throw VersionError(path + ": " + e.what());
    if (dynamic_cast<const UnsupportedLayerError*>(&e))
      throw UnsupportedLayerError(path + ": " + e.what());
    throw ModelError(path + ": " + e.what());
  }
}

namespace detail {

inline Json tensor_json(std::vector<std::size_t> shape, std::span<const double> values) {
  return Json{{"shape", std::move(shape)}, {"dtype", "float32"}, {"data", encode_f32(values)}};
}

} // namespace detail

/// Serialises a network in the model format. Weights are rounded to float32.
inline Json model_to_json(const Network& net, const std::string& name = "",
                          const Json& metadata = Json::object()) {
  Json layers = Json::array();
  for (const Layer& layer : net.layers()) {
    Json j;
    j["type"] = layer_name(layer.kind);
    if (const auto* d = std::get_if<Dense>(&layer.kind)) {
      Vector w(d->in * d->out);
      for (std::size_t i = 0; i < d->in; ++i)
        for (std::size_t o = 0; o < d->out; ++o)
          w[i * d->out + o] = d->weights[o * d->in + i];
      j["units"] = d->out;
      j["weights"] = detail::tensor_json({d->in, d->out}, w);
      j["bias"] = detail::tensor_json({d->out}, d->bias);
    } else if (const auto* c = std::get_if<Conv2D>(&layer.kind)) {
      j["filters"] = c->filters;
      j["kernel_size"] = {c->kernel_h, c->kernel_w};
      j["strides"] = {c->stride_h, c->stride_w};
      j["padding"] = c->padding == Padding::Same ? "same" : "valid";
      j["weights"] = detail::tensor_json({c->kernel_h, c->kernel_w, c->in_channels, c->filters}, c->kernel);
      j["bias"] = detail::tensor_json({c->filters}, c->bias);
    } else if (const auto* m = std::get_if<MaxPool>(&layer.kind)) {
      j["pool_size"] = {m->window_h, m->window_w};
      j["strides"] = {m->stride_h, m->stride_w};
    } else if (const auto* bn = std::get_if<BatchNormFolded>(&layer.kind)) {
      j["type"] = "batchnorm_folded";
      j["scale"] = detail::tensor_json({bn->scale.size()}, bn->scale);
      j["shift"] = detail::tensor_json({bn->shift.size()}, bn->shift);
    }
    layers.push_back(std::move(j));
  }
  const Shape& in = net.input_shape();
  Json doc;
  doc["format_version"] = kModelFormatVersion;
  doc["name"] = name;
  doc["input_shape"] = in.is_flat() ? Json{in.size()} : Json{in.height, in.width, in.channels};
  doc["input_range"] = {0.0, 1.0};
  doc["metadata"] = metadata;
  doc["layers"] = std::move(layers);
  return doc;
}

inline void save_model(const Network& net, const std::string& path, const std::string& name = "",
                       const Json& metadata = Json::object()) {
  detail::write_file(path, model_to_json(net, name, metadata).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Input sets: {"inputs": [{"x": [...], "label": k}, ...]}. Labels are the
// human-oracle labels O(x), 1-based, optional.

struct InputRecord {
  Vector x;
  std::optional<Label> label;
};

inline std::vector<InputRecord> parse_inputs(const Json& doc) {
  if (!doc.is_object() || !doc.contains("inputs") || !doc["inputs"].is_array())
    throw ConfigError("inputs file needs an array field 'inputs'");
  std::vector<InputRecord> records;
  const Json& items = doc["inputs"];
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = "inputs[" + std::to_string(i) + "]";
    const Json& item = items[i];
    if (!item.is_object() || !item.contains("x") || !item["x"].is_array())
      throw ConfigError(where + ".x must be an array of numbers");
    InputRecord r;
    for (const Json& v : item["x"]) {
      if (!v.is_number())
        throw ConfigError(where + ".x must be an array of numbers");
      r.x.push_back(v.get<double>());
    }
    if (!records.empty() && r.x.size() != records.front().x.size())
      throw ConfigError(where + ".x has dimension " + std::to_string(r.x.size()) + ", expected " +
                        std::to_string(records.front().x.size()));
    if (item.contains("label") && !item["label"].is_null()) {
      if (!item["label"].is_number_integer() || item["label"].get<long long>() < 0)
        throw ConfigError(where + ".label must be a non-negative integer");
      r.label = item["label"].get<Label>();
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<InputRecord> load_inputs(const std::string& path) {
  try {
    return parse_inputs(detail::parse_json(detail::read_file(path), "inputs file '" + path + "'"));
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
}

inline void save_inputs(std::span<const InputRecord> records, const std::string& path) {
  Json items = Json::array();
  for (const InputRecord& r : records) {
    Json item{{"x", r.x}};
    if (r.label)
      item["label"] = *r.label;
    items.push_back(std::move(item));
  }
  detail::write_file(path, Json{{"inputs", std::move(items)}}.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Run configuration. Every field is optional so that command-line flags can
// fill or override it.

struct PropertySpec {
  std::string kind = "confidence_interval"; // or uncertainty, reachability
  CiCase ci_case = CiCase::Untargeted;
  std::optional<Label> target;
  std::optional<Label> label;
  std::optional<double> epsilon;
};

struct RunConfig {
  std::optional<std::string> model;
  std::optional<std::string> inputs;
  std::vector<std::size_t> input_index;
  std::optional<Vector> center;
  std::optional<double> d;
  std::optional<NormOrder> p;
  std::optional<std::uint64_t> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  std::optional<double> label_epsilon;
  std::optional<PropertySpec> property;
  std::optional<std::uint64_t> samples;        // random-sampling baseline
  std::optional<std::uint64_t> points_per_dim; // grid oracle
  std::optional<std::string> csv;
  std::optional<std::string> trace_csv;
  std::optional<std::string> report;           // input of certify
  std::optional<bool> fail_on_risk;
  std::optional<bool> no_timing;
};

namespace detail {

inline double config_number(const Json& j, const std::string& field) {
  if (!j.is_number())
    throw ConfigError("config field '" + field + "' must be a number");
  const double v = j.get<double>();
  if (!std::isfinite(v))
    throw ConfigError("config field '" + field + "' must be finite");
  return v;
}

inline std::uint64_t config_count(const Json& j, const std::string& field) {
  if (!is_count(j))
    throw ConfigError("config field '" + field + "' must be a non-negative integer");
  return j.get<std::uint64_t>();
}

inline std::string config_string(const Json& j, const std::string& field) {
  if (!j.is_string())
    throw ConfigError("config field '" + field + "' must be a string");
  return j.get<std::string>();
}

inline NormOrder config_norm(const Json& j, const std::string& field) {
  std::string text;
  if (j.is_string())
    text = j.get<std::string>();
  else if (j.is_number())
    text = j.dump();
  else
    throw ConfigError("config field '" + field + "': p must be 1, 2, or inf");
  try {
    return parse_norm_order(text);
  } catch (const ConfigError& e) {
    throw ConfigError("config field '" + field + "': " + e.what());
  }
}

inline Label config_label(const Json& j, const std::string& field) {
  if (!j.is_number_integer() || j.get<long long>() < 1)
    throw ConfigError("config field '" + field + "' must be a positive label");
  return j.get<Label>();
}

inline PropertySpec parse_property_spec(const Json& j) {
  if (!j.is_object())
    throw ConfigError("config field 'property' must be an object");
  PropertySpec spec;
  for (const auto& [key, value] : j.items()) {
    const std::string field = "property." + key;
    if (key == "kind") {
      spec.kind = config_string(value, field);
      if (spec.kind != "confidence_interval" && spec.kind != "uncertainty" && spec.kind != "reachability")
        throw ConfigError("config field '" + field +
                          "' must be confidence_interval, uncertainty or reachability");
    } else if (key == "case") {
      const std::uint64_t c = config_count(value, field);
      if (c < 1 || c > 3)
        throw ConfigError("config field '" + field + "' must be 1, 2 or 3");
      spec.ci_case = static_cast<CiCase>(c);
    } else if (key == "target") {
      spec.target = config_label(value, field);
    } else if (key == "label") {
      spec.label = config_label(value, field);
    } else if (key == "epsilon") {
      spec.epsilon = config_number(value, field);
      if (*spec.epsilon < 0.0)
        throw ConfigError("config field '" + field + "' must be non-negative");
    } else {
      throw ConfigError("unknown config field '" + field + "'");
    }
  }
  if (spec.ci_case == CiCase::Targeted && !spec.target && spec.kind == "confidence_interval")
    throw ConfigError("config field 'property.target' is required for case 2");
  if (spec.kind == "reachability" && !spec.label)
    throw ConfigError("config field 'property.label' is required for reachability");
  if (spec.kind == "uncertainty" && !spec.epsilon)
    throw ConfigError("config field 'property.epsilon' is required for uncertainty");
  return spec;
}

} // namespace detail

inline RunConfig parse_config(const Json& doc) {
  if (!doc.is_object())
    throw ConfigError("config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : doc.items()) {
    if (key == "model") {
      cfg.model = detail::config_string(value, key);
    } else if (key == "inputs") {
      cfg.inputs = detail::config_string(value, key);
    } else if (key == "input_index") {
      if (detail::is_count(value))
        cfg.input_index.push_back(value.get<std::size_t>());
      else if (value.is_array())
        for (std::size_t i = 0; i < value.size(); ++i)
          cfg.input_index.push_back(detail::config_count(value[i], key + "[" + std::to_string(i) + "]"));
      else
        throw ConfigError("config field 'input_index' must be an index or an array of indices");
    } else if (key == "center") {
      if (!value.is_array() || value.empty())
        throw ConfigError("config field 'center' must be a non-empty array");
      Vector c;
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double v = detail::config_number(value[i], key + "[" + std::to_string(i) + "]");
        if (v < 0.0 || v > 1.0)
          throw ConfigError("config field 'center[" + std::to_string(i) + "]' must lie in [0, 1]");
        c.push_back(v);
      }
      cfg.center = std::move(c);
    } else if (key == "d") {
      cfg.d = detail::config_number(value, key);
      if (!(*cfg.d > 0.0))
        throw ConfigError("config field 'd' must be positive");
    } else if (key == "p") {
      cfg.p = detail::config_norm(value, key);
    } else if (key == "budget") {
      cfg.budget = detail::config_count(value, key);
      if (*cfg.budget == 0)
        throw ConfigError("config field 'budget' must be positive");
    } else if (key == "seed") {
      cfg.seed = detail::config_count(value, key);
    } else if (key == "out") {
      cfg.out = detail::config_string(value, key);
    } else if (key == "samples") {
      cfg.samples = detail::config_count(value, key);
      if (*cfg.samples == 0)
        throw ConfigError("config field 'samples' must be positive");
    } else if (key == "points_per_dim") {
      cfg.points_per_dim = detail::config_count(value, key);
      if (*cfg.points_per_dim < 2)
        throw ConfigError("config field 'points_per_dim' must be at least 2");
    } else if (key == "csv" || key == "trace_csv" || key == "report") {
      (key == "csv" ? cfg.csv : key == "trace_csv" ? cfg.trace_csv : cfg.report) =
          detail::config_string(value, key);
    } else if (key == "fail_on_risk" || key == "no_timing") {
      if (!value.is_boolean())
        throw ConfigError("config field '" + key + "' must be true or false");
      (key == "fail_on_risk" ? cfg.fail_on_risk : cfg.no_timing) = value.get<bool>();
    } else if (key == "threads") {
      cfg.threads = detail::config_count(value, key);
    } else if (key == "label_epsilon") {
      cfg.label_epsilon = detail::config_number(value, key);
      if (*cfg.label_epsilon < 0.0 || *cfg.label_epsilon >= 1.0)
        throw ConfigError("config field 'label_epsilon' must lie in [0, 1)");
    } else if (key == "property") {
      cfg.property = detail::parse_property_spec(value);
    } else {
      throw ConfigError("unknown config field '" + key + "'");
    }
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = detail::read_file(path);
    return parse_config(detail::parse_json(text, "config file '" + path + "'"));
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
}

// ---------------------------------------------------------------------------
// Reports.

inline Json property_to_json(const PropertyExpr& expr) {
  Json j{{"kind", property_kind(expr)}};
  std::visit(
      [&j](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        j["epsilon"] = e.epsilon;
        if constexpr (std::is_same_v<T, ConfidenceInterval>) {
          j["l1"] = e.l1;
          j["l2"] = e.l2;
        } else if constexpr (std::is_same_v<T, UncertaintyReference>) {
          j["reference"] = e.reference;
        } else if constexpr (std::is_same_v<T, Reachability>) {
          j["label"] = e.label;
        }
      },
      expr);
  return j;
}

inline PropertyExpr property_from_json(const Json& j) {
  const std::string kind = detail::config_string(j.at("kind"), "property.kind");
  const double eps = detail::config_number(j.at("epsilon"), "property.epsilon");
  if (kind == "confidence_interval")
    return ConfidenceInterval{j.at("l1").get<Label>(), j.at("l2").get<Label>(), eps};
  if (kind == "uncertainty_uniform")
    return UncertaintyUniform{eps};
  if (kind == "uncertainty_reference")
    return UncertaintyReference{j.at("reference").get<Vector>(), eps};
  if (kind == "reachability")
    return Reachability{j.at("label").get<Label>(), eps};
  throw ConfigError("report field 'property.kind' has unknown value '" + kind + "'");
}

inline Json report_to_json(const QuantReport& r) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["property"] = r.property ? property_to_json(*r.property) : Json(nullptr);
  j["ball"] = {{"center", encode_f64(r.ball.center)},
               {"dim", r.ball.center.size()},
               {"d", r.ball.radius},
               {"p", to_string(r.ball.p)}};
  j["Q_estimate"] = r.q_estimate;
  j["witness"] = encode_f64(r.witness);
  j["s_at_x"] = r.s_at_x;
  j["s_at_witness"] = r.s_at_witness;
  j["d_prime"] = r.safe_radius;
  j["clamped"] = r.radius_clamped;
  j["fevals"] = r.fevals;
  j["batches"] = r.batches;
  j["method"] = to_string(r.method);
  j["risk_found"] = r.risk_found ? Json{{"x", encode_f64(r.risk_found->x)}, {"s", r.risk_found->s}}
                                 : Json(nullptr);
  j["budget"] = r.budget;
  j["seed"] = r.seed;
  j["model_digest"] = r.model_digest;
  j["input_id"] = r.input_id;
  j["wall_time_ms"] = r.wall_time_ms;
  return j;
}

inline QuantReport report_from_json(const Json& j) {
  try {
    if (j.at("schema_version").get<std::string>() != kReportSchemaVersion)
      throw VersionError("unsupported report schema_version");
    QuantReport r;
    if (!j.at("property").is_null())
      r.property = property_from_json(j.at("property"));
    const Json& ball = j.at("ball");
    r.ball.center = decode_f64(ball.at("center").get<std::string>());
    r.ball.radius = ball.at("d").get<double>();
    r.ball.p = parse_norm_order(ball.at("p").get<std::string>());
    r.q_estimate = j.at("Q_estimate").get<double>();
    r.witness = decode_f64(j.at("witness").get<std::string>());
    r.s_at_x = j.at("s_at_x").get<double>();
    r.s_at_witness = j.at("s_at_witness").get<double>();
    r.safe_radius = j.at("d_prime").get<double>();
    r.radius_clamped = j.at("clamped").get<bool>();
    r.fevals = j.at("fevals").get<std::uint64_t>();
    r.batches = j.at("batches").get<std::uint64_t>();
    r.method = parse_method(j.at("method").get<std::string>());
    if (!j.at("risk_found").is_null())
      r.risk_found = RiskWitness{decode_f64(j["risk_found"].at("x").get<std::string>()),
                                 j["risk_found"].at("s").get<double>()};
    r.budget = j.at("budget").get<std::uint64_t>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.model_digest = j.at("model_digest").get<std::string>();
    r.input_id = j.at("input_id").get<long long>();
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    return r;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  } catch (const ModelError& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
}

inline std::string report_text(const QuantReport& r) { return report_to_json(r).dump(2) + "\n"; }

inline void save_report(const QuantReport& r, const std::string& path) {
  detail::write_file(path, report_text(r));
}

/// Several reports go into a {"reports": [...]} document.
inline std::string reports_text(std::span<const QuantReport> reports) {
  if (reports.size() == 1)
    return report_text(reports.front());
  Json arr = Json::array();
  for (const QuantReport& r : reports)
    arr.push_back(report_to_json(r));
  return Json{{"reports", std::move(arr)}}.dump(2) + "\n";
}

inline void save_reports(std::span<const QuantReport> reports, const std::string& path) {
  detail::write_file(path, reports_text(reports));
}

inline std::vector<QuantReport> load_reports(const std::string& path) {
  Json doc;
  try {
    doc = detail::parse_json(detail::read_file(path), "report file '" + path + "'");
  } catch (const ModelError& e) {
    throw ConfigError(e.what());
  }
  std::vector<QuantReport> out;
  if (doc.is_object() && doc.contains("reports")) {
    for (const Json& r : doc["reports"])
      out.push_back(report_from_json(r));
  } else {
    out.push_back(report_from_json(doc));
  }
  return out;
}

inline QuantReport load_report(const std::string& path) {
  std::vector<QuantReport> all = load_reports(path);
  if (all.size() != 1)
    throw ConfigError("'" + path + "' holds " + std::to_string(all.size()) + " reports, expected 1");
  return std::move(all.front());
}

} // namespace riskq
