#include "trp/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "trp/lowrank.hpp"

namespace trp {

// ---------------------------------------------------------------------------
// Architecture <-> JSON
// ---------------------------------------------------------------------------

nlohmann::json spec_to_json(const ModelSpec& spec) {
  nlohmann::json j;
  j["name"] = spec.name;
  j["in"] = {spec.in_ch, spec.in_h, spec.in_w};
  j["num_classes"] = spec.num_classes;
  nlohmann::json layers = nlohmann::json::array();
  for (const LayerSpec& l : spec.layers) {
    nlohmann::json e;
    if (const auto* cv = std::get_if<ConvLayerSpec>(&l)) {
      e["kind"] = "conv";
      e["out"] = cv->out_ch;
      e["in"] = cv->in_ch;
      e["kh"] = cv->kh;
      e["kw"] = cv->kw;
      e["stride"] = {cv->geom.stride_h, cv->geom.stride_w};
      e["pad"] = {cv->geom.pad_h, cv->geom.pad_w};
    } else if (const auto* ln = std::get_if<LinearLayerSpec>(&l)) {
      e["kind"] = "linear";
      e["out"] = ln->out;
      e["in"] = ln->in;
    } else if (std::holds_alternative<ReluLayerSpec>(l)) {
      e["kind"] = "relu";
    } else if (std::holds_alternative<MaxPoolLayerSpec>(l)) {
      e["kind"] = "maxpool";
    } else {
      e["kind"] = "flatten";
    }
    layers.push_back(std::move(e));
  }
  j["layers"] = std::move(layers);
  return j;
}

ModelSpec spec_from_json(const nlohmann::json& j) {
  ModelSpec spec;
  try {
    spec.name = j.at("name").get<std::string>();
    const auto in = j.at("in");
    spec.in_ch = in.at(0).get<std::size_t>();
    spec.in_h = in.at(1).get<std::size_t>();
    spec.in_w = in.at(2).get<std::size_t>();
    spec.num_classes = j.at("num_classes").get<std::size_t>();
    for (const auto& e : j.at("layers")) {
      const std::string kind = e.at("kind").get<std::string>();
      if (kind == "conv") {
        ConvLayerSpec cv;
        cv.out_ch = e.at("out").get<std::size_t>();
        cv.in_ch = e.at("in").get<std::size_t>();
        cv.kh = e.at("kh").get<std::size_t>();
        cv.kw = e.at("kw").get<std::size_t>();
        cv.geom.stride_h = e.at("stride").at(0).get<std::size_t>();
        cv.geom.stride_w = e.at("stride").at(1).get<std::size_t>();
        cv.geom.pad_h = e.at("pad").at(0).get<std::size_t>();
        cv.geom.pad_w = e.at("pad").at(1).get<std::size_t>();
        spec.layers.push_back(cv);
      } else if (kind == "linear") {
        spec.layers.push_back(LinearLayerSpec{e.at("out").get<std::size_t>(),
                                              e.at("in").get<std::size_t>()});
      } else if (kind == "relu") {
        spec.layers.push_back(ReluLayerSpec{});
      } else if (kind == "maxpool") {
        spec.layers.push_back(MaxPoolLayerSpec{});
      } else if (kind == "flatten") {
        spec.layers.push_back(FlattenLayerSpec{});
      } else {
        throw ValidationError("architecture: unknown layer kind \"" + kind +
                              "\"");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("architecture json: ") + e.what());
  }
  validate(spec);
  return spec;
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'T', 'R', 'P', '1'};

struct TensorShape {
  std::string name;
  std::vector<std::uint32_t> dims;
};

/// Parameter tensors in model order with their logical shapes.
std::vector<TensorShape> param_shapes(Model& model) {
  std::vector<TensorShape> out;
  for (std::size_t i = 0; i < model.layer_count(); ++i) {
    const std::string base = "layer" + std::to_string(i);
    if (const auto* conv = dynamic_cast<const Conv2d*>(&model.layer(i))) {
      out.push_back({base + ".weight",
                     {static_cast<std::uint32_t>(conv->w.dims[0]),
                      static_cast<std::uint32_t>(conv->w.dims[1]),
                      static_cast<std::uint32_t>(conv->w.dims[2]),
                      static_cast<std::uint32_t>(conv->w.dims[3])}});
      out.push_back(
          {base + ".bias", {static_cast<std::uint32_t>(conv->bias.size())}});
    } else if (const auto* lin = dynamic_cast<const Linear*>(&model.layer(i))) {
      out.push_back({base + ".weight",
                     {static_cast<std::uint32_t>(lin->w.rows),
                      static_cast<std::uint32_t>(lin->w.cols)}});
      out.push_back(
          {base + ".bias", {static_cast<std::uint32_t>(lin->bias.size())}});
    }
  }
  return out;
}

void append_u16le(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>(v >> 8));
}

void append_u32le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_f64le(std::string& out, double d) {
  const std::uint64_t v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void append_record(std::string& out, const TensorShape& shape,
                   const std::vector<double>& values) {
  append_u16le(out, static_cast<std::uint16_t>(shape.name.size()));
  out.append(shape.name);
  out.push_back(static_cast<char>(shape.dims.size()));
  std::size_t count = 1;
  for (std::uint32_t d : shape.dims) {
    append_u32le(out, d);
    count *= d;
  }
  if (count != values.size()) {
    throw ValidationError("checkpoint: tensor " + shape.name +
                          " has inconsistent element count");
  }
  for (double v : values) append_f64le(out, v);
}

struct Reader {
  const std::uint8_t* p;
  std::size_t n;
  std::size_t off = 0;
  std::string path;

  void need(std::size_t k, const char* what) const {
    if (off + k > n) {
      throw TruncatedError(path + ": truncated at offset " +
                           std::to_string(off) + " reading " + what);
    }
  }
  std::uint16_t u16(const char* what) {
    need(2, what);
    const std::uint16_t v =
        static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
    off += 2;
    return v;
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return p[off++];
  }
  std::string bytes(std::size_t k, const char* what) {
    need(k, what);
    std::string s(reinterpret_cast<const char*>(p + off), k);
    off += k;
    return s;
  }
  void f64_run(double* dst, std::size_t count, const char* what) {
    need(count * 8, what);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) {
        v |= std::uint64_t(p[off + i * 8 + b]) << (8 * b);
      }
      dst[i] = std::bit_cast<double>(v);
    }
    off += count * 8;
  }
};

std::string dims_to_string(const std::vector<std::uint32_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

/// Reads one tensor record whose shape must match `expect` exactly.
std::vector<double> read_record(Reader& r, const TensorShape& expect) {
  const std::uint16_t name_len = r.u16("tensor name length");
  const std::string name = r.bytes(name_len, "tensor name");
  if (name != expect.name) {
    throw IoError(r.path + ": tensor \"" + name + "\" where header lists \"" +
                  expect.name + "\"");
  }
  const std::uint8_t ndims = r.u8("tensor rank");
  std::vector<std::uint32_t> dims(ndims);
  std::size_t count = 1;
  for (std::uint8_t i = 0; i < ndims; ++i) {
    dims[i] = r.u32("tensor dims");
    count *= dims[i];
  }
  if (dims != expect.dims) {
    throw ShapeMismatchError(r.path + ": tensor " + expect.name + " has shape " +
                             dims_to_string(dims) + ", header says " +
                             dims_to_string(expect.dims));
  }
  std::vector<double> values(count);
  r.f64_run(values.data(), count, "tensor values");
  return values;
}

std::vector<TensorShape> shapes_from_header(const nlohmann::json& list,
                                            const std::string& path,
                                            const char* what) {
  std::vector<TensorShape> out;
  try {
    for (const auto& e : list) {
      TensorShape s;
      s.name = e.at("name").get<std::string>();
      s.dims = e.at("dims").get<std::vector<std::uint32_t>>();
      out.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": bad " + what + " directory: " + e.what());
  }
  return out;
}

}  // namespace

void save_checkpoint(Model& model, const std::string& path,
                     const nlohmann::json& metadata, const SgdState* optimizer) {
  const std::vector<TensorShape> shapes = param_shapes(model);
  std::vector<ParamRef> params = model.params();
  if (params.size() != shapes.size()) {
    throw ValidationError("checkpoint: parameter list does not match shapes");
  }

  nlohmann::json header;
  header["version"] = 1;
  header["model"] = spec_to_json(model.spec());
  header["metadata"] = metadata;
  nlohmann::json dir = nlohmann::json::array();
  for (const TensorShape& s : shapes) {
    dir.push_back({{"name", s.name}, {"dims", s.dims}});
  }
  header["tensors"] = std::move(dir);
  if (optimizer) {
    if (optimizer->velocity.size() != params.size()) {
      throw ValidationError("checkpoint: optimizer state does not match model");
    }
    nlohmann::json opt;
    opt["lr"] = optimizer->lr;
    opt["momentum"] = optimizer->momentum;
    opt["weight_decay"] = optimizer->weight_decay;
    nlohmann::json vdir = nlohmann::json::array();
    for (const TensorShape& s : shapes) {
      vdir.push_back({{"name", "opt." + s.name}, {"dims", s.dims}});
    }
    opt["tensors"] = std::move(vdir);
    header["optimizer"] = std::move(opt);
  } else {
    header["optimizer"] = nullptr;
  }

  std::string out(kMagic, 4);
  const std::string header_text = header.dump();
  append_u32le(out, static_cast<std::uint32_t>(header_text.size()));
  out.append(header_text);
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    append_record(out, shapes[i], *params[i].value);
  }
  if (optimizer) {
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      TensorShape s = shapes[i];
      s.name = "opt." + s.name;
      append_record(out, s, optimizer->velocity[i]);
    }
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw BadMagicError(path + ": bad magic (not a TRP1 checkpoint)");
  }
  Reader r{bytes.data(), bytes.size(), 4, path};
  const std::uint32_t header_len = r.u32("header length");
  const std::string header_text = r.bytes(header_len, "header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path + ": invalid header json: " + e.what());
  }

  Checkpoint ck;
  if (!header.contains("model")) throw IoError(path + ": header lacks model");
  ck.model = Model(spec_from_json(header.at("model")));
  ck.metadata = header.value("metadata", nlohmann::json::object());

  const std::vector<TensorShape> expected = param_shapes(ck.model);
  const std::vector<TensorShape> listed =
      shapes_from_header(header.value("tensors", nlohmann::json::array()), path,
                         "tensor");
  if (listed.size() != expected.size()) {
    throw ShapeMismatchError(path + ": header lists " +
                             std::to_string(listed.size()) + " tensors, model has " +
                             std::to_string(expected.size()) + " parameters");
  }
  std::vector<ParamRef> params = ck.model.params();
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (listed[i].name != expected[i].name) {
      throw IoError(path + ": header tensor \"" + listed[i].name +
                    "\" where the architecture has \"" + expected[i].name + "\"");
    }
    if (listed[i].dims != expected[i].dims) {
      throw ShapeMismatchError(path + ": tensor " + listed[i].name +
                               " has header shape " + dims_to_string(listed[i].dims) +
                               ", architecture needs " +
                               dims_to_string(expected[i].dims));
    }
    *params[i].value = read_record(r, listed[i]);
  }

  if (header.contains("optimizer") && !header.at("optimizer").is_null()) {
    const nlohmann::json& opt = header.at("optimizer");
    SgdState st;
    try {
      st.lr = opt.at("lr").get<double>();
      st.momentum = opt.at("momentum").get<double>();
      st.weight_decay = opt.at("weight_decay").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path + ": bad optimizer header: " + e.what());
    }
    const std::vector<TensorShape> vlisted = shapes_from_header(
        opt.value("tensors", nlohmann::json::array()), path, "optimizer tensor");
    if (vlisted.size() != expected.size()) {
      throw ShapeMismatchError(path + ": optimizer lists " +
                               std::to_string(vlisted.size()) + " tensors, model has " +
                               std::to_string(expected.size()) + " parameters");
    }
    for (std::size_t i = 0; i < vlisted.size(); ++i) {
      if (vlisted[i].name != "opt." + expected[i].name ||
          vlisted[i].dims != expected[i].dims) {
        throw ShapeMismatchError(path + ": optimizer tensor " + vlisted[i].name +
                                 " does not match parameter " + expected[i].name);
      }
      st.velocity.push_back(read_record(r, vlisted[i]));
    }
    ck.optimizer = std::move(st);
  }

  if (r.off != bytes.size()) {
    throw IoError(path + ": " + std::to_string(bytes.size() - r.off) +
                  " trailing bytes after last tensor");
  }
  return ck;
}

}  // namespace trp
