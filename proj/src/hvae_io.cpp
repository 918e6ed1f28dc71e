#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "edhie/hvae.hpp"

namespace edhie {

namespace {

static_assert(std::endian::native == std::endian::little, "model container assumes little-endian");

constexpr char kMagic[4] = {'H', 'V', 'A', 'E'};
constexpr std::uint32_t kFormatVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    out_.append(p, sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void put_raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    auto n = get<std::uint32_t>();
    need(n);
    std::string s(in_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void get_raw(char* p, std::size_t n) {
    need(n);
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw std::runtime_error("model file truncated");
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

void check_shape(const Parameter& p, Eigen::Index rows, Eigen::Index cols) {
  if (p.value.rows() != rows || p.value.cols() != cols)
    throw std::runtime_error("parameter " + p.name + " has shape " + std::to_string(rows) + "x" +
                             std::to_string(cols) + ", expected " + std::to_string(p.value.rows()) +
                             "x" + std::to_string(p.value.cols()));
}

}  // namespace

std::string serialize_model(const HvaeModel& model) {
  Writer w;
  w.put_raw(kMagic, 4);
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.vocab().size()));
  for (const auto& s : model.vocab().symbols()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.kind));
    w.put_string(s.name);
    w.put<double>(s.value);
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.hidden_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.latent_dim()));
  const auto params = model.parameters();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  for (const Parameter* p : params) {
    w.put_string(p->name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.rows()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p->value.cols()));
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index j = 0; j < p->value.cols(); ++j) w.put<double>(p->value(i, j));
  }
  return w.take();
}

HvaeModel deserialize_model(std::string_view bytes) {
  Reader r(bytes);
  char magic[4];
  r.get_raw(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("not a model file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion)
    throw std::runtime_error("unsupported model format version " + std::to_string(version));
  const auto n_symbols = r.get<std::uint32_t>();
  std::vector<Symbol> symbols;
  for (std::uint32_t i = 0; i < n_symbols; ++i) {
    Symbol s;
    const auto kind = r.get<std::uint8_t>();
    if (kind > static_cast<std::uint8_t>(SymbolKind::literal)) throw std::runtime_error("bad symbol kind");
    s.kind = static_cast<SymbolKind>(kind);
    s.name = r.get_string();
    s.value = r.get<double>();
    symbols.push_back(std::move(s));
  }
  const auto hidden = static_cast<int>(r.get<std::uint32_t>());
  const auto latent = static_cast<int>(r.get<std::uint32_t>());
  HvaeModel model(Vocabulary(std::move(symbols)), hidden, latent);
  auto params = model.parameters();
  const auto n_params = r.get<std::uint32_t>();
  if (n_params != params.size()) throw std::runtime_error("parameter count mismatch");
  for (Parameter* p : params) {
    const std::string name = r.get_string();
    if (name != p->name) throw std::runtime_error("expected parameter " + p->name + ", found " + name);
    const auto rows = static_cast<Eigen::Index>(r.get<std::uint32_t>());
    const auto cols = static_cast<Eigen::Index>(r.get<std::uint32_t>());
    check_shape(*p, rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) p->value(i, j) = r.get<double>();
  }
  if (!r.done()) throw std::runtime_error("trailing bytes in model file");
  return model;
}

void save_model(const HvaeModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

HvaeModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_model(ss.str());
}

std::string model_to_json(const HvaeModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "hvae-model";
  j["version"] = kFormatVersion;
  j["hidden_dim"] = model.hidden_dim();
  j["latent_dim"] = model.latent_dim();
  auto& vocab = j["vocab"] = nlohmann::ordered_json::array();
  for (const auto& s : model.vocab().symbols()) {
    nlohmann::ordered_json e{{"name", s.name}, {"kind", std::string(to_string(s.kind))}};
    if (s.kind == SymbolKind::literal) e["value"] = s.value;
    vocab.push_back(std::move(e));
  }
  auto& params = j["parameters"] = nlohmann::ordered_json::array();
  for (const Parameter* p : model.parameters()) {
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(p->value.size()));
    for (Eigen::Index i = 0; i < p->value.rows(); ++i)
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) data.push_back(p->value(i, c));
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", data}});
  }
  return j.dump(1);
}

HvaeModel model_from_json(std::string_view text) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("format") != "hvae-model") throw std::runtime_error("not a model JSON document");
  if (j.at("version").get<std::uint32_t>() != kFormatVersion) throw std::runtime_error("unsupported version");
  std::vector<Symbol> symbols;
  for (const auto& e : j.at("vocab")) {
    Symbol s{e.at("name").get<std::string>(), parse_symbol_kind(e.at("kind").get<std::string>())};
    if (s.kind == SymbolKind::literal) s.value = e.at("value").get<double>();
    symbols.push_back(std::move(s));
  }
  HvaeModel model(Vocabulary(std::move(symbols)), j.at("hidden_dim").get<int>(), j.at("latent_dim").get<int>());
  auto params = model.parameters();
  const auto& blocks = j.at("parameters");
  if (blocks.size() != params.size()) throw std::runtime_error("parameter count mismatch");
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = *params[k];
    const auto& b = blocks[k];
    if (b.at("name").get<std::string>() != p.name) throw std::runtime_error("parameter order mismatch at " + p.name);
    check_shape(p, b.at("rows").get<Eigen::Index>(), b.at("cols").get<Eigen::Index>());
    const auto data = b.at("data").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(data.size()) != p.value.size()) throw std::runtime_error("bad data length");
    std::size_t t = 0;
    for (Eigen::Index i = 0; i < p.value.rows(); ++i)
      for (Eigen::Index c = 0; c < p.value.cols(); ++c) p.value(i, c) = data[t++];
  }
  return model;
}

}  // namespace edhie
