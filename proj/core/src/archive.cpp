#include "koopid/archive.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "koopid/dictionary.hpp"
#include "koopid/error.hpp"

namespace koopid {
namespace {

using json = nlohmann::json;

constexpr char kMagic[8] = {'K', 'O', 'O', 'P', 'I', 'D', 'A', 'R'};

template <typename T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
public:
  void u64(std::uint64_t v) { raw(to_little(v)); }
  void bytes(const std::string& s) {
    u64(s.size());
    out_.append(s);
  }
  void array(const std::string& name, const Matrix& m) {
    bytes(name);
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Index k = 0; k < m.size(); ++k) raw(to_little(m.data()[k]));
  }
  void magic() { out_.append(kMagic, sizeof(kMagic)); }
  std::string take() { return std::move(out_); }

private:
  template <typename T>
  void raw(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  std::string out_;
};

class Reader {
public:
  explicit Reader(const std::string& in) : in_(in) {}

  std::uint64_t u64() { return to_little(raw<std::uint64_t>()); }
  std::string bytes() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  Matrix array_body() {
    const std::uint64_t rows = u64();
    const std::uint64_t cols = u64();
    if (rows > 0 && cols > (in_.size() - pos_) / 8 / rows) throw FormatError("archive: array larger than file");
    Matrix m(static_cast<Index>(rows), static_cast<Index>(cols));
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = to_little(raw<double>());
    return m;
  }
  void magic() {
    need(sizeof(kMagic));
    if (std::memcmp(in_.data(), kMagic, sizeof(kMagic)) != 0) throw FormatError("archive: bad magic");
    pos_ += sizeof(kMagic);
  }
  bool at_end() const { return pos_ == in_.size(); }

private:
  void need(std::uint64_t n) const {
    if (n > in_.size() - pos_) throw FormatError("archive: truncated file");
  }
  template <typename T>
  T raw() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, in_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  const std::string& in_;
  std::size_t pos_ = 0;
};

const char* scope_name(PolynomialScope s) {
  return s == PolynomialScope::AllFrames ? "all_frames" : "latest_frame";
}

PolynomialScope scope_from(const std::string& s) {
  if (s == "all_frames") return PolynomialScope::AllFrames;
  if (s == "latest_frame") return PolynomialScope::LatestFrame;
  throw FormatError("archive: unknown polynomial scope '" + s + "'");
}

// Centers go into named arrays so they round-trip bit-exactly.
json lifting_to_json(const LiftingSpec& spec, const std::string& slot, std::map<std::string, Matrix>& arrays) {
  return std::visit(
      [&](const auto& l) -> json {
        using T = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<T, NoLifting>) {
          return {{"kind", "none"}};
        } else if constexpr (std::is_same_v<T, PolynomialLifting>) {
          return {{"kind", "polynomial"}, {"min_degree", l.min_degree}, {"max_degree", l.max_degree},
                  {"scope", scope_name(l.scope)}};
        } else if constexpr (std::is_same_v<T, RbfLifting>) {
          arrays[slot + ".centers"] = l.centers;
          return {{"kind", "rbf"}, {"centers", slot + ".centers"}};
        } else {
          arrays[slot + ".centers"] = l.rbf_centers;
          return {{"kind", "composed"}, {"centers", slot + ".centers"},
                  {"min_degree", l.poly_min_degree}, {"max_degree", l.poly_max_degree}};
        }
      },
      spec);
}

// Array names per family: A, B (linear); An, Cn; Ac, Bc, Cc.
struct MatrixNames {
  const char* a;
  const char* b;
  const char* c;
};

MatrixNames matrix_names(FamilyTag tag) {
  switch (tag) {
    case FamilyTag::Linear:
    case FamilyTag::LinearControlled: return {"A", "B", "C"};
    case FamilyTag::Nonlinear: return {"An", "Bn", "Cn"};
    case FamilyTag::NonlinearControlled: break;
  }
  return {"Ac", "Bc", "Cc"};
}

const Matrix& take_array(const std::map<std::string, Matrix>& arrays, const std::string& name) {
  const auto it = arrays.find(name);
  if (it == arrays.end()) throw FormatError("archive: missing array '" + name + "'");
  return it->second;
}

LiftingSpec lifting_from_json(const json& j, const std::map<std::string, Matrix>& arrays) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "none") return NoLifting{};
  if (kind == "polynomial") {
    return PolynomialLifting{j.at("min_degree").get<int>(), j.at("max_degree").get<int>(),
                             scope_from(j.at("scope").get<std::string>())};
  }
  if (kind == "rbf") return RbfLifting{take_array(arrays, j.at("centers").get<std::string>())};
  if (kind == "composed") {
    return ComposedLifting{take_array(arrays, j.at("centers").get<std::string>()),
                           j.at("min_degree").get<int>(), j.at("max_degree").get<int>()};
  }
  throw FormatError("archive: unknown lifting kind '" + kind + "'");
}

} // namespace

std::string encode_model(const KoopmanModel& model, const ReducedModel* reduced) {
  const Dictionary& dict = model.dictionary();
  const DictionarySpec& spec = model.spec();
  std::map<std::string, Matrix> arrays;

  json manifest;
  manifest["format_version"] = kArchiveFormatVersion;
  manifest["monomial_order_version"] = kMonomialOrderVersion;
  manifest["family"] = to_string(model.tag());
  manifest["layout"] = model.layout() == StateLayout::Delay ? "delay" : "delay_with_lift";
  manifest["dt"] = model.dt();
  manifest["fit_rank"] = model.fit_rank() ? json(*model.fit_rank()) : json(nullptr);
  manifest["dims"] = {{"m", spec.m},           {"q", spec.q},
                      {"z", spec.z},           {"b", dict.pre_lift_dim()},
                      {"L", dict.lift_dim()},  {"M", dict.state_dim()},
                      {"state", model.state_dim()}};
  manifest["dictionary"] = {{"pre_lift", lifting_to_json(spec.pre_lift, "pre_lift", arrays)},
                            {"lift", lifting_to_json(spec.lift, "lift", arrays)}};
  manifest["warnings"] = model.warnings;

  const MatrixNames names = matrix_names(model.tag());
  arrays[names.a] = model.A();
  if (const Matrix* b = model.B()) arrays[names.b] = *b;
  if (const Matrix* c = model.C()) arrays[names.c] = *c;

  if (reduced) {
    if (!(reduced->spec() == spec)) throw std::invalid_argument("encode_model: reduced model spec differs");
    const PodBasis& basis = reduced->basis();
    manifest["reduced"] = {{"rho", basis.rho()}, {"energy_fraction", basis.energy_fraction}};
    arrays["Phi"] = basis.Phi;
    arrays["eigenvalues"] = basis.eigenvalues;
    arrays["Ared"] = reduced->Ared();
    if (reduced->Bred()) arrays["Bred"] = *reduced->Bred();
    arrays["Cred"] = reduced->Cred();
  }

  Writer w;
  w.magic();
  w.bytes(manifest.dump(2));
  w.u64(arrays.size());
  for (const auto& [name, m] : arrays) w.array(name, m);
  return w.take();
}

ModelBundle decode_model(const std::string& bytes) {
  Reader r(bytes);
  r.magic();
  json manifest;
  try {
    manifest = json::parse(r.bytes());
  } catch (const json::exception& e) {
    throw FormatError(std::string("archive: bad manifest: ") + e.what());
  }
  std::map<std::string, Matrix> arrays;
  const std::uint64_t count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = r.bytes();
    arrays[name] = r.array_body();
  }
  if (!r.at_end()) throw FormatError("archive: trailing bytes");

  try {
    if (manifest.at("format_version").get<int>() != kArchiveFormatVersion) {
      throw FormatError("archive: unsupported format version " + manifest.at("format_version").dump());
    }
    if (manifest.at("monomial_order_version").get<int>() != kMonomialOrderVersion) {
      throw FormatError("archive: written under monomial order version " +
                        manifest.at("monomial_order_version").dump() + ", this build uses " +
                        std::to_string(kMonomialOrderVersion));
    }
    const json& dims = manifest.at("dims");
    DictionarySpec spec;
    spec.m = dims.at("m").get<Index>();
    spec.q = dims.at("q").get<Index>();
    spec.z = dims.at("z").get<Index>();
    spec.pre_lift = lifting_from_json(manifest.at("dictionary").at("pre_lift"), arrays);
    spec.lift = lifting_from_json(manifest.at("dictionary").at("lift"), arrays);

    const Dictionary dict(spec);
    if (dims.at("b").get<Index>() != dict.pre_lift_dim() || dims.at("L").get<Index>() != dict.lift_dim() ||
        dims.at("M").get<Index>() != dict.state_dim()) {
      throw FormatError("archive: manifest dims disagree with the dictionary spec");
    }

    const std::string layout_name = manifest.at("layout").get<std::string>();
    StateLayout layout;
    if (layout_name == "delay") {
      layout = StateLayout::Delay;
    } else if (layout_name == "delay_with_lift") {
      layout = StateLayout::DelayWithLift;
    } else {
      throw FormatError("archive: unknown layout '" + layout_name + "'");
    }

    const FamilyTag tag = family_tag_from_string(manifest.at("family").get<std::string>());
    const MatrixNames names = matrix_names(tag);
    const Matrix& a = take_array(arrays, names.a);
    ModelFamily family;
    switch (tag) {
      case FamilyTag::Linear: family = LinearFamily{a}; break;
      case FamilyTag::LinearControlled: family = LinearControlledFamily{a, take_array(arrays, names.b)}; break;
      case FamilyTag::Nonlinear: family = NonlinearFamily{a, take_array(arrays, names.c)}; break;
      case FamilyTag::NonlinearControlled:
        family = NonlinearControlledFamily{a, take_array(arrays, names.b), take_array(arrays, names.c)};
        break;
    }
    const json& rank = manifest.at("fit_rank");
    const RankSpec fit_rank = rank.is_null() ? full_rank : RankSpec(rank.get<Index>());
    KoopmanModel model(std::move(family), spec, manifest.at("dt").get<double>(), fit_rank, layout);
    model.warnings = manifest.value("warnings", std::vector<std::string>{});
    if (dims.at("state").get<Index>() != model.state_dim()) {
      throw FormatError("archive: manifest state dimension disagrees with the model");
    }

    std::optional<ReducedModel> reduced;
    if (manifest.contains("reduced")) {
      PodBasis basis;
      basis.Phi = take_array(arrays, "Phi");
      const Matrix& ev = take_array(arrays, "eigenvalues");
      if (ev.cols() != 1) throw FormatError("archive: eigenvalues must be a column");
      basis.eigenvalues = ev.col(0);
      basis.energy_fraction = manifest["reduced"].at("energy_fraction").get<double>();
      if (manifest["reduced"].at("rho").get<Index>() != basis.rho()) {
        throw FormatError("archive: manifest rho disagrees with Phi");
      }
      std::optional<Matrix> b_red;
      if (arrays.count("Bred")) b_red = arrays.at("Bred");
      reduced.emplace(std::move(basis), take_array(arrays, "Ared"), std::move(b_red),
                      take_array(arrays, "Cred"), spec, model.dt());
    }
    return {std::move(model), std::move(reduced)};
  } catch (const json::exception& e) {
    throw FormatError(std::string("archive: bad manifest: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("archive: inconsistent contents: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const KoopmanModel& model, const ReducedModel* reduced) {
  const std::string bytes = encode_model(model, reduced);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing '" + path.string() + "'");
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open model archive '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_model(ss.str());
}

} // namespace koopid
